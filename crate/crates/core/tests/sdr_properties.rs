mod common;

use common::instance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaycast_core::cccp::{self, CccpOptions};
use relaycast_core::model::Rank;
use relaycast_core::sdr::{self, RandomizationMode, Recovery, SdrOptions, SdrVerdict};
use relaycast_core::{PowerBudget, ProblemData};
use relaycast_linalg::{Complex64, HermitianMatrix};

fn small_opts(seed: u64, grid: usize) -> SdrOptions {
    let mut o = SdrOptions::new(seed);
    o.grid_size = grid;
    o
}

fn cn(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn verdict(v: &SdrVerdict<HermitianMatrix>) -> Option<bool> {
    match v {
        SdrVerdict::Feasible(_) => Some(true),
        SdrVerdict::Infeasible => Some(false),
        SdrVerdict::Indeterminate => None,
    }
}

fn t_hint(data: &ProblemData, budget: &PowerBudget, opts: &SdrOptions) -> f64 {
    let mut c = CccpOptions::new(Rank::Two, opts.seed);
    c.a_max = Some(opts.a_max(budget));
    cccp::initial_point(data, budget, &c, 0).unwrap().t
}

#[test]
fn feasibility_is_monotone_in_t() {
    let (data, budget) = instance(3, 3, 2);
    let opts = SdrOptions::new(0);
    let out = sdr::search(&data, &budget, &small_opts(0, 16)).unwrap();
    for a in sdr::a_grid(&budget, opts.a_max(&budget), 5) {
        let ts: Vec<f64> = (0..12).map(|i| out.t_star * 2f64.powf(-3.0 + 0.6 * i as f64)).collect();
        let v: Vec<Option<bool>> = ts
            .iter()
            .map(|&t| verdict(&sdr::sdr_feasible(t, a, &data, &budget, &opts.solver).unwrap()))
            .collect();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                if v[i] == Some(true) {
                    assert_ne!(v[j], Some(false), "a = {a}: feasible at {} but not at {}", ts[i], ts[j]);
                }
            }
        }
    }
}

#[test]
fn optimum_is_bracketed() {
    for seed in 0..3 {
        let (data, budget) = instance(3, 3, 10 + seed);
        let opts = small_opts(seed, 20);
        let out = sdr::search(&data, &budget, &opts).unwrap();
        let at = |t: f64| verdict(&sdr::sdr_feasible(t, out.a_star, &data, &budget, &opts.solver).unwrap());
        assert_eq!(at(1.01 * out.t_star), Some(true));
        assert_eq!(at(0.99 * out.t_star), Some(false));
    }
}

#[test]
fn one_point_grid_is_a_bisection() {
    let (data, budget) = instance(3, 2, 5);
    let mut opts = small_opts(1, 1);
    opts.polish_epsilon = opts.epsilon;
    let out = sdr::search(&data, &budget, &opts).unwrap();
    let a = sdr::a_grid(&budget, opts.a_max(&budget), 1)[0];
    let (point, x) = sdr::bisect_t(a, &data, &budget, &opts, t_hint(&data, &budget, &opts), None).unwrap();
    assert_eq!(out.a_star, a);
    assert_eq!(Some(out.t_star), point.t_best);
    assert!(x.is_some());
    let again = sdr::bisect_t(a, &data, &budget, &opts, t_hint(&data, &budget, &opts), None).unwrap();
    assert_eq!(again.0.t_best, point.t_best);
}

#[test]
fn bisection_matches_dense_scan() {
    let (data, budget) = instance(2, 2, 7);
    let opts = SdrOptions::new(0);
    let a = sdr::a_grid(&budget, opts.a_max(&budget), 8)[3];
    let (point, _) = sdr::bisect_t(a, &data, &budget, &opts, t_hint(&data, &budget, &opts), None).unwrap();
    let t = point.t_best.unwrap();
    // Scan 400 points across [t/4, 4t] and take the smallest feasible one.
    let scan = (0..400)
        .map(|i| t / 4.0 * 16f64.powf(i as f64 / 399.0))
        .find(|&s| sdr::sdr_feasible(s, a, &data, &budget, &opts.solver).unwrap().is_feasible())
        .unwrap();
    assert!(t <= scan * 1.01 * (1.0 + 16f64.ln() / 399.0) && t >= scan / 1.01, "bisection {t} vs scan {scan}");
}

#[test]
fn finer_grid_never_loses() {
    let (data, budget) = instance(3, 3, 21);
    let mut coarse = small_opts(0, 200);
    coarse.refine_rounds = 0;
    coarse.polish_epsilon = coarse.epsilon;
    let mut fine = coarse.clone();
    fine.grid_size = 400;
    let t200 = sdr::search(&data, &budget, &coarse).unwrap().t_star;
    let t400 = sdr::search(&data, &budget, &fine).unwrap().t_star;
    assert!(t400 <= t200 * (1.0 + coarse.epsilon), "200: {t200}, 400: {t400}");
}

#[test]
fn decomposition_reproduces_trace_form() {
    let (data, _) = instance(4, 3, 3);
    let n = data.block_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let w1 = cn(&mut rng, n);
        let w2_hat = cn(&mut rng, n);
        let x1 = HermitianMatrix::outer(&w1).add(&HermitianMatrix::outer(&w2_hat));
        let a = rng.random_range(0.5..50.0);
        let w = sdr::decompose_rank_two(&x1, &data, 1e-6).unwrap();
        let (snr, _) = data.min_snr(&w, a).unwrap();
        let tr = sdr::trace_min_snr(&x1, a, &data);
        assert!((snr - tr).abs() <= 1e-9 * tr, "{snr} vs {tr}");

        let rank1 = sdr::decompose_rank_two(&HermitianMatrix::outer(&w1), &data, 1e-6).unwrap();
        assert!(rank1[n..].iter().all(|c| c.norm() == 0.0));
    }
}

#[test]
fn unitary_remixing_leaves_constraints_unchanged() {
    let (data, _) = instance(4, 3, 6);
    let n = data.block_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let w1 = cn(&mut rng, n);
        let w2_hat = cn(&mut rng, n);
        let (th, p1, p2): (f64, f64, f64) = (rng.random_range(0.0..6.3), rng.random_range(0.0..6.3), rng.random_range(0.0..6.3));
        let u = [
            [Complex64::from_polar(th.cos(), p1), Complex64::from_polar(-th.sin(), p2)],
            [Complex64::from_polar(th.sin(), -p2), Complex64::from_polar(th.cos(), -p1)],
        ];
        let v1: Vec<Complex64> = (0..n).map(|i| u[0][0] * w1[i] + u[1][0] * w2_hat[i]).collect();
        let v2: Vec<Complex64> = (0..n).map(|i| u[0][1] * w1[i] + u[1][1] * w2_hat[i]).collect();
        let stack = |a: &[Complex64], b: &[Complex64]| {
            let mut w = a.to_vec();
            w.extend(data.undo_phase(b));
            w
        };
        let (w, v) = (stack(&w1, &w2_hat), stack(&v1, &v2));
        let a = rng.random_range(0.5..50.0);
        for m in 0..data.destination_count() {
            let t = 0.3;
            let x = data.snr_constraint_value(&w, a, t, m).unwrap();
            let y = data.snr_constraint_value(&v, a, t, m).unwrap();
            assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
        let pw = data.total_power(&w, a).unwrap();
        assert!((pw - data.total_power(&v, a).unwrap()).abs() <= 1e-10 * pw);
        for r in 0..data.relay_count() {
            let p = data.relay_power(r, &w, a).unwrap();
            assert!((p - data.relay_power(r, &v, a).unwrap()).abs() <= 1e-10 * (1.0 + p));
        }
    }
}

#[test]
fn one_and_two_matrix_relaxations_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut compared = 0;
    for (r, seed) in [(2, 1), (3, 2), (4, 3), (4, 4)] {
        let (data, budget) = instance(r, 3, seed);
        let opts = SdrOptions::new(0);
        let base = t_hint(&data, &budget, &opts);
        let grid = sdr::a_grid(&budget, opts.a_max(&budget), 40);
        for _ in 0..25 {
            let a = grid[rng.random_range(0..grid.len())];
            let t = base * 2f64.powf(rng.random_range(-8.0..1.0));
            let one = verdict(&sdr::sdr_feasible(t, a, &data, &budget, &opts.solver).unwrap());
            let two = match sdr::sdr_feasible_two_block(t, a, &data, &budget, &opts.solver).unwrap() {
                SdrVerdict::Feasible(_) => Some(true),
                SdrVerdict::Infeasible => Some(false),
                SdrVerdict::Indeterminate => None,
            };
            if let (Some(x), Some(y)) = (one, two) {
                assert_eq!(x, y, "R = {r}, t = {t}, a = {a}");
                compared += 1;
            }
        }
    }
    assert!(compared >= 95, "only {compared} decisive probes");
}

#[test]
fn rank_one_scaling_is_monotone() {
    let (data, budget) = instance(4, 3, 13);
    let n = data.block_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = 4.0 / budget.source_cap().unwrap();
    for _ in 0..50 {
        let mut w = cn(&mut rng, n);
        w.resize(2 * n, Complex64::new(0.0, 0.0));
        let b_star = data.max_weight_scale(&w, a, &budget, 1.0).unwrap();
        let mut betas: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..b_star)).collect();
        betas.sort_by(f64::total_cmp);
        let mut last = 0.0;
        for b in betas {
            let wb: Vec<Complex64> = w.iter().map(|c| c * b).collect();
            assert!(data.feasible(&wb, a, &budget).is_empty());
            let s = data.min_snr(&wb, a).unwrap().0;
            assert!(s >= last);
            last = s;
        }
        let over: Vec<Complex64> = w.iter().map(|c| c * b_star * (1.0 + 1e-6)).collect();
        assert!(!data.feasible(&over, a, &budget).is_empty());
    }
}

#[test]
fn rank_two_randomization_tracks_decomposition() {
    let (data, budget) = instance(4, 4, 17);
    let opts = CccpOptions::new(Rank::Two, 3);
    let sol = cccp::run(&data, &budget, &opts).unwrap().best().solution.clone();
    let n = data.block_dim();
    let x1 = HermitianMatrix::outer(&sol.w[..n]).add(&HermitianMatrix::outer(&data.apply_phase(&sol.w[n..])));
    assert_eq!(sdr::numerical_rank(&x1, 1e-6).unwrap(), 2);
    let exact = data.min_snr(&sdr::decompose_rank_two(&x1, &data, 1e-6).unwrap(), sol.a).unwrap().0;
    let solver = SdrOptions::new(0).solver;
    for seed in 0..20 {
        let rec = sdr::randomize(&x1, sol.a, &data, &budget, 200, RandomizationMode::Rank2, seed, &solver).unwrap();
        assert_eq!(rec.method, Recovery::Randomized);
        assert!(data.feasible(&rec.solution.w, sol.a, &budget).is_empty());
        assert!(rec.min_snr >= 0.97 * exact, "seed {seed}: {} vs {exact}", rec.min_snr);
        assert!(rec.min_snr <= exact * (1.0 + 1e-6));
    }
}

#[test]
fn recovered_weights_respect_the_bound() {
    for seed in 0..3 {
        let (data, budget) = instance(4, 2, 50 + seed);
        let opts = small_opts(seed, 30);
        let out = sdr::search(&data, &budget, &opts).unwrap();
        let r2 = sdr::recover_rank_two(&out, &data, &budget, &opts).unwrap();
        let r1 = sdr::recover_rank_one(&out, &data, &budget, &opts).unwrap();
        for rec in [&r1, &r2] {
            assert!(data.feasible(&rec.solution.w, rec.solution.a, &budget).is_empty());
            assert!(rec.min_snr <= out.bound() * (1.0 + 1e-6));
        }
        if out.rank <= 2 {
            assert_eq!(r2.method, Recovery::Decomposition);
            assert!(r2.min_snr >= out.bound() * (1.0 - 1e-4), "rank {}: {} vs {}", out.rank, r2.min_snr, out.bound());
        }
        let c = cccp::run(&data, &budget, &CccpOptions::new(Rank::Two, seed)).unwrap();
        assert!(1.0 / c.best().solution.t <= out.bound() * (1.0 + opts.epsilon));
    }
}
