//! The twelve acceptance criteria, runnable from the CLI (`verify`) and
//! from the `acceptance` test target.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaycast_conic::{sdp_feasibility, FeasibilityOutcome, LinExpr, ProgramBuilder, SdpConstraint, SolveStatus, SolverOptions};
use relaycast_core::cccp::{self, CccpOptions};
use relaycast_core::linksim::{self, Detector, TransmissionBatch};
use relaycast_core::model::Rank;
use relaycast_core::scenario::ChannelRealization;
use relaycast_core::sdr::{self, SdrOptions, SdrVerdict};
use relaycast_core::units::{dbm_to_watt, linear_to_db};
use relaycast_core::{BeamformerSolution, Normalization, PowerBudget, ProblemData, Scenario};
use relaycast_linalg::{hermitian_eigenvalues, Complex64, ComplexMatrix, HermitianMatrix};

use crate::config::{ExperimentConfig, Method, Profile, SeedRange, Seeds, SweepAxis, SweepConfig};
use crate::runner::CellOutcome;
use crate::sweep::sweep;

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} [{}] {}: {} ({:.1} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds
        )
    }
}

/// Instance counts. [`Scale::full`] holds the counts of the acceptance
/// criteria; [`Scale::quick`] is a fast smoke version of the same checks.
#[derive(Clone, Debug)]
pub struct Scale {
    pub snr_instances: usize,
    pub snr_pairs: u64,
    pub whiteness_settings: usize,
    pub whiteness_pairs: u64,
    pub ml_instances: usize,
    pub ml_pairs: u64,
    pub stationarity_instances: usize,
    pub grid_instances: usize,
    pub grid_points: usize,
    pub equivalence_instances: usize,
    pub equivalence_probes: usize,
    pub desk_seeds: u64,
    pub desk_destinations: Vec<usize>,
    pub rank_seeds: u64,
    pub rank_destinations: Vec<usize>,
    pub conic_problems: usize,
    pub min_logged_iterations: usize,
}

impl Scale {
    pub fn full() -> Self {
        Self {
            snr_instances: 20,
            snr_pairs: 1_000_000,
            whiteness_settings: 10,
            whiteness_pairs: 1_000_000,
            ml_instances: 10,
            ml_pairs: 10_000,
            stationarity_instances: 20,
            grid_instances: 10,
            grid_points: 9,
            equivalence_instances: 10,
            equivalence_probes: 100,
            desk_seeds: 20,
            desk_destinations: vec![10, 25, 50],
            rank_seeds: 20,
            rank_destinations: vec![10, 40, 70],
            conic_problems: 50,
            min_logged_iterations: 1000,
        }
    }

    pub fn quick() -> Self {
        Self {
            snr_instances: 2,
            snr_pairs: 200_000,
            whiteness_settings: 2,
            whiteness_pairs: 200_000,
            ml_instances: 2,
            ml_pairs: 2_000,
            stationarity_instances: 2,
            grid_instances: 2,
            grid_points: 7,
            equivalence_instances: 2,
            equivalence_probes: 30,
            desk_seeds: 3,
            desk_destinations: vec![10],
            rank_seeds: 3,
            rank_destinations: vec![10, 20, 40],
            conic_problems: 10,
            min_logged_iterations: 50,
        }
    }
}

fn reference_instance(r: usize, m: usize, seed: u64, total_dbm: f64) -> (ChannelRealization, ProblemData, PowerBudget) {
    let raw = Scenario::reference(r, m).generate(seed).expect("reference geometry is valid");
    let budget = PowerBudget::from_total(dbm_to_watt(total_dbm));
    let norm = Normalization::for_instance(&raw, &budget);
    let ch = norm.channels(&raw);
    let data = ProblemData::build(&ch).expect("generated channels are valid");
    (ch, data, norm.budget(&budget))
}

fn timed(id: u8, title: &'static str, f: impl FnOnce() -> (bool, String)) -> CriterionResult {
    let clock = Instant::now();
    let (passed, detail) = f();
    CriterionResult {
        id,
        title,
        passed,
        detail,
        seconds: clock.elapsed().as_secs_f64(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// 1. Closed-form SNR against link simulation, R = 10, M = 10.
pub fn model_vs_simulation(scale: &Scale) -> CriterionResult {
    timed(1, "model-vs-simulation SNR", || {
        let mut worst: f64 = 0.0;
        let mut slowest: f64 = 0.0;
        for seed in 0..scale.snr_instances as u64 {
            let clock = Instant::now();
            let (ch, data, budget) = reference_instance(10, 10, 1000 + seed, 30.0);
            let sol = cccp::run(&data, &budget, &CccpOptions::new(Rank::Two, seed))
                .expect("reference instance solves")
                .best()
                .solution
                .clone();
            let stats = linksim::measure(&sol, &ch, TransmissionBatch::new(scale.snr_pairs, seed)).expect("simulation runs");
            for (m, d) in stats.destinations.iter().enumerate() {
                let model = linear_to_db(data.snr(&sol.w, sol.a, m).expect("positive a"));
                for s in d.snr {
                    worst = worst.max((linear_to_db(s) - model).abs());
                }
            }
            slowest = slowest.max(clock.elapsed().as_secs_f64());
        }
        (
            worst <= 0.1 && slowest <= 120.0,
            format!(
                "{} instances, {} pairs: worst gap {worst:.4} dB (limit 0.1), slowest instance {slowest:.1} s (limit 120)",
                scale.snr_instances, scale.snr_pairs
            ),
        )
    })
}

/// Random weights scaled inside the budget.
fn random_weights(data: &ProblemData, budget: &PowerBudget, rng: &mut ChaCha8Rng) -> BeamformerSolution {
    let a = 4.0 / budget.source_cap().expect("finite source budget") * rng.random_range(1.0..4.0);
    let mut w: Vec<Complex64> = (0..data.weight_dim())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let beta = data.max_weight_scale(&w, a, budget, 0.9).expect("room in the budget");
    w.iter_mut().for_each(|c| *c *= beta);
    BeamformerSolution { w, a, t: 1.0 }
}

/// 2. Empirical slot-noise covariance is diagonal with the model's entries.
pub fn noise_whiteness(scale: &Scale) -> CriterionResult {
    timed(2, "noise whiteness", || {
        let mut off_fail = 0;
        let mut worst_diag: f64 = 0.0;
        let mut worst_z: f64 = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 0..scale.whiteness_settings as u64 {
            let (ch, data, budget) = reference_instance(10, 4, 2000 + k, 30.0);
            let sol = random_weights(&data, &budget, &mut rng);
            let stats = linksim::measure(&sol, &ch, TransmissionBatch::new(scale.whiteness_pairs, k)).expect("simulation runs");
            for (m, d) in stats.destinations.iter().enumerate() {
                let s34 = data.sigma34_sq(m, &sol.w);
                let diag = [ch.sigma_nu_sq, ch.sigma_nu_sq, s34, s34];
                for i in 0..4 {
                    worst_diag = worst_diag.max((d.noise_cov[i][i].value.re / diag[i] - 1.0).abs());
                    for j in 0..4 {
                        if i == j {
                            continue;
                        }
                        let e = &d.noise_cov[i][j];
                        let z = (e.value.re / e.std_err_re).abs().max((e.value.im / e.std_err_im).abs());
                        worst_z = worst_z.max(z);
                        if z > 5.0 {
                            off_fail += 1;
                        }
                    }
                }
            }
        }
        (
            off_fail == 0 && worst_diag <= 0.01,
            format!(
                "{} weight settings: {off_fail} off-diagonal entries beyond 5 SE (largest {worst_z:.2} SE), worst diagonal error {:.3}% (limit 1%)",
                scale.whiteness_settings,
                100.0 * worst_diag
            ),
        )
    })
}

/// 3. Symbol-by-symbol decisions equal exhaustive joint ML on QPSK.
pub fn ml_reduction(scale: &Scale) -> CriterionResult {
    timed(3, "ML reduction", || {
        let mut mismatches = 0u64;
        let mut decisions = 0u64;
        let mut errors = 0u64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..scale.ml_instances as u64 {
            let (ch, data, budget) = reference_instance(10, 3, 3000 + k, 30.0);
            let sol = random_weights(&data, &budget, &mut rng);
            // Noise raised so that the weakest destination sits near 3 dB.
            let snr = data.min_snr(&sol.w, sol.a).expect("positive a").0;
            let mut batch = TransmissionBatch::new(scale.ml_pairs, k);
            batch.noise_scale = (snr / 2.0).sqrt().max(1.0);
            let dets: Vec<Detector> = (0..data.destination_count())
                .map(|m| Detector::new(&ch, &sol, m).expect("nonzero equivalent channel"))
                .collect();
            for rec in linksim::transmit(&sol, &ch, batch).expect("dimensions agree") {
                for (m, det) in dets.iter().enumerate() {
                    let (_, dec) = det.detect(&rec.y[m], batch.constellation);
                    if dec != det.joint_ml(&rec.y[m], batch.constellation) {
                        mismatches += 1;
                    }
                    decisions += 1;
                    errors += u64::from(dec != rec.labels);
                }
            }
        }
        (
            mismatches == 0,
            format!("{decisions} noisy QPSK pairs ({errors} with symbol errors): {mismatches} mismatches"),
        )
    })
}

/// 4. Monotone objective and feasible iterates over all logged CCCP runs.
pub fn cccp_monotonicity(cells: &[CellOutcome], scale: &Scale) -> CriterionResult {
    timed(4, "CCCP monotonicity", || {
        let mut iterations = 0;
        let mut rises = 0;
        let mut infeasible = 0;
        for cell in cells {
            let a_max = cccp::default_a_max(&cell.instance.budget);
            for (run, _) in [&cell.cccp_r2, &cell.cccp_r1].into_iter().flatten() {
                for rep in &run.runs {
                    iterations += rep.iterations();
                    for pair in rep.trace.windows(2) {
                        if pair[1].t > pair[0].t + 1e-9 {
                            rises += 1;
                        }
                    }
                    for e in &rep.trace {
                        if e.power_slack.iter().any(|(_, s)| *s < 0.0) || e.a > a_max {
                            infeasible += 1;
                        }
                    }
                }
            }
        }
        (
            rises == 0 && infeasible == 0 && iterations >= scale.min_logged_iterations,
            format!(
                "{iterations} logged iterations (need {}): {rises} increases of t, {infeasible} infeasible iterates",
                scale.min_logged_iterations
            ),
        )
    })
}

/// Settings under which CCCP runs to a fixed point rather than stopping on
/// the progress threshold.
pub fn fixed_point_options(seed: u64) -> CccpOptions {
    let mut o = CccpOptions::new(Rank::Two, seed);
    o.epsilon = 1e-15;
    o.step_tol = Some(1e-7);
    o.max_iter = 500;
    o.solver = o.solver.with_tol(1e-10);
    o
}

/// 5. The terminal state is a fixed point of the subproblem map.
pub fn cccp_stationarity(scale: &Scale) -> CriterionResult {
    timed(5, "CCCP stationarity", || {
        let mut worst: f64 = 0.0;
        let mut failures = 0;
        let mut iters = Vec::new();
        for seed in 0..scale.stationarity_instances as u64 {
            let (_, data, budget) = reference_instance(4, 4, 5000 + seed, 30.0);
            let opts = fixed_point_options(seed);
            let run = cccp::run(&data, &budget, &opts).expect("reference instance solves");
            let rep = run.best();
            iters.push(rep.iterations() as f64);
            match cccp::fixed_point_residual(&rep.final_state(), &data, &budget, &opts) {
                Ok(r) => {
                    worst = worst.max(r);
                    if r > 1e-5 {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
        (
            failures == 0,
            format!(
                "{} instances (R = 4, M = 4): worst relative step {worst:.2e} (limit 1e-5), {failures} above the limit, median {} iterations",
                scale.stationarity_instances,
                median(iters)
            ),
        )
    })
}

/// The reference scenario with every coefficient replaced by a real
/// Gaussian of the same power.
pub fn real_instance(r: usize, m: usize, seed: u64, total_dbm: f64) -> (ProblemData, PowerBudget) {
    let raw = Scenario::reference(r, m).generate(seed).expect("reference geometry is valid");
    let real = |c: &Complex64| Complex64::new(c.re * std::f64::consts::SQRT_2, 0.0);
    let ch = ChannelRealization {
        f: raw.f.iter().map(real).collect(),
        g: raw.g.iter().map(|row| row.iter().map(real).collect()).collect(),
        d: raw.d.iter().map(real).collect(),
        ..raw
    };
    let budget = PowerBudget::from_total(dbm_to_watt(total_dbm));
    let norm = Normalization::for_instance(&ch, &budget);
    (
        ProblemData::build(&norm.channels(&ch)).expect("valid channels"),
        norm.budget(&budget),
    )
}

fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Best min SNR over real rank-two weights with `R = 2`: both halves on the
/// unit sphere, a split angle between them, and `a` on a log scale; each
/// point is scaled up to the budget. Searched on a grid of `points` per
/// axis with three zooms around the incumbent.
pub fn real_grid_optimum(data: &ProblemData, budget: &PowerBudget, a_max: f64, points: usize) -> f64 {
    assert_eq!(data.relay_count(), 2);
    let la_lo = (2.0 / budget.source_cap().expect("finite source budget")).ln();
    let la_hi = a_max.ln();
    let eval = |x: &[f64]| -> f64 {
        let a = x[5].clamp(la_lo + 1e-9, la_hi).exp();
        let (c, s) = (x[4].cos(), x[4].sin());
        let u1 = unit_vector(x[0], x[1]);
        let u2 = unit_vector(x[2], x[3]);
        let w: Vec<Complex64> = u1
            .iter()
            .map(|v| Complex64::new(v * c, 0.0))
            .chain(u2.iter().map(|v| Complex64::new(v * s, 0.0)))
            .collect();
        let Some(beta) = data.max_weight_scale(&w, a, budget, 1.0) else {
            return 0.0;
        };
        let w: Vec<Complex64> = w.iter().map(|v| v * (beta * (1.0 - 1e-12))).collect();
        data.min_snr(&w, a).map_or(0.0, |(s, _)| s)
    };
    let mut bounds = vec![(0.0, PI), (0.0, PI), (0.0, PI), (0.0, PI), (0.0, FRAC_PI_2), (la_lo, la_hi)];
    let mut best = (f64::NEG_INFINITY, vec![0.0; 6]);
    for _ in 0..4 {
        let total = points.pow(6);
        let mut x = [0.0; 6];
        for idx in 0..total {
            let mut rem = idx;
            for (k, &(lo, hi)) in bounds.iter().enumerate() {
                x[k] = lo + (hi - lo) * (rem % points) as f64 / (points - 1) as f64;
                rem /= points;
            }
            let v = eval(&x);
            if v > best.0 {
                best = (v, x.to_vec());
            }
        }
        bounds = bounds
            .iter()
            .zip(&best.1)
            .map(|(&(lo, hi), &c)| {
                let h = 1.5 * (hi - lo) / (points - 1) as f64;
                (c - h, c + h)
            })
            .collect();
    }
    best.0
}

/// 6. CCCP and the relaxation bound against an exhaustive grid at R = 2,
/// M = 2 with real channels.
pub fn brute_force_optimality(scale: &Scale) -> CriterionResult {
    timed(6, "brute-force optimality", || {
        let mut worst_cccp = f64::INFINITY;
        let mut worst_bound = f64::INFINITY;
        let mut fails = 0;
        for seed in 0..scale.grid_instances as u64 {
            let (data, budget) = real_instance(2, 2, 6000 + seed, 30.0);
            let mut opts = CccpOptions::new(Rank::Two, seed);
            opts.n_starts = 10;
            let grid = real_grid_optimum(&data, &budget, opts.a_max(&budget), scale.grid_points);
            let got = 1.0 / cccp::run(&data, &budget, &opts).expect("instance solves").best().solution.t;
            let sdr_opts = SdrOptions::new(seed);
            let bound = sdr::search(&data, &budget, &sdr_opts).expect("relaxation solves").bound();
            let rc = got / grid;
            let rb = bound * (1.0 + sdr_opts.epsilon) / grid;
            worst_cccp = worst_cccp.min(rc);
            worst_bound = worst_bound.min(rb);
            if rc < 0.99 || rb < 1.0 {
                fails += 1;
            }
        }
        (
            fails == 0,
            format!(
                "{} instances: worst CCCP/grid {worst_cccp:.4} (need 0.99), worst bound·(1+ε)/grid {worst_bound:.4} (need 1), {fails} failing",
                scale.grid_instances
            ),
        )
    })
}

/// 7. One- and two-matrix relaxations give the same verdicts.
pub fn relaxation_equivalence(scale: &Scale) -> CriterionResult {
    timed(7, "relaxation equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut agree = 0;
        let mut disagree = 0;
        let mut skipped = 0;
        for k in 0..scale.equivalence_instances {
            let r = 2 + k % 3;
            let (_, data, budget) = reference_instance(r, 3, 7000 + k as u64, 30.0);
            let opts = SdrOptions::new(0);
            let mut c = CccpOptions::new(Rank::Two, 0);
            c.a_max = Some(opts.a_max(&budget));
            let base = cccp::initial_point(&data, &budget, &c, 0).expect("instance initializes").t;
            let grid = sdr::a_grid(&budget, opts.a_max(&budget), 200);
            for _ in 0..scale.equivalence_probes {
                let a = grid[rng.random_range(0..grid.len())];
                let t = base * 2f64.powf(rng.random_range(-8.0..1.0));
                let one = sdr::sdr_feasible(t, a, &data, &budget, &opts.solver).expect("valid probe");
                let two = sdr::sdr_feasible_two_block(t, a, &data, &budget, &opts.solver).expect("valid probe");
                match (one, two) {
                    (SdrVerdict::Indeterminate, _) | (_, SdrVerdict::Indeterminate) => skipped += 1,
                    (x, y) if x.is_feasible() == y.is_feasible() => agree += 1,
                    _ => disagree += 1,
                }
            }
        }
        (
            disagree == 0,
            format!("{agree} probes agree, {disagree} disagree, {skipped} indeterminate"),
        )
    })
}

/// 8. Bound and rank dominance on every desk instance.
pub fn bound_dominance(cells: &[CellOutcome]) -> CriterionResult {
    timed(8, "bound dominance", || {
        let mut violations = Vec::new();
        let mut checked = 0;
        for cell in cells {
            let Some((out, _)) = &cell.sdr else { continue };
            let eps = SdrOptions::new(0).epsilon;
            let polish = SdrOptions::new(0).polish_epsilon;
            let ub = out.bound();
            let r2 = cell.cccp_r2.as_ref().map(|(r, _)| 1.0 / r.best().solution.t);
            let r1 = cell.cccp_r1.as_ref().map(|(r, _)| 1.0 / r.best().solution.t);
            let tag = format!("M={} seed={}", cell.instance.destinations, cell.instance.seed);
            checked += 1;
            if let Some(r2) = r2 {
                if r2 > ub * (1.0 + eps) {
                    violations.push(format!("{tag}: R2-CCCP {:.4} dB above bound", linear_to_db(r2 / ub)));
                }
                // CCCP stops once the relative progress drops below its
                // epsilon, so its result is only defined to that precision.
                if let Some(r1) = r1 {
                    if r1 > r2 * (1.0 + CccpOptions::new(Rank::Two, 0).epsilon) {
                        violations.push(format!("{tag}: R1-CCCP {:.4} dB above R2-CCCP", linear_to_db(r1 / r2)));
                    }
                }
            }
            for (m, rec) in [(Method::R2Sdr2d, &cell.sdr_r2), (Method::R1Sdr2d, &cell.sdr_r1)] {
                if let Some(rec) = rec {
                    if rec.min_snr > ub * (1.0 + polish) {
                        violations.push(format!("{tag}: {m} above bound"));
                    }
                }
            }
        }
        let detail = if violations.is_empty() {
            format!("{checked} instances, no violations")
        } else {
            format!("{checked} instances, {} violations: {}", violations.len(), violations.join("; "))
        };
        (violations.is_empty() && checked > 0, detail)
    })
}

/// 9. Average numerical rank of the relaxed solution grows with M.
pub fn rank_trend(by_m: &[(usize, Vec<usize>)]) -> CriterionResult {
    timed(9, "rank trend", || {
        let avgs: Vec<(usize, f64)> = by_m
            .iter()
            .map(|(m, r)| (*m, r.iter().sum::<usize>() as f64 / r.len().max(1) as f64))
            .collect();
        let ok = avgs.windows(2).all(|w| w[1].1 >= w[0].1) && by_m.iter().all(|(_, r)| !r.is_empty());
        let text: Vec<String> = avgs
            .iter()
            .zip(by_m)
            .map(|((m, a), (_, r))| format!("M={m}: {a:.2} over {} seeds", r.len()))
            .collect();
        (ok, format!("average rank {}", text.join(", ")))
    })
}

/// 10. Gap between three CCCP iterations and the bound.
pub fn three_iteration_gap(cells: &[CellOutcome], destinations: &[usize]) -> CriterionResult {
    timed(10, "three-iteration gap", || {
        let mut parts = Vec::new();
        let mut ok = true;
        for &m in destinations {
            let gaps: Vec<f64> = cells
                .iter()
                .filter(|c| c.instance.destinations == m)
                .filter_map(|c| {
                    let (run, _) = c.cccp_r2.as_ref()?;
                    let (out, _) = c.sdr.as_ref()?;
                    Some(out.bound_db() - linear_to_db(run.envelope_at(3).0))
                })
                .collect();
            let n = gaps.len();
            let med = median(gaps);
            ok &= n > 0 && med <= 1.5;
            parts.push(format!("M={m}: median {med:.3} dB over {n} seeds"));
        }
        (ok, format!("{} (limit 1.5 dB)", parts.join(", ")))
    })
}

/// 11. CCCP is faster than SDR2D on every instance.
pub fn runtime_ordering(cells: &[CellOutcome]) -> CriterionResult {
    timed(11, "runtime ordering", || {
        let mut slower = Vec::new();
        let mut ratios = Vec::new();
        for cell in cells {
            let cccp: Vec<(Method, f64)> = [Method::R2Cccp, Method::R1Cccp]
                .into_iter()
                .filter_map(|m| cell.record(m).map(|r| (m, r.runtime_s)))
                .collect();
            let sdr: Vec<(Method, f64)> = [Method::R2Sdr2d, Method::R1Sdr2d]
                .into_iter()
                .filter_map(|m| cell.record(m).map(|r| (m, r.runtime_s)))
                .collect();
            for &(mc, tc) in &cccp {
                for &(ms, ts) in &sdr {
                    ratios.push(ts / tc);
                    if tc >= ts {
                        slower.push(format!(
                            "M={} seed={}: {mc} {tc:.2} s vs {ms} {ts:.2} s",
                            cell.instance.destinations, cell.instance.seed
                        ));
                    }
                }
            }
        }
        let n = ratios.len();
        let med = median(ratios.clone());
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let mut detail = format!("{n} method pairs: SDR2D/CCCP time ratio median {med:.2}, min {min:.2}");
        if !slower.is_empty() {
            detail.push_str(&format!("; CCCP not faster in: {}", slower.join("; ")));
        }
        (slower.is_empty() && n > 0, detail)
    })
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    let a = ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    HermitianMatrix::symmetrize(a.add(&a.adjoint()))
}

/// A problem family member: the program's optimum (`Some`) or an
/// infeasibility construction (`None`).
fn conic_case(kind: usize, feasible: bool, rng: &mut ChaCha8Rng) -> Result<Option<(f64, f64)>, bool> {
    let opts = SolverOptions::default();
    let n = rng.random_range(2..7usize);
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut pb = ProgramBuilder::new();
    // Returns Ok(Some((value, optimum))) for optimization cases, Err(certified)
    // for infeasible ones.
    let solve = |pb: ProgramBuilder, optimum: f64| -> Result<Option<(f64, f64)>, bool> {
        let sol = pb.build().expect("well-formed").solve(&opts).expect("solver runs");
        if feasible {
            Ok((sol.status == SolveStatus::Optimal).then_some((sol.primal_objective, optimum)))
        } else {
            Err(sol.status == SolveStatus::PrimalInfeasible)
        }
    };
    match kind {
        // LP over a box.
        0 => {
            let x = pb.add_vars(n);
            let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.0)).collect();
            let hi: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            pb.minimize(LinExpr::weighted(&x, &c));
            for i in 0..n {
                pb.add_nonneg(x[i] - lo[i]);
                pb.add_nonneg(LinExpr::constant(hi[i]) - x[i]);
            }
            if !feasible {
                let total: f64 = hi.iter().sum();
                pb.add_nonneg(LinExpr::weighted(&x, &vec![1.0; n]) - (total + rng.random_range(0.1..1.0)));
            }
            let opt = (0..n).map(|i| if c[i] > 0.0 { c[i] * lo[i] } else { c[i] * hi[i] }).sum();
            solve(pb, opt)
        }
        // LP over the simplex.
        1 => {
            let x = pb.add_vars(n);
            pb.minimize(LinExpr::weighted(&x, &c));
            pb.add_eq(LinExpr::weighted(&x, &vec![1.0; n]) - 1.0);
            for &v in &x {
                pb.add_nonneg(v);
            }
            if !feasible {
                pb.add_le(x[0], -rng.random_range(0.1..1.0));
            }
            solve(pb, c.iter().copied().fold(f64::INFINITY, f64::min))
        }
        // Linear objective over a ball.
        2 => {
            let x = pb.add_vars(n);
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = rng.random_range(0.5..2.0);
            pb.minimize(LinExpr::weighted(&x, &c));
            let mut rows = vec![LinExpr::constant(r)];
            rows.extend((0..n).map(|i| x[i] - x0[i]));
            pb.add_soc(rows);
            let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cx0: f64 = c.iter().zip(&x0).map(|(a, b)| a * b).sum();
            if !feasible {
                pb.add_nonneg(LinExpr::weighted(&x, &c) - (cx0 + r * cn + rng.random_range(0.1..1.0)));
            }
            solve(pb, cx0 - r * cn)
        }
        // Weighted sum over a rotated cone: min αu + βv with uv ≥ ‖z‖².
        3 => {
            let u = pb.add_var();
            let v = pb.add_var();
            let (al, be) = (rng.random_range(0.2..3.0), rng.random_range(0.2..3.0));
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            pb.minimize(LinExpr::from(u) * al + LinExpr::from(v) * be);
            pb.add_rotated_soc(u.into(), v.into(), z.iter().map(|&c| LinExpr::constant(c)).collect());
            if !feasible {
                pb.add_le(u + v, 2.0 * zn - rng.random_range(0.05..0.5) * zn);
            }
            solve(pb, 2.0 * (al * be).sqrt() * zn)
        }
        // Hermitian SDP: min tr(CX) with tr X = 1.
        _ => {
            let cm = random_hermitian(rng, n);
            let lmin = *hermitian_eigenvalues(&cm).expect("eigenvalues").last().expect("nonempty");
            if feasible {
                let x = pb.add_hermitian_psd(n);
                pb.minimize(x.trace_with(&cm));
                pb.add_eq(x.trace() - 1.0);
                solve(pb, lmin)
            } else {
                let cons = vec![
                    SdpConstraint::equal(vec![(0, HermitianMatrix::identity(n))], -1.0),
                    SdpConstraint::less_eq(vec![(0, cm)], -(lmin - rng.random_range(0.05..0.5))),
                ];
                let rep = sdp_feasibility(&[n], &cons, &opts).expect("solver runs");
                Err(matches!(rep.outcome, FeasibilityOutcome::Infeasible))
            }
        }
    }
}

/// 12. Randomized conic problems with known optima and infeasible twins.
pub fn conic_regression(scale: &Scale) -> CriterionResult {
    timed(12, "conic solver regression", || {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut worst: f64 = 0.0;
        let mut solved = 0;
        let mut certified = 0;
        for i in 0..scale.conic_problems {
            if let Ok(Some((got, want))) = conic_case(i % 5, true, &mut rng) {
                let err = (got - want).abs() / want.abs().max(1.0);
                worst = worst.max(err);
                if err <= 1e-6 {
                    solved += 1;
                }
            }
            if let Err(true) = conic_case(i % 5, false, &mut rng) {
                certified += 1;
            }
        }
        let n = scale.conic_problems;
        (
            solved == n && certified + 1 >= n,
            format!("{solved}/{n} optima within 1e-6 (worst {worst:.1e}), {certified}/{n} infeasible problems certified"),
        )
    })
}

/// The desk study: R = 10, all methods, 30 dBm, ten CCCP starts.
pub fn desk_config(scale: &Scale) -> ExperimentConfig {
    let mut c = ExperimentConfig::profile(Profile::Desk);
    c.seeds = Seeds::Range(SeedRange {
        start: 0,
        count: scale.desk_seeds,
    });
    c.sweep = SweepConfig {
        axis: SweepAxis::Destinations,
        values: scale.desk_destinations.iter().map(|&m| m as f64).collect(),
    };
    c
}

/// Ranks of the relaxed solution at each M of the rank study, reusing desk
/// cells where the destination count matches.
fn rank_study(scale: &Scale, desk: &[CellOutcome], jobs: Option<usize>) -> Vec<(usize, Vec<usize>)> {
    let ranks_of = |cells: &[CellOutcome], m: usize| -> Vec<usize> {
        cells
            .iter()
            .filter(|c| c.instance.destinations == m && c.instance.seed < scale.rank_seeds)
            .filter_map(|c| c.sdr.as_ref().map(|(o, _)| o.rank))
            .collect()
    };
    scale
        .rank_destinations
        .iter()
        .map(|&m| {
            let have = ranks_of(desk, m);
            if have.len() as u64 >= scale.rank_seeds {
                return (m, have);
            }
            let mut c = desk_config(scale);
            c.methods = vec![Method::Sdr2dUb];
            c.seeds = Seeds::Range(SeedRange {
                start: 0,
                count: scale.rank_seeds,
            });
            c.sweep.values = vec![m as f64];
            let out = sweep(&c, jobs).expect("rank study config is valid");
            (m, ranks_of(&out.cells, m))
        })
        .collect()
}

/// Runs all criteria; `report` sees each result as soon as it is known.
pub fn run_all(scale: &Scale, jobs: Option<usize>, mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut results = Vec::new();
    let mut push = |r: CriterionResult, results: &mut Vec<CriterionResult>| {
        report(&r);
        results.push(r);
    };
    push(conic_regression(scale), &mut results);
    push(relaxation_equivalence(scale), &mut results);
    push(ml_reduction(scale), &mut results);
    push(noise_whiteness(scale), &mut results);
    push(model_vs_simulation(scale), &mut results);
    push(cccp_stationarity(scale), &mut results);
    push(brute_force_optimality(scale), &mut results);

    let desk = sweep(&desk_config(scale), jobs).expect("desk config is valid");
    push(cccp_monotonicity(&desk.cells, scale), &mut results);
    push(bound_dominance(&desk.cells), &mut results);
    push(three_iteration_gap(&desk.cells, &scale.desk_destinations), &mut results);
    push(runtime_ordering(&desk.cells), &mut results);
    let ranks = rank_study(scale, &desk.cells, jobs);
    push(rank_trend(&ranks), &mut results);

    results.sort_by_key(|r| r.id);
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(Vec::new()).is_nan());
    }

    #[test]
    fn conic_cases_solve_on_a_few_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in 0..5 {
            let r = conic_case(kind, true, &mut rng).unwrap().unwrap();
            assert!((r.0 - r.1).abs() <= 1e-6 * r.1.abs().max(1.0), "kind {kind}: {r:?}");
            assert_eq!(conic_case(kind, false, &mut rng), Err(true), "kind {kind}");
        }
    }

    #[test]
    fn real_instances_have_real_channels() {
        let (data, _) = real_instance(2, 2, 1, 30.0);
        assert!(data.q_vec1(0).iter().all(|c| c.im == 0.0));
    }
}
