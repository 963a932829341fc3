use proptest::prelude::*;
use relaycast_core::linksim::{equivalent_gains, sigma34_sq, Detector};
use relaycast_core::{BeamformerSolution, ChannelRealization, Normalization, PowerBudget, ProblemData};
use relaycast_linalg::{Complex64, HermitianMatrix};

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), n)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

fn instance() -> impl Strategy<Value = (ChannelRealization, Vec<Complex64>, f64)> {
    (1usize..5, 1usize..4).prop_flat_map(|(r, m)| {
        (
            complex_vec(r),
            prop::collection::vec(complex_vec(r), m),
            complex_vec(m),
            0.1..3.0f64,
            0.1..3.0f64,
            complex_vec(2 * (r + 1)),
            0.2..20.0f64,
        )
            .prop_map(|(f, g, d, nu, eta, w, a)| (ChannelRealization::new(f, g, d, nu, eta).unwrap(), w, a))
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quadratic_forms_match_full_matrices((ch, w, _a) in instance()) {
        let data = ProblemData::build(&ch).unwrap();
        for m in 0..data.destination_count() {
            prop_assert!(close(data.quad_q(m, &w), data.q_full(m).quad_form(&w), 1e-12));
            prop_assert!(close(data.quad_r(m, &w), data.r_full(m).quad_form(&w), 1e-12));
            let p = data.quad_q(m, &w) + data.d_sq(m) / data.sigma_nu_sq() * data.quad_r(m, &w);
            prop_assert!(close(p, data.p_full(m).quad_form(&w), 1e-12));
        }
    }

    #[test]
    fn equivalent_gains_carry_the_quadratic_form((ch, w, a) in instance()) {
        let data = ProblemData::build(&ch).unwrap();
        let sol = BeamformerSolution { w: w.clone(), a, t: 1.0 };
        for m in 0..data.destination_count() {
            let (h1, h2) = equivalent_gains(&ch, &sol, m);
            prop_assert!(close(h1.norm_sqr() + h2.norm_sqr(), data.quad_q(m, &w) / a, 1e-12));
            prop_assert!(close(sigma34_sq(&ch, &sol, m), data.sigma34_sq(m, &w), 1e-12));
        }
    }

    #[test]
    fn scaled_channel_is_orthogonal((ch, w, a) in instance()) {
        let data = ProblemData::build(&ch).unwrap();
        let sol = BeamformerSolution { w, a, t: 1.0 };
        for m in 0..data.destination_count() {
            let Ok(det) = Detector::new(&ch, &sol, m) else { continue };
            let mut gram = [[Complex64::new(0.0, 0.0); 2]; 2];
            for i in 0..4 {
                for k in 0..2 {
                    for l in 0..2 {
                        gram[k][l] += (det.h[i][k] * det.gamma[i]).conj() * det.h[i][l] * det.gamma[i];
                    }
                }
            }
            let c2 = det.c * det.c;
            prop_assert!(close(gram[0][0].re, c2, 1e-12) && close(gram[1][1].re, c2, 1e-12));
            prop_assert!(gram[0][1].norm() <= 1e-12 * (1.0 + c2));
            // Post-detection SNR c²/σ₃₄² is the closed form.
            let snr = c2 / data.sigma34_sq(m, &sol.w);
            prop_assert!(close(snr, data.snr(&sol.w, a, m).unwrap(), 1e-12));
        }
    }

    #[test]
    fn phase_transform_gives_trace_form((ch, w, a) in instance()) {
        let data = ProblemData::build(&ch).unwrap();
        let n = data.block_dim();
        let x1 = HermitianMatrix::outer(&w[..n]).add(&HermitianMatrix::outer(&data.apply_phase(&w[n..])));
        for m in 0..data.destination_count() {
            prop_assert!(close(data.q_tilde1(m).trace_product(&x1), data.quad_q(m, &w), 1e-12));
            prop_assert!(close(data.r_tilde(m).trace_product(&x1), data.quad_r(m, &w), 1e-12));
        }
        for r in 0..data.relay_count() {
            let p = data.d_tilde(r).scaled(1.0 / a).add(&data.e_tilde(r)).trace_product(&x1);
            prop_assert!(close(p, data.relay_power(r, &w, a).unwrap(), 1e-12));
        }
        let ps = (2.0 + data.s_tilde().trace_product(&x1)) / a;
        prop_assert!(close(ps, data.source_power(&w, a).unwrap(), 1e-12));
        let back = data.undo_phase(&data.apply_phase(&w[n..]));
        for (x, y) in back.iter().zip(&w[n..]) {
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn snr_grows_with_weight_scale((ch, w, a) in instance(), lo in 0.0..1.0f64, gap in 0.0..2.0f64) {
        let data = ProblemData::build(&ch).unwrap();
        let scaled = |b: f64| -> Vec<Complex64> { w.iter().map(|c| c * b).collect() };
        for m in 0..data.destination_count() {
            let s_lo = data.snr(&scaled(lo), a, m).unwrap();
            let s_hi = data.snr(&scaled(lo + gap), a, m).unwrap();
            prop_assert!(s_hi >= s_lo * (1.0 - 1e-12));
        }
    }

    #[test]
    fn largest_weight_scale_is_tight((ch, w, a) in instance(), total in 1.0..100.0f64) {
        let data = ProblemData::build(&ch).unwrap();
        let budget = PowerBudget::from_total(total);
        let Some(beta) = data.max_weight_scale(&w, a, &budget, 1.0) else {
            prop_assert!(!data.feasible(&vec![Complex64::new(0.0, 0.0); w.len()], a, &budget).is_empty());
            return Ok(());
        };
        let at = |b: f64| -> Vec<Complex64> { w.iter().map(|c| c * b).collect() };
        prop_assert!(data.feasible(&at(beta * (1.0 - 1e-9)), a, &budget).is_empty());
        prop_assert!(!data.feasible(&at(beta * (1.0 + 1e-6)), a, &budget).is_empty());
    }

    #[test]
    fn normalization_preserves_snr_and_powers((ch, w, a) in instance(), total in 1e-3..10.0f64) {
        let budget = PowerBudget::from_total(total);
        let norm = Normalization::for_instance(&ch, &budget);
        let phys = ProblemData::build(&ch).unwrap();
        let scaled = ProblemData::build(&norm.channels(&ch)).unwrap();
        let sol = BeamformerSolution { w, a, t: 1.0 };
        let n_sol = norm.to_normalized(&sol);
        let back = norm.to_physical(&n_sol);
        prop_assert!(close(back.a, sol.a, 1e-12));
        for m in 0..phys.destination_count() {
            prop_assert!(close(phys.snr(&sol.w, sol.a, m).unwrap(), scaled.snr(&n_sol.w, n_sol.a, m).unwrap(), 1e-10));
        }
        let p0 = norm.power_unit;
        prop_assert!(close(phys.total_power(&sol.w, sol.a).unwrap() / p0, scaled.total_power(&n_sol.w, n_sol.a).unwrap(), 1e-10));
        for r in 0..phys.relay_count() {
            prop_assert!(close(phys.relay_power(r, &sol.w, sol.a).unwrap() / p0, scaled.relay_power(r, &n_sol.w, n_sol.a).unwrap(), 1e-10));
        }
    }
}
