use relaycast_core::cccp::{self, CccpOptions};
use relaycast_core::linksim::{self, Constellation, Detector, TransmissionBatch};
use relaycast_core::model::Rank;
use relaycast_core::units::{dbm_to_watt, linear_to_db};
use relaycast_core::{BeamformerSolution, ChannelRealization, Normalization, PowerBudget, ProblemData, Scenario};

fn solved(r: usize, m: usize, seed: u64) -> (ChannelRealization, ProblemData, BeamformerSolution) {
    let raw = Scenario::reference(r, m).generate(seed).unwrap();
    let budget = PowerBudget::from_total(dbm_to_watt(30.0));
    let norm = Normalization::for_instance(&raw, &budget);
    let ch = norm.channels(&raw);
    let data = ProblemData::build(&ch).unwrap();
    let sol = cccp::run(&data, &norm.budget(&budget), &CccpOptions::new(Rank::Two, seed))
        .unwrap()
        .best()
        .solution
        .clone();
    (ch, data, sol)
}

fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[test]
fn powers_and_snr_match_the_model() {
    let (ch, data, sol) = solved(4, 3, 7);
    let stats = linksim::measure(&sol, &ch, TransmissionBatch::new(1_000_000, 1)).unwrap();
    for r in 0..data.relay_count() {
        let p = data.relay_power(r, &sol.w, sol.a).unwrap();
        for est in [&stats.relay_power_slot3[r], &stats.relay_power_slot4[r]] {
            assert!((est.mean / p - 1.0).abs() < 0.01, "relay {r}: {} vs {p}", est.mean);
        }
    }
    let ps = data.source_power(&sol.w, sol.a).unwrap();
    assert!((stats.source_power / ps - 1.0).abs() < 0.01);
    for (m, d) in stats.destinations.iter().enumerate() {
        let model = linear_to_db(data.snr(&sol.w, sol.a, m).unwrap());
        for k in 0..2 {
            let sim = linear_to_db(d.snr[k]);
            assert!((sim - model).abs() < 0.1, "destination {m}, symbol {k}: {sim} dB vs {model} dB");
        }
    }
}

#[test]
fn slot_noise_is_white_and_estimates_are_decoupled() {
    let (ch, data, sol) = solved(3, 2, 4);
    let stats = linksim::measure(&sol, &ch, TransmissionBatch::new(400_000, 2)).unwrap();
    for (m, d) in stats.destinations.iter().enumerate() {
        let s34 = data.sigma34_sq(m, &sol.w);
        let diag = [ch.sigma_nu_sq, ch.sigma_nu_sq, s34, s34];
        for i in 0..4 {
            for j in 0..4 {
                let e = &d.noise_cov[i][j];
                let want = if i == j { diag[i] } else { 0.0 };
                assert!((e.value.re - want).abs() <= 5.0 * e.std_err_re + 1e-12, "noise ({i},{j}) re");
                assert!((e.value.im).abs() <= 5.0 * e.std_err_im + 1e-12, "noise ({i},{j}) im");
            }
        }
        let inv = 1.0 / data.snr(&sol.w, sol.a, m).unwrap();
        let x = &d.error_cov[0][1];
        assert!(x.value.re.abs() <= 5.0 * x.std_err_re && x.value.im.abs() <= 5.0 * x.std_err_im);
        for k in 0..2 {
            assert!((d.error_cov[k][k].value.re / inv - 1.0).abs() < 0.02);
        }
    }
}

#[test]
fn symbolwise_detection_is_joint_ml() {
    let (ch, _, sol) = solved(3, 2, 9);
    for cons in [Constellation::Bpsk, Constellation::Qpsk, Constellation::Qam16] {
        let mut batch = TransmissionBatch::new(20_000, 5);
        batch.constellation = cons;
        batch.noise_scale = 30.0;
        let dets: Vec<Detector> = (0..2).map(|m| Detector::new(&ch, &sol, m).unwrap()).collect();
        let mut errors = 0;
        for rec in linksim::transmit(&sol, &ch, batch).unwrap() {
            for (m, det) in dets.iter().enumerate() {
                let (_, dec) = det.detect(&rec.y[m], cons);
                assert_eq!(dec, det.joint_ml(&rec.y[m], cons));
                errors += usize::from(dec != rec.labels);
            }
        }
        assert!(errors > 0, "noise too weak to exercise decisions for {cons:?}");
    }
}

#[test]
fn error_rates_follow_the_gaussian_tail() {
    let (ch, data, sol) = solved(3, 2, 12);
    for (cons, factor) in [(Constellation::Qpsk, 1.0), (Constellation::Bpsk, 2.0)] {
        let mut batch = TransmissionBatch::new(400_000, 3);
        batch.constellation = cons;
        // Scale the noise so the first destination sits near 7 dB.
        let snr0 = data.snr(&sol.w, sol.a, 0).unwrap();
        batch.noise_scale = (snr0 / 5.0).sqrt();
        let stats = linksim::measure(&sol, &ch, batch).unwrap();
        for m in 0..2 {
            let snr = data.snr(&sol.w, sol.a, m).unwrap() / batch.noise_scale.powi(2);
            let want = q_function((factor * snr).sqrt());
            let got = stats.bit_error_rate(m);
            let bits = 2.0 * batch.n_pairs as f64 * cons.bits_per_symbol() as f64;
            let sd = (want * (1.0 - want) / bits).sqrt();
            assert!((got - want).abs() <= 5.0 * sd + 0.02 * want, "{cons:?} m = {m}: {got} vs {want}");
        }
    }
}
