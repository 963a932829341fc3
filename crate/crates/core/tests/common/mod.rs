#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, TAU};

use relaycast_core::units::dbm_to_watt;
use relaycast_core::{Normalization, PowerBudget, ProblemData, Scenario};
use relaycast_linalg::Complex64;

/// Reference scenario at 30 dBm total power, in normalized units.
pub fn instance(r: usize, m: usize, seed: u64) -> (ProblemData, PowerBudget) {
    instance_at(r, m, seed, 30.0)
}

pub fn instance_at(r: usize, m: usize, seed: u64, total_dbm: f64) -> (ProblemData, PowerBudget) {
    let raw = Scenario::reference(r, m).generate(seed).unwrap();
    let budget = PowerBudget::from_total(dbm_to_watt(total_dbm));
    let norm = Normalization::for_instance(&raw, &budget);
    (ProblemData::build(&norm.channels(&raw)).unwrap(), norm.budget(&budget))
}

/// Min SNR of the rank-one weight `[v; 0]` at `a`, after scaling `v` up to
/// the largest feasible multiple.
pub fn scaled_min_snr(data: &ProblemData, budget: &PowerBudget, v: &[Complex64], a: f64) -> f64 {
    let mut w = v.to_vec();
    w.resize(data.weight_dim(), Complex64::new(0.0, 0.0));
    let Some(beta) = data.max_weight_scale(&w, a, budget, 1.0) else { return 0.0 };
    w.iter_mut().for_each(|c| *c *= beta * (1.0 - 1e-12));
    data.min_snr(&w, a).unwrap().0
}

/// Box-constrained grid search with successive zooms around the incumbent.
/// Coordinates are mapped from `[lo, hi]` boxes; returns the best value.
pub fn zoom_search(
    mut bounds: Vec<(f64, f64)>,
    points: usize,
    zooms: usize,
    f: impl Fn(&[f64]) -> f64,
) -> (f64, Vec<f64>) {
    let dim = bounds.len();
    let mut best = (f64::NEG_INFINITY, vec![0.0; dim]);
    for _ in 0..=zooms {
        let total = points.pow(dim as u32);
        let mut x = vec![0.0; dim];
        for idx in 0..total {
            let mut rem = idx;
            for (k, &(lo, hi)) in bounds.iter().enumerate() {
                let i = rem % points;
                rem /= points;
                x[k] = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            }
            let v = f(&x);
            if v > best.0 {
                best = (v, x.clone());
            }
        }
        bounds = bounds
            .iter()
            .zip(&best.1)
            .map(|(&(lo, hi), &c)| {
                let h = 2.0 * (hi - lo) / (points - 1) as f64;
                (c - h, c + h)
            })
            .collect();
    }
    best
}

/// Best rank-one min SNR over `w̃₁` with magnitudes on the unit sphere,
/// free relative phases and a log-grid over `a`, each point scaled to the
/// budget. For one destination the phases are aligned with the channel and
/// only the magnitudes are searched.
pub fn rank_one_grid_optimum(data: &ProblemData, budget: &PowerBudget, a_max: f64, points: usize, zooms: usize) -> f64 {
    assert_eq!(data.relay_count(), 2, "oracle is written for two relays");
    let a_lo = (2.0 / budget.source_cap().unwrap()).ln();
    let a_hi = a_max.ln();
    let single = data.destination_count() == 1;
    let q = data.q_vec1(0).to_vec();
    let eval = |x: &[f64]| {
        let (th, ph, la) = (x[0], x[1], x[2]);
        let a = la.clamp(a_lo + 1e-9, a_hi).exp();
        let mag = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
        let v: Vec<Complex64> = (0..3)
            .map(|i| {
                let phase = if single {
                    if q[i].norm() > 0.0 { q[i] / q[i].norm() } else { Complex64::new(1.0, 0.0) }
                } else if i == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, x[2 + i])
                };
                phase * mag[i]
            })
            .collect();
        scaled_min_snr(data, budget, &v, a)
    };
    let mut bounds = vec![(0.0, FRAC_PI_2), (0.0, FRAC_PI_2), (a_lo, a_hi)];
    if !single {
        bounds.extend([(0.0, TAU), (0.0, TAU)]);
    }
    zoom_search(bounds, points, zooms, eval).0
}
