//! Problem data of the four-slot relay multicast scheme and exact
//! evaluation of SNRs, powers and constraints.
//!
//! The stacked weight vector is `w = [w̃₁; w̃₂]` with
//! `w̃ᵢ = [wᵢ; cᵢ]` of length R+1. The last entry of each half carries the
//! source's slot-3/4 amplitude: `α₃ = α₁·conj(c₁)`, `α₄ = α₁·conj(c₂)` with
//! `α₁ = 1/√a`.

use relaycast_linalg::{Complex64, HermitianMatrix};

use crate::scenario::ChannelRealization;
use crate::CoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rank {
    /// Single beam, `w̃₂ = 0`.
    One,
    Two,
}

/// Power limits; `None` leaves the constraint out.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PowerBudget {
    pub relay_max: Option<f64>,
    pub relay_sum_max: Option<f64>,
    pub source_max: Option<f64>,
    pub total_max: Option<f64>,
}

impl PowerBudget {
    /// `P_S = P_T/2`, `P_R = P_T/3`, `p_r = P_T/15`.
    pub fn from_total(total: f64) -> Self {
        Self {
            relay_max: Some(total / 15.0),
            relay_sum_max: Some(total / 3.0),
            source_max: Some(total / 2.0),
            total_max: Some(total),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        for v in [self.relay_max, self.relay_sum_max, self.source_max, self.total_max]
            .into_iter()
            .flatten()
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CoreError::InvalidInput(format!("power budget {v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            relay_max: self.relay_max.map(|v| v * k),
            relay_sum_max: self.relay_sum_max.map(|v| v * k),
            source_max: self.source_max.map(|v| v * k),
            total_max: self.total_max.map(|v| v * k),
        }
    }

    /// Tightest budget that bounds the source, used to place `a`.
    pub fn source_cap(&self) -> Option<f64> {
        match (self.source_max, self.total_max) {
            (Some(s), Some(t)) => Some(s.min(t)),
            (s, t) => s.or(t),
        }
    }

    /// Power unit used for normalization.
    pub fn reference_power(&self) -> f64 {
        self.total_max
            .or(self.source_max)
            .or(self.relay_sum_max)
            .or(self.relay_max)
            .unwrap_or(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Positivity,
    RelayPower(usize),
    RelaySum,
    SourcePower,
    TotalPower,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub kind: ConstraintKind,
    pub value: f64,
    pub limit: f64,
}

impl Violation {
    pub fn margin(&self) -> f64 {
        self.value - self.limit
    }
}

/// A design point `(w, a, t)` of the max-min problem.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformerSolution {
    pub w: Vec<Complex64>,
    pub a: f64,
    pub t: f64,
}

impl BeamformerSolution {
    pub fn relay_count(&self) -> usize {
        self.w.len() / 2 - 1
    }

    pub fn w_tilde1(&self) -> &[Complex64] {
        &self.w[..self.w.len() / 2]
    }

    pub fn w_tilde2(&self) -> &[Complex64] {
        &self.w[self.w.len() / 2..]
    }

    pub fn w1(&self) -> &[Complex64] {
        &self.w_tilde1()[..self.relay_count()]
    }

    pub fn w2(&self) -> &[Complex64] {
        &self.w_tilde2()[..self.relay_count()]
    }

    pub fn alpha1(&self) -> f64 {
        1.0 / self.a.sqrt()
    }

    pub fn alpha3(&self) -> Complex64 {
        self.w_tilde1()[self.relay_count()].conj() * self.alpha1()
    }

    pub fn alpha4(&self) -> Complex64 {
        self.w_tilde2()[self.relay_count()].conj() * self.alpha1()
    }

    pub fn min_snr_db(&self) -> f64 {
        -10.0 * self.t.log10()
    }
}

/// Matrices of the max-min problem for one channel realization.
#[derive(Clone, Debug)]
pub struct ProblemData {
    relays: usize,
    q1: Vec<Vec<Complex64>>,
    q2: Vec<Vec<Complex64>>,
    /// Diagonal of `R̃_m`, length R+1 with a trailing zero.
    r_diag: Vec<Vec<f64>>,
    d_sq: Vec<f64>,
    f_sq: Vec<f64>,
    phase: Vec<Complex64>,
    sigma_nu_sq: f64,
    sigma_eta_sq: f64,
}

impl ProblemData {
    pub fn build(ch: &ChannelRealization) -> Result<Self, CoreError> {
        ch.validate()?;
        let r = ch.relay_count();
        let mut q1 = Vec::with_capacity(ch.destination_count());
        let mut q2 = Vec::with_capacity(ch.destination_count());
        let mut r_diag = Vec::with_capacity(ch.destination_count());
        for (g, &d) in ch.g.iter().zip(&ch.d) {
            let mut a: Vec<Complex64> = g.iter().zip(&ch.f).map(|(g, f)| g * f).collect();
            a.push(d);
            let mut b: Vec<Complex64> = g.iter().zip(&ch.f).map(|(g, f)| g * f.conj()).collect();
            b.push(d);
            q1.push(a);
            q2.push(b);
            let mut rd: Vec<f64> = g.iter().map(|g| ch.sigma_eta_sq * g.norm_sqr()).collect();
            rd.push(0.0);
            r_diag.push(rd);
        }
        let mut phase: Vec<Complex64> = ch
            .f
            .iter()
            .map(|f| Complex64::from_polar(1.0, 2.0 * f.arg()))
            .collect();
        phase.push(Complex64::new(1.0, 0.0));
        Ok(Self {
            relays: r,
            q1,
            q2,
            r_diag,
            d_sq: ch.d.iter().map(|d| d.norm_sqr()).collect(),
            f_sq: ch.f.iter().map(|f| f.norm_sqr()).collect(),
            phase,
            sigma_nu_sq: ch.sigma_nu_sq,
            sigma_eta_sq: ch.sigma_eta_sq,
        })
    }

    pub fn relay_count(&self) -> usize {
        self.relays
    }

    pub fn destination_count(&self) -> usize {
        self.q1.len()
    }

    /// R+1.
    pub fn block_dim(&self) -> usize {
        self.relays + 1
    }

    /// 2(R+1).
    pub fn weight_dim(&self) -> usize {
        2 * (self.relays + 1)
    }

    pub fn sigma_nu_sq(&self) -> f64 {
        self.sigma_nu_sq
    }

    pub fn sigma_eta_sq(&self) -> f64 {
        self.sigma_eta_sq
    }

    pub fn d_sq(&self, m: usize) -> f64 {
        self.d_sq[m]
    }

    pub fn f_sq(&self, r: usize) -> f64 {
        self.f_sq[r]
    }

    pub fn q_vec1(&self, m: usize) -> &[Complex64] {
        &self.q1[m]
    }

    pub fn q_vec2(&self, m: usize) -> &[Complex64] {
        &self.q2[m]
    }

    pub fn r_diag(&self, m: usize) -> &[f64] {
        &self.r_diag[m]
    }

    /// Diagonal of `A = diag(e^{2jφ₁}, …, e^{2jφ_R}, 1)`.
    pub fn phase_diag(&self) -> &[Complex64] {
        &self.phase
    }

    pub fn q_tilde1(&self, m: usize) -> HermitianMatrix {
        HermitianMatrix::outer(&self.q1[m])
    }

    pub fn q_tilde2(&self, m: usize) -> HermitianMatrix {
        HermitianMatrix::outer(&self.q2[m])
    }

    pub fn r_tilde(&self, m: usize) -> HermitianMatrix {
        HermitianMatrix::from_real_diag(&self.r_diag[m])
    }

    pub fn d_tilde(&self, r: usize) -> HermitianMatrix {
        self.single_entry(r, self.f_sq[r])
    }

    pub fn e_tilde(&self, r: usize) -> HermitianMatrix {
        self.single_entry(r, self.sigma_eta_sq)
    }

    pub fn s_tilde(&self) -> HermitianMatrix {
        self.single_entry(self.relays, 2.0)
    }

    fn single_entry(&self, k: usize, v: f64) -> HermitianMatrix {
        let mut d = vec![0.0; self.block_dim()];
        d[k] = v;
        HermitianMatrix::from_real_diag(&d)
    }

    /// `Q_m = blkdiag(Q̃_{m,1}, Q̃_{m,2})`.
    pub fn q_full(&self, m: usize) -> HermitianMatrix {
        blkdiag(&self.q_tilde1(m), &self.q_tilde2(m))
    }

    pub fn r_full(&self, m: usize) -> HermitianMatrix {
        let r = self.r_tilde(m);
        blkdiag(&r, &r)
    }

    /// `Q_m + (|d_m|²/σ_ν²)R_m`, the matrix of the concave part.
    pub fn p_full(&self, m: usize) -> HermitianMatrix {
        self.q_full(m).add(&self.r_full(m).scaled(self.d_sq[m] / self.sigma_nu_sq))
    }

    /// `Aᴴ ŵ`.
    pub fn undo_phase(&self, w_hat: &[Complex64]) -> Vec<Complex64> {
        w_hat.iter().zip(&self.phase).map(|(w, p)| p.conj() * w).collect()
    }

    /// `A w̃`.
    pub fn apply_phase(&self, w: &[Complex64]) -> Vec<Complex64> {
        w.iter().zip(&self.phase).map(|(w, p)| p * w).collect()
    }

    fn check_w(&self, w: &[Complex64]) {
        assert_eq!(w.len(), self.weight_dim(), "weight vector must have length 2(R+1)");
    }

    fn halves<'a>(&self, w: &'a [Complex64]) -> (&'a [Complex64], &'a [Complex64]) {
        self.check_w(w);
        w.split_at(self.block_dim())
    }

    /// `wᴴ Q_m w = |q_{m,1}ᴴ w̃₁|² + |q_{m,2}ᴴ w̃₂|²`.
    pub fn quad_q(&self, m: usize, w: &[Complex64]) -> f64 {
        let (w1, w2) = self.halves(w);
        inner(&self.q1[m], w1).norm_sqr() + inner(&self.q2[m], w2).norm_sqr()
    }

    /// `wᴴ R_m w`.
    pub fn quad_r(&self, m: usize, w: &[Complex64]) -> f64 {
        let (w1, w2) = self.halves(w);
        self.r_diag[m]
            .iter()
            .zip(w1.iter().zip(w2))
            .map(|(r, (a, b))| r * (a.norm_sqr() + b.norm_sqr()))
            .sum()
    }

    /// `σ_{m,34}² = wᴴ R_m w + σ_ν²`.
    pub fn sigma34_sq(&self, m: usize, w: &[Complex64]) -> f64 {
        self.quad_r(m, w) + self.sigma_nu_sq
    }

    pub fn snr(&self, w: &[Complex64], a: f64, m: usize) -> Result<f64, CoreError> {
        positive_a(a)?;
        Ok(self.quad_q(m, w) / (self.sigma34_sq(m, w) * a) + self.d_sq[m] / (self.sigma_nu_sq * a))
    }

    /// Minimum SNR and the first destination attaining it.
    pub fn min_snr(&self, w: &[Complex64], a: f64) -> Result<(f64, usize), CoreError> {
        positive_a(a)?;
        let mut best = (f64::INFINITY, 0);
        for m in 0..self.destination_count() {
            let s = self.snr(w, a, m)?;
            if s < best.0 {
                best = (s, m);
            }
        }
        Ok(best)
    }

    /// `λ_m`; non-positive exactly when `SNR_m ≥ 1/t`.
    pub fn snr_constraint_value(&self, w: &[Complex64], a: f64, t: f64, m: usize) -> Result<f64, CoreError> {
        positive_a(a)?;
        if !(t > 0.0) {
            return Err(CoreError::NonPositiveObjective(t));
        }
        let concave = self.quad_q(m, w) + self.d_sq[m] / self.sigma_nu_sq * self.quad_r(m, w) + self.d_sq[m];
        Ok(self.sigma34_sq(m, w) / t - concave / a)
    }

    /// `(|w_{r,1}|² + |w_{r,2}|²)(|f_r|²/a + σ_η²)`.
    pub fn relay_power(&self, r: usize, w: &[Complex64], a: f64) -> Result<f64, CoreError> {
        positive_a(a)?;
        let (w1, w2) = self.halves(w);
        Ok((w1[r].norm_sqr() + w2[r].norm_sqr()) * (self.f_sq[r] / a + self.sigma_eta_sq))
    }

    pub fn relay_sum_power(&self, w: &[Complex64], a: f64) -> Result<f64, CoreError> {
        (0..self.relays).map(|r| self.relay_power(r, w, a)).sum()
    }

    /// `(2 + wᴴ S w)/a`.
    pub fn source_power(&self, w: &[Complex64], a: f64) -> Result<f64, CoreError> {
        positive_a(a)?;
        let (w1, w2) = self.halves(w);
        let k = self.relays;
        Ok((2.0 + 2.0 * (w1[k].norm_sqr() + w2[k].norm_sqr())) / a)
    }

    pub fn total_power(&self, w: &[Complex64], a: f64) -> Result<f64, CoreError> {
        Ok(self.source_power(w, a)? + 2.0 * self.relay_sum_power(w, a)?)
    }

    /// Every violated constraint; empty means feasible.
    pub fn feasible(&self, w: &[Complex64], a: f64, budget: &PowerBudget) -> Vec<Violation> {
        if !(a > 0.0) {
            return vec![Violation {
                kind: ConstraintKind::Positivity,
                value: -a,
                limit: 0.0,
            }];
        }
        let mut out = Vec::new();
        let mut check = |kind, value: f64, limit: Option<f64>| {
            if let Some(limit) = limit {
                if !(value <= limit) {
                    out.push(Violation { kind, value, limit });
                }
            }
        };
        let mut sum = 0.0;
        for r in 0..self.relays {
            let p = self.relay_power(r, w, a).expect("a checked");
            sum += p;
            check(ConstraintKind::RelayPower(r), p, budget.relay_max);
        }
        check(ConstraintKind::RelaySum, sum, budget.relay_sum_max);
        let ps = self.source_power(w, a).expect("a checked");
        check(ConstraintKind::SourcePower, ps, budget.source_max);
        check(ConstraintKind::TotalPower, ps + 2.0 * sum, budget.total_max);
        out
    }

    /// Largest `β ∈ [0, ∞)` with `(β w, a)` within `fraction` of every
    /// budget; `None` if even `β = 0` violates one. Powers are `β²·x + y`.
    pub fn max_weight_scale(&self, w: &[Complex64], a: f64, budget: &PowerBudget, fraction: f64) -> Option<f64> {
        let zero = vec![Complex64::new(0.0, 0.0); w.len()];
        let (w1, w2) = self.halves(w);
        let k = self.relays;
        let mut beta_sq = f64::INFINITY;
        let mut bound = |x: f64, y: f64, limit: Option<f64>| -> bool {
            if let Some(l) = limit {
                let room = fraction * l - y;
                if room < 0.0 {
                    return false;
                }
                if x > 0.0 {
                    beta_sq = beta_sq.min(room / x);
                }
            }
            true
        };
        let relay: Vec<f64> = (0..k)
            .map(|r| self.relay_power(r, w, a).expect("positive a"))
            .collect();
        let rsum: f64 = relay.iter().sum();
        let src_var = 2.0 * (w1[k].norm_sqr() + w2[k].norm_sqr()) / a;
        let src_fix = self.source_power(&zero, a).ok()?;
        let mut ok = true;
        for &p in &relay {
            ok &= bound(p, 0.0, budget.relay_max);
        }
        ok &= bound(rsum, 0.0, budget.relay_sum_max);
        ok &= bound(src_var, src_fix, budget.source_max);
        ok &= bound(src_var + 2.0 * rsum, src_fix, budget.total_max);
        ok.then(|| beta_sq.sqrt())
    }

    /// Per-entry scale `κ` of one half of `w` at power factor `a`, chosen so
    /// that an entry `κ y` costs power `|y|²` at its relay or at the source.
    /// The solvers work in `y`.
    pub fn weight_scaling(&self, a: f64) -> Vec<f64> {
        let mut k: Vec<f64> = self
            .f_sq
            .iter()
            .map(|f| 1.0 / (f / a + self.sigma_eta_sq).sqrt())
            .collect();
        k.push((a / 2.0).sqrt());
        k
    }
}

fn positive_a(a: f64) -> Result<(), CoreError> {
    if a > 0.0 {
        Ok(())
    } else {
        Err(CoreError::NonPositivePowerFactor(a))
    }
}

/// `xᴴ y`.
pub(crate) fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn blkdiag(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    let (n, k) = (a.dim(), b.dim());
    let m = relaycast_linalg::ComplexMatrix::from_fn(n + k, n + k, |i, j| {
        if i < n && j < n {
            a[(i, j)]
        } else if i >= n && j >= n {
            b[(i - n, j - n)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    HermitianMatrix::symmetrize(m)
}

/// Rescaling into units where `σ_ν² = 1` and powers are multiples of
/// `power_unit`.
///
/// Channels scale by `√(P0/N0)`, the power factor by `P0` and relay weights
/// by `√(N0/P0)`; source entries of `w` are unchanged. SNRs and the
/// objective `t` are invariant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub power_unit: f64,
    pub noise_unit: f64,
}

impl Normalization {
    pub fn for_instance(ch: &ChannelRealization, budget: &PowerBudget) -> Self {
        Self {
            power_unit: budget.reference_power(),
            noise_unit: ch.sigma_nu_sq,
        }
    }

    fn gain(&self) -> f64 {
        (self.power_unit / self.noise_unit).sqrt()
    }

    pub fn channels(&self, ch: &ChannelRealization) -> ChannelRealization {
        let k = self.gain();
        ChannelRealization {
            f: ch.f.iter().map(|c| c * k).collect(),
            g: ch.g.iter().map(|row| row.iter().map(|c| c * k).collect()).collect(),
            d: ch.d.iter().map(|c| c * k).collect(),
            sigma_nu_sq: ch.sigma_nu_sq / self.noise_unit,
            sigma_eta_sq: ch.sigma_eta_sq / self.noise_unit,
            large_scale: ch.large_scale.clone(),
        }
    }

    pub fn budget(&self, b: &PowerBudget) -> PowerBudget {
        b.scaled(1.0 / self.power_unit)
    }

    fn map(&self, sol: &BeamformerSolution, relay: f64, a: f64) -> BeamformerSolution {
        let half = sol.w.len() / 2;
        let w = sol
            .w
            .iter()
            .enumerate()
            .map(|(i, c)| if i % half == half - 1 { *c } else { c * relay })
            .collect();
        BeamformerSolution { w, a: sol.a * a, t: sol.t }
    }

    pub fn to_physical(&self, sol: &BeamformerSolution) -> BeamformerSolution {
        self.map(sol, self.gain(), 1.0 / self.power_unit)
    }

    pub fn to_normalized(&self, sol: &BeamformerSolution) -> BeamformerSolution {
        self.map(sol, 1.0 / self.gain(), self.power_unit)
    }
}
