//! Max-min design by the concave-convex procedure.
//!
//! Each SNR constraint `σ₃₄²(w)/t − (wᴴP_m w + |d_m|²)/a ≤ 0` is a convex
//! quadratic-over-linear term minus another one. The second is replaced by
//! its tangent at the current iterate, which gives a convex inner
//! approximation solved as an SOCP over `(w, a, t)` directly. Iterates stay
//! feasible and `t` never increases.

use relaycast_conic::{LinExpr, ProgramBuilder, SolveStatus, SolverOptions, Var};
use relaycast_linalg::Complex64;

use crate::model::{inner, BeamformerSolution, ConstraintKind, PowerBudget, ProblemData, Rank};
use crate::scenario::{complex_gaussian, stream_rng};
use crate::CoreError;

/// Seed stream of the random starting points; start `s` uses `INIT_STREAM + s`.
const INIT_STREAM: u64 = 1 << 20;
const INIT_MARGIN: f64 = 0.99;
const TIE_TOLERANCE: f64 = 1e-11;

/// `2·10⁶/P_S` with the tightest source budget.
pub fn default_a_max(budget: &PowerBudget) -> f64 {
    2e6 / budget.source_cap().unwrap_or(1.0)
}

#[derive(Clone, Debug)]
pub struct CccpOptions {
    /// Threshold on the relative progress `(t⁽ᵏ⁾ − t⁽ᵏ⁺¹⁾)/t⁽ᵏ⁾`.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Defaults to [`default_a_max`].
    pub a_max: Option<f64>,
    pub seed: u64,
    pub n_starts: usize,
    pub rank: Rank,
    pub solver: SolverOptions,
    /// When set, convergence also needs the last step, relative to
    /// `1 + ‖(w, a, t)‖`, to be at most this.
    pub step_tol: Option<f64>,
}

impl CccpOptions {
    pub fn new(rank: Rank, seed: u64) -> Self {
        Self {
            epsilon: 1e-2,
            max_iter: 50,
            a_max: None,
            seed,
            n_starts: 1,
            rank,
            solver: SolverOptions::default(),
            step_tol: None,
        }
    }

    pub fn a_max(&self, budget: &PowerBudget) -> f64 {
        self.a_max.unwrap_or_else(|| default_a_max(budget))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CccpState {
    pub k: usize,
    pub w: Vec<Complex64>,
    pub a: f64,
    pub t: f64,
    pub rho: f64,
}

impl CccpState {
    pub fn solution(&self) -> BeamformerSolution {
        BeamformerSolution {
            w: self.w.clone(),
            a: self.a,
            t: self.t,
        }
    }

    fn norm(&self) -> f64 {
        (self.w.iter().map(|c| c.norm_sqr()).sum::<f64>() + self.a * self.a + self.t * self.t).sqrt()
    }

    fn relative_distance(&self, other: &CccpState) -> f64 {
        let dw: f64 = self.w.iter().zip(&other.w).map(|(a, b)| (a - b).norm_sqr()).sum();
        (dw + (self.a - other.a).powi(2) + (self.t - other.t).powi(2)).sqrt() / (1.0 + other.norm())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    SubproblemFailure(String),
    /// The repaired step would have increased `t`; the previous iterate is kept.
    StepRejected,
}

#[derive(Clone, Debug)]
pub struct TraceEntry {
    pub k: usize,
    pub t: f64,
    pub min_snr: f64,
    pub rho: f64,
    /// Distance to the previous iterate relative to `1 + ‖(w, a, t)‖`.
    pub step: f64,
    pub a: f64,
    /// `−λ_m` per destination.
    pub snr_slack: Vec<f64>,
    /// `limit − value` for every budgeted power.
    pub power_slack: Vec<(ConstraintKind, f64)>,
}

impl TraceEntry {
    pub fn min_snr_db(&self) -> f64 {
        10.0 * self.min_snr.log10()
    }
}

#[derive(Clone, Debug)]
pub struct CccpReport {
    pub start: usize,
    /// Entry 0 is the starting point.
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
    pub solution: BeamformerSolution,
    pub solver_iterations: usize,
}

impl CccpReport {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }

    /// Minimum SNR after `k` iterations, or the final one if the run stopped
    /// earlier.
    pub fn min_snr_at(&self, k: usize) -> f64 {
        self.trace[k.min(self.trace.len() - 1)].min_snr
    }

    pub fn final_state(&self) -> CccpState {
        let last = self.trace.last().expect("trace holds the start");
        CccpState {
            k: last.k,
            w: self.solution.w.clone(),
            a: self.solution.a,
            t: self.solution.t,
            rho: last.rho,
        }
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("k,t,min_snr_db,rho\n");
        for e in &self.trace {
            out.push_str(&format!("{},{:e},{},{:e}\n", e.k, e.t, e.min_snr_db(), e.rho));
        }
        out
    }
}

/// All starts of one multi-start run.
#[derive(Clone, Debug)]
pub struct CccpRun {
    pub runs: Vec<CccpReport>,
    pub best: usize,
}

impl CccpRun {
    pub fn best(&self) -> &CccpReport {
        &self.runs[self.best]
    }

    /// Highest and lowest minimum SNR over the starts after `k` iterations.
    pub fn envelope_at(&self, k: usize) -> (f64, f64) {
        self.runs.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), r| {
            let s = r.min_snr_at(k);
            (hi.max(s), lo.min(s))
        })
    }
}

/// Random feasible start: `w` i.i.d. CN(0, 1), the source spending half its
/// budget on its fixed part, `w` shrunk until every constraint holds with a
/// 1% margin.
pub fn initial_point(
    data: &ProblemData,
    budget: &PowerBudget,
    opts: &CccpOptions,
    start: usize,
) -> Result<CccpState, CoreError> {
    budget.validate()?;
    let a_max = opts.a_max(budget);
    let a = match budget.source_cap() {
        Some(p) => (4.0 / p).min(a_max),
        None => 1.0f64.min(a_max),
    };
    let n = data.block_dim();
    let mut rng = stream_rng(opts.seed, INIT_STREAM + start as u64);
    let mut w: Vec<Complex64> = (0..data.weight_dim())
        .map(|i| {
            let z = complex_gaussian(&mut rng);
            if opts.rank == Rank::One && i >= n {
                Complex64::new(0.0, 0.0)
            } else {
                z
            }
        })
        .collect();
    let beta = data
        .max_weight_scale(&w, a, budget, INIT_MARGIN)
        .ok_or_else(|| CoreError::InvalidInput(format!("a = {a} leaves no room in the source budget")))?
        .min(1.0);
    w.iter_mut().for_each(|c| *c *= beta);
    let (snr, _) = data.min_snr(&w, a)?;
    if !(snr > 0.0) {
        return Err(CoreError::InitializationFailed);
    }
    Ok(CccpState {
        k: 0,
        w,
        a,
        t: 1.0 / snr,
        rho: f64::INFINITY,
    })
}

/// Tangent of `(wᴴP_m w + |d_m|²)/a` at `(w_k, a_k)`, with
/// `P_m = Q_m + (|d_m|²/σ_ν²)R_m`.
#[derive(Clone, Debug)]
pub struct LinearizedConstraint {
    pub m: usize,
    w_k: Vec<Complex64>,
    a_k: f64,
    /// `P_m w_k`
    v: Vec<Complex64>,
    /// `w_kᴴ P_m w_k`
    k0: f64,
    d_sq: f64,
}

impl LinearizedConstraint {
    /// Affine lower bound of the concave part's magnitude, exact at the
    /// expansion point.
    pub fn tangent(&self, w: &[Complex64], a: f64) -> f64 {
        let k = self.k0 + self.d_sq;
        (k / self.a_k) * (2.0 - a / self.a_k) + (2.0 / self.a_k) * (inner(&self.v, w).re - self.k0)
    }

    /// `λ̄_m(w, a, t)`, the convex majorant of the SNR constraint function.
    pub fn value(&self, data: &ProblemData, w: &[Complex64], a: f64, t: f64) -> f64 {
        data.sigma34_sq(self.m, w) / t - self.tangent(w, a)
    }

    /// `λ̄_m` at `(w_k + Δw, a_k + Δa, t_k + Δt)`.
    pub fn value_at_step(&self, data: &ProblemData, t_k: f64, dw: &[Complex64], da: f64, dt: f64) -> f64 {
        let w: Vec<Complex64> = self.w_k.iter().zip(dw).map(|(a, b)| a + b).collect();
        self.value(data, &w, self.a_k + da, t_k + dt)
    }
}

pub fn linearized_constraint(m: usize, state: &CccpState, data: &ProblemData) -> Result<LinearizedConstraint, CoreError> {
    if !(state.a > 0.0) {
        return Err(CoreError::NonPositivePowerFactor(state.a));
    }
    if !(state.t > 0.0) {
        return Err(CoreError::NonPositiveObjective(state.t));
    }
    let n = data.block_dim();
    let delta = data.d_sq(m) / data.sigma_nu_sq();
    let r = data.r_diag(m);
    let (w1, w2) = state.w.split_at(n);
    let mut v = Vec::with_capacity(2 * n);
    for (q, half) in [(data.q_vec1(m), w1), (data.q_vec2(m), w2)] {
        let qw = inner(q, half);
        v.extend((0..n).map(|i| q[i] * qw + half[i] * (delta * r[i])));
    }
    let k0 = inner(&state.w, &v).re;
    Ok(LinearizedConstraint {
        m,
        w_k: state.w.clone(),
        a_k: state.a,
        v,
        k0,
        d_sq: data.d_sq(m),
    })
}

/// Optimal point of the inner approximation around a state.
#[derive(Clone, Debug)]
pub struct SubproblemStep {
    pub w: Vec<Complex64>,
    pub a: f64,
    /// Optimal `t` of the convex program.
    pub t: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl SubproblemStep {
    /// `‖(Δw, Δa, Δt)‖` relative to `1 + ‖(w, a, t)‖` of the state.
    pub fn relative_step(&self, state: &CccpState) -> f64 {
        let s = CccpState {
            k: state.k,
            w: self.w.clone(),
            a: self.a,
            t: self.t,
            rho: 0.0,
        };
        s.relative_distance(state)
    }
}

/// Weight vector in scaled real variables, `w_i = κ_i (y_re + j y_im)`.
struct WeightVars {
    y: Vec<Option<(Var, Var)>>,
    kappa: Vec<f64>,
}

impl WeightVars {
    fn re(&self, i: usize) -> LinExpr {
        self.y[i].map_or_else(LinExpr::zero, |(r, _)| LinExpr::term(r, self.kappa[i]))
    }

    fn im(&self, i: usize) -> LinExpr {
        self.y[i].map_or_else(LinExpr::zero, |(_, m)| LinExpr::term(m, self.kappa[i]))
    }

    fn both(&self, i: usize, k: f64) -> [LinExpr; 2] {
        [self.re(i) * k, self.im(i) * k]
    }

    fn value(&self, x: &[f64], i: usize) -> Complex64 {
        self.y[i].map_or(Complex64::new(0.0, 0.0), |(r, m)| {
            Complex64::new(x[r.index()], x[m.index()]) * self.kappa[i]
        })
    }
}

/// Solves the inner approximation around `state`, with `a ≤ a_max`.
pub fn subproblem(
    state: &CccpState,
    data: &ProblemData,
    budget: &PowerBudget,
    a_max: f64,
    rank: Rank,
    solver: &SolverOptions,
) -> Result<SubproblemStep, CoreError> {
    let lin = (0..data.destination_count())
        .map(|m| linearized_constraint(m, state, data))
        .collect::<Result<Vec<_>, _>>()?;
    let (a_k, t_k) = (state.a, state.t);
    let n = data.block_dim();
    let relays = data.relay_count();
    let mut pb = ProgramBuilder::new();

    let half_kappa = data.weight_scaling(a_k);
    let wv = WeightVars {
        y: (0..data.weight_dim())
            .map(|i| (rank == Rank::Two || i < n).then(|| (pb.add_var(), pb.add_var())))
            .collect(),
        kappa: (0..data.weight_dim()).map(|i| half_kappa[i % n]).collect(),
    };
    let alpha = pb.add_var();
    let tau = pb.add_var();
    let a_expr = LinExpr::term(alpha, a_k);
    pb.minimize(LinExpr::term(tau, t_k));

    for c in &lin {
        let kk = c.k0 + c.d_sq;
        let mut u = LinExpr::constant(2.0 * kk / a_k - 2.0 * c.k0 / a_k) - a_expr.clone() * (kk / (a_k * a_k));
        for (i, v) in c.v.iter().enumerate() {
            u += wv.re(i) * (2.0 * v.re / a_k) + wv.im(i) * (2.0 * v.im / a_k);
        }
        let r = data.r_diag(c.m);
        let mut z = Vec::new();
        for i in 0..data.weight_dim() {
            let ri = r[i % n];
            if ri > 0.0 && wv.y[i].is_some() {
                z.extend(wv.both(i, ri.sqrt()));
            }
        }
        z.push(LinExpr::constant(data.sigma_nu_sq().sqrt()));
        pb.add_rotated_soc(u * t_k, LinExpr::term(tau, 1.0), z);
    }

    let p_ref = budget.relay_max.unwrap_or_else(|| budget.reference_power());
    let mut relay_sum = LinExpr::zero();
    for r in 0..relays {
        let s = pb.add_var();
        let e = pb.add_var();
        let f = data.f_sq(r).sqrt();
        let eta = data.sigma_eta_sq().sqrt();
        let c = (a_k / p_ref).sqrt();
        let zf = [r, n + r].iter().flat_map(|&i| wv.both(i, f)).collect();
        pb.add_rotated_soc(LinExpr::term(s, c), a_expr.clone() * (1.0 / c), zf);
        let c2 = 1.0 / p_ref.sqrt();
        let ze = [r, n + r].iter().flat_map(|&i| wv.both(i, eta)).collect();
        pb.add_rotated_soc(LinExpr::term(e, c2), LinExpr::constant(1.0 / c2), ze);
        if let Some(p) = budget.relay_max {
            pb.add_le(s + e, p);
        }
        relay_sum += s + e;
    }
    if let Some(p) = budget.relay_sum_max {
        pb.add_le(relay_sum.clone(), p);
    }
    let sigma_s = pb.add_var();
    let p_src = budget.source_cap().unwrap_or_else(|| budget.reference_power());
    let c3 = (a_k / p_src).sqrt();
    let s2 = std::f64::consts::SQRT_2;
    let mut zs = vec![LinExpr::constant(s2)];
    zs.extend([relays, n + relays].iter().flat_map(|&i| wv.both(i, s2)));
    pb.add_rotated_soc(LinExpr::term(sigma_s, c3), a_expr.clone() * (1.0 / c3), zs);
    if let Some(p) = budget.source_max {
        pb.add_le(sigma_s, p);
    }
    if let Some(p) = budget.total_max {
        pb.add_le(LinExpr::from(sigma_s) + relay_sum * 2.0, p);
    }
    pb.add_le(a_expr, a_max);

    let prog = pb.build()?;
    let sol = prog.solve(solver)?;
    let x = &sol.x;
    Ok(SubproblemStep {
        w: (0..data.weight_dim()).map(|i| wv.value(x, i)).collect(),
        a: x[alpha.index()] * a_k,
        t: x[tau.index()] * t_k,
        status: sol.status,
        iterations: sol.iterations,
    })
}

/// Pulls a point that misses its budgets by rounding back inside: `w` is
/// divided by `√v` and `a` multiplied by `v`, which lowers every power by at
/// least `v`.
fn repair(data: &ProblemData, budget: &PowerBudget, a_max: f64, mut w: Vec<Complex64>, mut a: f64) -> Option<(Vec<Complex64>, f64)> {
    if !(a > 0.0) || w.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return None;
    }
    a = a.min(a_max);
    for _ in 0..8 {
        let viol = data.feasible(&w, a, budget);
        if viol.is_empty() {
            return Some((w, a));
        }
        let v = viol.iter().map(|v| v.value / v.limit).fold(1.0, f64::max) * (1.0 + 1e-12);
        if a * v <= a_max {
            let s = 1.0 / v.sqrt();
            w.iter_mut().for_each(|c| *c *= s);
            a *= v;
        } else {
            let beta = data.max_weight_scale(&w, a, budget, 1.0 - 1e-12)?;
            w.iter_mut().for_each(|c| *c *= beta.min(1.0));
        }
    }
    None
}

fn trace_entry(data: &ProblemData, budget: &PowerBudget, state: &CccpState, step: f64) -> Result<TraceEntry, CoreError> {
    let snr_slack = (0..data.destination_count())
        .map(|m| data.snr_constraint_value(&state.w, state.a, state.t, m).map(|v| -v))
        .collect::<Result<Vec<_>, _>>()?;
    let (w, a) = (&state.w, state.a);
    let mut power_slack = Vec::new();
    let mut sum = 0.0;
    for r in 0..data.relay_count() {
        let p = data.relay_power(r, w, a)?;
        sum += p;
        if let Some(l) = budget.relay_max {
            power_slack.push((ConstraintKind::RelayPower(r), l - p));
        }
    }
    if let Some(l) = budget.relay_sum_max {
        power_slack.push((ConstraintKind::RelaySum, l - sum));
    }
    let ps = data.source_power(w, a)?;
    if let Some(l) = budget.source_max {
        power_slack.push((ConstraintKind::SourcePower, l - ps));
    }
    if let Some(l) = budget.total_max {
        power_slack.push((ConstraintKind::TotalPower, l - ps - 2.0 * sum));
    }
    Ok(TraceEntry {
        k: state.k,
        t: state.t,
        min_snr: 1.0 / state.t,
        rho: state.rho,
        step,
        a,
        snr_slack,
        power_slack,
    })
}

/// Iterates from a given feasible state.
pub fn iterate(
    start: usize,
    mut state: CccpState,
    data: &ProblemData,
    budget: &PowerBudget,
    opts: &CccpOptions,
) -> Result<CccpReport, CoreError> {
    let a_max = opts.a_max(budget);
    let mut trace = vec![trace_entry(data, budget, &state, f64::INFINITY)?];
    let mut solver_iterations = 0;
    let termination = loop {
        if state.k >= opts.max_iter {
            break Termination::MaxIterations;
        }
        let step = match subproblem(&state, data, budget, a_max, opts.rank, &opts.solver) {
            Ok(s) => s,
            Err(e) => break Termination::SubproblemFailure(e.to_string()),
        };
        solver_iterations += step.iterations;
        if !matches!(step.status, SolveStatus::Optimal | SolveStatus::NumericLimit) {
            break Termination::SubproblemFailure(format!("{:?}", step.status));
        }
        let Some((w, a)) = repair(data, budget, a_max, step.w, step.a) else {
            break Termination::SubproblemFailure("step could not be made feasible".into());
        };
        let (snr, _) = data.min_snr(&w, a)?;
        let t = 1.0 / snr;
        // Ties within round-off are kept so a run can settle onto its fixed
        // point after the objective has stopped moving.
        if !(t <= state.t * (1.0 + TIE_TOLERANCE)) {
            break Termination::StepRejected;
        }
        let rho = (state.t - t) / state.t;
        let next = CccpState {
            k: state.k + 1,
            w,
            a,
            t,
            rho,
        };
        let moved = next.relative_distance(&state);
        state = next;
        trace.push(trace_entry(data, budget, &state, moved)?);
        if step.status == SolveStatus::NumericLimit {
            break Termination::SubproblemFailure("solver stopped at its iteration limit".into());
        }
        if rho < opts.epsilon && opts.step_tol.is_none_or(|s| moved <= s) {
            break Termination::Converged;
        }
    };
    Ok(CccpReport {
        start,
        trace,
        termination,
        solution: state.solution(),
        solver_iterations,
    })
}

/// Runs every start and keeps the best final objective.
pub fn run(data: &ProblemData, budget: &PowerBudget, opts: &CccpOptions) -> Result<CccpRun, CoreError> {
    if opts.n_starts == 0 {
        return Err(CoreError::InvalidInput("n_starts must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(opts.n_starts);
    for s in 0..opts.n_starts {
        let init = initial_point(data, budget, opts, s)?;
        runs.push(iterate(s, init, data, budget, opts)?);
    }
    let best = (0..runs.len())
        .min_by(|&i, &j| runs[i].solution.t.total_cmp(&runs[j].solution.t))
        .expect("at least one start");
    Ok(CccpRun { runs, best })
}

/// Relative step of a fresh subproblem solve at `state`; zero at a fixed
/// point of the iteration.
pub fn fixed_point_residual(
    state: &CccpState,
    data: &ProblemData,
    budget: &PowerBudget,
    opts: &CccpOptions,
) -> Result<f64, CoreError> {
    let step = subproblem(state, data, budget, opts.a_max(budget), opts.rank, &opts.solver)?;
    Ok(step.relative_step(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Normalization;
    use crate::scenario::{ChannelRealization, Scenario};

    fn instance(r: usize, m: usize, seed: u64) -> (ProblemData, PowerBudget) {
        let raw = Scenario::reference(r, m).generate(seed).unwrap();
        let budget = PowerBudget::from_total(crate::units::dbm_to_watt(30.0));
        let norm = Normalization::for_instance(&raw, &budget);
        (ProblemData::build(&norm.channels(&raw)).unwrap(), norm.budget(&budget))
    }

    #[test]
    fn initial_point_is_feasible_with_margin() {
        let (data, budget) = instance(4, 3, 1);
        let opts = CccpOptions::new(Rank::Two, 5);
        let s = initial_point(&data, &budget, &opts, 0).unwrap();
        assert!(data.feasible(&s.w, s.a, &budget).is_empty());
        assert!(data.feasible(&s.w, s.a, &budget.scaled(INIT_MARGIN + 1e-9)).is_empty());
        assert!(s.a <= opts.a_max(&budget));
        assert_eq!(s, initial_point(&data, &budget, &opts, 0).unwrap());
    }

    #[test]
    fn zero_channels_fail_to_initialize() {
        let z = Complex64::new(0.0, 0.0);
        let ch = ChannelRealization::new(vec![z; 2], vec![vec![z; 2]], vec![z], 1.0, 1.0).unwrap();
        let data = ProblemData::build(&ch).unwrap();
        let err = run(&data, &PowerBudget::from_total(1.0), &CccpOptions::new(Rank::Two, 0)).unwrap_err();
        assert_eq!(err, CoreError::InitializationFailed);
    }

    #[test]
    fn tangency_at_expansion_point() {
        let (data, budget) = instance(3, 2, 2);
        let s = initial_point(&data, &budget, &CccpOptions::new(Rank::Two, 1), 0).unwrap();
        for m in 0..2 {
            let lin = linearized_constraint(m, &s, &data).unwrap();
            let exact = data.snr_constraint_value(&s.w, s.a, s.t, m).unwrap();
            let zero = vec![Complex64::new(0.0, 0.0); s.w.len()];
            let approx = lin.value_at_step(&data, s.t, &zero, 0.0, 0.0);
            assert!((approx - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn rank_one_keeps_second_half_zero() {
        let (data, budget) = instance(3, 2, 3);
        let run = run(&data, &budget, &CccpOptions::new(Rank::One, 2)).unwrap();
        let sol = &run.best().solution;
        assert!(sol.w_tilde2().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn iterations_improve_and_stay_feasible() {
        let (data, budget) = instance(4, 3, 4);
        let mut opts = CccpOptions::new(Rank::Two, 3);
        opts.epsilon = 1e-4;
        let rep = run(&data, &budget, &opts).unwrap();
        let best = rep.best();
        assert!(best.iterations() >= 2, "{:?}", best.termination);
        for pair in best.trace.windows(2) {
            assert!(pair[1].t <= pair[0].t + 1e-9);
        }
        assert!(best.trace.last().unwrap().min_snr > best.trace[0].min_snr);
        assert!(data.feasible(&best.solution.w, best.solution.a, &budget).is_empty());
    }
}
