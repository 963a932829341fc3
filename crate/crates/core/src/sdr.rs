//! Semidefinite relaxation with a search over `(a, t)`.
//!
//! At fixed `(t, a)` every constraint of the max-min problem is affine in
//! `X₁ = w̃₁w̃₁ᴴ + ŵ₂ŵ₂ᴴ` with `ŵ₂ = A w̃₂`, so dropping the rank condition
//! leaves an SDP feasibility problem. A log grid over `a` with bisection on
//! `t` gives the relaxation optimum, whose inverse bounds every achievable
//! minimum SNR. Solutions of rank at most two decompose exactly; otherwise
//! Gaussian randomization produces feasible weights.

use relaycast_conic::{
    sdp_feasibility, FeasibilityOutcome, LinExpr, ProgramBuilder, SdpConstraint, SolveStatus, SolverOptions,
};
use relaycast_linalg::{hermitian_eig, Complex64, ComplexMatrix, HermitianMatrix};

use crate::cccp::{default_a_max, initial_point, CccpOptions};
use crate::model::{BeamformerSolution, PowerBudget, ProblemData, Rank};
use crate::scenario::{complex_gaussian, stream_rng};
use crate::CoreError;

/// Seed stream of the randomization candidates.
const RANDOMIZATION_STREAM: u64 = 1 << 21;
/// Bisection steps before the `t` search gives up widening its bracket.
const MAX_DOUBLINGS: usize = 60;

#[derive(Clone, Debug)]
pub struct SdrOptions {
    pub grid_size: usize,
    /// Multiplicative precision of the `t` bisection.
    pub epsilon: f64,
    pub rank_tol: f64,
    pub n_candidates: usize,
    pub seed: u64,
    /// Defaults to [`default_a_max`].
    pub a_max: Option<f64>,
    /// Rounds of local refinement of `a` around the best grid point.
    pub refine_rounds: usize,
    /// Precision of a last bisection at the best `a`; no polish if it is not
    /// below `epsilon`.
    pub polish_epsilon: f64,
    pub solver: SolverOptions,
}

impl SdrOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            grid_size: 200,
            epsilon: 1e-2,
            rank_tol: 1e-6,
            n_candidates: 200,
            seed,
            a_max: None,
            refine_rounds: 4,
            polish_epsilon: 1e-4,
            solver: SolverOptions::default().with_tol(1e-7),
        }
    }

    pub fn a_max(&self, budget: &PowerBudget) -> f64 {
        self.a_max.unwrap_or_else(|| default_a_max(budget))
    }
}

#[derive(Clone, Debug)]
pub enum SdrVerdict<T> {
    Feasible(T),
    Infeasible,
    /// The solver could not separate the margin from zero.
    Indeterminate,
}

impl<T> SdrVerdict<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SdrVerdict::Feasible(_))
    }
}

/// Diagonal congruence `K C K` into power-normalized coordinates.
fn scaling_matrix(data: &ProblemData, a: f64) -> ComplexMatrix {
    let k: Vec<Complex64> = data
        .weight_scaling(a)
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    ComplexMatrix::from_diag(&k)
}

/// Power matrices `D̃_r/a + Ẽ_r` of every relay.
fn relay_power_matrices(data: &ProblemData, a: f64) -> Vec<HermitianMatrix> {
    (0..data.relay_count())
        .map(|r| data.d_tilde(r).scaled(1.0 / a).add(&data.e_tilde(r)))
        .collect()
}

fn sum(mats: &[HermitianMatrix], n: usize) -> HermitianMatrix {
    mats.iter().fold(HermitianMatrix::zeros(n), |acc, m| acc.add(m))
}

/// Power constraints `(matrix, constant)` meaning `tr(X C) + c ≤ 0`.
fn power_rows(data: &ProblemData, budget: &PowerBudget, a: f64) -> Vec<(HermitianMatrix, f64)> {
    let n = data.block_dim();
    let relay = relay_power_matrices(data, a);
    let relay_sum = sum(&relay, n);
    let src = data.s_tilde().scaled(1.0 / a);
    let mut rows = Vec::new();
    if let Some(p) = budget.relay_max {
        rows.extend(relay.iter().map(|c| (c.clone(), -p)));
    }
    if let Some(p) = budget.relay_sum_max {
        rows.push((relay_sum.clone(), -p));
    }
    if let Some(p) = budget.source_max {
        rows.push((src.clone(), 2.0 / a - p));
    }
    if let Some(p) = budget.total_max {
        rows.push((src.add(&relay_sum.scaled(2.0)), 2.0 / a - p));
    }
    rows
}

/// SNR coefficient `a/t − |d_m|²/σ_ν²` multiplying the noise term.
fn snr_coefficient(data: &ProblemData, t: f64, a: f64, m: usize) -> f64 {
    a / t - data.d_sq(m) / data.sigma_nu_sq()
}

fn check_point(t: f64, a: f64) -> Result<(), CoreError> {
    if !(a > 0.0) {
        return Err(CoreError::NonPositivePowerFactor(a));
    }
    if !(t > 0.0) {
        return Err(CoreError::NonPositiveObjective(t));
    }
    Ok(())
}

/// Constraints of the one-matrix relaxation at `(t, a)` on the scaled
/// variable `Y` with `X₁ = K Y K`.
fn one_block_constraints(data: &ProblemData, budget: &PowerBudget, t: f64, a: f64) -> Vec<SdpConstraint> {
    let k = scaling_matrix(data, a);
    let mut out = Vec::new();
    for m in 0..data.destination_count() {
        let c = snr_coefficient(data, t, a, m);
        let mat = data.r_tilde(m).scaled(c).add(&data.q_tilde1(m).scaled(-1.0));
        out.push(SdpConstraint::less_eq(vec![(0, mat.congruence(&k))], c * data.sigma_nu_sq()));
    }
    for (mat, c) in power_rows(data, budget, a) {
        out.push(SdpConstraint::less_eq(vec![(0, mat.congruence(&k))], c));
    }
    out
}

/// Constraints of the two-matrix relaxation, blocks `X₁ ~ w̃₁w̃₁ᴴ` and
/// `X₂ ~ w̃₂w̃₂ᴴ`.
fn two_block_constraints(data: &ProblemData, budget: &PowerBudget, t: f64, a: f64) -> Vec<SdpConstraint> {
    let k = scaling_matrix(data, a);
    let mut out = Vec::new();
    for m in 0..data.destination_count() {
        let c = snr_coefficient(data, t, a, m);
        let r = data.r_tilde(m).scaled(c);
        let m1 = r.add(&data.q_tilde1(m).scaled(-1.0)).congruence(&k);
        let m2 = r.add(&data.q_tilde2(m).scaled(-1.0)).congruence(&k);
        out.push(SdpConstraint::less_eq(vec![(0, m1), (1, m2)], c * data.sigma_nu_sq()));
    }
    for (mat, c) in power_rows(data, budget, a) {
        let s = mat.congruence(&k);
        out.push(SdpConstraint::less_eq(vec![(0, s.clone()), (1, s)], c));
    }
    out
}

fn unscale(y: &HermitianMatrix, data: &ProblemData, a: f64) -> HermitianMatrix {
    y.congruence(&scaling_matrix(data, a))
}

/// Whether some PSD `X₁` meets every constraint of the one-matrix
/// relaxation at `(t, a)`.
pub fn sdr_feasible(
    t: f64,
    a: f64,
    data: &ProblemData,
    budget: &PowerBudget,
    solver: &SolverOptions,
) -> Result<SdrVerdict<HermitianMatrix>, CoreError> {
    check_point(t, a)?;
    let cons = one_block_constraints(data, budget, t, a);
    let rep = sdp_feasibility(&[data.block_dim()], &cons, solver)?;
    Ok(match rep.outcome {
        FeasibilityOutcome::Feasible(mut ys) => SdrVerdict::Feasible(unscale(&ys.remove(0), data, a)),
        FeasibilityOutcome::Infeasible => SdrVerdict::Infeasible,
        FeasibilityOutcome::Indeterminate => SdrVerdict::Indeterminate,
    })
}

/// Same question for the two-matrix relaxation; returns `(X₁, X₂)`.
pub fn sdr_feasible_two_block(
    t: f64,
    a: f64,
    data: &ProblemData,
    budget: &PowerBudget,
    solver: &SolverOptions,
) -> Result<SdrVerdict<(HermitianMatrix, HermitianMatrix)>, CoreError> {
    check_point(t, a)?;
    let n = data.block_dim();
    let cons = two_block_constraints(data, budget, t, a);
    let rep = sdp_feasibility(&[n, n], &cons, solver)?;
    Ok(match rep.outcome {
        FeasibilityOutcome::Feasible(ys) => {
            SdrVerdict::Feasible((unscale(&ys[0], data, a), unscale(&ys[1], data, a)))
        }
        FeasibilityOutcome::Infeasible => SdrVerdict::Infeasible,
        FeasibilityOutcome::Indeterminate => SdrVerdict::Indeterminate,
    })
}

/// Minimum SNR of the relaxation at `a`, evaluated in trace form.
pub fn trace_min_snr(x1: &HermitianMatrix, a: f64, data: &ProblemData) -> f64 {
    (0..data.destination_count())
        .map(|m| {
            let q = data.q_tilde1(m).trace_product(x1);
            let r = data.r_tilde(m).trace_product(x1);
            q / ((r + data.sigma_nu_sq()) * a) + data.d_sq(m) / (data.sigma_nu_sq() * a)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Number of eigenvalues at least `rel_tol` times the largest.
pub fn numerical_rank(x: &HermitianMatrix, rel_tol: f64) -> Result<usize, CoreError> {
    let ev = hermitian_eig(x)?.values;
    let top = ev.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Ok(0);
    }
    Ok(ev.iter().filter(|&&l| l >= rel_tol * top).count())
}

/// Exact decomposition of a matrix of rank at most two into stacked
/// weights `[w̃₁; w̃₂]` with `w̃₁ = √λ₁u₁` and `w̃₂ = Aᴴ√λ₂u₂`.
pub fn decompose_rank_two(x1: &HermitianMatrix, data: &ProblemData, rel_tol: f64) -> Result<Vec<Complex64>, CoreError> {
    let rank = numerical_rank(x1, rel_tol)?;
    if rank > 2 {
        return Err(CoreError::InvalidInput(format!("matrix has numerical rank {rank} > 2")));
    }
    let eig = hermitian_eig(x1)?;
    let n = data.block_dim();
    let part = |k: usize| -> Vec<Complex64> {
        if k < rank {
            let s = eig.values[k].max(0.0).sqrt();
            eig.vector(k).into_iter().map(|c| c * s).collect()
        } else {
            vec![Complex64::new(0.0, 0.0); n]
        }
    };
    let mut w = part(0);
    w.extend(data.undo_phase(&part(1)));
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridStatus {
    Solved,
    /// Infeasible at the incumbent's `t/(1+ε)`; cannot improve the bound.
    Pruned,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct GridPoint {
    pub a: f64,
    pub t_best: Option<f64>,
    pub status: GridStatus,
    pub checks: usize,
    pub indeterminate: usize,
}

struct Bisection {
    point: GridPoint,
    x: Option<HermitianMatrix>,
}

/// Smallest feasible `t` at fixed `a` to within a factor `1 + ε`.
///
/// Starts from `t_hint`, doubled until feasible. With an incumbent `t`,
/// first tests `t/(1+ε)` and stops if that is infeasible.
pub fn bisect_t(
    a: f64,
    data: &ProblemData,
    budget: &PowerBudget,
    opts: &SdrOptions,
    t_hint: f64,
    incumbent: Option<f64>,
) -> Result<(GridPoint, Option<HermitianMatrix>), CoreError> {
    let b = bisect(a, data, budget, opts, t_hint, incumbent)?;
    Ok((b.point, b.x))
}

fn bisect(
    a: f64,
    data: &ProblemData,
    budget: &PowerBudget,
    opts: &SdrOptions,
    t_hint: f64,
    incumbent: Option<f64>,
) -> Result<Bisection, CoreError> {
    let mut point = GridPoint {
        a,
        t_best: None,
        status: GridStatus::Infeasible,
        checks: 0,
        indeterminate: 0,
    };
    let test = |t: f64, point: &mut GridPoint| -> Result<Option<HermitianMatrix>, CoreError> {
        point.checks += 1;
        Ok(match sdr_feasible(t, a, data, budget, &opts.solver)? {
            SdrVerdict::Feasible(x) => Some(x),
            SdrVerdict::Infeasible => None,
            SdrVerdict::Indeterminate => {
                point.indeterminate += 1;
                None
            }
        })
    };

    let (mut hi, mut x_hi) = match incumbent {
        Some(tb) => {
            let t = tb / (1.0 + opts.epsilon);
            match test(t, &mut point)? {
                Some(x) => (t, x),
                None => {
                    point.status = GridStatus::Pruned;
                    return Ok(Bisection { point, x: None });
                }
            }
        }
        None => {
            let mut t = t_hint;
            let mut found = None;
            for _ in 0..MAX_DOUBLINGS {
                if let Some(x) = test(t, &mut point)? {
                    found = Some((t, x));
                    break;
                }
                t *= 2.0;
            }
            match found {
                Some(f) => f,
                None => return Ok(Bisection { point, x: None }),
            }
        }
    };

    let span = 2f64.powi(20);
    let mut lo = hi / span;
    loop {
        let mut saw_infeasible = false;
        while hi / lo > 1.0 + opts.epsilon {
            let mid = (hi * lo).sqrt();
            match test(mid, &mut point)? {
                Some(x) => {
                    hi = mid;
                    x_hi = x;
                }
                None => {
                    lo = mid;
                    saw_infeasible = true;
                }
            }
        }
        if saw_infeasible || lo < f64::MIN_POSITIVE * span {
            break;
        }
        // Never saw an infeasible point: the bracket's lower end was not
        // verified, so check it and widen if needed.
        match test(lo, &mut point)? {
            Some(x) => {
                hi = lo;
                x_hi = x;
                lo = hi / span;
            }
            None => break,
        }
    }
    point.t_best = Some(hi);
    point.status = GridStatus::Solved;
    Ok(Bisection { point, x: Some(x_hi) })
}

/// Result of the relaxation search.
#[derive(Clone, Debug)]
pub struct SdrOutcome {
    pub x1_star: HermitianMatrix,
    pub t_star: f64,
    pub a_star: f64,
    /// Numerical rank of `X₁★` in power-normalized coordinates.
    pub rank: usize,
    /// Eigenvalues of `X₁★` in power-normalized coordinates, descending.
    pub eigenvalues: Vec<f64>,
    /// Grid points in ascending `a`, then the refinement points and the
    /// final polish.
    pub grid: Vec<GridPoint>,
}

impl SdrOutcome {
    /// Upper bound on the minimum SNR.
    pub fn bound(&self) -> f64 {
        1.0 / self.t_star
    }

    pub fn bound_db(&self) -> f64 {
        -10.0 * self.t_star.log10()
    }

    pub fn checks(&self) -> usize {
        self.grid.iter().map(|g| g.checks).sum()
    }

    pub fn indeterminate(&self) -> usize {
        self.grid.iter().map(|g| g.indeterminate).sum()
    }

    pub fn grid_csv(&self) -> String {
        let mut out = String::from("a,t_best,status,checks,indeterminate\n");
        for g in &self.grid {
            let t = g.t_best.map_or(String::new(), |t| format!("{t:e}"));
            out.push_str(&format!("{:e},{t},{:?},{},{}\n", g.a, g.status, g.checks, g.indeterminate));
        }
        out
    }
}

/// Log-spaced `a` values over `(2/P_S, a_max]`; the lower end itself forces
/// zero source weights and is left out.
pub fn a_grid(budget: &PowerBudget, a_max: f64, size: usize) -> Vec<f64> {
    let a_lo = 2.0 / budget.source_cap().unwrap_or(2.0 / a_max * 1e-6);
    let ratio = (a_max / a_lo).ln();
    (1..=size).map(|i| a_lo * (ratio * i as f64 / size as f64).exp()).collect()
}

/// Coarse-to-fine visiting order, so that a good incumbent appears early.
fn visit_order(n: usize) -> Vec<usize> {
    let mut stride = n.next_power_of_two();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while stride > 0 {
        for i in (0..n).step_by(stride) {
            if !seen[i] {
                seen[i] = true;
                order.push(i);
            }
        }
        stride /= 2;
    }
    order
}

/// Grid search over `a` with bisection over `t`, a few rounds of local
/// refinement, and a minimum-power solution at the optimum.
pub fn search(data: &ProblemData, budget: &PowerBudget, opts: &SdrOptions) -> Result<SdrOutcome, CoreError> {
    if opts.grid_size == 0 {
        return Err(CoreError::InvalidInput("grid_size must be positive".into()));
    }
    budget.validate()?;
    let a_max = opts.a_max(budget);
    let grid_a = a_grid(budget, a_max, opts.grid_size);
    let mut cccp_opts = CccpOptions::new(Rank::Two, opts.seed);
    cccp_opts.a_max = Some(a_max);
    let t_hint = initial_point(data, budget, &cccp_opts, 0)?.t;

    let mut grid: Vec<Option<GridPoint>> = vec![None; grid_a.len()];
    let mut best: Option<(f64, f64, HermitianMatrix)> = None;
    for i in visit_order(grid_a.len()) {
        let b = bisect(grid_a[i], data, budget, opts, t_hint, best.as_ref().map(|b| b.0))?;
        if let (Some(t), Some(x)) = (b.point.t_best, b.x) {
            if best.as_ref().is_none_or(|bb| t < bb.0) {
                best = Some((t, grid_a[i], x));
            }
        }
        grid[i] = Some(b.point);
    }
    let mut grid: Vec<GridPoint> = grid.into_iter().map(|g| g.expect("every point visited")).collect();
    let Some((mut t_star, mut a_star, mut x_star)) = best else {
        return Err(CoreError::RelaxationInfeasible);
    };

    // Bisect log a between the incumbent and its grid neighbours.
    let step0 = if grid_a.len() > 1 {
        (grid_a[1] / grid_a[0]).ln()
    } else {
        0.0
    };
    let a_lo = grid_a[0] / step0.exp();
    let mut step = step0 / 2.0;
    for _ in 0..opts.refine_rounds {
        if step <= 0.0 {
            break;
        }
        let centre = a_star;
        for a in [centre * (-step).exp(), centre * step.exp()] {
            if a > a_max || a <= a_lo {
                continue;
            }
            let b = bisect(a, data, budget, opts, t_hint, Some(t_star))?;
            if let (Some(t), Some(x)) = (b.point.t_best, b.x) {
                if t < t_star {
                    t_star = t;
                    a_star = a;
                    x_star = x;
                }
            }
            grid.push(b.point);
        }
        step /= 2.0;
    }

    if opts.polish_epsilon < opts.epsilon {
        let (t, x, point) = polish(a_star, t_star, x_star, data, budget, opts)?;
        t_star = t;
        x_star = x;
        grid.push(point);
    }

    let x1_star = min_power_solution(t_star, a_star, data, budget, &opts.solver)?.unwrap_or(x_star);
    let y = x1_star.congruence(&inverse_scaling(data, a_star));
    let eigenvalues = hermitian_eig(&y)?.values;
    let rank = numerical_rank(&y, opts.rank_tol)?;
    Ok(SdrOutcome {
        x1_star,
        t_star,
        a_star,
        rank,
        eigenvalues,
        grid,
    })
}

/// Narrows a feasible `t_hi` at fixed `a` to precision `polish_epsilon`.
fn polish(
    a: f64,
    mut hi: f64,
    mut x_hi: HermitianMatrix,
    data: &ProblemData,
    budget: &PowerBudget,
    opts: &SdrOptions,
) -> Result<(f64, HermitianMatrix, GridPoint), CoreError> {
    let mut point = GridPoint {
        a,
        t_best: None,
        status: GridStatus::Solved,
        checks: 0,
        indeterminate: 0,
    };
    let feasible = |t: f64, point: &mut GridPoint| -> Result<Option<HermitianMatrix>, CoreError> {
        point.checks += 1;
        Ok(match sdr_feasible(t, a, data, budget, &opts.solver)? {
            SdrVerdict::Feasible(x) => Some(x),
            SdrVerdict::Infeasible => None,
            SdrVerdict::Indeterminate => {
                point.indeterminate += 1;
                None
            }
        })
    };
    let widen = (1.0 + opts.epsilon).powi(2);
    let mut lo = hi / widen;
    for _ in 0..MAX_DOUBLINGS {
        match feasible(lo, &mut point)? {
            Some(x) => {
                hi = lo;
                x_hi = x;
                lo = hi / widen;
            }
            None => break,
        }
    }
    while hi / lo > 1.0 + opts.polish_epsilon {
        let mid = (hi * lo).sqrt();
        match feasible(mid, &mut point)? {
            Some(x) => {
                hi = mid;
                x_hi = x;
            }
            None => lo = mid,
        }
    }
    point.t_best = Some(hi);
    Ok((hi, x_hi, point))
}

fn inverse_scaling(data: &ProblemData, a: f64) -> ComplexMatrix {
    let k: Vec<Complex64> = data
        .weight_scaling(a)
        .into_iter()
        .map(|v| Complex64::new(1.0 / v, 0.0))
        .collect();
    ComplexMatrix::from_diag(&k)
}

/// The feasible `X₁` of least total power at `(t, a)`, or `None` if the
/// solver does not reach optimality.
pub fn min_power_solution(
    t: f64,
    a: f64,
    data: &ProblemData,
    budget: &PowerBudget,
    solver: &SolverOptions,
) -> Result<Option<HermitianMatrix>, CoreError> {
    check_point(t, a)?;
    let n = data.block_dim();
    let mut pb = ProgramBuilder::new();
    let y = pb.add_hermitian_psd(n);
    let mut weights = vec![2.0; n];
    weights[n - 1] = 1.0;
    pb.minimize(y.trace_with(&HermitianMatrix::from_real_diag(&weights)));
    for c in one_block_constraints(data, budget, t, a) {
        let rho = c
            .terms
            .iter()
            .map(|(_, m)| m.as_matrix().frobenius_norm())
            .sum::<f64>()
            + c.constant.abs();
        let rho = if rho > 0.0 { rho } else { 1.0 };
        let mut e = LinExpr::constant(c.constant / rho);
        for (_, m) in &c.terms {
            e += y.trace_with(m) * (1.0 / rho);
        }
        pb.add_le(e, 0.0);
    }
    let sol = pb.build()?.solve(solver)?;
    if sol.status != SolveStatus::Optimal {
        return Ok(None);
    }
    Ok(Some(unscale(&y.value(&sol.x), data, a)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomizationMode {
    Rank1,
    Rank2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recovery {
    Decomposition,
    Randomized,
}

#[derive(Clone, Debug)]
pub struct Recovered {
    pub solution: BeamformerSolution,
    pub min_snr: f64,
    pub method: Recovery,
}

/// Draws `ξ ~ CN(0, X)` through the eigendecomposition of `X`.
struct GaussianSampler {
    factors: Vec<Vec<Complex64>>,
}

impl GaussianSampler {
    fn new(x: &HermitianMatrix, scale: f64) -> Result<Self, CoreError> {
        let eig = hermitian_eig(x)?;
        let factors = (0..eig.values.len())
            .filter(|&k| eig.values[k] > 0.0)
            .map(|k| {
                let s = (eig.values[k] * scale).sqrt();
                eig.vector(k).into_iter().map(|c| c * s).collect()
            })
            .collect();
        Ok(Self { factors })
    }

    fn draw<R: rand::Rng>(&self, n: usize, rng: &mut R) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for f in &self.factors {
            let z = complex_gaussian(rng);
            for (vi, fi) in v.iter_mut().zip(f) {
                *vi += fi * z;
            }
        }
        v
    }
}

/// Largest uniform power scaling that keeps `w` feasible, applied.
fn scale_to_budget(data: &ProblemData, budget: &PowerBudget, a: f64, mut w: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let beta = data.max_weight_scale(&w, a, budget, 1.0)?;
    if !beta.is_finite() {
        return None;
    }
    w.iter_mut().for_each(|c| *c *= beta);
    shrink_until_feasible(data, budget, a, w)
}

fn shrink_until_feasible(data: &ProblemData, budget: &PowerBudget, a: f64, mut w: Vec<Complex64>) -> Option<Vec<Complex64>> {
    for _ in 0..20 {
        if data.feasible(&w, a, budget).is_empty() {
            return Some(w);
        }
        w.iter_mut().for_each(|c| *c *= 1.0 - 1e-12);
        let beta = data.max_weight_scale(&w, a, budget, 1.0 - 1e-12)?;
        if beta < 1.0 {
            w.iter_mut().for_each(|c| *c *= beta);
        }
    }
    None
}

fn recovered(data: &ProblemData, a: f64, w: Vec<Complex64>, method: Recovery) -> Result<Recovered, CoreError> {
    let (snr, _) = data.min_snr(&w, a)?;
    Ok(Recovered {
        solution: BeamformerSolution { w, a, t: 1.0 / snr },
        min_snr: snr,
        method,
    })
}

/// Per-half coefficients of SNR terms and powers, linear in the power
/// scalings `(β₁, β₂)` of the two halves.
struct HalfTerms {
    q: Vec<[f64; 2]>,
    r: Vec<[f64; 2]>,
    relay: Vec<[f64; 2]>,
    source: [f64; 2],
}

impl HalfTerms {
    fn new(data: &ProblemData, a: f64, w: &[Complex64]) -> Self {
        let n = data.block_dim();
        let (h1, h2) = w.split_at(n);
        let halves = [h1, h2];
        let zero = vec![Complex64::new(0.0, 0.0); n];
        let only = |h: usize| -> Vec<Complex64> {
            let mut v = Vec::with_capacity(2 * n);
            for (k, part) in halves.iter().enumerate() {
                v.extend_from_slice(if k == h { part } else { &zero });
            }
            v
        };
        let parts = [only(0), only(1)];
        let m = data.destination_count();
        let r = data.relay_count();
        HalfTerms {
            q: (0..m).map(|i| [data.quad_q(i, &parts[0]), data.quad_q(i, &parts[1])]).collect(),
            r: (0..m).map(|i| [data.quad_r(i, &parts[0]), data.quad_r(i, &parts[1])]).collect(),
            relay: (0..r)
                .map(|j| {
                    [
                        data.relay_power(j, &parts[0], a).expect("positive a"),
                        data.relay_power(j, &parts[1], a).expect("positive a"),
                    ]
                })
                .collect(),
            source: [0, 1].map(|h| 2.0 * halves[h][n - 1].norm_sqr() / a),
        }
    }

    fn scalar(v: f64) -> HermitianMatrix {
        HermitianMatrix::from_real_diag(&[v])
    }

    /// Constraints on `(β₁, β₂)` for minimum SNR `s`, as `1×1` PSD blocks.
    fn constraints(&self, data: &ProblemData, budget: &PowerBudget, a: f64, s: f64) -> Vec<SdpConstraint> {
        let mut out = Vec::new();
        let lin = |c: [f64; 2], k: f64| -> SdpConstraint {
            SdpConstraint::less_eq(vec![(0, Self::scalar(c[0])), (1, Self::scalar(c[1]))], k)
        };
        for m in 0..self.q.len() {
            let c = a * s - data.d_sq(m) / data.sigma_nu_sq();
            let coef = [0, 1].map(|h| c * self.r[m][h] - self.q[m][h]);
            out.push(lin(coef, c * data.sigma_nu_sq()));
        }
        let relay_sum = self
            .relay
            .iter()
            .fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
        if let Some(p) = budget.relay_max {
            out.extend(self.relay.iter().map(|c| lin(*c, -p)));
        }
        if let Some(p) = budget.relay_sum_max {
            out.push(lin(relay_sum, -p));
        }
        if let Some(p) = budget.source_max {
            out.push(lin(self.source, 2.0 / a - p));
        }
        if let Some(p) = budget.total_max {
            let c = [0, 1].map(|h| self.source[h] + 2.0 * relay_sum[h]);
            out.push(lin(c, 2.0 / a - p));
        }
        out
    }
}

/// Power scalings of the two halves that maximize the minimum SNR, by
/// bisection over the target with an LP feasibility test at each step.
fn scale_pair(
    data: &ProblemData,
    budget: &PowerBudget,
    a: f64,
    w: &[Complex64],
    s_max: f64,
    solver: &SolverOptions,
) -> Result<Option<[f64; 2]>, CoreError> {
    let terms = HalfTerms::new(data, a, w);
    let value = |beta: &[HermitianMatrix]| [beta[0][(0, 0)].re.max(0.0), beta[1][(0, 0)].re.max(0.0)];
    let mut lo = (0..data.destination_count())
        .map(|m| data.d_sq(m) / (data.sigma_nu_sq() * a))
        .fold(f64::INFINITY, f64::min);
    let mut hi = s_max;
    let mut best = None;
    for _ in 0..60 {
        if hi <= lo * (1.0 + 1e-4) {
            break;
        }
        let s = if lo > 0.0 { (lo * hi).sqrt() } else { hi / 2.0 };
        let cons = terms.constraints(data, budget, a, s);
        match sdp_feasibility(&[1, 1], &cons, solver)?.outcome {
            FeasibilityOutcome::Feasible(b) => {
                best = Some(value(&b));
                lo = s;
            }
            _ => hi = s,
        }
    }
    Ok(best)
}

/// Best of `n_candidates` Gaussian candidates drawn around `x1`, made
/// feasible at power factor `a`.
#[allow(clippy::too_many_arguments)]
pub fn randomize(
    x1: &HermitianMatrix,
    a: f64,
    data: &ProblemData,
    budget: &PowerBudget,
    n_candidates: usize,
    mode: RandomizationMode,
    seed: u64,
    solver: &SolverOptions,
) -> Result<Recovered, CoreError> {
    if !(a > 0.0) {
        return Err(CoreError::NonPositivePowerFactor(a));
    }
    let n = data.block_dim();
    let mut rng = stream_rng(seed, RANDOMIZATION_STREAM);
    let mut best: Option<Recovered> = None;
    let mut keep = |cand: Recovered| {
        if best.as_ref().is_none_or(|b| cand.min_snr > b.min_snr) {
            best = Some(cand);
        }
    };
    match mode {
        RandomizationMode::Rank1 => {
            let sampler = GaussianSampler::new(x1, 1.0)?;
            for _ in 0..n_candidates {
                let mut w = sampler.draw(n, &mut rng);
                w.resize(2 * n, Complex64::new(0.0, 0.0));
                if let Some(w) = scale_to_budget(data, budget, a, w) {
                    keep(recovered(data, a, w, Recovery::Randomized)?);
                }
            }
        }
        RandomizationMode::Rank2 => {
            let sampler = GaussianSampler::new(x1, 0.5)?;
            let s_max = 2.0 * trace_min_snr(x1, a, data).max(f64::MIN_POSITIVE);
            for _ in 0..n_candidates {
                let mut w = sampler.draw(n, &mut rng);
                let w2 = sampler.draw(n, &mut rng);
                w.extend(data.undo_phase(&w2));
                let Some(beta) = scale_pair(data, budget, a, &w, s_max, solver)? else {
                    continue;
                };
                let (h1, h2) = (beta[0].sqrt(), beta[1].sqrt());
                for (i, c) in w.iter_mut().enumerate() {
                    *c *= if i < n { h1 } else { h2 };
                }
                if let Some(w) = shrink_until_feasible(data, budget, a, w) {
                    keep(recovered(data, a, w, Recovery::Randomized)?);
                }
            }
        }
    }
    best.ok_or(CoreError::RandomizationFailed)
}

/// Rank-one weights from `X₁★`: the principal component when the rank is
/// one, randomization otherwise.
pub fn recover_rank_one(
    out: &SdrOutcome,
    data: &ProblemData,
    budget: &PowerBudget,
    opts: &SdrOptions,
) -> Result<Recovered, CoreError> {
    if out.rank <= 1 {
        let mut w = decompose_rank_two(&out.x1_star, data, opts.rank_tol)?;
        let n = data.block_dim();
        w[n..].iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        if let Some(w) = shrink_until_feasible(data, budget, out.a_star, w) {
            return recovered(data, out.a_star, w, Recovery::Decomposition);
        }
    }
    randomize(
        &out.x1_star,
        out.a_star,
        data,
        budget,
        opts.n_candidates,
        RandomizationMode::Rank1,
        opts.seed,
        &opts.solver,
    )
}

/// Rank-two weights from `X₁★`: the exact decomposition when the rank is at
/// most two, randomization otherwise.
pub fn recover_rank_two(
    out: &SdrOutcome,
    data: &ProblemData,
    budget: &PowerBudget,
    opts: &SdrOptions,
) -> Result<Recovered, CoreError> {
    if out.rank <= 2 {
        let w = decompose_rank_two(&out.x1_star, data, opts.rank_tol)?;
        if let Some(w) = shrink_until_feasible(data, budget, out.a_star, w) {
            return recovered(data, out.a_star, w, Recovery::Decomposition);
        }
    }
    randomize(
        &out.x1_star,
        out.a_star,
        data,
        budget,
        opts.n_candidates,
        RandomizationMode::Rank2,
        opts.seed,
        &opts.solver,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Normalization;
    use crate::scenario::Scenario;

    fn instance(r: usize, m: usize, seed: u64) -> (ProblemData, PowerBudget) {
        let raw = Scenario::reference(r, m).generate(seed).unwrap();
        let budget = PowerBudget::from_total(crate::units::dbm_to_watt(30.0));
        let norm = Normalization::for_instance(&raw, &budget);
        (ProblemData::build(&norm.channels(&raw)).unwrap(), norm.budget(&budget))
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&HermitianMatrix::identity(4), 1e-6).unwrap(), 4);
        let u = vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 1.0)];
        assert_eq!(numerical_rank(&HermitianMatrix::outer(&u), 1e-6).unwrap(), 1);
        let v = vec![c(0.5, 0.0), c(1.0, -1.0), c(0.2, 0.1)];
        let x = HermitianMatrix::outer(&u).add(&HermitianMatrix::outer(&v).scaled(1e-9 * 1.75 / 2.8));
        assert_eq!(numerical_rank(&x, 1e-6).unwrap(), 1);
        assert_eq!(numerical_rank(&HermitianMatrix::zeros(3), 1e-6).unwrap(), 0);
    }

    #[test]
    fn large_t_is_feasible_and_tiny_t_is_not() {
        let (data, budget) = instance(3, 2, 1);
        let s = SolverOptions::default().with_tol(1e-7);
        assert!(sdr_feasible(1e6, 10.0, &data, &budget, &s).unwrap().is_feasible());
        assert!(matches!(
            sdr_feasible(1e-12, 10.0, &data, &budget, &s).unwrap(),
            SdrVerdict::Infeasible
        ));
    }

    #[test]
    fn visit_order_covers_every_point_once() {
        for n in [1, 2, 7, 200] {
            let mut o = visit_order(n);
            o.sort_unstable();
            assert_eq!(o, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn grid_spans_the_admissible_range() {
        let b = PowerBudget::from_total(1.0);
        let g = a_grid(&b, 4e6, 200);
        assert_eq!(g.len(), 200);
        assert!(g[0] > 4.0 && (g[199] - 4e6).abs() < 1e-6);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bound_dominates_recovered_solutions() {
        let (data, budget) = instance(3, 3, 2);
        let mut opts = SdrOptions::new(1);
        opts.grid_size = 24;
        opts.n_candidates = 20;
        let out = search(&data, &budget, &opts).unwrap();
        let bound = out.bound() * (1.0 + opts.epsilon);
        for rec in [
            recover_rank_one(&out, &data, &budget, &opts).unwrap(),
            recover_rank_two(&out, &data, &budget, &opts).unwrap(),
        ] {
            assert!(rec.min_snr <= bound);
            assert!(data.feasible(&rec.solution.w, rec.solution.a, &budget).is_empty());
        }
    }
}
