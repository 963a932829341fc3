//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling
//! and Mehrotra predictor-corrector steps.
//!
//! The embedding solved is
//!
//! ```text
//! [0]   [ 0   Aᵀ  Gᵀ  c] [x]
//! [0] = [−A   0   0   b] [y]
//! [s]   [−G   0   0   h] [z]
//! [κ]   [−cᵀ −bᵀ −hᵀ  0] [τ]
//! ```
//!
//! with `s, z ∈ K` and `τ, κ ≥ 0`. Rotated cones are rewritten as ordinary
//! second-order cones before the iteration starts.

use relaycast_linalg::{LuFactor, RealMatrix};

use crate::cone::{norm, Cone};
use crate::program::{ConeProgram, SparseCols};
use crate::scaling::{identity, interior_margin, jordan_product, max_step, Kind, Scaling};
use crate::ConicError;

const STEP_FRACTION: f64 = 0.99;
const REFINEMENT_STEPS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Tolerance on relative primal and dual residuals and on the gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Static diagonal regularization of the reduced KKT system.
    pub regularization: f64,
    /// Stop once a primal-feasible iterate has objective at or below this.
    pub primal_target: Option<f64>,
    /// Stop once a dual-feasible iterate proves the optimum is at or above
    /// this.
    pub dual_target: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            regularization: 1e-10,
            primal_target: None,
            dual_target: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_targets(mut self, primal: Option<f64>, dual: Option<f64>) -> Self {
        self.primal_target = primal;
        self.dual_target = dual;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// `y`, `z` hold a certificate with `Aᵀy + Gᵀz ≈ 0`, `hᵀz + bᵀy = −1`.
    PrimalInfeasible,
    /// `x`, `s` hold a certificate with `Ax ≈ 0`, `Gx + s ≈ 0`, `cᵀx = −1`.
    DualInfeasible,
    /// Iteration cap or numerical breakdown; the best iterate is returned.
    NumericLimit,
    /// A primal-feasible iterate attained the objective target.
    PrimalTargetReached,
    /// A dual-feasible iterate certified the optimum is at least the target.
    DualTargetReached,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Per-iteration summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationInfo {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct ConeSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Multipliers of the equality constraints.
    pub y: Vec<f64>,
    /// Multipliers of the cone constraints, in the program's row order.
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub history: Vec<IterationInfo>,
}

impl ConeProgram {
    pub fn solve(&self, opts: &SolverOptions) -> Result<ConeSolution, ConicError> {
        if !(opts.tol > 0.0) || !(opts.regularization >= 0.0) {
            return Err(ConicError::InvalidOptions);
        }
        let lowered = Lowered::new(self);
        Ok(lowered.run(self, opts))
    }
}

#[derive(Clone, Copy, Debug)]
struct Block {
    kind: Kind,
    off: usize,
    dim: usize,
}

/// Per-block data for assembling `Gᵀ W⁻¹ W⁻ᵀ G`.
enum HessianPart {
    /// Orthant rows as sparse `(column, value)` lists.
    Rows(Vec<Vec<(usize, f64)>>),
    /// Dense column slices of `G` restricted to the block.
    Dense { cols: Vec<usize>, data: Vec<Vec<f64>> },
    /// PSD block whose columns are sparse matrices `(i, j, value)`, listed
    /// in both triangles.
    PsdSparse {
        cols: Vec<usize>,
        entries: Vec<Vec<(usize, usize, f64)>>,
    },
}

struct Lowered {
    n: usize,
    p: usize,
    c: Vec<f64>,
    a: SparseCols,
    b: Vec<f64>,
    g: SparseCols,
    h: Vec<f64>,
    blocks: Vec<Block>,
    hess: Vec<HessianPart>,
    /// `(offset, dim)` of blocks that were rotated cones.
    rotated: Vec<(usize, usize)>,
    degree: usize,
}

const SQRT2: f64 = std::f64::consts::SQRT_2;
const ISQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// `T` on one rotated block: `(u, v, z) ↦ ((u+v)/√2, (u−v)/√2, √2 z)`.
fn rotate_forward(x: &mut [f64]) {
    let (u, v) = (x[0], x[1]);
    x[0] = (u + v) * ISQRT2;
    x[1] = (u - v) * ISQRT2;
    x[2..].iter_mut().for_each(|t| *t *= SQRT2);
}

/// `T⁻¹`
fn rotate_inverse(x: &mut [f64]) {
    let (p, q) = (x[0], x[1]);
    x[0] = (p + q) * ISQRT2;
    x[1] = (p - q) * ISQRT2;
    x[2..].iter_mut().for_each(|t| *t *= ISQRT2);
}

/// `Tᵀ`
fn rotate_adjoint(x: &mut [f64]) {
    rotate_forward(x);
}

impl Lowered {
    fn new(p: &ConeProgram) -> Self {
        let m = p.h.len();
        let mut blocks = Vec::with_capacity(p.cones.len());
        let mut rotated = Vec::new();
        let mut degree = 0;
        for (cone, &off) in p.cones.iter().zip(&p.offsets) {
            let dim = cone.dim();
            let kind = match *cone {
                Cone::Nonneg(_) => Kind::Nonneg,
                Cone::Soc(_) => Kind::Soc,
                Cone::RotatedSoc(_) => {
                    rotated.push((off, dim));
                    Kind::Soc
                }
                Cone::Psd(n) => Kind::Psd(n),
            };
            degree += cone.degree();
            blocks.push(Block { kind, off, dim });
        }

        let mut h = p.h.clone();
        let mut g = p.g.clone();
        if !rotated.is_empty() {
            for &(off, dim) in &rotated {
                rotate_forward(&mut h[off..off + dim]);
            }
            let mut dense = vec![0.0; m];
            for col in g.cols.iter_mut() {
                if col.is_empty() {
                    continue;
                }
                for &(i, v) in col.iter() {
                    dense[i] = v;
                }
                let touched: Vec<(usize, usize)> = rotated
                    .iter()
                    .copied()
                    .filter(|&(off, dim)| col.iter().any(|&(i, _)| i >= off && i < off + dim))
                    .collect();
                for &(off, dim) in &touched {
                    rotate_forward(&mut dense[off..off + dim]);
                }
                let mut rows: Vec<usize> = col.iter().map(|t| t.0).collect();
                for &(off, dim) in &touched {
                    rows.extend(off..off + dim);
                }
                rows.sort_unstable();
                rows.dedup();
                col.clear();
                for i in rows {
                    if dense[i] != 0.0 {
                        col.push((i, dense[i]));
                    }
                    dense[i] = 0.0;
                }
            }
        }

        let hess = blocks.iter().map(|b| hessian_part(&g, b)).collect();
        Self {
            n: p.n,
            p: p.b.len(),
            c: p.c.clone(),
            a: p.a.clone(),
            b: p.b.clone(),
            g,
            h,
            blocks,
            hess,
            rotated,
            degree,
        }
    }

    fn map_back_s(&self, s: &mut [f64]) {
        for &(off, dim) in &self.rotated {
            rotate_inverse(&mut s[off..off + dim]);
        }
    }

    fn map_back_z(&self, z: &mut [f64]) {
        for &(off, dim) in &self.rotated {
            rotate_adjoint(&mut z[off..off + dim]);
        }
    }

    fn per_block(&self, scal: &[Scaling], v: &[f64], f: impl Fn(&Scaling, &[f64]) -> Vec<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(v.len());
        for (b, sc) in self.blocks.iter().zip(scal) {
            out.extend(f(sc, &v[b.off..b.off + b.dim]));
        }
        out
    }

    fn initial_scalings(&self) -> Vec<Scaling> {
        self.blocks
            .iter()
            .map(|b| match b.kind {
                Kind::Nonneg => Scaling::Nonneg { d: vec![1.0; b.dim] },
                Kind::Soc => Scaling::Soc {
                    beta: 1.0,
                    w: identity(Kind::Soc, b.dim),
                },
                Kind::Psd(n) => Scaling::Psd {
                    n,
                    r: RealMatrix::identity(n),
                    rinv: RealMatrix::identity(n),
                    m: RealMatrix::identity(n),
                    lambda: vec![1.0; n],
                },
            })
            .collect()
    }

    /// Shifts `x` into the interior along `e` when needed.
    fn make_interior(&self, x: &mut [f64]) {
        let nrm = norm(x).max(1.0);
        let ts = self
            .blocks
            .iter()
            .map(|b| -interior_margin(b.kind, &x[b.off..b.off + b.dim]))
            .fold(f64::NEG_INFINITY, f64::max);
        if ts >= -1e-8 * nrm {
            for b in &self.blocks {
                let e = identity(b.kind, b.dim);
                for (xi, ei) in x[b.off..b.off + b.dim].iter_mut().zip(e) {
                    *xi += (1.0 + ts) * ei;
                }
            }
        }
    }

    fn run(&self, prog: &ConeProgram, opts: &SolverOptions) -> ConeSolution {
        let (n, p) = (self.n, self.p);
        let m = self.h.len();
        let c0 = prog.c0;
        let resx0 = norm(&self.c).max(1.0);
        let resy0 = norm(&self.b).max(1.0);
        let resz0 = norm(&self.h).max(1.0);
        let tol = opts.tol;

        let mut history = Vec::new();
        let fail = |x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, s: Vec<f64>, history: Vec<IterationInfo>, it| {
            ConeSolution {
                status: SolveStatus::NumericLimit,
                x,
                y,
                z,
                s,
                primal_objective: f64::NAN,
                dual_objective: f64::NAN,
                residuals: Residuals {
                    primal: f64::INFINITY,
                    dual: f64::INFINITY,
                    gap: f64::INFINITY,
                },
                iterations: it,
                history,
            }
        };

        // Initial point from two least-squares problems with W = I.
        let scal0 = self.initial_scalings();
        let Some(kkt0) = Kkt::new(self, &scal0, opts.regularization) else {
            return fail(vec![0.0; n], vec![0.0; p], vec![0.0; m], vec![0.0; m], history, 0);
        };
        let (mut x, _, zp) = kkt0.solve(self, &scal0, &vec![0.0; n], &self.b, &self.h);
        let mut s: Vec<f64> = zp.iter().map(|v| -v).collect();
        let neg_c: Vec<f64> = self.c.iter().map(|v| -v).collect();
        let (_, mut y, mut z) = kkt0.solve(self, &scal0, &neg_c, &vec![0.0; p], &vec![0.0; m]);
        self.make_interior(&mut s);
        self.make_interior(&mut z);
        let mut tau = 1.0;
        let mut kappa = 1.0;

        let e_full: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| identity(b.kind, b.dim))
            .collect();

        struct Best {
            merit: f64,
            x: Vec<f64>,
            y: Vec<f64>,
            z: Vec<f64>,
            s: Vec<f64>,
            pcost: f64,
            dcost: f64,
            res: Residuals,
        }
        let mut best: Option<Best> = None;
        let mut last_step = 0.0;

        for iter in 0..=opts.max_iter {
            let ax = self.a.mul(&x);
            let gx = self.g.mul(&x);
            let aty = self.a.tmul(&y);
            let gtz = self.g.tmul(&z);
            let cx = dot(&self.c, &x);
            let by = dot(&self.b, &y);
            let hz = dot(&self.h, &z);
            let f1: Vec<f64> = (0..n).map(|i| aty[i] + gtz[i] + self.c[i] * tau).collect();
            let ry: Vec<f64> = (0..p).map(|i| ax[i] - self.b[i] * tau).collect();
            let rz: Vec<f64> = (0..m).map(|i| gx[i] + s[i] - self.h[i] * tau).collect();
            let f4 = -cx - by - hz - kappa;
            let sz = dot(&s, &z);

            let pcost = cx / tau;
            let dcost = -(by + hz) / tau;
            let gap = sz / (tau * tau);
            let relgap = if pcost < 0.0 {
                gap / -pcost
            } else if dcost > 0.0 {
                gap / dcost
            } else {
                f64::INFINITY
            };
            let pres = (norm(&ry) / resy0).max(norm(&rz) / resz0) / tau;
            let dres = norm(&f1) / resx0 / tau;
            let res = Residuals {
                primal: pres,
                dual: dres,
                gap: gap.min(relgap),
            };
            history.push(IterationInfo {
                primal_objective: pcost + c0,
                dual_objective: dcost + c0,
                residuals: res,
                step: last_step,
            });

            let finish = |status: SolveStatus, x: &[f64], y: &[f64], z: &[f64], s: &[f64], scale: f64, history: Vec<IterationInfo>| {
                let mut zz: Vec<f64> = z.iter().map(|v| v * scale).collect();
                let mut ss: Vec<f64> = s.iter().map(|v| v * scale).collect();
                self.map_back_s(&mut ss);
                self.map_back_z(&mut zz);
                ConeSolution {
                    status,
                    x: x.iter().map(|v| v * scale).collect(),
                    y: y.iter().map(|v| v * scale).collect(),
                    z: zz,
                    s: ss,
                    primal_objective: pcost + c0,
                    dual_objective: dcost + c0,
                    residuals: res,
                    iterations: iter,
                    history,
                }
            };

            if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
                break;
            }
            if pres <= tol && dres <= tol && (gap <= tol || relgap <= tol) {
                return finish(SolveStatus::Optimal, &x, &y, &z, &s, 1.0 / tau, history);
            }
            if opts.primal_target.is_some_and(|t| pres <= tol && pcost + c0 <= t) {
                return finish(SolveStatus::PrimalTargetReached, &x, &y, &z, &s, 1.0 / tau, history);
            }
            if opts.dual_target.is_some_and(|t| dres <= tol && dcost + c0 >= t) {
                return finish(SolveStatus::DualTargetReached, &x, &y, &z, &s, 1.0 / tau, history);
            }
            if hz + by < 0.0 {
                let pinf = norm(&self.a.tmul(&y).iter().zip(&gtz).map(|(a, b)| a + b).collect::<Vec<_>>())
                    / resx0
                    / (-hz - by);
                if pinf <= tol {
                    let k = 1.0 / (-hz - by);
                    let mut out = finish(SolveStatus::PrimalInfeasible, &vec![0.0; n], &y, &z, &vec![0.0; m], k, history);
                    out.primal_objective = f64::INFINITY;
                    out.dual_objective = f64::INFINITY;
                    return out;
                }
            }
            if cx < 0.0 {
                let gxs: Vec<f64> = gx.iter().zip(&s).map(|(a, b)| a + b).collect();
                let dinf = (norm(&ax) / resy0).max(norm(&gxs) / resz0) / (-cx);
                if dinf <= tol {
                    let k = 1.0 / (-cx);
                    let mut out = finish(SolveStatus::DualInfeasible, &x, &vec![0.0; p], &vec![0.0; m], &s, k, history);
                    out.primal_objective = f64::NEG_INFINITY;
                    out.dual_objective = f64::NEG_INFINITY;
                    return out;
                }
            }

            let merit = pres.max(dres).max(res.gap);
            if best.as_ref().is_none_or(|b| merit < b.merit) {
                best = Some(Best {
                    merit,
                    x: x.iter().map(|v| v / tau).collect(),
                    y: y.iter().map(|v| v / tau).collect(),
                    z: z.iter().map(|v| v / tau).collect(),
                    s: s.iter().map(|v| v / tau).collect(),
                    pcost: pcost + c0,
                    dcost: dcost + c0,
                    res,
                });
            }
            if iter == opts.max_iter {
                break;
            }

            // Scaling and factorization.
            let mut scal = Vec::with_capacity(self.blocks.len());
            for blk in &self.blocks {
                let r = blk.off..blk.off + blk.dim;
                match Scaling::new(blk.kind, &s[r.clone()], &z[r]) {
                    Some(sc) => scal.push(sc),
                    None => break,
                }
            }
            if scal.len() != self.blocks.len() {
                break;
            }
            let lambda = self.per_block(&scal, &z, |sc, zb| sc.lambda(zb));
            let Some(kkt) = Kkt::new(self, &scal, opts.regularization) else {
                break;
            };

            let (dx1, dy1, dz1_sc) = kkt.solve(self, &scal, &neg_c, &self.b, &self.h);
            let dz1 = self.per_block(&scal, &dz1_sc, |sc, v| sc.winv(v));
            let q1 = dot(&self.c, &dx1) + dot(&self.b, &dy1) + dot(&self.h, &dz1);
            let mu = (sz + tau * kappa) / (self.degree as f64 + 1.0);

            let lam_sq: Vec<f64> = self.blocks_map2(&lambda, &lambda, jordan_product);

            let mut sigma = 0.0;
            let mut affine: Option<(Vec<f64>, Vec<f64>, f64, f64)> = None;
            let mut step_taken = None;
            for phase in 0..2 {
                let eta = if phase == 0 { 1.0 } else { 1.0 - sigma };
                let (rc, rc_tau) = match &affine {
                    None => (lam_sq.iter().map(|v| -v).collect::<Vec<_>>(), -tau * kappa),
                    Some((dsa, dza, dta, dka)) => {
                        let cross = self.blocks_map2(dsa, dza, jordan_product);
                        let rc = (0..m)
                            .map(|i| -lam_sq[i] - cross[i] + sigma * mu * e_full[i])
                            .collect();
                        (rc, -tau * kappa - dta * dka + sigma * mu)
                    }
                };
                let bs = self.per_block_pair(&scal, &lambda, &rc);
                let wt_bs = self.per_block(&scal, &bs, |sc, v| sc.wt(v));
                let r1: Vec<f64> = f1.iter().map(|v| -eta * v).collect();
                let r2: Vec<f64> = ry.iter().map(|v| -eta * v).collect();
                let r3: Vec<f64> = (0..m).map(|i| -eta * rz[i] - wt_bs[i]).collect();
                let (dx2, dy2, dz2_sc) = kkt.solve(self, &scal, &r1, &r2, &r3);
                let dz2 = self.per_block(&scal, &dz2_sc, |sc, v| sc.winv(v));
                let q2 = dot(&self.c, &dx2) + dot(&self.b, &dy2) + dot(&self.h, &dz2);
                let dtau = (tau * (q2 - eta * f4) + rc_tau) / (kappa - tau * q1);
                let dx: Vec<f64> = (0..n).map(|i| dx2[i] + dtau * dx1[i]).collect();
                let dy: Vec<f64> = (0..p).map(|i| dy2[i] + dtau * dy1[i]).collect();
                let dz_sc: Vec<f64> = (0..m).map(|i| dz2_sc[i] + dtau * dz1_sc[i]).collect();
                // ds from the linearized primal equation rather than
                // Wᵀ(bs − dz_sc), which loses accuracy as W degenerates.
                let gdx = self.g.mul(&dx);
                let ds: Vec<f64> = (0..m)
                    .map(|i| -gdx[i] + self.h[i] * dtau - eta * rz[i])
                    .collect();
                let ds_sc = self.per_block(&scal, &ds, |sc, v| sc.wint(v));
                let dkappa = (rc_tau - kappa * dtau) / tau;

                let mut amax = f64::INFINITY;
                for blk in &self.blocks {
                    let r = blk.off..blk.off + blk.dim;
                    amax = amax
                        .min(max_step(blk.kind, &lambda[r.clone()], &ds_sc[r.clone()]))
                        .min(max_step(blk.kind, &lambda[r.clone()], &dz_sc[r]));
                }
                if dtau < 0.0 {
                    amax = amax.min(-tau / dtau);
                }
                if dkappa < 0.0 {
                    amax = amax.min(-kappa / dkappa);
                }
                if phase == 0 {
                    let a = amax.min(1.0);
                    sigma = (1.0 - a).powi(3);
                    affine = Some((ds_sc, dz_sc, dtau, dkappa));
                } else {
                    let alpha = (STEP_FRACTION * amax).min(1.0);
                    step_taken = Some((alpha, dx, dy, ds, dz_sc, dtau, dkappa));
                }
            }
            let Some((alpha, dx, dy, ds, dz_sc, dtau, dkappa)) = step_taken else {
                break;
            };
            if !(alpha > 1e-12) || !alpha.is_finite() {
                break;
            }
            // Additive updates keep the linear residuals exactly on their
            // (1 − αη) trajectory; the scaled step only chose α.
            let dz = self.per_block(&scal, &dz_sc, |sc, v| sc.winv(v));
            let mut alpha = alpha;
            let mut s_new;
            let mut z_new;
            loop {
                s_new = (0..m).map(|i| s[i] + alpha * ds[i]).collect::<Vec<_>>();
                z_new = (0..m).map(|i| z[i] + alpha * dz[i]).collect::<Vec<_>>();
                if self.is_interior(&s_new) && self.is_interior(&z_new) {
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    break;
                }
            }
            if alpha < 1e-12 {
                break;
            }
            s = s_new;
            z = z_new;
            for i in 0..n {
                x[i] += alpha * dx[i];
            }
            for i in 0..p {
                y[i] += alpha * dy[i];
            }
            tau += alpha * dtau;
            kappa += alpha * dkappa;
            last_step = alpha;
            if !(tau > 0.0 && kappa > 0.0) {
                break;
            }
        }

        match best {
            Some(b) => {
                let mut s = b.s;
                let mut z = b.z;
                self.map_back_s(&mut s);
                self.map_back_z(&mut z);
                let iterations = history.len().saturating_sub(1);
                ConeSolution {
                    status: SolveStatus::NumericLimit,
                    x: b.x,
                    y: b.y,
                    z,
                    s,
                    primal_objective: b.pcost,
                    dual_objective: b.dcost,
                    residuals: b.res,
                    iterations,
                    history,
                }
            }
            None => {
                let it = history.len();
                fail(x, y, z, s, history, it)
            }
        }
    }

    fn is_interior(&self, x: &[f64]) -> bool {
        self.blocks
            .iter()
            .all(|b| interior_margin(b.kind, &x[b.off..b.off + b.dim]) > 0.0)
    }

    fn blocks_map2(&self, u: &[f64], v: &[f64], f: fn(Kind, &[f64], &[f64]) -> Vec<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(u.len());
        for b in &self.blocks {
            let r = b.off..b.off + b.dim;
            out.extend(f(b.kind, &u[r.clone()], &v[r]));
        }
        out
    }

    /// `λ ⊘ r` blockwise.
    fn per_block_pair(&self, scal: &[Scaling], lambda: &[f64], r: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(r.len());
        for (b, sc) in self.blocks.iter().zip(scal) {
            let rr = b.off..b.off + b.dim;
            out.extend(sc.lambda_div(&lambda[rr.clone()], &r[rr]));
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn hessian_part(g: &SparseCols, b: &Block) -> HessianPart {
    let range = b.off..b.off + b.dim;
    let mut cols = Vec::new();
    let mut slices: Vec<Vec<(usize, f64)>> = Vec::new();
    for (j, col) in g.cols.iter().enumerate() {
        let part: Vec<(usize, f64)> = col
            .iter()
            .filter(|(i, _)| range.contains(i))
            .map(|&(i, v)| (i - b.off, v))
            .collect();
        if !part.is_empty() {
            cols.push(j);
            slices.push(part);
        }
    }
    match b.kind {
        Kind::Nonneg => {
            let mut rows = vec![Vec::new(); b.dim];
            for (&j, part) in cols.iter().zip(&slices) {
                for &(i, v) in part {
                    rows[i].push((j, v));
                }
            }
            HessianPart::Rows(rows)
        }
        Kind::Psd(n) if slices.iter().all(|p| p.len() <= n) => {
            let pos: Vec<(usize, usize)> = (0..n).flat_map(|j| (j..n).map(move |i| (i, j))).collect();
            let entries = slices
                .iter()
                .map(|part| {
                    let mut out = Vec::with_capacity(2 * part.len());
                    for &(k, v) in part {
                        let (i, j) = pos[k];
                        if i == j {
                            out.push((i, i, v));
                        } else {
                            out.push((i, j, v * ISQRT2));
                            out.push((j, i, v * ISQRT2));
                        }
                    }
                    out
                })
                .collect();
            HessianPart::PsdSparse { cols, entries }
        }
        _ => {
            let data = slices
                .iter()
                .map(|part| {
                    let mut d = vec![0.0; b.dim];
                    for &(i, v) in part {
                        d[i] = v;
                    }
                    d
                })
                .collect();
            HessianPart::Dense { cols, data }
        }
    }
}

/// Factored reduced system `[H + δI, Aᵀ; A, −δI]` with `H = Gᵀ W⁻¹ W⁻ᵀ G`.
struct Kkt {
    lu: LuFactor<f64>,
    /// Unregularized reduced matrix for iterative refinement.
    exact: RealMatrix,
}

impl Kkt {
    fn new(low: &Lowered, scal: &[Scaling], reg: f64) -> Option<Self> {
        let (n, p) = (low.n, low.p);
        let dim = n + p;
        let mut k = RealMatrix::zeros(dim, dim);
        for (part, (blk, sc)) in low.hess.iter().zip(low.blocks.iter().zip(scal)) {
            match (part, sc) {
                (HessianPart::Rows(rows), Scaling::Nonneg { d }) => {
                    for (row, di) in rows.iter().zip(d) {
                        let w = 1.0 / (di * di);
                        for &(a, va) in row {
                            for &(b, vb) in row {
                                k[(a, b)] += w * va * vb;
                            }
                        }
                    }
                }
                (HessianPart::Dense { cols, data }, _) => {
                    let scaled: Vec<Vec<f64>> = data.iter().map(|col| sc.wint(col)).collect();
                    for (ia, &a) in cols.iter().enumerate() {
                        for (ib, &b) in cols.iter().enumerate().skip(ia) {
                            let v = dot(&scaled[ia], &scaled[ib]);
                            k[(a, b)] += v;
                            if a != b {
                                k[(b, a)] += v;
                            }
                        }
                    }
                }
                (HessianPart::PsdSparse { cols, entries }, Scaling::Psd { m, .. }) => {
                    for (ia, &a) in cols.iter().enumerate() {
                        for (ib, &b) in cols.iter().enumerate().skip(ia) {
                            let mut v = 0.0;
                            for &(i, j, alpha) in &entries[ia] {
                                for &(kk, l, beta) in &entries[ib] {
                                    v += alpha * beta * m[(j, kk)] * m[(l, i)];
                                }
                            }
                            k[(a, b)] += v;
                            if a != b {
                                k[(b, a)] += v;
                            }
                        }
                    }
                }
                _ => unreachable!("scaling kind does not match block {:?}", blk.kind),
            }
        }
        for (j, col) in low.a.cols.iter().enumerate() {
            for &(i, v) in col {
                k[(n + i, j)] = v;
                k[(j, n + i)] = v;
            }
        }
        let exact = k.clone();
        for i in 0..n {
            k[(i, i)] += reg;
        }
        for i in n..dim {
            k[(i, i)] -= reg;
        }
        if !k.is_finite() {
            return None;
        }
        let lu = LuFactor::new(&k).ok()?;
        Some(Self { lu, exact })
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −WᵀW] [dx; dy; dz] = [r1; r2; r3]`,
    /// returning `dz` in scaled form `W dz`.
    fn solve(
        &self,
        low: &Lowered,
        scal: &[Scaling],
        r1: &[f64],
        r2: &[f64],
        r3: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = low.n;
        let u3 = low.per_block(scal, r3, |sc, v| sc.wint(v));
        let t = low.per_block(scal, &u3, |sc, v| sc.winv(v));
        let gt = low.g.tmul(&t);
        let mut rhs: Vec<f64> = r1.iter().zip(&gt).map(|(a, b)| a + b).collect();
        rhs.extend_from_slice(r2);
        let mut sol = self.lu.solve(&rhs);
        for _ in 0..REFINEMENT_STEPS {
            let ks = self.exact.matvec(&sol);
            let res: Vec<f64> = rhs.iter().zip(&ks).map(|(a, b)| a - b).collect();
            let corr = self.lu.solve(&res);
            sol.iter_mut().zip(corr).for_each(|(s, c)| *s += c);
        }
        let dy = sol.split_off(n);
        let dx = sol;
        let gdx = low.g.mul(&dx);
        let wgdx = low.per_block(scal, &gdx, |sc, v| sc.wint(v));
        let dz_sc = wgdx.iter().zip(&u3).map(|(a, b)| a - b).collect();
        (dx, dy, dz_sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::LinExpr;
    use crate::program::ProgramBuilder;

    #[test]
    fn orthant_lower_bound() {
        let mut b = ProgramBuilder::new();
        let x = b.add_var();
        b.minimize(x);
        b.add_le(1.0, x);
        let sol = b.build().unwrap().solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn soc_norm_minimization() {
        let mut b = ProgramBuilder::new();
        let t = b.add_var();
        let x = b.add_var();
        let y = b.add_var();
        b.minimize(t);
        b.add_eq(x + y - 2.0);
        b.add_soc(vec![t.into(), x.into(), y.into()]);
        let sol = b.build().unwrap().solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 2f64.sqrt()).abs() < 1e-7);
        assert!((sol.x[1] - 1.0).abs() < 1e-6 && (sol.x[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rotated_cone_epigraph() {
        // min u s.t. u·1 ≥ (x − 3)² + 2  →  u = 2 at x = 3.
        let mut b = ProgramBuilder::new();
        let u = b.add_var();
        let x = b.add_var();
        b.minimize(u);
        b.add_rotated_soc(
            u - 2.0,
            LinExpr::constant(1.0),
            vec![x - 3.0],
        );
        let sol = b.build().unwrap().solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() < 1e-6);
        assert!((sol.x[1] - 3.0).abs() < 1e-4);
    }

    #[test]
    fn detects_primal_infeasibility() {
        let mut b = ProgramBuilder::new();
        let x = b.add_var();
        b.minimize(x);
        b.add_le(x, -1.0);
        b.add_le(1.0, x);
        let sol = b.build().unwrap().solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let mut b = ProgramBuilder::new();
        let x = b.add_var();
        b.minimize(x);
        b.add_le(x, 1.0);
        let sol = b.build().unwrap().solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::DualInfeasible);
    }
}
