use std::fmt::Write as _;

use relaycast_linalg::{Complex64, HermitianMatrix, RealMatrix};

use crate::cone::Cone;
use crate::expr::{LinExpr, Var};
use crate::ConicError;

/// Column-compressed sparse matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct SparseCols {
    pub rows: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
}

impl SparseCols {
    pub(crate) fn new(rows: usize, ncols: usize) -> Self {
        Self {
            rows,
            cols: vec![Vec::new(); ncols],
        }
    }

    pub(crate) fn from_dense(m: &RealMatrix) -> Self {
        let mut out = Self::new(m.rows(), m.cols());
        for j in 0..m.cols() {
            for i in 0..m.rows() {
                if m[(i, j)] != 0.0 {
                    out.cols[j].push((i, m[(i, j)]));
                }
            }
        }
        out
    }

    /// `M x`
    pub(crate) fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (col, &xj) in self.cols.iter().zip(x) {
            if xj != 0.0 {
                for &(i, v) in col {
                    out[i] += v * xj;
                }
            }
        }
        out
    }

    /// `Mᵀ y`
    pub(crate) fn tmul(&self, y: &[f64]) -> Vec<f64> {
        self.cols
            .iter()
            .map(|col| col.iter().map(|&(i, v)| v * y[i]).sum())
            .collect()
    }

    fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cols
            .iter()
            .enumerate()
            .flat_map(|(j, col)| col.iter().map(move |&(i, v)| (i, j, v)))
    }
}

/// Index of a cone block within a [`ConeProgram`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockId(pub(crate) usize);

/// Standard-form cone program
///
/// ```text
/// minimize    cᵀx + c₀
/// subject to  A x = b
///             h − G x ∈ K = K₁ × … × K_q
/// ```
#[derive(Clone, Debug)]
pub struct ConeProgram {
    pub(crate) n: usize,
    pub(crate) c: Vec<f64>,
    pub(crate) c0: f64,
    pub(crate) a: SparseCols,
    pub(crate) b: Vec<f64>,
    pub(crate) g: SparseCols,
    pub(crate) h: Vec<f64>,
    pub(crate) cones: Vec<Cone>,
    pub(crate) offsets: Vec<usize>,
}

impl ConeProgram {
    /// Builds from dense data. `a` may have zero rows.
    pub fn from_dense(
        c: Vec<f64>,
        a: &RealMatrix,
        b: Vec<f64>,
        g: &RealMatrix,
        h: Vec<f64>,
        cones: Vec<Cone>,
    ) -> Result<Self, ConicError> {
        let n = c.len();
        if a.cols() != n && a.rows() != 0 {
            return Err(ConicError::DimensionMismatch(format!(
                "A has {} columns, expected {n}",
                a.cols()
            )));
        }
        if g.cols() != n {
            return Err(ConicError::DimensionMismatch(format!(
                "G has {} columns, expected {n}",
                g.cols()
            )));
        }
        let mut a_sp = SparseCols::from_dense(a);
        if a.rows() == 0 {
            a_sp = SparseCols::new(0, n);
        }
        Self::assemble(n, c, 0.0, a_sp, b, SparseCols::from_dense(g), h, cones)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        n: usize,
        c: Vec<f64>,
        c0: f64,
        a: SparseCols,
        b: Vec<f64>,
        g: SparseCols,
        h: Vec<f64>,
        cones: Vec<Cone>,
    ) -> Result<Self, ConicError> {
        if a.rows != b.len() {
            return Err(ConicError::DimensionMismatch(format!(
                "A has {} rows but b has {} entries",
                a.rows,
                b.len()
            )));
        }
        if g.rows != h.len() {
            return Err(ConicError::DimensionMismatch(format!(
                "G has {} rows but h has {} entries",
                g.rows,
                h.len()
            )));
        }
        if let Some(bad) = cones.iter().find(|k| !k.is_valid()) {
            return Err(ConicError::InvalidCone(format!("{bad:?}")));
        }
        let total: usize = cones.iter().map(|k| k.dim()).sum();
        if total != h.len() {
            return Err(ConicError::DimensionMismatch(format!(
                "cone blocks cover {total} rows but the slack has {}",
                h.len()
            )));
        }
        let values_finite = c.iter().chain(&b).chain(&h).all(|v| v.is_finite())
            && a.triplets().chain(g.triplets()).all(|t| t.2.is_finite());
        if !values_finite || !c0.is_finite() {
            return Err(ConicError::NonFinite);
        }
        let mut offsets = Vec::with_capacity(cones.len());
        let mut off = 0;
        for k in &cones {
            offsets.push(off);
            off += k.dim();
        }
        Ok(Self {
            n,
            c,
            c0,
            a,
            b,
            g,
            h,
            cones,
            offsets,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_eq(&self) -> usize {
        self.b.len()
    }

    pub fn num_rows(&self) -> usize {
        self.h.len()
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c0 + self.c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Slack `h − G x` restricted to one block.
    pub fn block_values(&self, block: BlockId, x: &[f64]) -> Vec<f64> {
        let gx = self.g.mul(x);
        let off = self.offsets[block.0];
        let dim = self.cones[block.0].dim();
        (off..off + dim).map(|i| self.h[i] - gx[i]).collect()
    }

    pub fn block_cone(&self, block: BlockId) -> Cone {
        self.cones[block.0]
    }

    /// Whether the slack of `block` at `x` lies in its cone within `tol`.
    pub fn block_contains(&self, block: BlockId, x: &[f64], tol: f64) -> bool {
        self.cones[block.0].contains(&self.block_values(block, x), tol)
    }

    /// Largest equality residual and whether every block contains its slack
    /// within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        let ax = self.a.mul(x);
        let eq_ok = ax.iter().zip(&self.b).all(|(l, r)| (l - r).abs() <= tol);
        eq_ok && (0..self.cones.len()).all(|k| self.block_contains(BlockId(k), x, tol))
    }

    /// Plain-text dump of the standard form.
    ///
    /// Line-oriented, whitespace-separated, zero-based indices:
    ///
    /// ```text
    /// relaycast-conic 1
    /// dims <vars> <eq rows> <cone rows>
    /// cone <nonneg|soc|rsoc|psd> <size>      one line per block, in order
    /// c0 <value>
    /// c <j> <value>                          nonzeros only
    /// A <i> <j> <value>
    /// b <i> <value>
    /// G <i> <j> <value>
    /// h <i> <value>
    /// ```
    ///
    /// `psd` sizes are matrix orders; the slack holds their svec.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "relaycast-conic 1");
        let _ = writeln!(out, "dims {} {} {}", self.n, self.b.len(), self.h.len());
        for k in &self.cones {
            let (name, size) = match *k {
                Cone::Nonneg(s) => ("nonneg", s),
                Cone::Soc(s) => ("soc", s),
                Cone::RotatedSoc(s) => ("rsoc", s),
                Cone::Psd(s) => ("psd", s),
            };
            let _ = writeln!(out, "cone {name} {size}");
        }
        let _ = writeln!(out, "c0 {:e}", self.c0);
        for (j, v) in self.c.iter().enumerate().filter(|t| *t.1 != 0.0) {
            let _ = writeln!(out, "c {j} {v:e}");
        }
        for (i, j, v) in self.a.triplets() {
            let _ = writeln!(out, "A {i} {j} {v:e}");
        }
        for (i, v) in self.b.iter().enumerate().filter(|t| *t.1 != 0.0) {
            let _ = writeln!(out, "b {i} {v:e}");
        }
        for (i, j, v) in self.g.triplets() {
            let _ = writeln!(out, "G {i} {j} {v:e}");
        }
        for (i, v) in self.h.iter().enumerate().filter(|t| *t.1 != 0.0) {
            let _ = writeln!(out, "h {i} {v:e}");
        }
        out
    }
}

/// Incremental construction of a [`ConeProgram`] from affine expressions.
#[derive(Clone, Debug, Default)]
pub struct ProgramBuilder {
    n: usize,
    objective: LinExpr,
    eqs: Vec<LinExpr>,
    blocks: Vec<(Cone, Vec<LinExpr>)>,
    nonneg: Vec<LinExpr>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self) -> Var {
        self.n += 1;
        Var(self.n - 1)
    }

    pub fn add_vars(&mut self, k: usize) -> Vec<Var> {
        (0..k).map(|_| self.add_var()).collect()
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn minimize(&mut self, objective: impl Into<LinExpr>) {
        self.objective = objective.into();
    }

    /// `expr = 0`
    pub fn add_eq(&mut self, expr: impl Into<LinExpr>) {
        self.eqs.push(expr.into());
    }

    /// `expr ≥ 0`. All such rows share one orthant block.
    pub fn add_nonneg(&mut self, expr: impl Into<LinExpr>) {
        self.nonneg.push(expr.into());
    }

    /// `lhs ≤ rhs`
    pub fn add_le(&mut self, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) {
        self.add_nonneg(rhs.into() - lhs.into());
    }

    /// Requires the vector of row values to lie in `cone`.
    pub fn add_block(&mut self, cone: Cone, rows: Vec<LinExpr>) -> BlockId {
        self.blocks.push((cone, rows));
        BlockId(self.blocks.len() - 1)
    }

    /// `rows[0] ≥ ‖rows[1..]‖`
    pub fn add_soc(&mut self, rows: Vec<LinExpr>) -> BlockId {
        let k = rows.len();
        self.add_block(Cone::Soc(k), rows)
    }

    /// `u, v ≥ 0` and `u·v ≥ ‖z‖²`.
    pub fn add_rotated_soc(&mut self, u: LinExpr, v: LinExpr, z: Vec<LinExpr>) -> BlockId {
        let mut rows = Vec::with_capacity(z.len() + 2);
        rows.push(u);
        rows.push(v);
        rows.extend(z);
        let k = rows.len();
        self.add_block(Cone::RotatedSoc(k), rows)
    }

    /// `‖L w‖² ≤ u·v` with `u, v ≥ 0`: the epigraph of `‖L w‖²/v` when the
    /// denominator `v` is positive.
    pub fn quad_over_linear_block(
        &mut self,
        factor: &RealMatrix,
        w: &[LinExpr],
        v: LinExpr,
        u: LinExpr,
    ) -> BlockId {
        assert_eq!(factor.cols(), w.len(), "factor columns must match w");
        let z = (0..factor.rows())
            .map(|i| {
                let mut e = LinExpr::zero();
                for (j, wj) in w.iter().enumerate() {
                    let f = factor[(i, j)];
                    if f != 0.0 {
                        e += wj.clone() * f;
                    }
                }
                e
            })
            .collect();
        self.add_rotated_soc(u, v, z)
    }

    /// Symmetric `n × n` matrix expression constrained PSD; `entry(i, j)` is
    /// queried for `i ≥ j` only.
    pub fn add_psd(&mut self, n: usize, mut entry: impl FnMut(usize, usize) -> LinExpr) -> BlockId {
        let mut rows = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            for i in j..n {
                let e = entry(i, j);
                rows.push(if i == j { e } else { e * std::f64::consts::SQRT_2 });
            }
        }
        self.add_block(Cone::Psd(n), rows)
    }

    /// New complex Hermitian PSD matrix variable of order `n`, lowered to the
    /// real symmetric embedding `[Re X, −Im X; Im X, Re X] ⪰ 0`.
    pub fn add_hermitian_psd(&mut self, n: usize) -> HermitianVar {
        let diag = self.add_vars(n);
        let mut re = vec![None; n * n];
        let mut im = vec![None; n * n];
        for k in 0..n {
            for l in k + 1..n {
                re[k * n + l] = Some(self.add_var());
                im[k * n + l] = Some(self.add_var());
            }
        }
        let var = HermitianVar {
            n,
            diag,
            re,
            im,
            block: BlockId(usize::MAX),
        };
        let block = self.add_psd(2 * n, |i, j| var.embedding_entry(i, j));
        HermitianVar { block, ..var }
    }

    pub fn build(self) -> Result<ConeProgram, ConicError> {
        let ProgramBuilder {
            n,
            objective,
            eqs,
            mut blocks,
            nonneg,
        } = self;
        if !nonneg.is_empty() {
            blocks.push((Cone::Nonneg(nonneg.len()), nonneg));
        }
        for (cone, rows) in &blocks {
            if cone.dim() != rows.len() {
                return Err(ConicError::DimensionMismatch(format!(
                    "{cone:?} given {} rows",
                    rows.len()
                )));
            }
        }
        let all_exprs = std::iter::once(&objective)
            .chain(&eqs)
            .chain(blocks.iter().flat_map(|b| &b.1));
        if all_exprs.filter_map(LinExpr::max_var).any(|m| m >= n) {
            return Err(ConicError::DimensionMismatch(
                "expression references an unknown variable".into(),
            ));
        }

        let obj = objective.compact();
        let mut c = vec![0.0; n];
        for (v, k) in &obj.terms {
            c[v.0] += k;
        }

        let mut a = SparseCols::new(eqs.len(), n);
        let mut b = Vec::with_capacity(eqs.len());
        for (i, e) in eqs.iter().enumerate() {
            let e = e.compact();
            for (v, k) in e.terms {
                a.cols[v.0].push((i, k));
            }
            b.push(-e.constant);
        }

        let m: usize = blocks.iter().map(|b| b.1.len()).sum();
        let mut g = SparseCols::new(m, n);
        let mut h = Vec::with_capacity(m);
        let mut row = 0;
        let mut cones = Vec::with_capacity(blocks.len());
        for (cone, rows) in blocks {
            for e in rows {
                let e = e.compact();
                for (v, k) in e.terms {
                    g.cols[v.0].push((row, -k));
                }
                h.push(e.constant);
                row += 1;
            }
            cones.push(cone);
        }
        ConeProgram::assemble(n, c, obj.constant, a, b, g, h, cones)
    }
}

/// Complex Hermitian matrix variable built by
/// [`ProgramBuilder::add_hermitian_psd`].
///
/// Parameterized by `Re X_kk`, and `Re X_kl`, `Im X_kl` for `k < l`.
#[derive(Clone, Debug)]
pub struct HermitianVar {
    n: usize,
    diag: Vec<Var>,
    re: Vec<Option<Var>>,
    im: Vec<Option<Var>>,
    block: BlockId,
}

impl HermitianVar {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// The PSD block holding the real embedding.
    pub fn block(&self) -> BlockId {
        self.block
    }

    /// `Re X_kl`
    pub fn re(&self, k: usize, l: usize) -> LinExpr {
        match k.cmp(&l) {
            std::cmp::Ordering::Equal => self.diag[k].into(),
            std::cmp::Ordering::Less => self.re[k * self.n + l].unwrap().into(),
            std::cmp::Ordering::Greater => self.re[l * self.n + k].unwrap().into(),
        }
    }

    /// `Im X_kl`
    pub fn im(&self, k: usize, l: usize) -> LinExpr {
        match k.cmp(&l) {
            std::cmp::Ordering::Equal => LinExpr::zero(),
            std::cmp::Ordering::Less => self.im[k * self.n + l].unwrap().into(),
            std::cmp::Ordering::Greater => -LinExpr::from(self.im[l * self.n + k].unwrap()),
        }
    }

    /// `tr(X C)` for Hermitian `C`.
    pub fn trace_with(&self, c: &HermitianMatrix<Complex64>) -> LinExpr {
        assert_eq!(c.dim(), self.n);
        let mut e = LinExpr::zero();
        for k in 0..self.n {
            e.add_term(self.diag[k], c[(k, k)].re);
            for l in k + 1..self.n {
                let ckl = c[(k, l)];
                e.add_term(self.re[k * self.n + l].unwrap(), 2.0 * ckl.re);
                e.add_term(self.im[k * self.n + l].unwrap(), 2.0 * ckl.im);
            }
        }
        e
    }

    /// `tr(X)`
    pub fn trace(&self) -> LinExpr {
        LinExpr::weighted(&self.diag, &vec![1.0; self.n])
    }

    /// Entry `(i, j)` of the `2n × 2n` real embedding.
    fn embedding_entry(&self, i: usize, j: usize) -> LinExpr {
        let n = self.n;
        match (i < n, j < n) {
            (true, true) => self.re(i, j),
            (false, false) => self.re(i - n, j - n),
            (false, true) => self.im(i - n, j),
            (true, false) => -self.im(i, j - n),
        }
    }

    /// Reads the matrix back from a primal vector.
    pub fn value(&self, x: &[f64]) -> HermitianMatrix<Complex64> {
        let n = self.n;
        let m = relaycast_linalg::ComplexMatrix::from_fn(n, n, |k, l| {
            Complex64::new(self.re(k, l).eval(x), self.im(k, l).eval(x))
        });
        HermitianMatrix::symmetrize(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_lowers_rows_to_standard_form() {
        let mut b = ProgramBuilder::new();
        let x = b.add_var();
        let y = b.add_var();
        b.minimize(x + y * 2.0 + 1.0);
        b.add_eq(x - y - 3.0);
        b.add_le(x, 5.0);
        let blk = b.add_soc(vec![LinExpr::constant(2.0), x.into(), y.into()]);
        let p = b.build().unwrap();
        assert_eq!((p.num_vars(), p.num_eq(), p.num_rows()), (2, 1, 4));
        assert_eq!(p.cones(), &[Cone::Soc(3), Cone::Nonneg(1)]);
        assert_eq!(p.objective(&[1.0, 1.0]), 4.0);
        assert_eq!(p.block_values(blk, &[1.0, -1.0]), vec![2.0, 1.0, -1.0]);
        assert!(p.block_contains(blk, &[1.0, -1.0], 0.0));
        assert!(!p.block_contains(blk, &[2.0, 1.0], 0.0));
        let dump = p.dump();
        assert!(dump.starts_with("relaycast-conic 1\ndims 2 1 4\ncone soc 3\ncone nonneg 1\n"));
        assert!(dump.contains("b 0 3e0"));
    }

    #[test]
    fn cone_size_mismatch_is_rejected() {
        let mut b = ProgramBuilder::new();
        let x = b.add_var();
        b.add_block(Cone::Psd(2), vec![x.into()]);
        assert!(matches!(b.build(), Err(ConicError::DimensionMismatch(_))));
    }

    #[test]
    fn hermitian_embedding_is_consistent() {
        let mut b = ProgramBuilder::new();
        let hv = b.add_hermitian_psd(2);
        let p = b.build().unwrap();
        // X = [2, 1+i; 1−i, 3]
        let mut x = vec![0.0; p.num_vars()];
        x[0] = 2.0;
        x[1] = 3.0;
        x[2] = 1.0;
        x[3] = 1.0;
        let val = hv.value(&x);
        assert_eq!(val[(0, 1)], Complex64::new(1.0, 1.0));
        assert_eq!(val[(1, 0)], Complex64::new(1.0, -1.0));
        // det = 6 − 2 > 0 so the embedding must be PSD.
        assert!(p.block_contains(hv.block(), &x, 0.0));
        x[2] = 3.0;
        assert!(!p.block_contains(hv.block(), &x, 0.0));
        let c = HermitianMatrix::new(relaycast_linalg::ComplexMatrix::from_fn(2, 2, |k, l| {
            [[Complex64::new(1.0, 0.0), Complex64::new(0.5, 2.0)],
             [Complex64::new(0.5, -2.0), Complex64::new(-1.0, 0.0)]][k][l]
        }))
        .unwrap();
        x[2] = 1.0;
        let direct = c.trace_product(&hv.value(&x));
        assert!((hv.trace_with(&c).eval(&x) - direct).abs() < 1e-12);
    }
}
