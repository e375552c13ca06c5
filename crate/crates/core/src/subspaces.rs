//! Orthogonal projectors onto the structured subspaces of `R^{m x n}`: the
//! tangent space `T` of a low-rank matrix, support subspaces `Omega`, spans of
//! orthonormal bases (`Q^perp`), complements and direct sums, together with
//! operator-norm estimates and coherence diagnostics.

use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, Cutoff, DenseMatrix};
use crate::rng::SeededRng;

/// Orthonormality tolerance for stored bases.
pub const ORTHO_TOL: f64 = 1e-10;
/// Direct sums whose coupling reaches `1 - DEGENERACY_MARGIN` are rejected.
pub const DEGENERACY_MARGIN: f64 = 1e-6;
/// Relative-change stopping rule for the Neumann series of direct-sum projections.
pub const NEUMANN_TOL: f64 = 1e-12;
pub const NEUMANN_MAX_TERMS: usize = 10_000;
/// Default iteration cap for operator-norm power iterations.
pub const POWER_MAX_ITERS: usize = 10_000;
/// Relative change of the Rayleigh quotient at which power iteration stops.
pub const POWER_TOL: f64 = 1e-10;
const PROBE_SEED: u64 = 0x0b5e_55ed;

// ---------------------------------------------------------------------------
// Support sets

/// A set of entry positions, viewed also as the subspace of matrices supported on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSet {
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
    count: usize,
}

impl SupportSet {
    pub fn empty(rows: usize, cols: usize) -> Self {
        SupportSet {
            rows,
            cols,
            mask: vec![false; rows * cols],
            count: 0,
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        SupportSet {
            rows,
            cols,
            mask: vec![true; rows * cols],
            count: rows * cols,
        }
    }

    pub fn from_mask(rows: usize, cols: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "SupportSet::from_mask",
                expected: (rows, cols),
                found: (mask.len(), 1),
            });
        }
        let count = mask.iter().filter(|&&b| b).count();
        Ok(SupportSet {
            rows,
            cols,
            mask,
            count,
        })
    }

    /// Rejects out-of-range and duplicate positions.
    pub fn from_indices(
        rows: usize,
        cols: usize,
        indices: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut s = Self::empty(rows, cols);
        for (i, j) in indices {
            if i >= rows || j >= cols {
                return Err(Error::InvalidParameter(format!(
                    "support index ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            let slot = &mut s.mask[i * cols + j];
            if *slot {
                return Err(Error::InvalidParameter(format!(
                    "duplicate support index ({i}, {j})"
                )));
            }
            *slot = true;
            s.count += 1;
        }
        Ok(s)
    }

    /// Support of the nonzero entries of `x`.
    pub fn of_nonzeros(x: &DenseMatrix) -> Self {
        let mask: Vec<bool> = x.as_slice().iter().map(|&v| v != 0.0).collect();
        Self::from_mask(x.rows(), x.cols(), mask).expect("mask length matches")
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.cols + j]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Positions in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols.max(1);
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / cols, k % cols))
    }

    pub fn complement(&self) -> Self {
        let mask: Vec<bool> = self.mask.iter().map(|b| !b).collect();
        SupportSet {
            rows: self.rows,
            cols: self.cols,
            count: mask.len() - self.count,
            mask,
        }
    }

    pub fn union(&self, other: &SupportSet) -> Self {
        assert_eq!(self.shape(), other.shape());
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect();
        Self::from_mask(self.rows, self.cols, mask).expect("same shape")
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.shape() == other.shape() && self.mask.iter().zip(&other.mask).all(|(a, b)| !a || *b)
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "SUPP1 {} {} {}", self.rows, self.cols, self.count)?;
        for (i, j) in self.indices() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<Option<String>> {
            lines
                .next()
                .transpose()
                .map_err(|e| Error::format("SUPP1", e.to_string()))
        };
        let header = next()?.ok_or_else(|| Error::format("SUPP1", "empty input"))?;
        let mut toks = header.split_ascii_whitespace();
        if toks.next() != Some("SUPP1") {
            return Err(Error::format("SUPP1", format!("bad header {header:?}")));
        }
        let rows = linalg::parse_usize(toks.next(), "SUPP1", "rows")?;
        let cols = linalg::parse_usize(toks.next(), "SUPP1", "cols")?;
        let count = linalg::parse_usize(toks.next(), "SUPP1", "count")?;
        let mut idx = Vec::with_capacity(count);
        for k in 0..count {
            let line = next()?
                .ok_or_else(|| Error::format("SUPP1", format!("expected {count} entries, got {k}")))?;
            let mut t = line.split_ascii_whitespace();
            let i = linalg::parse_usize(t.next(), "SUPP1", "row index")?;
            let j = linalg::parse_usize(t.next(), "SUPP1", "column index")?;
            idx.push((i, j));
        }
        while let Some(extra) = next()? {
            if !extra.trim().is_empty() {
                return Err(Error::format("SUPP1", "more entries than declared count"));
            }
        }
        Self::from_indices(rows, cols, idx).map_err(|e| Error::format("SUPP1", e.to_string()))
    }
}

/// Keeps entries on `omega`, zeroes the rest.
pub fn project_support(x: &DenseMatrix, omega: &SupportSet) -> DenseMatrix {
    assert_eq!(x.shape(), omega.shape(), "project_support: shape mismatch");
    let mut out = x.clone();
    for (v, &keep) in out.as_mut_slice().iter_mut().zip(&omega.mask) {
        if !keep {
            *v = 0.0;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Tangent space

/// `T = { U X^T + Y V^T }` for column-orthonormal `U` (m x r) and `V` (n x r).
#[derive(Clone, Debug)]
pub struct TangentSpace {
    u: DenseMatrix,
    v: DenseMatrix,
}

impl TangentSpace {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::ShapeMismatch {
                op: "TangentSpace::new",
                expected: (u.rows(), u.cols()),
                found: (v.rows(), v.cols()),
            });
        }
        let r = u.cols();
        let id = DenseMatrix::identity(r);
        for (name, f) in [("U", &u), ("V", &v)] {
            if f.t_matmul(f).max_abs_diff(&id) > ORTHO_TOL {
                return Err(Error::InvalidParameter(format!(
                    "{name} is not column-orthonormal to {ORTHO_TOL:e}"
                )));
            }
        }
        Ok(TangentSpace { u, v })
    }

    /// The rank-0 tangent space `{0}`.
    pub fn empty(m: usize, n: usize) -> Self {
        TangentSpace {
            u: DenseMatrix::zeros(m, 0),
            v: DenseMatrix::zeros(n, 0),
        }
    }

    /// Tangent space at `l`, from its SVD with the default relative rank cutoff.
    pub fn of_matrix(l: &DenseMatrix) -> Result<Self> {
        let f = linalg::svd(l, Cutoff::default())?;
        Ok(TangentSpace { u: f.u, v: f.v })
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    pub fn dim(&self) -> usize {
        let (m, n) = self.shape();
        let r = self.rank();
        r * (m + n - r)
    }

    /// The sign-like matrix `U V^T`.
    pub fn uv_t(&self) -> DenseMatrix {
        self.u.matmul_t(&self.v)
    }
}

/// `P_T X = U U^T X + X V V^T - U U^T X V V^T`.
pub fn project_t(x: &DenseMatrix, t: &TangentSpace) -> DenseMatrix {
    assert_eq!(x.shape(), t.shape(), "project_t: shape mismatch");
    if t.rank() == 0 {
        return DenseMatrix::zeros(x.rows(), x.cols());
    }
    let utx = t.u.t_matmul(x); // r x n
    let xv = x.matmul(&t.v); // m x r
    let utxv = utx.matmul(&t.v); // r x r
    let mut left = xv;
    left.axpy(-1.0, &t.u.matmul(&utxv));
    let mut out = t.u.matmul(&utx);
    out.axpy(1.0, &left.matmul_t(&t.v));
    out
}

// ---------------------------------------------------------------------------
// Span of an orthonormal basis

/// Orthonormal (in the trace inner product) list of `m x n` matrices.
#[derive(Clone, Debug)]
pub struct SpanBasis {
    rows: usize,
    cols: usize,
    elements: Vec<DenseMatrix>,
}

impl SpanBasis {
    /// Validates shapes and orthonormality to [`ORTHO_TOL`].
    pub fn new(rows: usize, cols: usize, elements: Vec<DenseMatrix>) -> Result<Self> {
        for g in &elements {
            if g.shape() != (rows, cols) {
                return Err(Error::ShapeMismatch {
                    op: "SpanBasis::new",
                    expected: (rows, cols),
                    found: g.shape(),
                });
            }
        }
        for (a, ga) in elements.iter().enumerate() {
            for (b, gb) in elements.iter().enumerate().skip(a) {
                let want = if a == b { 1.0 } else { 0.0 };
                let got = dot(ga.as_slice(), gb.as_slice());
                if (got - want).abs() > ORTHO_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "basis not orthonormal: <G{a}, G{b}> = {got:e}"
                    )));
                }
            }
        }
        Ok(SpanBasis {
            rows,
            cols,
            elements,
        })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        SpanBasis {
            rows,
            cols,
            elements: Vec::new(),
        }
    }

    /// Modified Gram-Schmidt (two passes) in the trace inner product.
    ///
    /// Fails with [`Error::RankDeficient`] at the first candidate whose
    /// residual after orthogonalization is below `1e-8` of its norm.
    pub fn orthonormalize(rows: usize, cols: usize, candidates: &[DenseMatrix]) -> Result<Self> {
        let mut out: Vec<DenseMatrix> = Vec::with_capacity(candidates.len());
        for (index, c) in candidates.iter().enumerate() {
            if c.shape() != (rows, cols) {
                return Err(Error::ShapeMismatch {
                    op: "SpanBasis::orthonormalize",
                    expected: (rows, cols),
                    found: c.shape(),
                });
            }
            let norm0 = c.frobenius();
            if norm0 == 0.0 || !norm0.is_finite() {
                return Err(Error::RankDeficient { index });
            }
            let mut w = c.clone();
            for _ in 0..2 {
                for g in &out {
                    let coef = dot(g.as_slice(), w.as_slice());
                    w.axpy(-coef, g);
                }
            }
            let nw = w.frobenius();
            if nw <= 1e-8 * norm0 {
                return Err(Error::RankDeficient { index });
            }
            w.scale_mut(1.0 / nw);
            out.push(w);
        }
        Ok(SpanBasis {
            rows,
            cols,
            elements: out,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[DenseMatrix] {
        &self.elements
    }

    /// Coordinates `<G_k, X>`.
    pub fn coefficients(&self, x: &DenseMatrix) -> Vec<f64> {
        self.elements
            .iter()
            .map(|g| dot(g.as_slice(), x.as_slice()))
            .collect()
    }

    pub fn combine(&self, coefs: &[f64]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (g, &c) in self.elements.iter().zip(coefs) {
            out.axpy(c, g);
        }
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "BASIS1 {} {} {}", self.dim(), self.rows, self.cols)?;
        for g in &self.elements {
            linalg::write_dmat(w, g)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let header = linalg::read_header_line(r, "BASIS1")?;
        let mut toks = header.split_ascii_whitespace();
        if toks.next() != Some("BASIS1") {
            return Err(Error::format("BASIS1", format!("bad header {header:?}")));
        }
        let p = linalg::parse_usize(toks.next(), "BASIS1", "p")?;
        let rows = linalg::parse_usize(toks.next(), "BASIS1", "rows")?;
        let cols = linalg::parse_usize(toks.next(), "BASIS1", "cols")?;
        let elements = (0..p)
            .map(|_| linalg::read_dmat(r))
            .collect::<Result<Vec<_>>>()?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| Error::format("BASIS1", e.to_string()))? != 0 {
            return Err(Error::format("BASIS1", "trailing bytes after last element"));
        }
        Self::new(rows, cols, elements)
    }
}

/// `P X = sum_k <G_k, X> G_k`.
pub fn project_span(x: &DenseMatrix, b: &SpanBasis) -> DenseMatrix {
    assert_eq!(x.shape(), b.shape(), "project_span: shape mismatch");
    b.combine(&b.coefficients(x))
}

// ---------------------------------------------------------------------------
// Composite subspaces

/// Handle to one of the structured subspaces; cheap to clone.
#[derive(Clone, Debug)]
pub enum Subspace {
    Tangent(Arc<TangentSpace>),
    Support(Arc<SupportSet>),
    Span(Arc<SpanBasis>),
    Complement(Arc<Subspace>),
    DirectSum(Arc<DirectSum>),
}

/// `A ⊕ B` for subspaces whose projector product has norm `coupling < 1`.
#[derive(Debug)]
pub struct DirectSum {
    a: Subspace,
    b: Subspace,
    coupling: f64,
}

impl DirectSum {
    pub fn summands(&self) -> (&Subspace, &Subspace) {
        (&self.a, &self.b)
    }

    /// Estimated `||P_A P_B||`.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }
}

impl From<TangentSpace> for Subspace {
    fn from(t: TangentSpace) -> Self {
        Subspace::Tangent(Arc::new(t))
    }
}

impl From<SupportSet> for Subspace {
    fn from(s: SupportSet) -> Self {
        Subspace::Support(Arc::new(s))
    }
}

impl From<SpanBasis> for Subspace {
    fn from(b: SpanBasis) -> Self {
        Subspace::Span(Arc::new(b))
    }
}

impl Subspace {
    pub fn complement(&self) -> Subspace {
        match self {
            Subspace::Complement(inner) => (**inner).clone(),
            other => Subspace::Complement(Arc::new(other.clone())),
        }
    }

    /// Builds `a ⊕ b` after checking independence; fails with
    /// [`Error::DegenerateSum`] when `||P_a P_b|| >= 1 - 1e-6`.
    pub fn direct_sum(a: &Subspace, b: &Subspace) -> Result<Subspace> {
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch {
                op: "Subspace::direct_sum",
                expected: a.shape(),
                found: b.shape(),
            });
        }
        let est = op_norm_product(a, b, POWER_MAX_ITERS);
        if est.value >= 1.0 - DEGENERACY_MARGIN {
            return Err(Error::DegenerateSum { norm: est.value });
        }
        Ok(Subspace::DirectSum(Arc::new(DirectSum {
            a: a.clone(),
            b: b.clone(),
            coupling: est.value,
        })))
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Subspace::Tangent(t) => t.shape(),
            Subspace::Support(s) => s.shape(),
            Subspace::Span(b) => b.shape(),
            Subspace::Complement(s) => s.shape(),
            Subspace::DirectSum(d) => d.a.shape(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Subspace::Tangent(t) => t.dim(),
            Subspace::Support(s) => s.len(),
            Subspace::Span(b) => b.dim(),
            Subspace::Complement(s) => {
                let (m, n) = s.shape();
                m * n - s.dim()
            }
            Subspace::DirectSum(d) => d.a.dim() + d.b.dim(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn project(&self, x: &DenseMatrix) -> DenseMatrix {
        match self {
            Subspace::Tangent(t) => project_t(x, t),
            Subspace::Support(s) => project_support(x, s),
            Subspace::Span(b) => project_span(x, b),
            Subspace::Complement(s) => x - &s.project(x),
            Subspace::DirectSum(d) => {
                let mut out = neumann_part(&d.a, &d.b, x);
                out.axpy(1.0, &neumann_part(&d.b, &d.a, x));
                out
            }
        }
    }
}

/// `sum_k (P_first P_second)^k P_first P_{second^perp} X`, the component of
/// the direct-sum projection that lies in `first`.
fn neumann_part(first: &Subspace, second: &Subspace, x: &DenseMatrix) -> DenseMatrix {
    if first.is_zero() {
        return DenseMatrix::zeros(x.rows(), x.cols());
    }
    let mut term = first.project(&(x - &second.project(x)));
    let mut sum = term.clone();
    if second.is_zero() {
        return sum;
    }
    for _ in 0..NEUMANN_MAX_TERMS {
        term = first.project(&second.project(&term));
        sum.axpy(1.0, &term);
        let tn = term.frobenius();
        if tn == 0.0 || tn <= NEUMANN_TOL * sum.frobenius() {
            return sum;
        }
    }
    log::warn!("direct-sum Neumann series hit the {NEUMANN_MAX_TERMS}-term cap");
    sum
}

/// Projection onto a direct sum; `s` must be a [`Subspace::DirectSum`].
pub fn project_direct_sum(x: &DenseMatrix, s: &Subspace) -> Result<DenseMatrix> {
    match s {
        Subspace::DirectSum(_) => Ok(s.project(x)),
        _ => Err(Error::InvalidParameter(
            "project_direct_sum requires a direct-sum handle".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Operator norms

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Largest eigenvalue of a positive semidefinite operator by power iteration
/// from `start`. Stops when the Rayleigh quotient changes by at most
/// [`POWER_TOL`] relative.
pub fn psd_top_eigenvalue(
    start: DenseMatrix,
    op: impl Fn(&DenseMatrix) -> DenseMatrix,
    max_iters: usize,
) -> NormEstimate {
    let mut x = start;
    let nx = x.frobenius();
    if nx == 0.0 {
        return NormEstimate {
            value: 0.0,
            converged: true,
            iterations: 0,
        };
    }
    x.scale_mut(1.0 / nx);
    let mut prev = f64::NAN;
    for it in 1..=max_iters {
        let y = op(&x);
        let theta = dot(x.as_slice(), y.as_slice());
        let ny = y.frobenius();
        if ny == 0.0 {
            return NormEstimate {
                value: 0.0,
                converged: true,
                iterations: it,
            };
        }
        if (theta - prev).abs() <= POWER_TOL * theta.abs() {
            return NormEstimate {
                value: theta,
                converged: true,
                iterations: it,
            };
        }
        prev = theta;
        x = y;
        x.scale_mut(1.0 / ny);
    }
    NormEstimate {
        value: prev,
        converged: false,
        iterations: max_iters,
    }
}

fn probe(shape: (usize, usize)) -> DenseMatrix {
    let mut rng = SeededRng::stream(PROBE_SEED, crate::rng::streams::PROBE);
    DenseMatrix::gaussian(shape.0, shape.1, 1.0, &mut rng)
}

/// `||P_A P_B||` by power iteration on `P_B P_A P_B`, started from a
/// fixed-seed random matrix. The value is clamped to `[0, 1]`.
pub fn op_norm_product(a: &Subspace, b: &Subspace, max_iters: usize) -> NormEstimate {
    assert_eq!(a.shape(), b.shape(), "op_norm_product: shape mismatch");
    if a.is_zero() || b.is_zero() {
        return NormEstimate {
            value: 0.0,
            converged: true,
            iterations: 0,
        };
    }
    let start = b.project(&probe(b.shape()));
    let est = psd_top_eigenvalue(start, |x| b.project(&a.project(x)), max_iters);
    if !est.converged {
        log::warn!("op_norm_product did not converge in {max_iters} iterations");
    }
    NormEstimate {
        value: est.value.max(0.0).sqrt().min(1.0),
        ..est
    }
}

/// Operator norm of a self-adjoint linear map on `m x n` matrices.
pub fn self_adjoint_norm(
    shape: (usize, usize),
    op: impl Fn(&DenseMatrix) -> DenseMatrix,
    max_iters: usize,
) -> NormEstimate {
    let est = psd_top_eigenvalue(probe(shape), |x| op(&op(x)), max_iters);
    NormEstimate {
        value: est.value.max(0.0).sqrt(),
        ..est
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectSumVerdict {
    Independent,
    Degenerate,
}

#[derive(Clone, Copy, Debug)]
pub struct DirectSumCheck {
    pub verdict: DirectSumVerdict,
    pub norm: NormEstimate,
}

/// Independent iff `||P_A P_B|| < 1 - 1e-6`.
pub fn check_direct_sum(a: &Subspace, b: &Subspace) -> DirectSumCheck {
    let norm = op_norm_product(a, b, POWER_MAX_ITERS);
    let verdict = if norm.value < 1.0 - DEGENERACY_MARGIN {
        DirectSumVerdict::Independent
    } else {
        DirectSumVerdict::Degenerate
    };
    DirectSumCheck { verdict, norm }
}

// ---------------------------------------------------------------------------
// Coherence diagnostics

/// The three incoherence ratios of a tangent space; `mu` is their maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Incoherence {
    /// `(m / r) max_i ||U^T e_i||^2`
    pub row: f64,
    /// `(n / r) max_j ||V^T e_j||^2`
    pub col: f64,
    /// `(m n / r) ||U V^T||_inf^2`
    pub joint: f64,
}

impl Incoherence {
    pub fn mu(&self) -> f64 {
        self.row.max(self.col).max(self.joint)
    }
}

pub fn incoherence(t: &TangentSpace) -> Result<Incoherence> {
    let r = t.rank();
    if r == 0 {
        return Err(Error::InvalidParameter(
            "coherence is undefined for rank 0".into(),
        ));
    }
    let (m, n) = t.shape();
    let max_row_sq = |f: &DenseMatrix| {
        (0..f.rows())
            .map(|i| dot(f.row(i), f.row(i)))
            .fold(0.0, f64::max)
    };
    let rf = r as f64;
    Ok(Incoherence {
        row: m as f64 / rf * max_row_sq(t.u()),
        col: n as f64 / rf * max_row_sq(t.v()),
        joint: (m * n) as f64 / rf * t.uv_t().linf().powi(2),
    })
}

/// Smallest `mu` satisfying all three incoherence inequalities.
pub fn coherence_mu(t: &TangentSpace) -> Result<f64> {
    Ok(incoherence(t)?.mu())
}

/// `n * max_k ||G_k||^2` with `n = min(rows, cols)`.
pub fn nu_coherence(b: &SpanBasis) -> Result<f64> {
    if b.is_empty() {
        return Err(Error::InvalidParameter(
            "nu-coherence of an empty basis".into(),
        ));
    }
    let n = b.rows.min(b.cols) as f64;
    let mut best: f64 = 0.0;
    for g in b.elements() {
        best = best.max(g.spectral()?);
    }
    Ok(n * best * best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaMode {
    Exact,
    Sampled(usize),
    /// Exact up to `m n <= 250_000`, `Sampled(10_000)` above.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaEstimate {
    pub value: f64,
    /// `false` when sampled: the value is then only a lower bound.
    pub exact: bool,
    pub evaluated: usize,
}

/// `max_{i,j} ||P_S e_i e_j^T||_F^2`.
pub fn gamma_constrained(s: &Subspace, mode: GammaMode) -> GammaEstimate {
    let (m, n) = s.shape();
    let mode = match mode {
        GammaMode::Auto if m * n <= 250_000 => GammaMode::Exact,
        GammaMode::Auto => GammaMode::Sampled(10_000),
        other => other,
    };
    let eval = |i: usize, j: usize| s.project(&DenseMatrix::unit(m, n, i, j)).frobenius().powi(2);
    match mode {
        GammaMode::Exact => {
            let mut best: f64 = 0.0;
            for i in 0..m {
                for j in 0..n {
                    best = best.max(eval(i, j));
                }
            }
            GammaEstimate {
                value: best,
                exact: true,
                evaluated: m * n,
            }
        }
        GammaMode::Sampled(k) => {
            let mut rng = SeededRng::stream(PROBE_SEED, crate::rng::streams::PROBE + 1);
            let mut best: f64 = 0.0;
            for _ in 0..k {
                let (i, j) = (rng.random_range(0..m), rng.random_range(0..n));
                best = best.max(eval(i, j));
            }
            GammaEstimate {
                value: best,
                exact: false,
                evaluated: k,
            }
        }
        GammaMode::Auto => unreachable!(),
    }
}
