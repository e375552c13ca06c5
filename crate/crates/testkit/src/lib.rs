//! Brute-force reference implementations for tests.
//!
//! Everything here works on vectorized matrices (`vec`, column stacking) and
//! explicit bases, so it shares no code path with the library's closed-form
//! projectors, Neumann series or power iterations. Only suitable for small
//! shapes.

use cpcp::subspaces::{SpanBasis, SupportSet, TangentSpace};
use cpcp::DenseMatrix;
use faer::linalg::solvers::Solve;
use faer::Mat;

/// Column-stacked vector of `x`.
pub fn vec(x: &DenseMatrix) -> Vec<f64> {
    let (m, n) = x.shape();
    let mut out = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            out.push(x[(i, j)]);
        }
    }
    out
}

pub fn unvec(v: &[f64], m: usize, n: usize) -> DenseMatrix {
    assert_eq!(v.len(), m * n);
    DenseMatrix::from_fn(m, n, |i, j| v[j * m + i])
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt over `cols`, silently dropping vectors whose
/// residual falls below `drop_tol` times their original norm.
pub fn gram_schmidt(cols: &[Vec<f64>], drop_tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for c in cols {
        let norm0 = dotv(c, c).sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = c.clone();
        for _ in 0..2 {
            for q in &out {
                let a = dotv(q, &v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= a * y);
            }
        }
        let norm = dotv(&v, &v).sqrt();
        if norm > drop_tol * norm0 {
            v.iter_mut().for_each(|x| *x /= norm);
            out.push(v);
        }
    }
    out
}

/// Explicit orthonormal basis of `T = {U X^T + Y V^T}` from the spanning
/// family `u_k e_j^T`, `e_i v_k^T`.
pub fn tangent_basis(t: &TangentSpace) -> Vec<Vec<f64>> {
    let (m, n) = t.shape();
    let (u, v) = (t.u(), t.v());
    let mut cols = Vec::new();
    for k in 0..t.rank() {
        for j in 0..n {
            cols.push(vec(&DenseMatrix::from_fn(m, n, |a, b| if b == j { u[(a, k)] } else { 0.0 })));
        }
        for i in 0..m {
            cols.push(vec(&DenseMatrix::from_fn(m, n, |a, b| if a == i { v[(b, k)] } else { 0.0 })));
        }
    }
    gram_schmidt(&cols, 1e-8)
}

pub fn support_basis(omega: &SupportSet) -> Vec<Vec<f64>> {
    let (m, n) = omega.shape();
    omega.indices().map(|(i, j)| vec(&DenseMatrix::unit(m, n, i, j))).collect()
}

pub fn span_basis(b: &SpanBasis) -> Vec<Vec<f64>> {
    b.elements().iter().map(vec).collect()
}

/// Orthonormal basis of the orthogonal complement of `cols` in `R^dim`.
pub fn complement_basis(cols: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut all = gram_schmidt(cols, 1e-8);
    let k = all.len();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        all.push(e);
    }
    gram_schmidt(&all, 1e-8).split_off(k)
}

fn to_mat(cols: &[Vec<f64>], rows: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Projection of `x` onto the span of the (not necessarily orthonormal, but
/// linearly independent) columns, through the normal equations
/// `M (M^T M)^{-1} M^T vec(x)`.
pub fn normal_equations_projection(cols: &[Vec<f64>], x: &DenseMatrix) -> DenseMatrix {
    let (m, n) = x.shape();
    if cols.is_empty() {
        return DenseMatrix::zeros(m, n);
    }
    let a = to_mat(cols, m * n);
    let xv = vec(x);
    let rhs = Mat::from_fn(cols.len(), 1, |k, _| dotv(&cols[k], &xv));
    let gram = a.transpose() * &a;
    let c = gram.partial_piv_lu().solve(&rhs);
    let p = &a * &c;
    unvec(&(0..m * n).map(|i| p[(i, 0)]).collect::<Vec<_>>(), m, n)
}

/// `||P_A P_B||` for orthonormal bases, as the largest singular value of the
/// cross-Gram matrix `A^T B`.
pub fn op_norm_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let g = Mat::from_fn(a.len(), b.len(), |i, j| dotv(&a[i], &b[j]));
    g.singular_values().expect("svd").into_iter().fold(0.0, f64::max)
}

/// Minimum-Frobenius-norm `X` with `<c_k, vec X> = rhs_k` for every
/// constraint row `c_k` (linearly independent), `X = C^T (C C^T)^{-1} rhs`.
pub fn least_norm(constraints: &[Vec<f64>], rhs: &[f64], m: usize, n: usize) -> DenseMatrix {
    assert_eq!(constraints.len(), rhs.len());
    if constraints.is_empty() {
        return DenseMatrix::zeros(m, n);
    }
    let c = to_mat(constraints, m * n);
    let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let y = (c.transpose() * &c).partial_piv_lu().solve(&b);
    let x = &c * &y;
    unvec(&(0..m * n).map(|i| x[(i, 0)]).collect::<Vec<_>>(), m, n)
}

/// Least-norm `W^S`: `P_Omega X = lambda sgn` on `Omega` and
/// `X ⟂ Q^perp ⊕ T`.
pub fn ws_oracle(
    sign: &DenseMatrix,
    omega: &SupportSet,
    t: &TangentSpace,
    qperp: &SpanBasis,
    lambda: f64,
) -> DenseMatrix {
    let (m, n) = omega.shape();
    let mut rows = support_basis(omega);
    let mut rhs: Vec<f64> = omega.indices().map(|(i, j)| lambda * sign[(i, j)]).collect();
    let mut gp = span_basis(qperp);
    gp.extend(tangent_basis(t));
    for g in gram_schmidt(&gp, 1e-8) {
        rows.push(g);
        rhs.push(0.0);
    }
    least_norm(&rows, &rhs, m, n)
}

/// Least-norm `W^Q`: `P_{Q^perp} X = -P_{Q^perp}(U V^T)` and
/// `X ⟂ Omega ⊕ T`.
pub fn wq_oracle(t: &TangentSpace, omega: &SupportSet, qperp: &SpanBasis) -> DenseMatrix {
    let (m, n) = omega.shape();
    let uv = vec(&t.uv_t());
    let mut rows = span_basis(qperp);
    let mut rhs: Vec<f64> = rows.iter().map(|g| -dotv(g, &uv)).collect();
    let mut pi = support_basis(omega);
    pi.extend(tangent_basis(t));
    for g in gram_schmidt(&pi, 1e-8) {
        rows.push(g);
        rhs.push(0.0);
    }
    least_norm(&rows, &rhs, m, n)
}

/// Singular values straight from faer's dense SVD, bypassing the library's
/// wrapper and cutoff logic.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let (m, n) = a.shape();
    Mat::from_fn(m, n, |i, j| a[(i, j)]).singular_values().expect("svd")
}

pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

pub fn nuclear_norm(a: &DenseMatrix) -> f64 {
    singular_values(a).into_iter().sum()
}

/// Deterministic pseudo-random matrix for oracle inputs, from a tiny LCG so
/// test data does not depend on the library's generators.
pub fn lcg_matrix(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    DenseMatrix::from_fn(m, n, |_, _| {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    })
}
