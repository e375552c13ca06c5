//! Dense row-major matrices, factorizations, norms and the two proximal maps
//! (singular value thresholding and entrywise soft thresholding).

use std::fmt;
use std::io::{Read, Write};
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};
use std::path::Path;

use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Real matrix stored row-major.
///
/// Zero-sized shapes are permitted so that rank-0 factors (an `m x 0` basis)
/// can be represented without special cases.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            let row = &self.row(i)[..self.cols.min(8)];
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "DenseMatrix::new",
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix::new"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch {
                op: "DenseMatrix::from_rows",
                expected: (rows.len(), cols),
                found: (rows.len(), bad.len()),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Square diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Rank-one matrix `u v^T`.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    /// Single-entry matrix `e_i e_j^T`.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = 1.0;
        m
    }

    /// Matrix with i.i.d. `N(0, std^2)` entries.
    pub fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut SeededRng) -> Self {
        let data = (0..rows * cols)
            .map(|_| std * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        DenseMatrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn scale_mut(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &DenseMatrix) {
        self.assert_same_shape(x, "axpy");
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.assert_same_shape(other, "max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    #[track_caller]
    fn assert_same_shape(&self, other: &DenseMatrix, op: &str) {
        assert_eq!(
            self.shape(),
            other.shape(),
            "{op}: shape mismatch {:?} vs {:?}",
            self.shape(),
            other.shape()
        );
    }

    /// `self * other`. Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul: inner dimension mismatch");
        let n = other.cols;
        let mut out = DenseMatrix::zeros(self.rows, n);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^T * other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows, "t_matmul: row count mismatch");
        let n = other.cols;
        let mut out = DenseMatrix::zeros(self.cols, n);
        for k in 0..self.rows {
            let b_row = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.data[i * n..(i + 1) * n].iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_t: column count mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn l1(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn linf(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Spectral norm by power iteration on `A^T A`, falling back to a full SVD
    /// when the iteration stalls.
    pub fn spectral(&self) -> Result<f64> {
        spectral_norm(self)
    }

    pub fn nuclear(&self) -> Result<f64> {
        Ok(svd(self, Cutoff::Absolute(0.0))?.sigma.iter().sum())
    }

    pub fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    pub fn from_faer(m: faer::MatRef<'_, f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;

    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;

    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;

    fn neg(self) -> DenseMatrix {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, c: f64) -> DenseMatrix {
        self.scale(c)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trace inner product `<X, Y> = sum_ij X_ij Y_ij`.
pub fn inner(x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch {
            op: "inner",
            expected: x.shape(),
            found: y.shape(),
        });
    }
    Ok(dot(&x.data, &y.data))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Frobenius,
    Nuclear,
    L1,
    Linf,
    Spectral,
}

pub fn norm(a: &DenseMatrix, kind: NormKind) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("norm"));
    }
    match kind {
        NormKind::Frobenius => Ok(a.frobenius()),
        NormKind::Nuclear => a.nuclear(),
        NormKind::L1 => Ok(a.l1()),
        NormKind::Linf => Ok(a.linf()),
        NormKind::Spectral => a.spectral(),
    }
}

const POWER_REL_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 10_000;

fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    if a.data.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let n = a.cols;
    let mut rng = SeededRng::stream(0x5eed_0f_5bec, 0);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut x);
    let mut theta = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let ax = mat_vec(a, &x);
        let mut y = mat_t_vec(a, &ax);
        let next = dot(&ax, &ax);
        let ny = normalize(&mut y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        x = y;
        if (next - theta).abs() <= POWER_REL_TOL * next {
            return Ok(next.sqrt());
        }
        theta = next;
    }
    log::debug!("power iteration stalled; falling back to SVD");
    Ok(svd(a, Cutoff::Absolute(0.0))?
        .sigma
        .first()
        .copied()
        .unwrap_or(0.0))
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

fn mat_vec(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    (0..a.rows).map(|i| dot(a.row(i), x)).collect()
}

fn mat_t_vec(a: &DenseMatrix, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.cols];
    for (i, &yi) in y.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(a.row(i)) {
            *o += yi * v;
        }
    }
    out
}

/// Which singular values an SVD keeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cutoff {
    /// Keep singular values strictly above this value.
    Absolute(f64),
    /// Keep singular values strictly above this fraction of the largest one.
    Relative(f64),
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff::Relative(1e-10)
    }
}

/// Reduced SVD `A = U diag(sigma) V^T` truncated to the retained rank.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        scale_columns(&mut us, &self.sigma);
        us.matmul_t(&self.v)
    }
}

fn scale_columns(m: &mut DenseMatrix, s: &[f64]) {
    let cols = m.cols;
    for row in m.data.chunks_mut(cols.max(1)) {
        for (x, &c) in row.iter_mut().zip(s) {
            *x *= c;
        }
    }
}

pub fn svd(a: &DenseMatrix, cutoff: Cutoff) -> Result<SvdFactors> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd"));
    }
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(SvdFactors {
            u: DenseMatrix::zeros(m, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(n, 0),
        });
    }
    let dec = a.to_faer().thin_svd().map_err(|_| Error::SvdFailed { rows: m, cols: n })?;
    let (u, v, sv) = (dec.U(), dec.V(), dec.S().column_vector());
    if (0..sv.nrows()).any(|k| !sv[k].is_finite()) {
        return Err(Error::SvdFailed { rows: m, cols: n });
    }
    // faer returns singular values in nonincreasing order
    let threshold = match cutoff {
        Cutoff::Absolute(t) => t,
        Cutoff::Relative(f) => f * if sv.nrows() > 0 { sv[0] } else { 0.0 },
    };
    let r = (0..sv.nrows()).take_while(|&k| sv[k] > threshold).count();
    let uu = DenseMatrix::from_fn(m, r, |i, c| u[(i, c)]);
    let vv = DenseMatrix::from_fn(n, r, |j, c| v[(j, c)]);
    Ok(SvdFactors {
        u: uu,
        sigma: (0..r).map(|k| sv[k]).collect(),
        v: vv,
    })
}

/// Singular value thresholding: `U diag(max(sigma - tau, 0)) V^T`.
///
/// Singular values equal to `tau` map to zero.
pub fn svt(a: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    svt_with_norm(a, tau).map(|(x, _)| x)
}

/// [`svt`] together with the nuclear norm of its result.
pub fn svt_with_norm(a: &DenseMatrix, tau: f64) -> Result<(DenseMatrix, f64)> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("svt threshold {tau} < 0")));
    }
    if tau == 0.0 {
        return Ok((a.clone(), a.nuclear()?));
    }
    let f = svd(a, Cutoff::Absolute(tau))?;
    let shrunk: Vec<f64> = f.sigma.iter().map(|s| s - tau).collect();
    let nuclear = shrunk.iter().sum();
    let mut us = f.u;
    scale_columns(&mut us, &shrunk);
    Ok((us.matmul_t(&f.v), nuclear))
}

/// Entrywise `sign(a) * max(|a| - tau, 0)`.
pub fn soft_threshold(a: &DenseMatrix, tau: f64) -> DenseMatrix {
    a.map(|x| {
        if x > tau {
            x - tau
        } else if x < -tau {
            x + tau
        } else {
            0.0
        }
    })
}

/// Orthonormal basis (thin Q factor) of the column span of `a`.
pub fn orthonormal_columns(a: &DenseMatrix) -> DenseMatrix {
    if a.cols == 0 {
        return a.clone();
    }
    let q = a.to_faer().qr().compute_thin_Q();
    DenseMatrix::from_faer(q.as_ref())
}

const DMAT_MAGIC: &str = "DMAT1";

/// Writes `DMAT1 <rows> <cols>\n` followed by little-endian f64 entries in row-major order.
pub fn write_dmat(w: &mut impl Write, m: &DenseMatrix) -> std::io::Result<()> {
    writeln!(w, "{DMAT_MAGIC} {} {}", m.rows, m.cols)?;
    let mut buf = Vec::with_capacity(m.data.len() * 8);
    for x in &m.data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

pub(crate) fn read_header_line(r: &mut impl Read, what: &'static str) -> Result<String> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match r.read(&mut byte) {
            Ok(0) => return Err(Error::format(what, "missing header line")),
            Ok(_) if byte[0] == b'\n' => break,
            Ok(_) => line.push(byte[0]),
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(Error::format(what, e.to_string())),
        }
        if line.len() > 256 {
            return Err(Error::format(what, "header line too long"));
        }
    }
    String::from_utf8(line).map_err(|_| Error::format(what, "header is not UTF-8"))
}

pub(crate) fn parse_usize(tok: Option<&str>, what: &'static str, field: &str) -> Result<usize> {
    tok.ok_or_else(|| Error::format(what, format!("missing {field}")))?
        .parse()
        .map_err(|_| Error::format(what, format!("bad {field}")))
}

/// Reads one DMAT1 record; rejects truncated payloads.
pub fn read_dmat(r: &mut impl Read) -> Result<DenseMatrix> {
    let header = read_header_line(r, "DMAT1")?;
    let mut toks = header.split_ascii_whitespace();
    if toks.next() != Some(DMAT_MAGIC) {
        return Err(Error::format("DMAT1", format!("bad magic in header {header:?}")));
    }
    let rows = parse_usize(toks.next(), "DMAT1", "rows")?;
    let cols = parse_usize(toks.next(), "DMAT1", "cols")?;
    if toks.next().is_some() {
        return Err(Error::format("DMAT1", "trailing tokens in header"));
    }
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format("DMAT1", "shape overflow"))?;
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf).map_err(|_| {
        Error::format("DMAT1", format!("truncated payload: expected {} bytes", count * 8))
    })?;
    let data = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    DenseMatrix::new(rows, cols, data)
}

pub fn save_dmat(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    write_dmat(&mut f, m)
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(path, e))
}

/// Loads a file holding exactly one DMAT1 record.
pub fn load_dmat(path: &Path) -> Result<DenseMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = bytes.as_slice();
    let m = read_dmat(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(Error::format("DMAT1", format!("{} trailing bytes", cursor.len())));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        DenseMatrix::gaussian(rows, cols, 1.0, &mut SeededRng::new(seed))
    }

    #[test]
    fn svd_identity_and_zero() {
        let f = svd(&DenseMatrix::identity(3), Cutoff::Absolute(0.0)).unwrap();
        assert_eq!(f.rank(), 3);
        for s in &f.sigma {
            assert!((s - 1.0).abs() < 1e-14);
        }
        let z = svd(&DenseMatrix::zeros(4, 2), Cutoff::Absolute(0.0)).unwrap();
        assert_eq!(z.rank(), 0);
        assert_eq!(z.u.shape(), (4, 0));
        assert_eq!(z.v.shape(), (2, 0));
    }

    #[test]
    fn svd_rank_one_outer_product() {
        let mut rng = SeededRng::new(7);
        let mut u: Vec<f64> = (0..5).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let mut v: Vec<f64> = (0..4).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        normalize(&mut u);
        normalize(&mut v);
        let f = svd(&DenseMatrix::outer(&u, &v), Cutoff::default()).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.sigma[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_factors_are_orthonormal_and_reconstruct() {
        for (m, n) in [(7, 4), (4, 7), (6, 6)] {
            let a = random(m, n, (m * 10 + n) as u64);
            let f = svd(&a, Cutoff::default()).unwrap();
            let r = f.rank();
            assert!(f.u.t_matmul(&f.u).max_abs_diff(&DenseMatrix::identity(r)) < 1e-10);
            assert!(f.v.t_matmul(&f.v).max_abs_diff(&DenseMatrix::identity(r)) < 1e-10);
            assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
            assert!((&f.reconstruct() - &a).frobenius() / a.frobenius() < 1e-8);
        }
    }

    #[test]
    fn norms_of_diagonal() {
        let a = DenseMatrix::diag(&[3.0, 4.0]);
        assert!((norm(&a, NormKind::Nuclear).unwrap() - 7.0).abs() < 1e-12);
        assert!((norm(&a, NormKind::Frobenius).unwrap() - 5.0).abs() < 1e-12);
        assert!((norm(&a, NormKind::Spectral).unwrap() - 4.0).abs() < 1e-10);
        assert_eq!(norm(&a, NormKind::L1).unwrap(), 7.0);
        assert_eq!(norm(&a, NormKind::Linf).unwrap(), 4.0);
    }

    #[test]
    fn norms_of_zero() {
        let z = DenseMatrix::zeros(3, 5);
        for kind in [
            NormKind::Frobenius,
            NormKind::Nuclear,
            NormKind::L1,
            NormKind::Linf,
            NormKind::Spectral,
        ] {
            assert_eq!(norm(&z, kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn norm_rejects_non_finite() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(norm(&a, NormKind::L1), Err(Error::NonFinite(_))));
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn spectral_matches_svd() {
        for seed in 0..5 {
            let a = random(9, 6, seed);
            let s = a.spectral().unwrap();
            let top = svd(&a, Cutoff::Absolute(0.0)).unwrap().sigma[0];
            assert!((s - top).abs() <= 1e-10 * top, "{s} vs {top}");
        }
    }

    #[test]
    fn svt_examples() {
        let a = random(5, 5, 3);
        assert!(svt(&a, 0.0).unwrap().max_abs_diff(&a) < 1e-10);

        let d = svt(&DenseMatrix::diag(&[3.0, 1.0]), 2.0).unwrap();
        assert!(d.max_abs_diff(&DenseMatrix::diag(&[1.0, 0.0])) < 1e-12);

        let big = a.spectral().unwrap() + 1.0;
        assert_eq!(svt(&a, big).unwrap().frobenius(), 0.0);

        // tie at the threshold maps to zero
        assert_eq!(svt(&DenseMatrix::diag(&[2.0, 2.0]), 2.0).unwrap().frobenius(), 0.0);
    }

    #[test]
    fn svt_shrinks_spectral_norm() {
        let a = random(6, 4, 11);
        let na = a.spectral().unwrap();
        for tau in [0.1, 0.5, 1.0, 2.0] {
            let s = svt(&a, tau).unwrap().spectral().unwrap();
            assert!(s <= (na - tau).max(0.0) + 1e-9);
        }
    }

    #[test]
    fn soft_threshold_examples() {
        let a = DenseMatrix::from_rows(&[&[2.0, -0.5], &[0.0, -3.0]]).unwrap();
        assert_eq!(soft_threshold(&a, 0.0), a);
        let expected = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, -2.0]]).unwrap();
        assert_eq!(soft_threshold(&a, 1.0), expected);

        let r = random(8, 8, 5);
        for tau in [0.0, 0.3, 1.7] {
            assert!((&soft_threshold(&r, tau) - &r).linf() <= tau + 1e-15);
        }
    }

    #[test]
    fn inner_examples() {
        let a = random(3, 4, 1);
        assert_eq!(inner(&a, &DenseMatrix::zeros(3, 4)).unwrap(), 0.0);
        assert_eq!(inner(&DenseMatrix::unit(3, 4, 0, 0), &a).unwrap(), a[(0, 0)]);
        let f2 = a.frobenius().powi(2);
        assert!((inner(&a, &a).unwrap() - f2).abs() <= 1e-10 * f2);
        assert!(matches!(
            inner(&a, &DenseMatrix::zeros(4, 3)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn products_agree() {
        let a = random(4, 3, 21);
        let b = random(4, 5, 22);
        let c = random(6, 3, 23);
        assert!(a.t_matmul(&b).max_abs_diff(&a.transpose().matmul(&b)) < 1e-12);
        assert!(a.matmul_t(&c).max_abs_diff(&a.matmul(&c.transpose())) < 1e-12);
    }

    #[test]
    fn dmat_round_trip_and_truncation() {
        let a = random(3, 7, 9);
        let mut buf = Vec::new();
        write_dmat(&mut buf, &a).unwrap();
        assert!(buf.starts_with(b"DMAT1 3 7\n"));
        let back = read_dmat(&mut buf.as_slice()).unwrap();
        assert_eq!(back, a);

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(
            read_dmat(&mut &truncated[..]),
            Err(Error::Format { .. })
        ));
        assert!(read_dmat(&mut &b"DMAT2 1 1\n"[..]).is_err());
    }

    #[test]
    fn orthonormal_columns_spans_input() {
        let a = random(10, 3, 4);
        let q = orthonormal_columns(&a);
        assert_eq!(q.shape(), (10, 3));
        assert!(q.t_matmul(&q).max_abs_diff(&DenseMatrix::identity(3)) < 1e-12);
        let resid = &a - &q.matmul(&q.t_matmul(&a));
        assert!(resid.frobenius() < 1e-10 * a.frobenius());
    }
}
