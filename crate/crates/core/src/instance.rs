//! Synthetic problem instances: incoherent low-rank `L0`, Bernoulli-sign
//! sparse `S0`, and a measurement complement `Q^perp` drawn at random, built
//! from a deterministic smooth family, or spanned by image Jacobians.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::rng::{streams, SeededRng, RNG_ALGORITHM};
use crate::subspaces::{
    check_direct_sum, DirectSumVerdict, SpanBasis, Subspace, SupportSet, TangentSpace,
};

/// Regenerations allowed after the first draw.
pub const MAX_RETRIES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QModel {
    #[default]
    Random,
    NuCoherentSmooth,
    FromJacobians,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub rho: f64,
    pub p: usize,
    /// Sparse entry magnitude; `None` means 10 times the mean `|L0|` entry.
    #[serde(default)]
    pub magnitude: Option<f64>,
    #[serde(default)]
    pub qmodel: QModel,
}

impl GenParams {
    pub fn new(m: usize, n: usize, r: usize, rho: f64, p: usize) -> Self {
        GenParams {
            m,
            n,
            r,
            rho,
            p,
            magnitude: None,
            qmodel: QModel::Random,
        }
    }

    pub fn with_qmodel(mut self, qmodel: QModel) -> Self {
        self.qmodel = qmodel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n == 0 || self.n > self.m {
            return bad(format!("need 1 <= n <= m, got m={} n={}", self.m, self.n));
        }
        if self.r > self.n {
            return bad(format!("rank r={} exceeds n={}", self.r, self.n));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho={} outside [0, 1)", self.rho));
        }
        let room = self.m * self.n - (self.m + self.n - self.r) * self.r;
        if self.p > 0 && self.p >= room {
            return bad(format!("p={} leaves no room beside T (limit {room})", self.p));
        }
        if let Some(mag) = self.magnitude {
            if !(mag > 0.0 && mag.is_finite()) {
                return bad(format!("magnitude={mag} must be positive"));
            }
        }
        Ok(())
    }
}

/// Operator norm and verdict of one pairwise direct-sum check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub independent: bool,
    pub norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectSumVerdicts {
    pub qperp_t: PairCheck,
    pub qperp_omega: PairCheck,
    pub t_omega: PairCheck,
}

impl DirectSumVerdicts {
    pub fn all_independent(&self) -> bool {
        self.qperp_t.independent && self.qperp_omega.independent && self.t_omega.independent
    }
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub params: GenParams,
    pub seed: u64,
    /// Sparse magnitude actually used.
    pub magnitude: f64,
    pub l0: DenseMatrix,
    pub s0: DenseMatrix,
    pub omega: SupportSet,
    pub qperp: SpanBasis,
    pub d: DenseMatrix,
    pub tangent: TangentSpace,
    pub verdicts: DirectSumVerdicts,
}

impl ProblemInstance {
    /// `P_Q D = D - P_{Q^perp} D`.
    pub fn observed(&self) -> DenseMatrix {
        &self.d - &crate::subspaces::project_span(&self.d, &self.qperp)
    }

    pub fn validate(&self) -> Result<()> {
        if &self.l0 + &self.s0 != self.d {
            return Err(Error::InvalidParameter("D != L0 + S0".into()));
        }
        if !SupportSet::of_nonzeros(&self.s0).is_subset_of(&self.omega) {
            return Err(Error::InvalidParameter("supp(S0) not inside omega".into()));
        }
        if self.qperp.shape() != self.d.shape() {
            return Err(Error::ShapeMismatch {
                op: "ProblemInstance::validate",
                expected: self.d.shape(),
                found: self.qperp.shape(),
            });
        }
        Ok(())
    }

    /// Writes the bundle directory: `params.json`, `L0.dmat`, `S0.dmat`,
    /// `D.dmat`, `omega.supp`, `qperp.basis`.
    pub fn save_bundle(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = json!({
            "params": self.params,
            "seed": self.seed,
            "rng": RNG_ALGORITHM,
            "magnitude": self.magnitude,
            "direct_sum": self.verdicts,
        });
        let path = dir.join("params.json");
        fs::write(&path, crate::json::to_string_pretty(&meta)).map_err(|e| Error::io(&path, e))?;
        linalg::save_dmat(&dir.join("L0.dmat"), &self.l0)?;
        linalg::save_dmat(&dir.join("S0.dmat"), &self.s0)?;
        linalg::save_dmat(&dir.join("D.dmat"), &self.d)?;
        let path = dir.join("omega.supp");
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.omega
            .write_to(&mut BufWriter::new(f))
            .map_err(|e| Error::io(&path, e))?;
        let path = dir.join("qperp.basis");
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.qperp
            .write_to(&mut BufWriter::new(f))
            .map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    /// Reads a bundle back. The tangent space is recomputed from `L0`, so its
    /// bases may differ from the generating ones by an orthogonal rotation.
    pub fn load_bundle(dir: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Meta {
            params: GenParams,
            seed: u64,
            magnitude: f64,
            direct_sum: DirectSumVerdicts,
        }
        let path = dir.join("params.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: Meta = serde_json::from_str(&text)?;
        let l0 = linalg::load_dmat(&dir.join("L0.dmat"))?;
        let s0 = linalg::load_dmat(&dir.join("S0.dmat"))?;
        let d = linalg::load_dmat(&dir.join("D.dmat"))?;
        let path = dir.join("omega.supp");
        let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let omega = SupportSet::read_from(&mut BufReader::new(f))?;
        let path = dir.join("qperp.basis");
        let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let qperp = SpanBasis::read_from(&mut BufReader::new(f))?;
        let tangent = TangentSpace::of_matrix(&l0)?;
        let inst = ProblemInstance {
            params: meta.params,
            seed: meta.seed,
            magnitude: meta.magnitude,
            l0,
            s0,
            omega,
            qperp,
            d,
            tangent,
            verdicts: meta.direct_sum,
        };
        inst.validate()?;
        Ok(inst)
    }
}

fn attempt_rng(seed: u64, stream: u64, attempt: usize) -> SeededRng {
    SeededRng::stream(seed, stream + attempt as u64 * streams::RETRY_STRIDE)
}

/// `L0 = U diag(sigma) V^T` with Gaussian-orthonormalized `U`, `V` and
/// `sigma` uniform in `[1, 2]`, sorted descending. `r = 0` gives zero.
pub fn gen_low_rank(m: usize, n: usize, r: usize, seed: u64) -> Result<(DenseMatrix, TangentSpace)> {
    low_rank_from(m, n, r, &mut attempt_rng(seed, streams::LOW_RANK, 0))
}

fn low_rank_from(
    m: usize,
    n: usize,
    r: usize,
    rng: &mut SeededRng,
) -> Result<(DenseMatrix, TangentSpace)> {
    if r > n.min(m) {
        return Err(Error::InvalidParameter(format!(
            "rank {r} exceeds min(m, n) = {}",
            n.min(m)
        )));
    }
    if r == 0 {
        return Ok((DenseMatrix::zeros(m, n), TangentSpace::empty(m, n)));
    }
    let u = linalg::orthonormal_columns(&DenseMatrix::gaussian(m, r, 1.0, rng));
    let v = linalg::orthonormal_columns(&DenseMatrix::gaussian(n, r, 1.0, rng));
    let mut sigma: Vec<f64> = (0..r).map(|_| rng.random_range(1.0..=2.0)).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    let us = DenseMatrix::from_fn(m, r, |i, k| u[(i, k)] * sigma[k]);
    let l0 = us.matmul_t(&v);
    Ok((l0, TangentSpace::new(u, v)?))
}

/// Bernoulli(`rho`) support with independent fair signs times `magnitude`.
pub fn gen_sparse(
    m: usize,
    n: usize,
    rho: f64,
    magnitude: f64,
    seed: u64,
) -> Result<(DenseMatrix, SupportSet)> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho={rho} outside [0, 1)")));
    }
    Ok(sparse_from(m, n, rho, magnitude, &mut attempt_rng(seed, streams::SPARSE, 0)))
}

fn sparse_from(
    m: usize,
    n: usize,
    rho: f64,
    magnitude: f64,
    rng: &mut SeededRng,
) -> (DenseMatrix, SupportSet) {
    let mut s = DenseMatrix::zeros(m, n);
    let mut mask = vec![false; m * n];
    for (k, slot) in mask.iter_mut().enumerate() {
        // both draws are consumed for every entry so the sign stream does not
        // depend on rho
        let hit = rng.random::<f64>() < rho;
        let positive = rng.random::<bool>();
        if hit {
            *slot = true;
            s.as_mut_slice()[k] = if positive { magnitude } else { -magnitude };
        }
    }
    let omega = SupportSet::from_mask(m, n, mask).expect("mask length matches");
    (s, omega)
}

/// `p` Gaussian matrices (entry variance `1/(mn)`) orthonormalized by
/// modified Gram-Schmidt; `p = 0` gives the empty basis.
pub fn gen_random_qperp(m: usize, n: usize, p: usize, seed: u64) -> Result<SpanBasis> {
    if p > 0 && p >= m * n {
        return Err(Error::InvalidParameter(format!("p={p} must be below mn={}", m * n)));
    }
    let mut last = None;
    for attempt in 0..=MAX_RETRIES {
        match random_qperp_from(m, n, p, &mut attempt_rng(seed, streams::QPERP, attempt)) {
            Ok(b) => return Ok(b),
            Err(e @ Error::RankDeficient { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_RETRIES + 1,
        reason: last.map(|e| e.to_string()).unwrap_or_default(),
    })
}

fn random_qperp_from(m: usize, n: usize, p: usize, rng: &mut SeededRng) -> Result<SpanBasis> {
    let std = 1.0 / ((m * n) as f64).sqrt();
    let draws: Vec<_> = (0..p).map(|_| DenseMatrix::gaussian(m, n, std, rng)).collect();
    SpanBasis::orthonormalize(m, n, &draws)
}

/// Orthonormal DCT-II basis of `R^k`, one cosine profile per column.
pub fn dct_basis(k: usize) -> DenseMatrix {
    let kf = k as f64;
    DenseMatrix::from_fn(k, k, |i, f| {
        let c = if f == 0 { (1.0 / kf).sqrt() } else { (2.0 / kf).sqrt() };
        c * (std::f64::consts::PI * (i as f64 + 0.5) * f as f64 / kf).cos()
    })
}

/// Deterministic `nu`-coherent complement built from cosine profiles.
///
/// A single product `c_i c_j^T` of cosine profiles has unit spectral norm, so
/// it has `nu = n` and is useless here. Instead template `s` pairs the column
/// profile `j` with the row profile `(j + s) mod m` for every `j < n`:
///
/// ```text
/// G_s = (1 / sqrt(n)) sum_j c^m_{(j+s) mod m} (c^n_j)^T
/// ```
///
/// All `n` singular values of `G_s` equal `1/sqrt(n)`, so `n ||G_s||^2 = 1`,
/// and distinct shifts are orthogonal in the trace inner product. Shifts
/// `1..=p` are used; shift 0 is the scaled identity when `m = n` and is left
/// out. Candidates are still screened against `n ||G||^2 <= 4` and passed
/// through Gram-Schmidt.
pub fn gen_nu_coherent_qperp(m: usize, n: usize, p: usize) -> Result<SpanBasis> {
    if p == 0 {
        return Ok(SpanBasis::empty(m, n));
    }
    if n > m || p >= m {
        return Err(Error::InvalidParameter(format!(
            "smooth nu-coherent family needs n <= m and p < m (m={m}, n={n}, p={p})"
        )));
    }
    let cm = dct_basis(m);
    let cn = dct_basis(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut templates = Vec::with_capacity(p);
    for s in 1..m {
        if templates.len() == p {
            break;
        }
        // G_s = C_m P_s C_n^T / sqrt(n), with P_s the shifted partial identity
        let shifted = DenseMatrix::from_fn(m, n, |i, j| cm[(i, (j + s) % m)] * scale);
        let g = shifted.matmul_t(&cn);
        let nu = n as f64 * g.spectral()?.powi(2);
        if nu <= 4.0 {
            templates.push(g);
        }
    }
    if templates.len() < p {
        return Err(Error::GenerationFailed {
            attempts: 1,
            reason: format!("only {} smooth templates pass the nu <= 4 screen", templates.len()),
        });
    }
    SpanBasis::orthonormalize(m, n, &templates)
}

/// Orthonormal basis for the span of the given Jacobians.
pub fn basis_from_jacobians(js: &[DenseMatrix]) -> Result<SpanBasis> {
    let first = js
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty Jacobian list".into()))?;
    let (m, n) = first.shape();
    SpanBasis::orthonormalize(m, n, js)
}

/// Jacobians of a smooth synthetic image (a sum of Gaussian blobs) with
/// respect to the affine motions: x and y translation, rotation, isotropic
/// scale, stretch and shear, in that order. At most 6.
pub fn synthetic_jacobians(m: usize, n: usize, p: usize, seed: u64) -> Result<Vec<DenseMatrix>> {
    if p > 6 {
        return Err(Error::InvalidParameter(format!(
            "affine motions give at most 6 Jacobians, asked for {p}"
        )));
    }
    let mut rng = SeededRng::stream(seed, streams::QPERP);
    let blobs: Vec<[f64; 4]> = (0..6)
        .map(|_| {
            [
                rng.random_range(0.2..0.8) * n as f64,
                rng.random_range(0.2..0.8) * m as f64,
                rng.random_range(0.08..0.2) * n.min(m) as f64,
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    // image gradient at pixel (row y, column x)
    let grad = |y: f64, x: f64| {
        let (mut gx, mut gy) = (0.0, 0.0);
        for &[cx, cy, w, a] in &blobs {
            let e = a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp();
            gx += -e * (x - cx) / (w * w);
            gy += -e * (y - cy) / (w * w);
        }
        (gx, gy)
    };
    let (xc, yc) = ((n as f64 - 1.0) / 2.0, (m as f64 - 1.0) / 2.0);
    let motion = |k: usize| {
        DenseMatrix::from_fn(m, n, |i, j| {
            let (gx, gy) = grad(i as f64, j as f64);
            let (x, y) = (j as f64 - xc, i as f64 - yc);
            match k {
                0 => gx,
                1 => gy,
                2 => -y * gx + x * gy,
                3 => x * gx + y * gy,
                4 => x * gx - y * gy,
                _ => y * gx + x * gy,
            }
        })
    };
    Ok((0..p).map(motion).collect())
}

fn pair(a: &Subspace, b: &Subspace) -> PairCheck {
    let c = check_direct_sum(a, b);
    PairCheck {
        independent: c.verdict == DirectSumVerdict::Independent,
        norm: c.norm.value,
    }
}

/// Draws `L0`, `S0` and `Q^perp`, checks the three pairwise direct sums and
/// forms `D = L0 + S0`. A degenerate pair triggers a fresh draw of every
/// component, up to [`MAX_RETRIES`] times.
pub fn assemble(params: GenParams, seed: u64) -> Result<ProblemInstance> {
    assemble_inner(params, seed, None)
}

/// [`assemble`] with a prescribed support: `S0` carries fair random signs
/// times the magnitude on exactly `omega`, and `params.rho` is not sampled.
pub fn assemble_with_support(
    params: GenParams,
    seed: u64,
    omega: &SupportSet,
) -> Result<ProblemInstance> {
    if omega.shape() != (params.m, params.n) {
        return Err(Error::ShapeMismatch {
            op: "assemble_with_support",
            expected: (params.m, params.n),
            found: omega.shape(),
        });
    }
    assemble_inner(params, seed, Some(omega))
}

fn signs_on(omega: &SupportSet, magnitude: f64, rng: &mut SeededRng) -> DenseMatrix {
    let (m, n) = omega.shape();
    let mut s = DenseMatrix::zeros(m, n);
    for (v, &hit) in s.as_mut_slice().iter_mut().zip(omega.mask()) {
        let positive = rng.random::<bool>();
        if hit {
            *v = if positive { magnitude } else { -magnitude };
        }
    }
    s
}

fn assemble_inner(
    params: GenParams,
    seed: u64,
    support: Option<&SupportSet>,
) -> Result<ProblemInstance> {
    params.validate()?;
    let GenParams { m, n, r, rho, p, .. } = params;
    let mut last = String::new();
    for attempt in 0..=MAX_RETRIES {
        let (l0, tangent) = low_rank_from(m, n, r, &mut attempt_rng(seed, streams::LOW_RANK, attempt))?;
        let magnitude = params.magnitude.unwrap_or_else(|| {
            let mean = l0.l1() / (m * n) as f64;
            if mean > 0.0 {
                10.0 * mean
            } else {
                1.0
            }
        });
        let mut sparse_rng = attempt_rng(seed, streams::SPARSE, attempt);
        let (s0, omega) = match support {
            Some(om) => (signs_on(om, magnitude, &mut sparse_rng), om.clone()),
            None => sparse_from(m, n, rho, magnitude, &mut sparse_rng),
        };
        let qperp = match params.qmodel {
            QModel::Random => {
                match random_qperp_from(m, n, p, &mut attempt_rng(seed, streams::QPERP, attempt)) {
                    Ok(b) => b,
                    Err(e @ Error::RankDeficient { .. }) => {
                        last = e.to_string();
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
            QModel::NuCoherentSmooth => gen_nu_coherent_qperp(m, n, p)?,
            QModel::FromJacobians => {
                if p == 0 {
                    SpanBasis::empty(m, n)
                } else {
                    let salt = seed.wrapping_add(attempt as u64);
                    basis_from_jacobians(&synthetic_jacobians(m, n, p, salt)?)?
                }
            }
        };
        let (sq, st, so): (Subspace, Subspace, Subspace) =
            (qperp.clone().into(), tangent.clone().into(), omega.clone().into());
        let verdicts = DirectSumVerdicts {
            qperp_t: pair(&sq, &st),
            qperp_omega: pair(&sq, &so),
            t_omega: pair(&st, &so),
        };
        if !verdicts.all_independent() {
            last = format!("degenerate direct sum: {verdicts:?}");
            log::debug!("assemble attempt {attempt}: {last}");
            continue;
        }
        let d = &l0 + &s0;
        return Ok(ProblemInstance {
            params,
            seed,
            magnitude,
            l0,
            s0,
            omega,
            qperp,
            d,
            tangent,
            verdicts,
        });
    }
    Err(Error::GenerationFailed {
        attempts: MAX_RETRIES + 1,
        reason: last,
    })
}
