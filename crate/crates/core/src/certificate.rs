//! Dual certificates for the exact-recovery conditions.
//!
//! `(L0, S0)` is the unique optimum when there is a `W` with
//!
//! ```text
//! W in T^perp,   P_{Q^perp} W = -P_{Q^perp}(U V^T),   ||W|| < 1/2,
//! ||P_Omega(U V^T - lambda sgn(S0) + W)||_F <= lambda/4,
//! ||P_{Omega^perp}(U V^T + W)||_inf < lambda/2,
//! ```
//!
//! provided `||P_Omega P_{Gamma^perp}|| < 1/2` and `lambda < 1`, where
//! `Gamma^perp = Q^perp ⊕ T`. The candidate is `W = W^L + W^S + W^Q`: a golfing
//! iterate for `W^L`, and least-norm / least-squares corrections written as
//! Neumann series for `W^S` and `W^Q`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{self, GenParams, ProblemInstance};
use crate::linalg::{dot, DenseMatrix};
use crate::rng::{streams, SeededRng};
use crate::subspaces::{
    check_direct_sum, op_norm_product, project_support, DirectSumVerdict, SpanBasis, Subspace,
    SupportSet, TangentSpace, NEUMANN_MAX_TERMS, POWER_MAX_ITERS,
};

/// Default truncation tolerance for the Neumann series.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Absolute slack (times `max(1, ||U V^T||_F)`) for the two equality conditions.
pub const EQUALITY_TOL: f64 = 1e-6;

/// `ceil(2 ln m)`, at least 1.
pub fn golfing_j0(m: f64) -> usize {
    ((2.0 * m.ln()).ceil() as usize).max(1)
}

/// The batch rate `q` solving `rho = (1 - q)^j0`.
pub fn golfing_rate(rho: f64, j0: usize) -> f64 {
    1.0 - rho.powf(1.0 / j0 as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Batches drawn first; `Omega` is the complement of their union.
    CoGenerate,
    /// Batches drawn inside the complement of a given `Omega`. The union is
    /// then only approximately distributed like `Omega^c`.
    RetroFit,
}

#[derive(Clone, Debug)]
pub struct GolfingSchedule {
    pub j0: usize,
    pub q: f64,
    pub batches: Vec<SupportSet>,
    pub mode: ScheduleMode,
}

impl GolfingSchedule {
    /// `|rho - (1 - q)^j0|`.
    pub fn consistency_error(&self, rho: f64) -> f64 {
        (rho - (1.0 - self.q).powi(self.j0 as i32)).abs()
    }

    pub fn is_approximate(&self) -> bool {
        self.mode == ScheduleMode::RetroFit
    }

    /// Complement of the union of the batches.
    pub fn implied_support(&self) -> Option<SupportSet> {
        let first = self.batches.first()?;
        let union = self.batches.iter().skip(1).fold(first.clone(), |acc, b| acc.union(b));
        Some(union.complement())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    // rho = 0 gives q = 1: every batch is the full grid and Omega is empty
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("schedule needs 0 <= rho < 1, got {rho}")))
    }
}

fn bernoulli_batch(
    shape: (usize, usize),
    q: f64,
    allowed: Option<&SupportSet>,
    rng: &mut SeededRng,
) -> SupportSet {
    let (m, n) = shape;
    let mask = (0..m * n)
        .map(|k| {
            let hit = rng.random::<f64>() < q;
            hit && allowed.is_none_or(|a| a.mask()[k])
        })
        .collect();
    SupportSet::from_mask(m, n, mask).expect("mask length matches")
}

/// Co-generated schedule for an `m x n` problem; `Omega` is
/// [`GolfingSchedule::implied_support`].
pub fn cogenerate_schedule(m: usize, n: usize, rho: f64, seed: u64) -> Result<GolfingSchedule> {
    check_rho(rho)?;
    let j0 = golfing_j0(m as f64);
    let q = golfing_rate(rho, j0);
    let mut rng = SeededRng::stream(seed, streams::SCHEDULE);
    let batches = (0..j0).map(|_| bernoulli_batch((m, n), q, None, &mut rng)).collect();
    Ok(GolfingSchedule {
        j0,
        q,
        batches,
        mode: ScheduleMode::CoGenerate,
    })
}

/// Retro-fitted schedule: every entry of `Omega^c` joins each batch
/// independently with probability `q`.
pub fn retrofit_schedule(omega: &SupportSet, rho: f64, seed: u64) -> Result<GolfingSchedule> {
    check_rho(rho)?;
    let (m, n) = omega.shape();
    let j0 = golfing_j0(m as f64);
    let q = golfing_rate(rho, j0);
    let allowed = omega.complement();
    let mut rng = SeededRng::stream(seed, streams::SCHEDULE);
    let batches = (0..j0)
        .map(|_| bernoulli_batch((m, n), q, Some(&allowed), &mut rng))
        .collect();
    Ok(GolfingSchedule {
        j0,
        q,
        batches,
        mode: ScheduleMode::RetroFit,
    })
}

/// Instance whose support is the co-generated `Omega` of a fresh schedule, so
/// the golfing coupling holds exactly.
pub fn cogenerated_instance(
    params: GenParams,
    seed: u64,
) -> Result<(ProblemInstance, GolfingSchedule)> {
    params.validate()?;
    let schedule = cogenerate_schedule(params.m, params.n, params.rho, seed)?;
    let omega = schedule.implied_support().expect("j0 >= 1");
    let inst = instance::assemble_with_support(params, seed, &omega)?;
    Ok((inst, schedule))
}

/// `Gamma^perp = Q^perp ⊕ T`.
pub fn gamma_perp(t: &TangentSpace, qperp: &SpanBasis) -> Result<Subspace> {
    Subspace::direct_sum(&qperp.clone().into(), &t.clone().into())
}

/// `Pi = Omega ⊕ T`.
pub fn pi_space(omega: &SupportSet, t: &TangentSpace) -> Result<Subspace> {
    Subspace::direct_sum(&omega.clone().into(), &t.clone().into())
}

/// Entrywise sign with `sgn(0) = 0`.
pub fn sign_pattern(s: &DenseMatrix) -> DenseMatrix {
    s.map(|x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
}

#[derive(Clone, Debug)]
pub struct Golfing {
    pub wl: DenseMatrix,
    /// Final golfing iterate `Y_{j0}`, supported on the union of the batches.
    pub y: DenseMatrix,
    /// `(||Z_j||_F, ||Z_j||_inf)` for `j = 0..=j0`, `Z_j = U V^T - P_{Gamma^perp} Y_j`.
    pub z_trace: Vec<(f64, f64)>,
}

/// Golfing scheme
/// `Y_j = Y_{j-1} + q^{-1} P_{Omega_j} P_{Gamma^perp}(U V^T - Y_{j-1})`, with
/// `W^L = P_Gamma Y_{j0}`.
pub fn construct_wl(
    t: &TangentSpace,
    omega: &SupportSet,
    schedule: &GolfingSchedule,
    qperp: &SpanBasis,
) -> Result<Golfing> {
    for (k, b) in schedule.batches.iter().enumerate() {
        if b.shape() != omega.shape() || b.indices().any(|(i, j)| omega.contains(i, j)) {
            return Err(Error::InvalidParameter(format!(
                "golfing batch {} is not inside the complement of omega",
                k + 1
            )));
        }
    }
    let gp = gamma_perp(t, qperp)?;
    let uv = t.uv_t();
    let inv_q = 1.0 / schedule.q;
    let mut y = DenseMatrix::zeros(uv.rows(), uv.cols());
    let mut z = uv.clone();
    let mut z_trace = vec![(z.frobenius(), z.linf())];
    for batch in &schedule.batches {
        y.axpy(inv_q, &project_support(&z, batch));
        z = &uv - &gp.project(&y);
        z_trace.push((z.frobenius(), z.linf()));
    }
    let wl = &y - &gp.project(&y);
    Ok(Golfing { wl, y, z_trace })
}

/// Conjugate gradients for a symmetric positive definite `op`, from `x`.
fn conjugate_gradient(
    op: impl Fn(&DenseMatrix) -> DenseMatrix,
    b: &DenseMatrix,
    mut x: DenseMatrix,
    tol: f64,
    max_iters: usize,
) -> (DenseMatrix, bool) {
    let mut r = b - &op(&x);
    let mut p = r.clone();
    let mut rr = dot(r.as_slice(), r.as_slice());
    let target = tol * b.frobenius();
    for _ in 0..max_iters {
        if rr.sqrt() <= target {
            return (x, true);
        }
        let ap = op(&p);
        let alpha = rr / dot(p.as_slice(), ap.as_slice());
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = dot(r.as_slice(), r.as_slice());
        p = &r + &p.scale(rr_new / rr);
        rr = rr_new;
    }
    (x, rr.sqrt() <= target)
}

/// `sum_k A^k x0` truncated when a term drops to `stop`; `None` on cap.
fn neumann(
    apply: impl Fn(&DenseMatrix) -> DenseMatrix,
    x0: &DenseMatrix,
    stop: f64,
) -> Option<DenseMatrix> {
    let mut acc = x0.clone();
    let mut term = x0.clone();
    for _ in 0..NEUMANN_MAX_TERMS {
        term = apply(&term);
        if term.frobenius() <= stop {
            return Some(acc);
        }
        acc.axpy(1.0, &term);
    }
    None
}

fn premise(what: &str, measured: f64, limit: f64) -> Result<()> {
    if measured < limit {
        Ok(())
    } else {
        Err(Error::PremiseViolation {
            what: what.to_string(),
            measured,
            limit,
        })
    }
}

/// Least-norm `W^S`: minimize `||X||_F` subject to `P_Omega X = lambda sgn`
/// and `P_{Gamma^perp} X = 0`, as
/// `lambda (I - P_{Gamma^perp}) P_Omega sum_k (P_Omega P_{Gamma^perp} P_Omega)^k sgn`.
pub fn construct_ws(
    sign: &DenseMatrix,
    omega: &SupportSet,
    t: &TangentSpace,
    qperp: &SpanBasis,
    lambda: f64,
    tol: f64,
) -> Result<DenseMatrix> {
    let (m, n) = omega.shape();
    if sign.shape() != (m, n) {
        return Err(Error::ShapeMismatch {
            op: "construct_ws",
            expected: (m, n),
            found: sign.shape(),
        });
    }
    let x0 = project_support(sign, omega);
    if omega.is_empty() || x0.frobenius() == 0.0 {
        return Ok(DenseMatrix::zeros(m, n));
    }
    let gp = gamma_perp(t, qperp)?;
    let so: Subspace = omega.clone().into();
    let coupling = op_norm_product(&so, &gp, POWER_MAX_ITERS).value;
    premise("||P_Omega P_GammaPerp||", coupling, 1.0)?;

    let apply = |x: &DenseMatrix| project_support(&gp.project(x), omega);
    let acc = match neumann(apply, &x0, tol * x0.frobenius()) {
        Some(acc) => acc,
        None => {
            log::debug!("W^S Neumann series hit the cap; finishing with CG");
            // (I - P_Omega P_Gamma^perp P_Omega) a = P_Omega sgn on Omega
            let op = |x: &DenseMatrix| x - &apply(x);
            let (a, ok) = conjugate_gradient(op, &x0, x0.clone(), tol, 10 * NEUMANN_MAX_TERMS);
            if !ok {
                log::warn!("W^S conjugate-gradient fallback did not reach {tol:e}");
            }
            a
        }
    };
    let mut ws = &acc - &gp.project(&acc);
    ws.scale_mut(lambda);
    Ok(ws)
}

/// Least-squares `W^Q`: minimize `||X||_F` subject to
/// `P_{Q^perp} X = -P_{Q^perp}(U V^T)` and `P_Pi X = 0`, as
/// `P_{Pi^perp} sum_k (P_{Q^perp} P_Pi P_{Q^perp})^k (-P_{Q^perp} U V^T)`.
///
/// The series lives in `Q^perp`, so it is summed in the coordinates of the
/// basis, where `P_{Q^perp} P_Pi P_{Q^perp}` is the `p x p` matrix
/// `<G_k, P_Pi G_l>`.
pub fn construct_wq(
    t: &TangentSpace,
    omega: &SupportSet,
    qperp: &SpanBasis,
    tol: f64,
) -> Result<DenseMatrix> {
    let (m, n) = omega.shape();
    let p = qperp.dim();
    let uv = t.uv_t();
    let beta: Vec<f64> = qperp.coefficients(&uv).iter().map(|c| -c).collect();
    let beta = DenseMatrix::new(p, 1, beta)?;
    if p == 0 || beta.frobenius() == 0.0 {
        return Ok(DenseMatrix::zeros(m, n));
    }
    let pi = pi_space(omega, t)?;
    let projected: Vec<DenseMatrix> = qperp.elements().iter().map(|g| pi.project(g)).collect();
    let gram = DenseMatrix::from_fn(p, p, |k, l| {
        dot(qperp.elements()[k].as_slice(), projected[l].as_slice())
    });
    // the Gram matrix is symmetric PSD, so its spectral norm is ||P_Qperp P_Pi||^2
    let coupling = gram.spectral()?.sqrt();
    premise("||P_Qperp P_Pi||", coupling, 1.0)?;

    let apply = |c: &DenseMatrix| gram.matmul(c);
    let coefs = match neumann(apply, &beta, tol * uv.frobenius()) {
        Some(c) => c,
        None => {
            let op = |c: &DenseMatrix| c - &gram.matmul(c);
            conjugate_gradient(op, &beta, beta.clone(), tol, 10 * p.max(1)).0
        }
    };
    let x = qperp.combine(coefs.as_slice());
    Ok(&x - &pi.project(&x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `value < limit` when true, `value <= limit` otherwise.
    pub strict: bool,
}

impl Target {
    fn new(name: &str, value: f64, limit: f64, strict: bool) -> Self {
        Target {
            name: name.to_string(),
            value,
            limit,
            strict,
        }
    }

    pub fn holds(&self) -> bool {
        if self.strict {
            self.value < self.limit
        } else {
            self.value <= self.limit
        }
    }
}

#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub wl: DenseMatrix,
    pub ws: DenseMatrix,
    pub wq: DenseMatrix,
    pub w: DenseMatrix,
    pub lambda: f64,
    /// `||P_T W||_F`, should vanish.
    pub cond_t: f64,
    /// `||P_{Q^perp}(W + U V^T)||_F`, should vanish.
    pub cond_qperp: f64,
    /// Slack allowed for `cond_t` and `cond_qperp`.
    pub equality_tol: f64,
    /// `||W||`, want `< 1/2`.
    pub cond_spectral: f64,
    /// `||P_Omega(U V^T - lambda sgn(S0) + W)||_F`, want `<= lambda/4`.
    pub cond_omega: f64,
    /// `||P_{Omega^perp}(U V^T + W)||_inf`, want `< lambda/2`.
    pub cond_inf: f64,
    /// `||P_Omega P_{Gamma^perp}||`, want `< 1/2`; `None` when `Gamma^perp`
    /// is not a direct sum.
    pub premise_omega_gamma_perp: Option<f64>,
    /// Per-component targets from the construction lemmas; informational.
    pub targets: Vec<Target>,
    pub verdict: bool,
}

impl CertificateReport {
    /// The conditions entering the verdict, in order.
    pub fn conditions(&self) -> Vec<Target> {
        let l = self.lambda;
        vec![
            Target::new("cond_t", self.cond_t, self.equality_tol, false),
            Target::new("cond_qperp", self.cond_qperp, self.equality_tol, false),
            Target::new("cond_spectral", self.cond_spectral, 0.5, true),
            Target::new("cond_omega", self.cond_omega, l / 4.0, false),
            Target::new("cond_inf", self.cond_inf, l / 2.0, true),
            Target::new(
                "premise_omega_gamma_perp",
                self.premise_omega_gamma_perp.unwrap_or(f64::INFINITY),
                0.5,
                true,
            ),
            Target::new("lambda", l, 1.0, true),
        ]
    }
}

/// Measures every condition for `W = wl + ws + wq`. Never fails: a
/// degenerate `Gamma^perp` is reported as a missing premise.
#[allow(clippy::too_many_arguments)]
pub fn verify(
    wl: &DenseMatrix,
    ws: &DenseMatrix,
    wq: &DenseMatrix,
    t: &TangentSpace,
    omega: &SupportSet,
    sign: &DenseMatrix,
    qperp: &SpanBasis,
    lambda: f64,
) -> Result<CertificateReport> {
    let w = &(wl + ws) + wq;
    let uv = t.uv_t();
    let off = omega.complement();
    let t_space: Subspace = t.clone().into();
    let q_space: Subspace = qperp.clone().into();

    let cond_t = t_space.project(&w).frobenius();
    let cond_qperp = q_space.project(&(&w + &uv)).frobenius();
    let cond_spectral = w.spectral()?;
    let mut on = &uv + &w;
    on.axpy(-lambda, sign);
    let cond_omega = project_support(&on, omega).frobenius();
    let cond_inf = project_support(&(&uv + &w), &off).linf();
    let premise_omega_gamma_perp = gamma_perp(t, qperp)
        .ok()
        .map(|gp| op_norm_product(&omega.clone().into(), &gp, POWER_MAX_ITERS).value);

    let uv_wl = &uv + wl;
    let targets = vec![
        Target::new("wl_spectral", wl.spectral()?, 0.25, true),
        Target::new("wl_omega_frobenius", project_support(&uv_wl, omega).frobenius(), lambda / 4.0, true),
        Target::new("wl_off_support_inf", project_support(&uv_wl, &off).linf(), lambda / 4.0, true),
        Target::new("ws_spectral", ws.spectral()?, 0.125, true),
        Target::new("ws_off_support_inf", project_support(ws, &off).linf(), lambda / 8.0, true),
        Target::new("wq_spectral", wq.spectral()?, 0.125, true),
        Target::new("wq_off_support_inf", project_support(wq, &off).linf(), lambda / 8.0, true),
    ];

    let mut report = CertificateReport {
        wl: wl.clone(),
        ws: ws.clone(),
        wq: wq.clone(),
        w,
        lambda,
        cond_t,
        cond_qperp,
        equality_tol: EQUALITY_TOL * uv.frobenius().max(1.0),
        cond_spectral,
        cond_omega,
        cond_inf,
        premise_omega_gamma_perp,
        targets,
        verdict: false,
    };
    report.verdict = report.conditions().iter().all(Target::holds);
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PremiseReport {
    /// `||P_Omega P_{Gamma^perp}||`; `None` when `Q^perp` and `T` are not independent.
    pub omega_gamma_perp: Option<f64>,
    pub qperp_t: f64,
    pub qperp_omega: f64,
    pub omega_t: f64,
    pub qperp_t_independent: bool,
    pub qperp_omega_independent: bool,
    pub omega_t_independent: bool,
}

pub fn check_premises(t: &TangentSpace, omega: &SupportSet, qperp: &SpanBasis) -> PremiseReport {
    let (st, so, sq): (Subspace, Subspace, Subspace) =
        (t.clone().into(), omega.clone().into(), qperp.clone().into());
    let qt = check_direct_sum(&sq, &st);
    let qo = check_direct_sum(&sq, &so);
    let ot = check_direct_sum(&so, &st);
    let omega_gamma_perp = gamma_perp(t, qperp)
        .ok()
        .map(|gp| op_norm_product(&so, &gp, POWER_MAX_ITERS).value);
    let ind = |c: &crate::subspaces::DirectSumCheck| c.verdict == DirectSumVerdict::Independent;
    PremiseReport {
        omega_gamma_perp,
        qperp_t: qt.norm.value,
        qperp_omega: qo.norm.value,
        omega_t: ot.norm.value,
        qperp_t_independent: ind(&qt),
        qperp_omega_independent: ind(&qo),
        omega_t_independent: ind(&ot),
    }
}

/// Every piece of one certificate construction.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub golfing: Golfing,
    pub report: CertificateReport,
    pub approximate_schedule: bool,
}

/// Builds `W^L`, `W^S`, `W^Q` for an instance and verifies their sum.
pub fn certify(
    inst: &ProblemInstance,
    schedule: &GolfingSchedule,
    lambda: f64,
    tol: f64,
) -> Result<Certificate> {
    let sign = sign_pattern(&inst.s0);
    let golfing = construct_wl(&inst.tangent, &inst.omega, schedule, &inst.qperp)?;
    let ws = construct_ws(&sign, &inst.omega, &inst.tangent, &inst.qperp, lambda, tol)?;
    let wq = construct_wq(&inst.tangent, &inst.omega, &inst.qperp, tol)?;
    let report = verify(
        &golfing.wl,
        &ws,
        &wq,
        &inst.tangent,
        &inst.omega,
        &sign,
        &inst.qperp,
        lambda,
    )?;
    Ok(Certificate {
        golfing,
        report,
        approximate_schedule: schedule.is_approximate(),
    })
}
