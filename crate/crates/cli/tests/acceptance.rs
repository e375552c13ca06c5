//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs with `cargo test -p cpcp-cli --test acceptance`. Tolerances and
//! trial counts are fixed here and are not configurable.

use std::time::Instant;

use cpcp::certificate::{certify, cogenerated_instance, DEFAULT_TOL};
use cpcp::instance::gen_low_rank;
use cpcp::linalg::inner;
use cpcp::solver::oracle_solve;
use cpcp::subspaces::{nu_coherence, project_t};
use cpcp::{
    assemble, solve_cpcp, solve_pcp, DenseMatrix, GenParams, ProblemInstance, QModel, SeededRng,
    SolverOptions, SpanBasis, Subspace,
};
use cpcp_cli::ExperimentConfig;
use cpcp_testkit as tk;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).frobenius() / b.frobenius()
}

fn unit_gaussian(m: usize, n: usize, rng: &mut SeededRng) -> DenseMatrix {
    let x = DenseMatrix::gaussian(m, n, 1.0, rng);
    x.scale(1.0 / x.frobenius())
}

/// Largest violation of idempotency, self-adjointness, contraction and
/// Pythagoras for `s` on unit-norm probes.
fn projector_defect(s: &Subspace, rng: &mut SeededRng) -> f64 {
    let (m, n) = s.shape();
    let (x, y) = (unit_gaussian(m, n, rng), unit_gaussian(m, n, rng));
    let (px, py) = (s.project(&x), s.project(&y));
    let idem = s.project(&px).max_abs_diff(&px);
    let adj = (inner(&px, &y).unwrap() - inner(&x, &py).unwrap()).abs();
    let contraction = (px.frobenius() - x.frobenius()).max(0.0);
    let rest = &x - &px;
    let pyth = (x.frobenius().powi(2) - px.frobenius().powi(2) - rest.frobenius().powi(2)).abs();
    idem.max(adj).max(contraction).max(pyth)
}

fn c1_projector_algebra() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(1);
    let (mut worst, mut sums) = (0.0f64, 0);
    for trial in 0..100u64 {
        let m = rng.random_range(10..=50);
        let r = rng.random_range(1..=5);
        let rho = rng.random_range(0.0..=0.2);
        let p = rng.random_range(1..=10);
        let inst = match assemble(GenParams::new(m, m, r, rho, p), trial) {
            Ok(i) => i,
            Err(e) => return outcome(false, format!("trial {trial}: {e}")),
        };
        let (t, o, q): (Subspace, Subspace, Subspace) =
            (inst.tangent.clone().into(), inst.omega.clone().into(), inst.qperp.clone().into());
        let mut spaces = vec![t.complement(), o.complement(), q.complement(), t.clone(), o.clone(), q.clone()];
        for (a, b) in [(&q, &t), (&o, &t)] {
            if let Ok(s) = Subspace::direct_sum(a, b) {
                spaces.push(s);
                sums += 1;
            }
        }
        for s in &spaces {
            worst = worst.max(projector_defect(s, &mut rng));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && secs < 30.0,
        format!("max defect {worst:.2e} (limit 1e-8), {sums} direct sums included, {secs:.1} s (limit 30 s)"),
    )
}

fn c2_tangent_projector_vs_basis() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let (_, t) = gen_low_rank(6, 5, 2, 100 + k).unwrap();
        let x = tk::lcg_matrix(6, 5, k);
        let oracle = tk::normal_equations_projection(&tk::tangent_basis(&t), &x);
        worst = worst.max(project_t(&x, &t).max_abs_diff(&oracle));
    }
    outcome(worst <= 1e-9, format!("max deviation {worst:.2e} (limit 1e-9)"))
}

fn c3_direct_sums_vs_normal_equations() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let p = 1 + (k % 2) as usize;
        let inst = assemble(GenParams::new(8, 8, 1, 0.1, p), 200 + k).unwrap();
        let x = tk::lcg_matrix(8, 8, k);
        let t = tk::tangent_basis(&inst.tangent);
        let mut gp_cols = tk::span_basis(&inst.qperp);
        gp_cols.extend(t.iter().cloned());
        let mut pi_cols = tk::support_basis(&inst.omega);
        pi_cols.extend(t.iter().cloned());
        let gp = cpcp::certificate::gamma_perp(&inst.tangent, &inst.qperp).unwrap();
        let pi = cpcp::certificate::pi_space(&inst.omega, &inst.tangent).unwrap();
        worst = worst.max(gp.project(&x).max_abs_diff(&tk::normal_equations_projection(&gp_cols, &x)));
        worst = worst.max(pi.project(&x).max_abs_diff(&tk::normal_equations_projection(&pi_cols, &x)));
    }
    outcome(worst <= 1e-8, format!("max deviation {worst:.2e} (limit 1e-8)"))
}

/// Solves 20 seeded instances; counts rel. error of `L` at most 1e-4.
fn recovery(params: GenParams, check: impl Fn(&ProblemInstance) -> Result<(), String>) -> (usize, f64, Vec<String>) {
    let lambda = 1.0 / (params.m as f64).sqrt();
    let (mut ok, mut slowest, mut notes) = (0, 0.0f64, Vec::new());
    for seed in 0..20u64 {
        let inst = match assemble(params, seed) {
            Ok(i) => i,
            Err(e) => {
                notes.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        if let Err(e) = check(&inst) {
            notes.push(format!("seed {seed}: {e}"));
            continue;
        }
        let start = Instant::now();
        let r = solve_cpcp(&inst.d, &inst.qperp, &SolverOptions::default().with_lambda(lambda)).unwrap();
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        if rel(&r.l_hat, &inst.l0) <= 1e-4 && secs < 60.0 {
            ok += 1;
        }
    }
    (ok, slowest, notes)
}

fn c4_random_model_recovery() -> Outcome {
    let (ok, slowest, notes) = recovery(GenParams::new(100, 100, 3, 0.05, 5), |_| Ok(()));
    outcome(ok >= 18, format!("{ok}/20 recovered (need 18), slowest solve {slowest:.2} s {notes:?}"))
}

fn c5_deterministic_model_recovery() -> Outcome {
    let params = GenParams::new(100, 100, 2, 0.05, 4).with_qmodel(QModel::NuCoherentSmooth);
    let nu = |inst: &ProblemInstance| {
        let nu = nu_coherence(&inst.qperp).map_err(|e| e.to_string())?;
        if nu <= 4.0 { Ok(()) } else { Err(format!("nu = {nu}")) }
    };
    let (ok, slowest, notes) = recovery(params, nu);
    outcome(ok >= 16, format!("{ok}/20 recovered (need 16), slowest solve {slowest:.2} s {notes:?}"))
}

fn c6_pcp_reduction() -> Outcome {
    let inst = assemble(GenParams::new(12, 12, 1, 0.1, 0), 7).unwrap();
    let opts = SolverOptions { record_trace: true, ..Default::default() };
    let a = solve_pcp(&inst.d, &opts).unwrap();
    let b = solve_cpcp(&inst.d, &SpanBasis::empty(12, 12), &opts).unwrap();
    let identical = a.trace == b.trace && a.l_hat == b.l_hat && a.s_hat == b.s_hat && a.iters == b.iters;

    let (l0, _) = gen_low_rank(20, 20, 1, 3).unwrap();
    let mut s0 = DenseMatrix::zeros(20, 20);
    for (i, j, v) in [(1, 4, 5.0), (9, 9, -4.0), (17, 2, 6.0)] {
        s0[(i, j)] = v;
    }
    let r = solve_pcp(&(&l0 + &s0), &SolverOptions::default()).unwrap();
    let (el, es) = (rel(&r.l_hat, &l0), rel(&r.s_hat, &s0));
    outcome(
        identical && el <= 1e-5 && es <= 1e-5,
        format!("identical iterates: {identical}; rank-1 + 3 spikes: L err {el:.2e}, S err {es:.2e} (limit 1e-5)"),
    )
}

fn c7_oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let p = if seed % 2 == 0 { 0 } else { 3 };
        let inst = assemble(GenParams::new(10, 10, 1, 0.1, p), 300 + seed).unwrap();
        let opts = SolverOptions { max_iters: 20_000, ..Default::default() };
        let r = solve_cpcp(&inst.d, &inst.qperp, &opts).unwrap();
        let o = oracle_solve(&inst.d, &inst.qperp, r.lambda, 1e-10).unwrap();
        worst = worst.max((r.objective - o.objective).abs() / o.objective);
    }
    outcome(worst <= 1e-6, format!("max relative objective gap {worst:.2e} (limit 1e-6)"))
}

fn c8_certificate() -> Outcome {
    let params = GenParams::new(120, 120, 2, 0.02, 3);
    let lambda = 1.0 / 120f64.sqrt();
    let (mut ok, mut slowest, mut failing) = (0, 0.0f64, std::collections::BTreeMap::new());
    for seed in 0..20u64 {
        let start = Instant::now();
        let built = cogenerated_instance(params, seed).and_then(|(inst, sched)| certify(&inst, &sched, lambda, DEFAULT_TOL));
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        match built {
            Ok(c) if c.report.verdict && secs < 120.0 => ok += 1,
            Ok(c) => {
                for t in c.report.conditions().into_iter().filter(|t| !t.holds()) {
                    *failing.entry(t.name).or_insert(0) += 1;
                }
            }
            Err(e) => *failing.entry(e.to_string()).or_insert(0) += 1,
        }
    }
    outcome(ok >= 16, format!("{ok}/20 verdict=true (need 16), slowest build {slowest:.2} s, failing conditions {failing:?}"))
}

fn lemma_config(sets: &[&str]) -> ExperimentConfig {
    let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::resolve(None, &sets).unwrap()
}

fn c9_deterministic_lemmas() -> Outcome {
    let cfg = lemma_config(&["lemma_trials=200", r#"lemmas=["lemma7", "lemma8"]"#]);
    let rep = cpcp_cli::lemmas::validate(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for l in &rep.lemmas {
        pass &= l.applicable == 200 && l.passes == 200;
        parts.push(format!("{}: {}/{} hold, {} skipped", l.name, l.passes, l.applicable, l.skipped));
    }
    outcome(pass, parts.join("; "))
}

fn c10_probabilistic_lemmas() -> Outcome {
    let cfg = lemma_config(&[
        "m=100", "n=100", "r=3", "rho=0.05", "p=5", "nu_r=2", "nu_p=4", "lemma_seeds=20",
        r#"lemmas=["lemma4", "lemma5", "lemma6", "corollary1", "lemma12"]"#,
    ]);
    let rep = cpcp_cli::lemmas::validate(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for l in &rep.lemmas {
        pass &= l.verdict == Some(true) && l.applicable == 20;
        parts.push(format!("{} {}/20", l.name, l.passes));
    }
    outcome(pass, format!("{} (need 16/20 each)", parts.join(", ")))
}

fn c11_qperp_invariance() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let inst = assemble(GenParams::new(100, 100, 3, 0.05, 5), 400 + seed).unwrap();
        let mut rng = SeededRng::new(seed);
        let coefs: Vec<f64> = (0..inst.qperp.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
        let g = inst.qperp.combine(&coefs);
        let shifted = &inst.d + &g.scale(5.0 / g.frobenius());
        let opts = SolverOptions::default();
        let a = solve_cpcp(&inst.d, &inst.qperp, &opts).unwrap();
        let b = solve_cpcp(&shifted, &inst.qperp, &opts).unwrap();
        worst = worst.max(rel(&b.l_hat, &a.l_hat)).max(rel(&b.s_hat, &a.s_hat));
    }
    outcome(worst <= 1e-4, format!("max relative change {worst:.2e} over 5 instances (limit 1e-4)"))
}

fn c12_failure_regime() -> Outcome {
    let cfg = lemma_config(&["m=80", "n=80", "r=5", "rho=0.6", "p=5", "trials=10", "seed=500"]);
    let cell = &cpcp_cli::commands::run_grid(&cfg)[0];
    outcome(
        cell.successes <= 2,
        format!(
            "{}/10 recovered at rel. error <= {:e} (limit 2), {} trial errors, median L error {:.2e}",
            cell.successes,
            cfg.threshold,
            cell.errors.len(),
            cell.med_rel_err_l
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("projector algebra", c1_projector_algebra),
        ("P_T closed form vs explicit basis", c2_tangent_projector_vs_basis),
        ("direct-sum projections vs normal equations", c3_direct_sums_vs_normal_equations),
        ("exact recovery, random Qperp", c4_random_model_recovery),
        ("exact recovery, nu-coherent Qperp", c5_deterministic_model_recovery),
        ("PCP reduction", c6_pcp_reduction),
        ("oracle equivalence", c7_oracle_equivalence),
        ("certificate end to end", c8_certificate),
        ("deterministic lemmas 7 and 8", c9_deterministic_lemmas),
        ("probabilistic lemma bounds", c10_probabilistic_lemmas),
        ("Qperp invariance", c11_qperp_invariance),
        ("failure regime", c12_failure_regime),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name}: {} [{:.1} s]", k + 1, o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(k + 1);
        }
    }
    println!("acceptance: {}/12 criteria pass", 12 - failed.len());
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
