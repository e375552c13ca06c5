//! The five subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cpcp::certificate::{certify as build_certificate, check_premises, retrofit_schedule};
use cpcp::linalg::save_dmat;
use cpcp::solver::write_trace_csv;
use cpcp::{assemble, solve_cpcp, solve_pcp, DenseMatrix, ProblemInstance, SolverResult};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{trial_seed, Cell, ExperimentConfig};
use crate::{lemmas, write_file, write_json, CliError, Report};

/// `||a - b||_F / ||b||_F`, or `||a||_F` when `b` vanishes.
pub fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let nb = b.frobenius();
    let diff = (a - b).frobenius();
    if nb > 0.0 {
        diff / nb
    } else {
        diff
    }
}

fn bundle_name(cell: usize, trial: usize) -> String {
    format!("cell{cell:04}_trial{trial:04}")
}

/// Writes one bundle per (cell, trial) and a `manifest.json` listing them.
pub fn generate(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    cfg.write_snapshot(&cfg.out)?;
    let jobs: Vec<(Cell, usize)> =
        cfg.cells().into_iter().flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
    let entries = jobs
        .par_iter()
        .map(|&(cell, trial)| {
            let seed = trial_seed(cfg.seed, cell.index, trial);
            let name = bundle_name(cell.index, trial);
            let inst = assemble(cell.params, seed)?;
            inst.save_bundle(&cfg.out.join(&name))?;
            let p = cell.params;
            Ok(json!({
                "bundle": name, "cell": cell.index, "trial": trial, "seed": seed,
                "m": p.m, "n": p.n, "r": p.r, "rho": p.rho, "p": p.p,
            }))
        })
        .collect::<Result<Vec<Value>, CliError>>()?;
    let manifest = json!({ "count": entries.len(), "bundles": entries });
    write_json(&cfg.out.join("manifest.json"), &manifest)?;
    Ok(Report::ok(manifest))
}

/// Solves with the PCP path when `Q^perp` is empty.
fn run_solver(inst: &ProblemInstance, cfg: &ExperimentConfig) -> Result<(SolverResult, bool), CliError> {
    let opts = cfg.solver_options();
    let pcp = inst.qperp.is_empty();
    let r = if pcp { solve_pcp(&inst.d, &opts)? } else { solve_cpcp(&inst.d, &inst.qperp, &opts)? };
    Ok((r, pcp))
}

pub fn solve(bundle: &Path, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let inst = ProblemInstance::load_bundle(bundle)?;
    cfg.write_snapshot(&cfg.out)?;
    let start = Instant::now();
    let (r, pcp) = run_solver(&inst, cfg)?;
    let wall_ms = start.elapsed().as_millis() as u64;
    let rel_l = rel_err(&r.l_hat, &inst.l0);
    save_dmat(&cfg.out.join("L_hat.dmat"), &r.l_hat)?;
    save_dmat(&cfg.out.join("S_hat.dmat"), &r.s_hat)?;
    if cfg.trace {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &r.trace)?;
        write_file(&cfg.out.join("trace.csv"), buf)?;
    }
    let report = json!({
        "bundle": bundle.display().to_string(),
        "path": if pcp { "pcp" } else { "cpcp" },
        "pcp_path": pcp,
        "status": format!("{:?}", r.status).to_lowercase(),
        "iters": r.iters,
        "lambda": r.lambda,
        "objective": r.objective,
        "primal_residual": r.primal_residual,
        "rel_err_L": rel_l,
        "rel_err_S": rel_err(&r.s_hat, &inst.s0),
        "success": rel_l <= cfg.threshold,
        "threshold": cfg.threshold,
        "wall_ms": wall_ms,
    });
    write_json(&cfg.out.join("solve.json"), &report)?;
    Ok(Report::ok(report))
}

fn targets_json(ts: &[cpcp::certificate::Target]) -> Value {
    ts.iter()
        .map(|t| json!({ "name": t.name, "value": t.value, "limit": t.limit, "strict": t.strict, "holds": t.holds() }))
        .collect()
}

/// Certificate for a bundle. The golfing batches are drawn after the fact
/// inside the complement of the stored support, so the report is flagged as
/// using an approximate schedule.
pub fn certify(bundle: &Path, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let inst = ProblemInstance::load_bundle(bundle)?;
    cfg.write_snapshot(&cfg.out)?;
    let lambda = cfg.lambda.unwrap_or(1.0 / (inst.params.m as f64).sqrt());
    let premises = check_premises(&inst.tangent, &inst.omega, &inst.qperp);
    let sched = retrofit_schedule(&inst.omega, inst.params.rho, cfg.seed)?;
    let schedule = json!({
        "mode": sched.mode, "approximate": sched.is_approximate(), "j0": sched.j0, "q": sched.q,
    });
    let base = json!({
        "bundle": bundle.display().to_string(),
        "lambda": lambda,
        "schedule": schedule,
        "premises": premises,
    });
    let path = cfg.out.join("certify.json");
    let cert = match build_certificate(&inst, &sched, lambda, cfg.cert_tol) {
        Ok(c) => c,
        Err(e @ (cpcp::Error::PremiseViolation { .. } | cpcp::Error::DegenerateSum { .. })) => {
            let err = CliError::Core(e);
            let mut value = base;
            value["verdict"] = json!(false);
            value["error"] = err.to_json()["error"].clone();
            write_json(&path, &value)?;
            return Ok(Report { value, failure: Some(err.to_string()) });
        }
        Err(e) => return Err(e.into()),
    };
    let rep = &cert.report;
    save_dmat(&cfg.out.join("W.dmat"), &rep.w)?;
    let mut value = base;
    value["verdict"] = json!(rep.verdict);
    value["conditions"] = targets_json(&rep.conditions());
    value["targets"] = targets_json(&rep.targets);
    value["golfing_residuals"] = cert
        .golfing
        .z_trace
        .iter()
        .map(|&(fro, inf)| json!({ "frobenius": fro, "inf": inf }))
        .collect();
    write_json(&path, &value)?;
    let failure = (!rep.verdict).then(|| {
        let failed: Vec<String> =
            rep.conditions().into_iter().filter(|t| !t.holds()).map(|t| t.name).collect();
        format!("certificate conditions not met: {}", failed.join(", "))
    });
    Ok(Report { value, failure })
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub seed: u64,
    pub rel_err_l: f64,
    pub rel_err_s: f64,
    pub iters: usize,
    pub wall_ms: u64,
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub cell: Cell,
    pub trials: usize,
    pub successes: usize,
    pub med_rel_err_l: f64,
    pub med_rel_err_s: f64,
    pub med_iters: f64,
    pub wall_ms: u64,
    pub errors: Vec<(usize, u64, String)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

fn run_trial(cell: &Cell, trial: usize, cfg: &ExperimentConfig) -> Result<TrialOutcome, cpcp::Error> {
    let seed = trial_seed(cfg.seed, cell.index, trial);
    let inst = assemble(cell.params, seed)?;
    let start = Instant::now();
    let opts = cpcp::SolverOptions { record_trace: false, ..cfg.solver_options() };
    let r = if inst.qperp.is_empty() { solve_pcp(&inst.d, &opts)? } else { solve_cpcp(&inst.d, &inst.qperp, &opts)? };
    Ok(TrialOutcome {
        seed,
        rel_err_l: rel_err(&r.l_hat, &inst.l0),
        rel_err_s: rel_err(&r.s_hat, &inst.s0),
        iters: r.iters,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// Every (cell, trial) in parallel; results merged in cell order. A failed
/// trial counts as a failure and is listed in the cell's errors.
pub fn run_grid(cfg: &ExperimentConfig) -> Vec<CellResult> {
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
    let outcomes: Vec<Result<TrialOutcome, String>> = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(&cells[c], t, cfg).map_err(|e| e.to_string()))
        .collect();
    cells
        .iter()
        .zip(outcomes.chunks(cfg.trials))
        .map(|(cell, outs)| {
            let ok: Vec<&TrialOutcome> = outs.iter().filter_map(|o| o.as_ref().ok()).collect();
            let errors = outs
                .iter()
                .enumerate()
                .filter_map(|(t, o)| o.as_ref().err().map(|e| (t, trial_seed(cfg.seed, cell.index, t), e.clone())))
                .collect();
            CellResult {
                cell: *cell,
                trials: cfg.trials,
                successes: ok.iter().filter(|o| o.rel_err_l <= cfg.threshold).count(),
                med_rel_err_l: median(ok.iter().map(|o| o.rel_err_l).collect()),
                med_rel_err_s: median(ok.iter().map(|o| o.rel_err_s).collect()),
                med_iters: median(ok.iter().map(|o| o.iters as f64).collect()),
                wall_ms: ok.iter().map(|o| o.wall_ms).sum(),
                errors,
            }
        })
        .collect()
}

pub const GRID_HEADER: &str = "m,n,r,rho,p,trials,successes,med_rel_err_L,med_rel_err_S,med_iters,wall_ms";

pub fn grid_csv(results: &[CellResult]) -> String {
    let mut out = String::from(GRID_HEADER);
    out.push('\n');
    for c in results {
        let p = &c.cell.params;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.16e},{:.16e},{},{}\n",
            p.m, p.n, p.r, p.rho, p.p, c.trials, c.successes, c.med_rel_err_l, c.med_rel_err_s, c.med_iters, c.wall_ms
        ));
    }
    out
}

/// Writes `grid.csv` and a `grid.json` sidecar with per-cell errors.
pub fn phase_grid(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    cfg.write_snapshot(&cfg.out)?;
    let results = run_grid(cfg);
    write_file(&cfg.out.join("grid.csv"), grid_csv(&results))?;
    let cells: Vec<Value> = results
        .iter()
        .map(|c| {
            let p = &c.cell.params;
            json!({
                "cell": c.cell.index,
                "m": p.m, "n": p.n, "r": p.r, "rho": p.rho, "p": p.p,
                "trials": c.trials,
                "successes": c.successes,
                "errors": c.errors.iter().map(|(t, s, e)| json!({ "trial": t, "seed": s, "error": e })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let value = json!({
        "csv": PathBuf::from("grid.csv"),
        "cells": cells,
        "failed_trials": results.iter().map(|c| c.errors.len()).sum::<usize>(),
    });
    write_json(&cfg.out.join("grid.json"), &value)?;
    Ok(Report::ok(value))
}

/// Writes `lemmas.json`; a false verdict makes the run a validation failure.
pub fn validate_lemmas(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    cfg.write_snapshot(&cfg.out)?;
    let report = lemmas::validate(cfg)?;
    let value = serde_json::to_value(&report).map_err(cpcp::Error::from)?;
    write_json(&cfg.out.join("lemmas.json"), &value)?;
    let failure = (!report.failed.is_empty()).then(|| format!("lemma checks failed: {}", report.failed.join(", ")));
    Ok(Report { value, failure })
}
