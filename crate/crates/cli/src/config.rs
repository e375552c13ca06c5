//! Experiment configuration.
//!
//! The config file is a flat list of `key = value` lines in TOML syntax; no
//! tables. Grid axes (`m`, `n`, `r`, `rho`, `p`) take a scalar or a list and
//! the grid is their Cartesian product, `p` varying fastest. Every key can be
//! overridden on the command line with `--set key=value`, where `value` uses
//! the same syntax.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `m`, `n`, `r`, `rho`, `p` | 100, 100, 3, 0.05, 5 | grid axes |
//! | `trials` | 1 | trials per cell |
//! | `seed` | 0 | base seed |
//! | `threshold` | 1e-3 | success when `‖L̂-L0‖_F/‖L0‖_F` is at most this |
//! | `qmodel` | `"random"` | `random`, `nu_coherent_smooth` or `from_jacobians` |
//! | `magnitude` | unset | sparse magnitude; unset means 10 times the mean `|L0|` |
//! | `lambda` | unset | unset means `1/sqrt(m)` |
//! | `tol_primal`, `max_iters` | 1e-7, 1000 | solver stopping rule |
//! | `penalty_growth`, `penalty_cap` | 1.5, 1e7 | solver penalty schedule |
//! | `trace` | false | `solve` also writes `trace.csv` |
//! | `cert_tol` | 1e-10 | Neumann/CG tolerance for certificate pieces |
//! | `lemma_seeds` | 20 | seeds per probabilistic lemma |
//! | `lemma_trials` | 200 | trials per deterministic lemma |
//! | `lemma_eps` | unset | epsilon of the `‖P_Ω P_T‖²` bound; unset means `rho` |
//! | `lemmas` | all | checks run by `validate-lemmas`, e.g. `["lemma4", "corollary1"]` |
//! | `majority` | 0.8 | pass fraction required of probabilistic lemmas |
//! | `nu_r`, `nu_p` | 2, 4 | rank and dimension for the ν-coherent lemma checks |
//! | `out` | `"out"` | output directory |

use std::fmt;
use std::path::{Path, PathBuf};

use cpcp::{GenParams, QModel, SolverOptions};
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

/// A scalar or a list of scalars.
fn one_or_many<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub m: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub n: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub r: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub rho: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub p: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub threshold: f64,
    pub qmodel: QModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub magnitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub tol_primal: f64,
    pub max_iters: usize,
    pub penalty_growth: f64,
    pub penalty_cap: f64,
    pub trace: bool,
    pub cert_tol: f64,
    pub lemma_seeds: usize,
    pub lemma_trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma_eps: Option<f64>,
    pub lemmas: Vec<String>,
    pub majority: f64,
    pub nu_r: usize,
    pub nu_p: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverOptions::default();
        ExperimentConfig {
            m: vec![100],
            n: vec![100],
            r: vec![3],
            rho: vec![0.05],
            p: vec![5],
            trials: 1,
            seed: 0,
            threshold: 1e-3,
            qmodel: QModel::Random,
            magnitude: None,
            lambda: None,
            tol_primal: solver.tol_primal,
            max_iters: solver.max_iters,
            penalty_growth: solver.penalty_growth,
            penalty_cap: solver.penalty_cap,
            trace: false,
            cert_tol: cpcp::certificate::DEFAULT_TOL,
            lemma_seeds: 20,
            lemma_trials: 200,
            lemma_eps: None,
            lemmas: crate::lemmas::ALL_LEMMAS.iter().map(|s| s.to_string()).collect(),
            majority: 0.8,
            nu_r: 2,
            nu_p: 4,
            out: PathBuf::from("out"),
        }
    }
}

/// One point of the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub params: GenParams,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        write!(f, "cell {} (m={} n={} r={} rho={} p={})", self.index, p.m, p.n, p.r, p.rho, p.p)
    }
}

/// Seed of trial `trial` in cell `cell`: `base ^ (cell << 32) ^ trial`.
pub fn trial_seed(base: u64, cell: usize, trial: usize) -> u64 {
    base ^ ((cell as u64) << 32) ^ trial as u64
}

impl ExperimentConfig {
    /// Defaults, then the file (if any), then `--set` overrides, in order.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = toml::Table::try_from(ExperimentConfig::default())
            .map_err(|e| CliError::Config(format!("default config: {e}")))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let parsed: toml::Table = text
                .parse()
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            merge(&mut table, parsed, &path.display().to_string())?;
        }
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {item:?}")))?;
            let line = format!("{} = {}", key.trim(), value.trim());
            // bare words are taken as strings so `--set qmodel=random` works
            let parsed: toml::Table = line
                .parse()
                .or_else(|_| format!("{} = {:?}", key.trim(), value.trim()).parse())
                .map_err(|e| CliError::Config(format!("--set {item}: {e}")))?;
            merge(&mut table, parsed, "--set")?;
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if [self.m.len(), self.n.len(), self.r.len(), self.rho.len(), self.p.len()].contains(&0) {
            return bad("every grid axis needs at least one value".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.threshold > 0.0) {
            return bad(format!("threshold={} must be positive", self.threshold));
        }
        if !(0.0..=1.0).contains(&self.majority) {
            return bad(format!("majority={} outside [0, 1]", self.majority));
        }
        if self.lemma_seeds == 0 || self.lemma_trials == 0 {
            return bad("lemma_seeds and lemma_trials must be at least 1".into());
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &m in &self.m {
            for &n in &self.n {
                for &r in &self.r {
                    for &rho in &self.rho {
                        for &p in &self.p {
                            let params = GenParams {
                                magnitude: self.magnitude,
                                ..GenParams::new(m, n, r, rho, p).with_qmodel(self.qmodel)
                            };
                            out.push(Cell { index: out.len(), params });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            lambda: self.lambda,
            penalty_growth: self.penalty_growth,
            penalty_cap: self.penalty_cap,
            tol_primal: self.tol_primal,
            max_iters: self.max_iters,
            record_trace: self.trace,
            ..SolverOptions::default()
        }
    }

    /// TOML text of the fully resolved configuration.
    pub fn snapshot(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Writes `config.resolved.toml` into `dir`.
    pub fn write_snapshot(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join("config.resolved.toml");
        std::fs::write(&path, self.snapshot())
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

fn merge(into: &mut toml::Table, from: toml::Table, origin: &str) -> Result<(), CliError> {
    for (key, value) in from {
        let flat = match &value {
            toml::Value::Table(_) => false,
            toml::Value::Array(items) => items
                .iter()
                .all(|v| !matches!(v, toml::Value::Table(_) | toml::Value::Array(_))),
            _ => true,
        };
        if !flat {
            return Err(CliError::Config(format!(
                "{origin}: key {key:?} must be a scalar or a list of scalars"
            )));
        }
        into.insert(key, value);
    }
    Ok(())
}
