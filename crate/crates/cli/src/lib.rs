//! Experiment harness behind the `cpcp` binary.
//!
//! Each subcommand is a function of an [`ExperimentConfig`] (plus a bundle
//! path for `solve` and `certify`) that writes its outputs under
//! `config.out` and returns a [`Report`]. Failures map onto a fixed set of
//! exit codes through [`CliError::exit_code`].

pub mod commands;
pub mod config;
pub mod lemmas;

use serde_json::{json, Value};

pub use config::ExperimentConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cpcp::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use cpcp::Error as E;
        match self {
            CliError::Io(_) | CliError::Config(_) => EXIT_IO,
            CliError::Core(e) => match e {
                E::Io { .. }
                | E::Json(_)
                | E::Format { .. }
                | E::InvalidParameter(_)
                | E::ShapeMismatch { .. }
                | E::SizeCapExceeded { .. } => EXIT_IO,
                E::PremiseViolation { .. }
                | E::DegenerateSum { .. }
                | E::RankDeficient { .. }
                | E::GenerationFailed { .. }
                | E::NonFinite(_)
                | E::SvdFailed { .. } => EXIT_VALIDATION,
            },
        }
    }

    fn kind(&self) -> &'static str {
        use cpcp::Error as E;
        match self {
            CliError::Io(_) => "io",
            CliError::Config(_) => "config",
            CliError::Core(e) => match e {
                E::ShapeMismatch { .. } => "shape_mismatch",
                E::NonFinite(_) => "non_finite",
                E::SvdFailed { .. } => "svd_failed",
                E::DegenerateSum { .. } => "degenerate_sum",
                E::PremiseViolation { .. } => "premise_violation",
                E::RankDeficient { .. } => "rank_deficient",
                E::InvalidParameter(_) => "invalid_parameter",
                E::SizeCapExceeded { .. } => "size_cap_exceeded",
                E::GenerationFailed { .. } => "generation_failed",
                E::Format { .. } => "format",
                E::Io { .. } => "io",
                E::Json(_) => "json",
            },
        }
    }

    /// Structured form printed on stderr.
    pub fn to_json(&self) -> Value {
        let mut err = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Core(cpcp::Error::PremiseViolation { what, measured, limit }) => {
                err["what"] = json!(what);
                err["measured"] = json!(measured);
                err["limit"] = json!(limit);
            }
            CliError::Core(cpcp::Error::DegenerateSum { norm }) => err["norm"] = json!(norm),
            CliError::Core(cpcp::Error::RankDeficient { index }) => err["index"] = json!(index),
            _ => {}
        }
        json!({ "error": err })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// What a command produced. `failure` is set when the run completed but a
/// verdict came out negative; the binary then exits with [`EXIT_VALIDATION`].
#[derive(Clone, Debug)]
pub struct Report {
    pub value: Value,
    pub failure: Option<String>,
}

impl Report {
    pub fn ok(value: Value) -> Self {
        Report { value, failure: None }
    }

    pub fn exit_code(&self) -> i32 {
        if self.failure.is_some() {
            EXIT_VALIDATION
        } else {
            EXIT_OK
        }
    }
}

pub(crate) fn write_file(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json(path: &std::path::Path, value: &Value) -> Result<(), CliError> {
    write_file(path, cpcp::json::to_string_pretty(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        let premise = CliError::Core(cpcp::Error::PremiseViolation {
            what: "x".into(),
            measured: 0.7,
            limit: 0.5,
        });
        assert_eq!(premise.exit_code(), 2);
        assert_eq!(premise.to_json()["error"]["kind"], "premise_violation");
        assert_eq!(premise.to_json()["error"]["limit"], 0.5);
        assert_eq!(CliError::Config("bad".into()).exit_code(), 1);
        assert_eq!(CliError::Core(cpcp::Error::InvalidParameter("p".into())).exit_code(), 1);
        assert_eq!(CliError::Core(cpcp::Error::RankDeficient { index: 0 }).exit_code(), 2);
        assert_eq!(Report::ok(json!({})).exit_code(), 0);
    }
}
