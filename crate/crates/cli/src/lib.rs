//! Batch front-end for `fracfield`: configuration, pipeline and artifact output.

pub mod artifacts;
pub mod config;
pub mod pipeline;

use std::fmt;

pub use artifacts::{Artifacts, Manifest, ManifestEntry};
pub use config::RunConfig;
pub use pipeline::{run_command, Command};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "FRACFIELD_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration; `field` names the offending entry.
    Config { field: String, message: String },
    /// A numerical procedure failed inside `stage`.
    Numerical { stage: &'static str, source: fracfield::Error },
    Io(std::io::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Classifies a library error raised while running `stage`.
    pub fn from_stage(stage: &'static str, e: fracfield::Error) -> Self {
        match e {
            fracfield::Error::Io(io) => CliError::Io(io),
            e if e.is_numerical() => CliError::Numerical { stage, source: e },
            e => CliError::Config {
                field: stage.to_string(),
                message: e.to_string(),
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, message } => write!(f, "invalid config field `{field}`: {message}"),
            CliError::Numerical { stage, source } => write!(f, "numerical failure in {stage}: {source}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Thread count from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| CliError::config(THREADS_ENV, format!("must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let q = CliError::from_stage("kernel", fracfield::Error::Quadrature { estimate: 1.0, error: 1.0 });
        assert_eq!(q.exit_code(), 3);
        let f = CliError::from_stage("simulate", fracfield::Error::Factorization { mode: 3 });
        assert_eq!(f.exit_code(), 3);
        assert!(f.to_string().contains("simulate"));
        let c = CliError::from_stage("kernel", fracfield::Error::Inadmissible("x".into()));
        assert_eq!(c.exit_code(), 2);
    }
}
