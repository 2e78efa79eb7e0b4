//! Experiment harness behind the `sgm` command line: configured runs,
//! seeded ensembles, verification suites and EOF calibration, with CSV,
//! JSON and SGMF artifacts.
//!
//! Every artifact except `timing.json` is a pure function of the
//! configuration and seed, so reruns and parallel schedules produce
//! byte-identical files.

pub mod config;
mod ensemble;
mod eof;
pub mod presets;
mod run;
mod verify;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ExperimentConfig, Prepared};
pub use ensemble::{run_ensemble, EnsembleOutcome, MemberOutcome, Schedule};
pub use eof::run_eof;
pub use presets::{preset, PRESETS};
pub use run::{run_experiment, RunSummary, VELOCITY_DIR};
pub use verify::{kiw_problem, run_suite, Suite, SuiteOptions, SuiteReport};

/// Exit codes of the command line.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the worker count.
pub const WORKERS_ENV: &str = "SGM_NUM_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Config(_) => EXIT_USAGE,
            HarnessError::Numerical(_) | HarnessError::Io { .. } => EXIT_NUMERICAL,
        }
    }

    fn numerical(e: impl std::fmt::Display) -> Self {
        HarnessError::Numerical(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Round-trip safe decimal form with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// CSV with a header row; every value printed by [`fmt_f64`].
fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(HarnessError::Usage(format!(
                "{WORKERS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

/// Runs `f` on a pool of `workers` threads (rayon's default when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    let pool = b
        .build()
        .map_err(|e| HarnessError::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}
