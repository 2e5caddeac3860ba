//! Configuration-driven experiments: task runners, reports and bundled figure configs.

pub mod config;
pub mod figures;
pub mod report;
pub mod tasks;
pub mod traces;

use std::path::{Path, PathBuf};

use config::{ConfigError, ExperimentConfig};
use tasks::TaskError;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

pub enum Failure {
    Config(String),
    Numeric { name: String, message: String },
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<TaskError> for Failure {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::Numeric(e) => Failure::Numeric { name: e.name().into(), message: e.to_string() },
            TaskError::Io(e) => Failure::Numeric { name: "Io".into(), message: e.to_string() },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric { name: "Io".into(), message: e.to_string() }
    }
}

/// Runs a resolved config and writes its report into `cfg.out`.
pub fn execute(cfg: ExperimentConfig) -> Result<(), Failure> {
    let payload = tasks::run_task(&cfg)?;
    let rep = report::build(&cfg, payload);
    let path = report::write(&cfg.out, &cfg, &rep)?;
    println!("{}", path.display());
    if let Some((name, message)) = tasks::first_run_error(&rep["payload"]) {
        return Err(Failure::Numeric { name, message });
    }
    Ok(())
}

pub fn out_dir(base: &Path, sub: &str) -> PathBuf {
    base.join(sub)
}
