//! Self-describing JSON reports and error reports.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub fn payload_hash(payload: &Value) -> String {
    let bytes = serde_json::to_vec(payload).expect("payload serializes");
    format!("{:x}", Sha256::digest(&bytes))
}

/// `{task, payload, payload_sha256, config, generated_unix}`; only `generated_unix` varies between runs.
pub fn build(cfg: &ExperimentConfig, payload: Value) -> Value {
    let generated = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "task": cfg.task.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "payload_sha256": payload_hash(&payload),
        "payload": payload,
        "config": cfg,
        "generated_unix": generated,
    })
}

/// Writes `report.json` and the resolved config as `resolved.toml`.
pub fn write(dir: &Path, cfg: &ExperimentConfig, report: &Value) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(report).expect("report serializes"))?;
    std::fs::write(dir.join("resolved.toml"), cfg.to_toml())?;
    Ok(path)
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
    pub exit_code: i32,
}

pub fn write_error(dir: &Path, err: &ErrorReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("error.json"), serde_json::to_string_pretty(err).expect("error serializes"))
}
