//! Run directories. A run writes `config.toml`, the experiment's CSV and
//! JSON artifacts, and `manifest.json`; a failed run leaves whatever was
//! written plus an `ERROR` file holding the message.
//!
//! Runs go under `$LANGEVIN_LAB_OUT` (default `runs`) in a directory named
//! `<experiment>-<unix seconds>-<first 8 hex of the config hash>`.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::experiments::{execute, Outcome};
use crate::{LabError, Result};

/// Environment variable naming the output root.
pub const OUT_ENV: &str = "LANGEVIN_LAB_OUT";
pub const DEFAULT_OUT: &str = "runs";
pub const ERROR_MARKER: &str = "ERROR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub experiment: String,
    pub version: String,
    pub created_unix: u64,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub artifacts: Vec<String>,
    pub summary: Map<String, Value>,
    pub summary_hash: String,
    /// Wall-clock figures; excluded from the summary hash.
    pub timing: Map<String, Value>,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub id: String,
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub artifacts: Vec<PathBuf>,
    pub summary: Map<String, Value>,
    pub summary_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the canonical JSON text of the summary (keys sorted).
pub fn summary_hash(summary: &Map<String, Value>) -> String {
    sha256_hex(serde_json::to_string(summary).expect("summary serialises").as_bytes())
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    sha256_hex(cfg.emit().as_bytes())
}

/// `$LANGEVIN_LAB_OUT` or `runs`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Validates, creates the run directory under `out_root` and executes.
pub fn run(cfg: &ExperimentConfig, out_root: &Path) -> Result<RunRecord> {
    cfg.validate()?;
    let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let config_hash = config_hash(cfg);
    let base = format!("{}-{created_unix}-{}", cfg.experiment.name(), &config_hash[..8]);
    std::fs::create_dir_all(out_root)?;
    let (id, dir) = unique_dir(out_root, &base)?;
    std::fs::write(dir.join("config.toml"), cfg.emit())?;

    let started = Instant::now();
    let outcome = match execute(cfg) {
        Ok(o) => o,
        Err(e) => {
            std::fs::write(dir.join(ERROR_MARKER), format!("{e}\n"))?;
            return Err(e);
        }
    };
    let total = started.elapsed().as_secs_f64();
    match persist(cfg, &id, &dir, created_unix, config_hash, outcome, total) {
        Ok(r) => Ok(r),
        Err(e) => {
            let _ = std::fs::write(dir.join(ERROR_MARKER), format!("{e}\n"));
            Err(e)
        }
    }
}

/// Re-executes the config stored in a run's manifest and returns the new
/// record; its summary hash matches the stored one.
pub fn rerun(manifest_path: &Path, out_root: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(manifest_path)?;
    let m: Manifest = serde_json::from_str(&text).map_err(LabError::invalid)?;
    run(&m.config, out_root)
}

fn unique_dir(root: &Path, base: &str) -> Result<(String, PathBuf)> {
    for k in 0.. {
        let id = if k == 0 { base.to_string() } else { format!("{base}-{k}") };
        let dir = root.join(&id);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok((id, dir)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("unbounded search")
}

fn persist(
    cfg: &ExperimentConfig,
    id: &str,
    dir: &Path,
    created_unix: u64,
    config_hash: String,
    outcome: Outcome,
    total: f64,
) -> Result<RunRecord> {
    let mut artifacts = vec![dir.join("config.toml")];
    for t in &outcome.tables {
        artifacts.push(t.save(dir)?);
    }
    for (stem, doc) in &outcome.documents {
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(doc).expect("json serialises"))?;
        artifacts.push(path);
    }
    let mut timing = outcome.timing;
    timing.insert("total_seconds".into(), Value::from(total));
    let hash = summary_hash(&outcome.summary);
    let mut names: Vec<String> = artifacts
        .iter()
        .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    names.push("manifest.json".into());
    let manifest = Manifest {
        id: id.to_string(),
        experiment: cfg.experiment.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix,
        config_hash,
        config: cfg.clone(),
        artifacts: names,
        summary: outcome.summary.clone(),
        summary_hash: hash.clone(),
        timing,
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serialises"))?;
    artifacts.push(path);
    Ok(RunRecord { id: id.to_string(), dir: dir.to_path_buf(), manifest, artifacts, summary: outcome.summary, summary_hash: hash })
}
