//! Experiment drivers. Each returns an [`Outcome`]; the run-directory logic
//! lives in [`crate::record`].

pub mod bounds;
pub mod checks;
pub mod dsm;
pub mod mixing;
pub mod multires;
pub mod tradeoff;

use manifold_langevin::metrics::{w2_auto, w2_with, Estimator};
use manifold_langevin::rng::derive_seed;
use manifold_langevin::sampler::TrajectoryLog;
use manifold_langevin::PointCloud;
use serde_json::{Map, Value};

use crate::config::{EstimatorSpec, ExperimentConfig, ExperimentKind};
use crate::table::Table;
use crate::Result;

/// Results of one experiment. `summary` must depend only on the config;
/// anything timing-related goes in `timing`.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub summary: Map<String, Value>,
    pub tables: Vec<Table>,
    /// Extra JSON artifacts, by file stem.
    pub documents: Vec<(String, Value)>,
    pub timing: Map<String, Value>,
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment {
        ExperimentKind::MixingVsDimension => mixing::run(cfg),
        ExperimentKind::ScoreErrorTradeoff => tradeoff::run(cfg),
        ExperimentKind::MultiresComparison => multires::run(cfg),
        ExperimentKind::DsmConsistency => dsm::run(cfg),
        ExperimentKind::BoundsReport => bounds::run(cfg),
        ExperimentKind::PropChecks => checks::run(cfg),
    }
}

/// Seed of replicate `i`.
pub fn replicate_seed(master: u64, i: usize) -> u64 {
    derive_seed(master, 0x7265_706c_0000 + i as u64)
}

/// Labels for secondary seeds derived from a replicate seed.
pub mod label {
    pub const REFERENCE: u64 = 1;
    pub const FLOOR: u64 = 2;
    pub const METRIC: u64 = 3;
    pub const FIELD: u64 = 4;
    pub const DATA: u64 = 5;
    pub const PROBES: u64 = 6;
    pub const SAMPLER: u64 = 7;
}

/// W2 with the configured estimator.
pub fn w2(spec: EstimatorSpec, a: &PointCloud, b: &PointCloud, seed: u64) -> Result<(f64, Estimator)> {
    Ok(match spec.fixed() {
        Some(e) => (w2_with(e, a, b, seed)?, e),
        None => w2_auto(a, b, seed)?,
    })
}

/// `(step, W2 to reference)` for every snapshot at the full resolution.
pub fn w2_series(
    log: &TrajectoryLog,
    reference: &PointCloud,
    spec: EstimatorSpec,
    seed: u64,
) -> Result<(Vec<(u64, usize, f64)>, Estimator)> {
    let mut out = Vec::new();
    let mut used = Estimator::Exact;
    for s in log.at_resolution(0) {
        let (w, e) = w2(spec, &s.cloud, reference, seed)?;
        used = e;
        out.push((s.step, s.level, w));
    }
    Ok((out, used))
}

pub(crate) fn cloud_table(name: &str, cloud: &PointCloud) -> Table {
    let header: Vec<String> = (0..cloud.dim()).map(|i| format!("x{i}")).collect();
    let refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut t = Table::new(name, &refs);
    for p in cloud.points() {
        t.push(p.iter().map(|v| crate::table::num(*v)).collect());
    }
    t
}
