use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::NoiseSchedule;
use crate::{PointCloud, Result};

/// Chain states at one global step. `resolution` is the ladder index
/// (0 = full dimension) and `level` the noise-level index within that
/// resolution's schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub resolution: usize,
    pub level: usize,
    pub cloud: PointCloud,
}

/// Where each noise level ended, in global steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LevelEnd {
    pub resolution: usize,
    pub level: usize,
    pub step: u64,
}

/// Record of a sampler run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub seed: u64,
    pub chains: usize,
    /// Dimension of each resolution, finest first.
    pub dims: Vec<usize>,
    pub schedules: Vec<NoiseSchedule>,
    pub snapshot_every: usize,
    /// Strictly increasing in `step`.
    pub snapshots: Vec<Snapshot>,
    /// Clouds right after each upsampling, before any Langevin step at the
    /// finer resolution.
    pub upsampled: Vec<Snapshot>,
    pub level_ends: Vec<LevelEnd>,
    pub final_cloud: PointCloud,
    pub score_evals: u64,
    /// Score evaluations weighted by the dimension they ran in.
    pub cost: u64,
    pub wall_seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    chains: usize,
    dims: &'a [usize],
    schedules: &'a [NoiseSchedule],
    snapshot_every: usize,
    snapshot_steps: Vec<u64>,
    level_ends: &'a [LevelEnd],
    score_evals: u64,
    cost: u64,
    wall_seconds: f64,
    files: Vec<String>,
}

impl TrajectoryLog {
    pub fn total_steps(&self) -> u64 {
        self.schedules.iter().map(|s| s.total_steps() as u64).sum()
    }

    /// Snapshots taken at resolution `j`.
    pub fn at_resolution(&self, j: usize) -> impl Iterator<Item = &Snapshot> {
        self.snapshots.iter().filter(move |s| s.resolution == j)
    }

    /// Snapshot taken at the end of each noise level, in run order.
    pub fn level_snapshots(&self) -> Vec<&Snapshot> {
        self.level_ends
            .iter()
            .filter_map(|e| self.snapshots.iter().find(|s| s.step == e.step && s.resolution == e.resolution))
            .collect()
    }

    /// Writes `manifest.json` plus one CSV per resolution
    /// (`snapshots.csv` for the full dimension, `snapshots_j{j}.csv` below
    /// it) and `upsampled_j{j}.csv` for the upsampled clouds.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (j, &d) in self.dims.iter().enumerate() {
            let name = if j == 0 { "snapshots.csv".to_string() } else { format!("snapshots_j{j}.csv") };
            let rows: Vec<&Snapshot> = self.at_resolution(j).collect();
            if j == 0 || !rows.is_empty() {
                write_snapshots(&dir.join(&name), d, &rows)?;
                files.push(name);
            }
            let up: Vec<&Snapshot> = self.upsampled.iter().filter(|s| s.resolution == j).collect();
            if !up.is_empty() {
                let name = format!("upsampled_j{j}.csv");
                write_snapshots(&dir.join(&name), d, &up)?;
                files.push(name);
            }
        }
        let manifest = Manifest {
            seed: self.seed,
            chains: self.chains,
            dims: &self.dims,
            schedules: &self.schedules,
            snapshot_every: self.snapshot_every,
            snapshot_steps: self.snapshots.iter().map(|s| s.step).collect(),
            level_ends: &self.level_ends,
            score_evals: self.score_evals,
            cost: self.cost,
            wall_seconds: self.wall_seconds,
            files,
        };
        let file = File::create(dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &manifest)?;
        Ok(())
    }
}

fn write_snapshots(path: &Path, dim: usize, rows: &[&Snapshot]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "step,level,chain")?;
    for k in 0..dim {
        write!(w, ",x{k}")?;
    }
    writeln!(w)?;
    for s in rows {
        for (c, p) in s.cloud.points().enumerate() {
            write!(w, "{},{},{}", s.step, s.level, c)?;
            for v in p {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
