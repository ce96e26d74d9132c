use std::time::Instant;

use rayon::prelude::*;

use super::log::{LevelEnd, Snapshot, TrajectoryLog};
use super::resample::upsample;
use super::NoiseSchedule;
use crate::rng::{domain, StreamKey};
use crate::{Error, PointCloud, Result, ScoreField};

/// One Euler–Maruyama step `x + (a/2) s + sqrt(a) z`.
pub fn langevin_step(x: &[f64], s: &[f64], alpha: f64, z: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    langevin_step_into(x, s, alpha, z, &mut out)?;
    Ok(out)
}

pub fn langevin_step_into(x: &[f64], s: &[f64], alpha: f64, z: &[f64], out: &mut [f64]) -> Result<()> {
    if !(alpha >= 0.0) {
        return Err(Error::param(format!("step size must be nonnegative, got {alpha}")));
    }
    Error::check_dim(x.len(), s.len())?;
    Error::check_dim(x.len(), z.len())?;
    Error::check_dim(x.len(), out.len())?;
    let half = 0.5 * alpha;
    let root = alpha.sqrt();
    for i in 0..x.len() {
        out[i] = x[i] + half * s[i] + root * z[i];
    }
    Ok(())
}

/// Score provider and schedule for one resolution.
pub struct LadderLevel<'a> {
    pub score: Box<dyn ScoreField + 'a>,
    pub schedule: NoiseSchedule,
}

impl<'a> LadderLevel<'a> {
    pub fn new(score: impl ScoreField + 'a, schedule: NoiseSchedule) -> Self {
        LadderLevel { score: Box::new(score), schedule }
    }
}

/// Resolutions `j = 0..=J` with dimensions `d / 2^j`, finest first.
pub struct ResolutionLadder<'a> {
    levels: Vec<LadderLevel<'a>>,
    chains: usize,
}

impl<'a> ResolutionLadder<'a> {
    pub fn new(levels: Vec<LadderLevel<'a>>, chains: usize) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("ladder needs at least one resolution".into()));
        }
        if chains == 0 {
            return Err(Error::Config("ladder needs at least one chain".into()));
        }
        let d = levels[0].score.dim();
        let depth = levels.len() - 1;
        if d == 0 || depth >= usize::BITS as usize || d % (1usize << depth) != 0 {
            return Err(Error::Config(format!("dimension {d} is not divisible by 2^{depth}")));
        }
        for (j, l) in levels.iter().enumerate() {
            let want = d >> j;
            if l.score.dim() != want {
                return Err(Error::Config(format!(
                    "resolution {j} expects dimension {want}, score provider has {}",
                    l.score.dim()
                )));
            }
        }
        Ok(ResolutionLadder { levels, chains })
    }

    pub fn single(score: impl ScoreField + 'a, schedule: NoiseSchedule, chains: usize) -> Result<Self> {
        Self::new(vec![LadderLevel::new(score, schedule)], chains)
    }

    /// Number of halvings `J`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.score.dim()).collect()
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn levels(&self) -> &[LadderLevel<'a>] {
        &self.levels
    }

    /// Score evaluations weighted by dimension, without running anything.
    pub fn cost(&self) -> u64 {
        self.levels
            .iter()
            .map(|l| (self.chains * l.schedule.total_steps() * l.score.dim()) as u64)
            .sum()
    }
}

/// Annealed Langevin from `N(0, I)` through every level of `schedule`.
/// Snapshots are kept every `snapshot_every` global steps (0 disables) and
/// at every level end.
pub fn annealed_langevin(
    score: &dyn ScoreField,
    schedule: &NoiseSchedule,
    chains: usize,
    seed: u64,
    snapshot_every: usize,
) -> Result<TrajectoryLog> {
    let ladder = ResolutionLadder::single(score, schedule.clone(), chains)?;
    multires_annealed_langevin(&ladder, seed, snapshot_every)
}

/// Starts from `N(0, I)` at the coarsest resolution, anneals there, then
/// upsamples and anneals at each finer resolution in turn.
pub fn multires_annealed_langevin(
    ladder: &ResolutionLadder<'_>,
    seed: u64,
    snapshot_every: usize,
) -> Result<TrajectoryLog> {
    run_ladder(ladder, seed, snapshot_every, None)
}

/// Annealed Langevin started from the given cloud instead of `N(0, I)`.
/// One chain per point.
pub fn langevin_from(
    score: &dyn ScoreField,
    schedule: &NoiseSchedule,
    initial: &PointCloud,
    seed: u64,
    snapshot_every: usize,
) -> Result<TrajectoryLog> {
    Error::check_dim(score.dim(), initial.dim())?;
    let ladder = ResolutionLadder::single(score, schedule.clone(), initial.len())?;
    run_ladder(&ladder, seed, snapshot_every, Some(initial.as_slice().to_vec()))
}

fn run_ladder(
    ladder: &ResolutionLadder<'_>,
    seed: u64,
    snapshot_every: usize,
    initial: Option<Vec<f64>>,
) -> Result<TrajectoryLog> {
    let started = Instant::now();
    let chains = ladder.chains;
    let depth = ladder.depth();
    let dims = ladder.dims();
    let mut d = dims[depth];
    let mut state = match initial {
        Some(state) => state,
        None => {
            let init = StreamKey::new(seed, domain::CHAIN_INIT);
            let mut state = vec![0.0; chains * d];
            for (c, x) in state.chunks_exact_mut(d).enumerate() {
                init.fill_normal(c as u64, 0, x);
            }
            state
        }
    };
    let mut run = Run {
        key: StreamKey::new(seed, domain::LANGEVIN),
        every: snapshot_every as u64,
        step: 0,
        log: TrajectoryLog {
            seed,
            chains,
            dims: dims.clone(),
            schedules: ladder.levels.iter().map(|l| l.schedule.clone()).collect(),
            snapshot_every,
            snapshots: Vec::new(),
            upsampled: Vec::new(),
            level_ends: Vec::new(),
            final_cloud: PointCloud::empty(dims[0]),
            score_evals: 0,
            cost: 0,
            wall_seconds: 0.0,
        },
    };
    run.snapshot(&state, d, depth, 0)?;
    for j in (0..=depth).rev() {
        let level = &ladder.levels[j];
        if j < depth {
            let mut finer = Vec::with_capacity(2 * state.len());
            for x in state.chunks_exact(d) {
                finer.extend(upsample(x)?);
            }
            d *= 2;
            Error::check_dim(level.score.dim(), d).map_err(|e| Error::Config(format!("at resolution {j}: {e}")))?;
            state = finer;
            run.log.upsampled.push(Snapshot {
                step: run.step,
                resolution: j,
                level: 0,
                cloud: PointCloud::new(d, state.clone())?,
            });
        }
        run.anneal(&mut state, d, j, level.score.as_ref(), &level.schedule)?;
    }
    run.log.final_cloud = PointCloud::new(d, state)?;
    run.log.wall_seconds = started.elapsed().as_secs_f64();
    Ok(run.log)
}

struct Run {
    key: StreamKey,
    every: u64,
    step: u64,
    log: TrajectoryLog,
}

impl Run {
    fn snapshot(&mut self, state: &[f64], d: usize, resolution: usize, level: usize) -> Result<()> {
        if self.log.snapshots.last().is_some_and(|s| s.step == self.step) {
            return Ok(());
        }
        self.log.snapshots.push(Snapshot {
            step: self.step,
            resolution,
            level,
            cloud: PointCloud::new(d, state.to_vec())?,
        });
        Ok(())
    }

    fn anneal(
        &mut self,
        state: &mut [f64],
        d: usize,
        resolution: usize,
        score: &dyn ScoreField,
        schedule: &NoiseSchedule,
    ) -> Result<()> {
        let chains = state.len() / d;
        for (i, lvl) in schedule.levels().iter().enumerate() {
            let alpha = schedule.step_size(i);
            let mut remaining = lvl.steps as u64;
            while remaining > 0 {
                let seg = if self.every == 0 {
                    remaining
                } else {
                    remaining.min(self.every - self.step % self.every)
                };
                let first = self.step + 1;
                let key = &self.key;
                let results: Vec<Result<()>> = state
                    .par_chunks_mut(d)
                    .enumerate()
                    .map(|(c, x)| advance(x, c, first, seg, alpha, lvl.sigma, score, key))
                    .collect();
                if let Some(err) = results.into_iter().find_map(Result::err) {
                    return Err(err);
                }
                self.step += seg;
                remaining -= seg;
                self.log.score_evals += chains as u64 * seg;
                self.log.cost += (chains * d) as u64 * seg;
                if remaining == 0 || (self.every > 0 && self.step % self.every == 0) {
                    self.snapshot(state, d, resolution, i)?;
                }
            }
            self.snapshot(state, d, resolution, i)?;
            self.log.level_ends.push(LevelEnd { resolution, level: i, step: self.step });
        }
        Ok(())
    }
}

/// Runs chain `c` through global steps `first..first + n`.
#[allow(clippy::too_many_arguments)]
fn advance(
    x: &mut [f64],
    c: usize,
    first: u64,
    n: u64,
    alpha: f64,
    sigma: f64,
    score: &dyn ScoreField,
    key: &StreamKey,
) -> Result<()> {
    let d = x.len();
    let mut s = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut next = vec![0.0; d];
    for step in first..first + n {
        let fail = |e: Error| Error::Chain { chain: c, step, source: Box::new(e) };
        score.score_into(x, sigma, &mut s).map_err(fail)?;
        key.fill_normal(c as u64, step, &mut z);
        langevin_step_into(x, &s, alpha, &z, &mut next).map_err(fail)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(fail(Error::Numerical("non-finite chain state".into())));
        }
        x.copy_from_slice(&next);
    }
    Ok(())
}
