//! Langevin dynamics: the single update, annealed sampling over a noise
//! schedule, and multi-resolution sampling over a ladder of halved
//! dimensions joined by upsampling.
//!
//! Chain `c` draws its step-`t` noise from the counter stream
//! `(seed, c, t)`, so results do not depend on how chains are scheduled
//! across threads.

mod langevin;
mod log;
mod resample;
mod schedule;

pub use langevin::{
    annealed_langevin, langevin_from, langevin_step, langevin_step_into, multires_annealed_langevin, LadderLevel,
    ResolutionLadder,
};
pub use log::{LevelEnd, Snapshot, TrajectoryLog};
pub use resample::{
    downsample, downsample_cloud, downsample_matrix, operator_norm_check, upsample, upsample_cloud,
    upsample_matrix, OperatorNorm,
};
pub use schedule::{NoiseLevel, NoiseSchedule, DEFAULT_STEP_SCALE, STANDARD_SIGMAS, STANDARD_STEPS};
