//! Multi-resolution presets named after the ablation patterns.
//!
//! * `HRS`: the whole schedule at full resolution.
//! * `LRS-↑`: the whole schedule at the coarsest resolution, then upsample
//!   with no full-resolution steps.
//! * `LRS-↑-HRS-y`: the whole schedule at the coarsest resolution, then the
//!   last `y` levels again at full resolution.
//! * `LRS-x-↑-HRS-y`: the first `x` levels at the coarsest resolution, then
//!   the last `y` levels at full resolution.
//!
//! `up` is accepted in place of the arrow. Intermediate resolutions of a
//! deeper ladder are passed through with no steps.

use manifold_langevin::sampler::{NoiseLevel, NoiseSchedule};

use crate::config::ExperimentConfig;
use crate::LabError;

/// Named experiment configs shipped with the crate (`presets/*.toml`).
pub const NAMED: [(&str, &str); 6] = [
    ("mixing_circle", include_str!("../presets/mixing_circle.toml")),
    ("tradeoff_circle", include_str!("../presets/tradeoff_circle.toml")),
    ("multires_phase_torus", include_str!("../presets/multires_phase_torus.toml")),
    ("dsm_consistency", include_str!("../presets/dsm_consistency.toml")),
    ("bounds_report", include_str!("../presets/bounds_report.toml")),
    ("prop_checks", include_str!("../presets/prop_checks.toml")),
];

pub fn named(name: &str) -> Result<ExperimentConfig, LabError> {
    let (_, text) = NAMED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| LabError::Validation(format!("no preset named {name:?}")))?;
    ExperimentConfig::parse(text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Hrs,
    LrsUp,
    LrsUpHrs { high: usize },
    LrsXUpHrs { low: usize, high: usize },
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self, LabError> {
        let bad = || LabError::Validation(format!("unknown multires preset {name:?}"));
        let norm = name.trim().replace("up", "↑").replace("UP", "↑");
        let parts: Vec<&str> = norm.split('-').collect();
        let count = |s: &str| s.parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(bad);
        match parts.as_slice() {
            ["HRS"] => Ok(Preset::Hrs),
            ["LRS", "↑"] => Ok(Preset::LrsUp),
            ["LRS", "↑", "HRS", y] => Ok(Preset::LrsUpHrs { high: count(y)? }),
            ["LRS", x, "↑", "HRS", y] => Ok(Preset::LrsXUpHrs { low: count(x)?, high: count(y)? }),
            _ => Err(bad()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Preset::Hrs => "HRS".into(),
            Preset::LrsUp => "LRS-↑".into(),
            Preset::LrsUpHrs { high } => format!("LRS-↑-HRS-{high}"),
            Preset::LrsXUpHrs { low, high } => format!("LRS-{low}-↑-HRS-{high}"),
        }
    }

    /// Per-resolution schedules, finest first: one entry for `HRS`,
    /// `depth + 1` otherwise. Sub-schedules keep the step sizes the levels
    /// have in the full schedule.
    pub fn schedules(&self, full: &NoiseSchedule, depth: usize) -> Result<Vec<NoiseSchedule>, LabError> {
        let l = full.len();
        let check = |n: usize| {
            if n > l {
                Err(LabError::Validation(format!("preset {} asks for {n} of {l} levels", self.name())))
            } else {
                Ok(())
            }
        };
        let (low, high) = match *self {
            Preset::Hrs => return Ok(vec![full.clone()]),
            Preset::LrsUp => (full.clone(), full.clone().with_steps(0)),
            Preset::LrsUpHrs { high } => {
                check(high)?;
                (full.clone(), slice(full, l - high, l)?)
            }
            Preset::LrsXUpHrs { low, high } => {
                check(low)?;
                check(high)?;
                (slice(full, 0, low)?, slice(full, l - high, l)?)
            }
        };
        if depth == 0 {
            return Err(LabError::Validation(format!("preset {} needs a ladder depth of at least 1", self.name())));
        }
        let mut out = vec![high];
        out.extend((1..depth).map(|_| full.clone().with_steps(0)));
        out.push(low);
        Ok(out)
    }
}

/// Levels `from..to` of `full` with their original step sizes.
fn slice(full: &NoiseSchedule, from: usize, to: usize) -> Result<NoiseSchedule, LabError> {
    let levels: Vec<NoiseLevel> = full.levels()[from..to].to_vec();
    let last = levels[levels.len() - 1].sigma;
    let scale = full.step_scale() * (last / full.final_sigma()).powi(2);
    NoiseSchedule::new(levels, scale).map_err(LabError::invalid)
}
