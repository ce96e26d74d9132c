use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default ten-level noise schedule.
pub const STANDARD_SIGMAS: [f64; 10] = [1.0, 0.59, 0.35, 0.21, 0.12, 0.07, 0.04, 0.027, 0.016, 0.01];
pub const STANDARD_STEPS: usize = 100;
pub const DEFAULT_STEP_SCALE: f64 = 2e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevel {
    pub sigma: f64,
    pub steps: usize,
}

/// A strictly decreasing ladder of noise levels with per-level step counts.
/// Level `i` runs with step size `step_scale * sigma_i^2 / sigma_L^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct NoiseSchedule {
    levels: Vec<NoiseLevel>,
    step_scale: f64,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    levels: Vec<NoiseLevel>,
    step_scale: f64,
}

impl TryFrom<RawSchedule> for NoiseSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        NoiseSchedule::new(raw.levels, raw.step_scale)
    }
}

impl From<NoiseSchedule> for RawSchedule {
    fn from(s: NoiseSchedule) -> Self {
        RawSchedule { levels: s.levels, step_scale: s.step_scale }
    }
}

impl NoiseSchedule {
    pub fn new(levels: Vec<NoiseLevel>, step_scale: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::param("schedule needs at least one level"));
        }
        if !(step_scale > 0.0 && step_scale.is_finite()) {
            return Err(Error::param(format!("step scale must be positive, got {step_scale}")));
        }
        for l in &levels {
            if !(l.sigma > 0.0 && l.sigma.is_finite()) {
                return Err(Error::param(format!("noise level must be positive, got {}", l.sigma)));
            }
        }
        if levels.windows(2).any(|w| w[1].sigma >= w[0].sigma) {
            return Err(Error::param("noise levels must be strictly decreasing"));
        }
        Ok(NoiseSchedule { levels, step_scale })
    }

    /// Same step count at every level.
    pub fn uniform(sigmas: &[f64], steps: usize, step_scale: f64) -> Result<Self> {
        Self::new(sigmas.iter().map(|&sigma| NoiseLevel { sigma, steps }).collect(), step_scale)
    }

    /// The ten-level image schedule with `T = 100` and the default step scale.
    pub fn standard() -> Self {
        Self::uniform(&STANDARD_SIGMAS, STANDARD_STEPS, DEFAULT_STEP_SCALE).expect("valid constant schedule")
    }

    /// Log-uniform spacing from `sigma_max` down to `sigma_min`.
    pub fn geometric(sigma_max: f64, sigma_min: f64, count: usize, steps: usize, step_scale: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::param("geometric schedule needs at least one level"));
        }
        if count == 1 {
            return Self::uniform(&[sigma_max], steps, step_scale);
        }
        if !(sigma_max > sigma_min && sigma_min > 0.0) {
            return Err(Error::param("geometric schedule needs sigma_max > sigma_min > 0"));
        }
        let ratio = (sigma_min / sigma_max).ln() / (count - 1) as f64;
        let sigmas: Vec<f64> = (0..count)
            .map(|i| if i + 1 == count { sigma_min } else { sigma_max * (ratio * i as f64).exp() })
            .collect();
        Self::uniform(&sigmas, steps, step_scale)
    }

    /// Single level with an explicit step size.
    pub fn constant(sigma: f64, steps: usize, step_size: f64) -> Result<Self> {
        Self::uniform(&[sigma], steps, step_size)
    }

    pub fn levels(&self) -> &[NoiseLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn step_scale(&self) -> f64 {
        self.step_scale
    }

    pub fn final_sigma(&self) -> f64 {
        self.levels[self.levels.len() - 1].sigma
    }

    /// Step size of level `i`.
    pub fn step_size(&self, i: usize) -> f64 {
        let r = self.levels[i].sigma / self.final_sigma();
        self.step_scale * r * r
    }

    pub fn total_steps(&self) -> usize {
        self.levels.iter().map(|l| l.steps).sum()
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        for l in &mut self.levels {
            l.steps = steps;
        }
        self
    }

    /// Multiplies the step count of the final level.
    pub fn extend_final(mut self, factor: usize) -> Self {
        let last = self.levels.len() - 1;
        self.levels[last].steps *= factor;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_sizes_scale_with_sigma_squared() {
        let s = NoiseSchedule::standard();
        assert_eq!(s.step_size(9), 2e-5);
        assert!((s.step_size(0) - 0.2).abs() < 1e-15);
        assert_eq!(s.total_steps(), 1000);
    }

    #[test]
    fn rejects_bad_ladders() {
        assert!(NoiseSchedule::uniform(&[1.0, 1.0], 1, 1.0).is_err());
        assert!(NoiseSchedule::uniform(&[0.5, 1.0], 1, 1.0).is_err());
        assert!(NoiseSchedule::uniform(&[1.0], 1, 0.0).is_err());
        assert!(NoiseSchedule::uniform(&[], 1, 1.0).is_err());
        assert!(serde_json::from_str::<NoiseSchedule>(
            r#"{"levels":[{"sigma":0.1,"steps":1},{"sigma":0.2,"steps":1}],"step_scale":1}"#
        )
        .is_err());
    }

    #[test]
    fn geometric_hits_endpoints() {
        let s = NoiseSchedule::geometric(1.0, 0.01, 10, 5, 1e-3).unwrap();
        assert_eq!(s.levels()[0].sigma, 1.0);
        assert_eq!(s.final_sigma(), 0.01);
        let r0 = s.levels()[1].sigma / s.levels()[0].sigma;
        let r1 = s.levels()[5].sigma / s.levels()[4].sigma;
        assert!((r0 - r1).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = NoiseSchedule::standard();
        let back: NoiseSchedule = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
    }
}
