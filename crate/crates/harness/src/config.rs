//! Experiment configuration, read from TOML.
//!
//! Every table is optional and falls back to the defaults documented on each
//! field; unknown keys are rejected. A minimal file is
//!
//! ```toml
//! experiment = "mixing_vs_dimension"
//! seed = 7
//! ```

use std::path::Path;

use manifold_langevin::bounds::DomainPolicy;
use manifold_langevin::dsm::FeatureConfig;
use manifold_langevin::geometry::{ManifoldKind, ParamManifold};
use manifold_langevin::metrics::Estimator;
use manifold_langevin::sampler::{NoiseSchedule, DEFAULT_STEP_SCALE, STANDARD_SIGMAS, STANDARD_STEPS};
use manifold_langevin::target::Density;
use serde::{Deserialize, Serialize};

use crate::presets::Preset;
use crate::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MixingVsDimension,
    ScoreErrorTradeoff,
    MultiresComparison,
    DsmConsistency,
    BoundsReport,
    PropChecks,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MixingVsDimension => "mixing_vs_dimension",
            ExperimentKind::ScoreErrorTradeoff => "score_error_tradeoff",
            ExperimentKind::MultiresComparison => "multires_comparison",
            ExperimentKind::DsmConsistency => "dsm_consistency",
            ExperimentKind::BoundsReport => "bounds_report",
            ExperimentKind::PropChecks => "prop_checks",
        }
    }

    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::MixingVsDimension,
        ExperimentKind::ScoreErrorTradeoff,
        ExperimentKind::MultiresComparison,
        ExperimentKind::DsmConsistency,
        ExperimentKind::BoundsReport,
        ExperimentKind::PropChecks,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Master seed; replicate `i` uses a seed derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Number of replicate seeds.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub target: TargetSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub metrics: MetricSpec,
    #[serde(default)]
    pub mixing: MixingSpec,
    #[serde(default)]
    pub tradeoff: TradeoffSpec,
    #[serde(default)]
    pub multires: MultiresSpec,
    #[serde(default)]
    pub dsm: DsmSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
}

fn default_seeds() -> usize {
    5
}

/// Target distribution. `family = "manifold"` places `density` on
/// `manifold` embedded in `R^ambient_dim` (for a phase torus the ambient
/// dimension is the signal length); `resolution` is the quadrature mesh
/// resolution used when no closed-form oracle exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Manifold {
        ambient_dim: usize,
        #[serde(default = "default_resolution")]
        resolution: usize,
        manifold: ManifoldKind,
        #[serde(default = "uniform")]
        density: Density,
    },
    Gaussian {
        dim: usize,
        #[serde(default = "one")]
        var: f64,
    },
}

fn default_resolution() -> usize {
    48
}

fn uniform() -> Density {
    Density::Uniform
}

fn one() -> f64 {
    1.0
}

impl Default for TargetSpec {
    /// Uniform unit circle in `R^4`.
    fn default() -> Self {
        TargetSpec::circle(4)
    }
}

impl TargetSpec {
    pub fn circle(ambient_dim: usize) -> Self {
        TargetSpec::Manifold {
            ambient_dim,
            resolution: default_resolution(),
            manifold: ManifoldKind::Circle { radius: 1.0 },
            density: Density::Uniform,
        }
    }

    pub fn phase_torus(length: usize) -> Self {
        TargetSpec::Manifold {
            ambient_dim: length,
            resolution: default_resolution(),
            manifold: ManifoldKind::PhaseTorus {
                amplitudes: [1.0, 0.5],
                frequencies: [1, 3],
                length,
                phases: [0.0, 0.0],
            },
            density: Density::Uniform,
        }
    }

    pub fn sphere(ambient_dim: usize) -> Self {
        TargetSpec::Manifold {
            ambient_dim,
            resolution: default_resolution(),
            manifold: ManifoldKind::Sphere { dim: 2, radius: 1.0 },
            density: Density::Uniform,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            TargetSpec::Manifold { ambient_dim, .. } => *ambient_dim,
            TargetSpec::Gaussian { dim, .. } => *dim,
        }
    }

    /// Same target in ambient dimension `d`: zero padding for embedded
    /// manifolds, signal length `d` for a phase torus.
    pub fn with_ambient(&self, d: usize) -> Self {
        match self.clone() {
            TargetSpec::Manifold { resolution, manifold, density, .. } => {
                let manifold = match manifold {
                    ManifoldKind::PhaseTorus { amplitudes, frequencies, phases, .. } => {
                        ManifoldKind::PhaseTorus { amplitudes, frequencies, length: d, phases }
                    }
                    other => other,
                };
                TargetSpec::Manifold { ambient_dim: d, resolution, manifold, density }
            }
            TargetSpec::Gaussian { var, .. } => TargetSpec::Gaussian { dim: d, var },
        }
    }

    pub fn manifold(&self) -> Result<Option<ParamManifold>, LabError> {
        match self {
            TargetSpec::Manifold { ambient_dim, manifold, .. } => {
                Ok(Some(ParamManifold::new(manifold.clone(), *ambient_dim).map_err(LabError::invalid)?))
            }
            TargetSpec::Gaussian { .. } => Ok(None),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TargetSpec::Manifold { manifold, ambient_dim, .. } => {
                let name = match manifold {
                    ManifoldKind::Circle { .. } => "circle",
                    ManifoldKind::Sphere { .. } => "sphere",
                    ManifoldKind::EmbeddedTorus { .. } => "embedded_torus",
                    ManifoldKind::PhaseTorus { .. } => "phase_torus",
                };
                format!("{name}_r{ambient_dim}")
            }
            TargetSpec::Gaussian { dim, .. } => format!("gaussian_r{dim}"),
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        match self {
            TargetSpec::Manifold { resolution, .. } => {
                if *resolution < 8 {
                    return Err(LabError::Validation(format!("target resolution {resolution} is below 8")));
                }
                self.manifold()?;
                Ok(())
            }
            TargetSpec::Gaussian { dim, var } => {
                if *dim == 0 || !(*var >= 0.0) {
                    return Err(LabError::Validation("gaussian target needs dim > 0 and var >= 0".into()));
                }
                Ok(())
            }
        }
    }
}

/// Noise schedule. The default is the ten-level list with `T = 100`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Standard {
        #[serde(default = "standard_steps")]
        steps: usize,
        #[serde(default = "step_scale")]
        step_scale: f64,
    },
    Explicit {
        sigmas: Vec<f64>,
        #[serde(default = "standard_steps")]
        steps: usize,
        #[serde(default = "step_scale")]
        step_scale: f64,
    },
    /// Log-uniform spacing from `sigma_max` to `sigma_min`.
    Geometric {
        sigma_max: f64,
        sigma_min: f64,
        levels: usize,
        #[serde(default = "standard_steps")]
        steps: usize,
        #[serde(default = "step_scale")]
        step_scale: f64,
    },
}

fn standard_steps() -> usize {
    STANDARD_STEPS
}

fn step_scale() -> f64 {
    DEFAULT_STEP_SCALE
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Standard { steps: STANDARD_STEPS, step_scale: DEFAULT_STEP_SCALE }
    }
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<NoiseSchedule, LabError> {
        let s = match self {
            ScheduleSpec::Standard { steps, step_scale } => NoiseSchedule::uniform(&STANDARD_SIGMAS, *steps, *step_scale),
            ScheduleSpec::Explicit { sigmas, steps, step_scale } => NoiseSchedule::uniform(sigmas, *steps, *step_scale),
            ScheduleSpec::Geometric { sigma_max, sigma_min, levels, steps, step_scale } => {
                NoiseSchedule::geometric(*sigma_max, *sigma_min, *levels, *steps, *step_scale)
            }
        };
        s.map_err(LabError::invalid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSpec {
    /// Number of chains.
    pub chains: usize,
    /// Snapshot cadence in steps; level ends are always kept. 0 keeps
    /// only level ends.
    pub snapshot_every: usize,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec { chains: 512, snapshot_every: 50 }
    }
}

/// W2 estimator choice. `auto` uses the exact solver when both clouds have
/// equal size up to the exact cap, sliced otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Auto,
    Exact,
    Sliced { projections: usize },
}

impl EstimatorSpec {
    pub fn fixed(self) -> Option<Estimator> {
        match self {
            EstimatorSpec::Auto => None,
            EstimatorSpec::Exact => Some(Estimator::Exact),
            EstimatorSpec::Sliced { projections } => Some(Estimator::Sliced { projections }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSpec {
    /// Size of the reference sample from the target.
    pub reference_size: usize,
    pub estimator: EstimatorSpec,
    /// Moving-average window for threshold and minimum extraction.
    pub window: usize,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec { reference_size: 512, estimator: EstimatorSpec::Auto, window: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixingSpec {
    /// Ambient dimensions to sweep.
    pub dims: Vec<usize>,
}

impl Default for MixingSpec {
    fn default() -> Self {
        MixingSpec { dims: vec![4, 16, 64, 256] }
    }
}

/// Long single-level runs at the final noise level of `schedule`, with step
/// size `schedule.step_scale` and `horizon` times the final level's step
/// count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TradeoffSpec {
    /// Score-error magnitudes.
    pub eps: Vec<f64>,
    pub horizon: usize,
    /// Constant in the third term of the sampling-error bound.
    pub bound_constant: f64,
    /// Grid size for the bound's optimal stopping time.
    pub grid: usize,
}

impl Default for TradeoffSpec {
    fn default() -> Self {
        TradeoffSpec { eps: vec![0.0, 0.1, 0.5, 1.0], horizon: 10, bound_constant: 1.0, grid: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiresSpec {
    /// Preset names: `HRS`, `LRS-↑`, `LRS-↑-HRS-y`, `LRS-x-↑-HRS-y` (`up`
    /// may replace the arrow).
    pub presets: Vec<String>,
    /// Number of halvings `J` for the low-resolution presets.
    pub depth: usize,
}

impl Default for MultiresSpec {
    fn default() -> Self {
        MultiresSpec {
            presets: ["HRS", "LRS-↑", "LRS-↑-HRS-3", "LRS-↑-HRS-9", "LRS-2-↑-HRS-9", "LRS-7-↑-HRS-4"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            depth: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsmTarget {
    pub target: TargetSpec,
    pub features: FeatureConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsmSpec {
    pub sizes: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub ridge: f64,
    /// Monte Carlo probes for the population loss.
    pub probes: usize,
    pub targets: Vec<DsmTarget>,
}

impl Default for DsmSpec {
    fn default() -> Self {
        DsmSpec {
            sizes: vec![1_000, 10_000, 100_000],
            sigmas: vec![0.5, 1.0],
            ridge: 1e-8,
            probes: 4000,
            targets: vec![
                DsmTarget { target: TargetSpec::Gaussian { dim: 2, var: 1.0 }, features: FeatureConfig::linear_only() },
                DsmTarget { target: TargetSpec::circle(2), features: FeatureConfig::rbf(32) },
            ],
        }
    }
}

/// Bound inputs. With `measured = true` the curvature inputs come from a
/// mesh of the configured target instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSpec {
    pub sigma: f64,
    pub k: f64,
    pub intrinsic_dim: usize,
    pub kappa: f64,
    pub l: f64,
    pub b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
    pub policy: DomainPolicy,
    pub measured: bool,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec {
            sigma: 0.01,
            k: 2.0,
            intrinsic_dim: 2,
            kappa: 4.0,
            l: 0.0,
            b: 0.0,
            diameter: None,
            policy: DomainPolicy::Enforce,
            measured: false,
        }
    }
}

/// Settings for the single-level decay runs: a Gaussian target
/// `N(0, I_dim)` smoothed at `sigma`, chains started at `offset` along the
/// first axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySpec {
    pub dim: usize,
    pub sigma: f64,
    pub step: f64,
    pub steps: usize,
    pub offset: f64,
    pub chains: usize,
    pub snapshot_every: usize,
}

impl Default for DecaySpec {
    fn default() -> Self {
        DecaySpec { dim: 2, sigma: 0.5, step: 0.01, steps: 1000, offset: 3.0, chains: 512, snapshot_every: 25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSpec {
    /// Probes per Lipschitz and dissipativity check.
    pub probes: usize,
    pub targets: Vec<TargetSpec>,
    /// Signal length for the ladder operator norms.
    pub ladder_length: usize,
    pub decay: DecaySpec,
    /// Dimension of the base Gaussian whose pair-mean image is compared.
    pub pushforward_dim: usize,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        ChecksSpec {
            probes: 256,
            targets: vec![TargetSpec::circle(2), TargetSpec::sphere(3)],
            ladder_length: 32,
            decay: DecaySpec::default(),
            pushforward_dim: 8,
        }
    }
}

impl ExperimentConfig {
    /// Defaults for `experiment`; multires comparisons get a phase torus target.
    pub fn new(experiment: ExperimentKind) -> Self {
        let target = match experiment {
            ExperimentKind::MultiresComparison => TargetSpec::phase_torus(32),
            _ => TargetSpec::default(),
        };
        ExperimentConfig {
            experiment,
            seed: 0,
            seeds: default_seeds(),
            target,
            schedule: ScheduleSpec::default(),
            sampler: SamplerSpec::default(),
            metrics: MetricSpec::default(),
            mixing: MixingSpec::default(),
            tradeoff: TradeoffSpec::default(),
            multires: MultiresSpec::default(),
            dsm: DsmSpec::default(),
            bounds: BoundsSpec::default(),
            checks: ChecksSpec::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LabError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |msg: String| Err(LabError::Validation(msg));
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        // TOML integers are signed 64-bit.
        if i64::try_from(self.seed).is_err() {
            return bad(format!("seed {} exceeds {}", self.seed, i64::MAX));
        }
        self.target.validate()?;
        let schedule = self.schedule.build()?;
        if self.sampler.chains == 0 {
            return bad("sampler.chains must be positive".into());
        }
        if self.metrics.reference_size == 0 || self.metrics.window == 0 {
            return bad("metrics.reference_size and metrics.window must be positive".into());
        }
        if let EstimatorSpec::Sliced { projections: 0 } = self.metrics.estimator {
            return bad("sliced estimator needs at least one projection".into());
        }
        match self.experiment {
            ExperimentKind::MixingVsDimension => {
                if self.mixing.dims.is_empty() {
                    return bad("mixing.dims is empty".into());
                }
                for &d in &self.mixing.dims {
                    self.target.with_ambient(d).validate()?;
                }
            }
            ExperimentKind::ScoreErrorTradeoff => {
                if self.tradeoff.eps.is_empty() || self.tradeoff.eps.iter().any(|e| !(*e >= 0.0)) {
                    return bad("tradeoff.eps must be a nonempty list of nonnegative values".into());
                }
                if self.tradeoff.horizon == 0 || self.tradeoff.grid < 2 {
                    return bad("tradeoff.horizon must be positive and tradeoff.grid at least 2".into());
                }
                if schedule.levels()[schedule.len() - 1].steps == 0 {
                    return bad("final schedule level has no steps to extend".into());
                }
            }
            ExperimentKind::MultiresComparison => {
                let m = self.target.manifold()?;
                if !matches!(m.as_ref().map(|m| &m.kind), Some(ManifoldKind::PhaseTorus { .. })) {
                    return bad("multires_comparison needs a phase torus target".into());
                }
                let mut m = m.expect("checked above");
                for j in 0..self.multires.depth {
                    m = m.downsampled().map_err(|e| {
                        LabError::Validation(format!("resolution {} has no valid downsampled target: {e}", j + 1))
                    })?;
                }
                if self.multires.presets.is_empty() {
                    return bad("multires.presets is empty".into());
                }
                for p in &self.multires.presets {
                    Preset::parse(p)?.schedules(&schedule, self.multires.depth)?;
                }
            }
            ExperimentKind::DsmConsistency => {
                if self.dsm.sizes.is_empty() || self.dsm.sigmas.is_empty() || self.dsm.targets.is_empty() {
                    return bad("dsm.sizes, dsm.sigmas and dsm.targets must be nonempty".into());
                }
                if self.dsm.sigmas.iter().any(|s| !(*s > 0.0)) || !(self.dsm.ridge >= 0.0) || self.dsm.probes == 0 {
                    return bad("dsm.sigmas must be positive, dsm.ridge nonnegative, dsm.probes positive".into());
                }
                for t in &self.dsm.targets {
                    t.target.validate()?;
                }
            }
            ExperimentKind::BoundsReport => {
                let b = &self.bounds;
                if !(b.sigma >= 0.0 && b.l >= 0.0 && b.b >= 0.0) {
                    return bad("bounds.sigma, bounds.l and bounds.b must be nonnegative".into());
                }
            }
            ExperimentKind::PropChecks => {
                if self.checks.probes == 0 || self.checks.targets.is_empty() {
                    return bad("checks.probes and checks.targets must be nonempty".into());
                }
                for t in &self.checks.targets {
                    t.validate()?;
                }
                let len = self.checks.ladder_length;
                if len < 4 || len % 4 != 0 {
                    return bad("checks.ladder_length must be a positive multiple of 4".into());
                }
                let d = &self.checks.decay;
                if d.dim == 0 || d.chains < 4 || d.steps == 0 || !(d.step > 0.0) || !(d.sigma >= 0.0) {
                    return bad("checks.decay needs dim > 0, chains >= 4, steps > 0, step > 0".into());
                }
                if self.checks.pushforward_dim < 2 || self.checks.pushforward_dim % 2 != 0 {
                    return bad("checks.pushforward_dim must be even".into());
                }
            }
        }
        Ok(())
    }
}
