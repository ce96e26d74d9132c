//! Builds exact oracles from target specs.

use std::time::Instant;

use manifold_langevin::geometry::ManifoldKind;
use manifold_langevin::target::{GaussianOracle, ScoreOracle, TargetDistribution, VonMisesOracle};
use manifold_langevin::SmoothedOracle;

use crate::config::TargetSpec;
use crate::LabError;

pub struct BuiltTarget {
    pub oracle: Box<dyn SmoothedOracle>,
    /// Time spent building the oracle (mesh and weights), kept apart from
    /// sampling time.
    pub setup_seconds: f64,
}

/// Closed-form oracles for circles, phase tori and Gaussians; mesh
/// quadrature for everything else.
pub fn build(spec: &TargetSpec) -> Result<BuiltTarget, LabError> {
    let started = Instant::now();
    let oracle: Box<dyn SmoothedOracle> = match spec {
        TargetSpec::Gaussian { dim, var } => Box::new(GaussianOracle::new(vec![0.0; *dim], *var)?),
        TargetSpec::Manifold { resolution, density, .. } => {
            let m = spec.manifold()?.expect("manifold target");
            match m.kind {
                ManifoldKind::Circle { .. } | ManifoldKind::PhaseTorus { .. } => Box::new(VonMisesOracle::new(&m, density)?),
                _ => Box::new(ScoreOracle::new(TargetDistribution::new(m, density.clone(), *resolution)?)),
            }
        }
    };
    Ok(BuiltTarget { oracle, setup_seconds: started.elapsed().as_secs_f64() })
}
