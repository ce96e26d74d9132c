//! Consistency of the ridge score model: population score error against
//! sample size. For Gaussian targets the fitted linear coefficient is also
//! compared with the exact `-1 / (var + sigma^2)`.

use manifold_langevin::dsm::{fit_score_model, score_error};
use manifold_langevin::rng::derive_seed;
use serde_json::{json, Value};

use super::{label, replicate_seed, Outcome};
use crate::config::{ExperimentConfig, TargetSpec};
use crate::table::{median, num, Table};
use crate::{targets, Result};

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = &cfg.dsm;
    let mut rows = Table::new("score_error", &["target", "n", "sigma", "seed", "score_error", "coef_rel_error"]);
    let mut curves = Vec::new();
    let mut setup = 0.0;
    for dt in &spec.targets {
        let built = targets::build(&dt.target)?;
        setup += built.setup_seconds;
        let oracle = built.oracle.as_ref();
        let name = dt.target.label();
        let var = match dt.target {
            TargetSpec::Gaussian { var, .. } => Some(var),
            TargetSpec::Manifold { .. } => None,
        };
        // cells[n][sigma] -> (errors, coefficient errors)
        let mut cells = vec![vec![(Vec::new(), Vec::new()); spec.sigmas.len()]; spec.sizes.len()];
        for i in 0..cfg.seeds {
            let seed = replicate_seed(cfg.seed, i);
            for (ni, &n) in spec.sizes.iter().enumerate() {
                let data = oracle.sample_prior(n, derive_seed(seed, label::DATA))?;
                let model = fit_score_model(&data, &spec.sigmas, &dt.features, spec.ridge, derive_seed(seed, label::SAMPLER))?;
                for (si, &sigma) in spec.sigmas.iter().enumerate() {
                    let err = score_error(&model, oracle, sigma, spec.probes, derive_seed(seed, label::PROBES))?;
                    let coef = match var {
                        Some(v) if dt.features.linear => Some(linear_coef_error(&model, sigma, v)?),
                        _ => None,
                    };
                    rows.push(vec![name.clone(), n.to_string(), num(sigma), i.to_string(), num(err), coef.map(num).unwrap_or_default()]);
                    cells[ni][si].0.push(err);
                    if let Some(c) = coef {
                        cells[ni][si].1.push(c);
                    }
                }
            }
        }
        for (si, &sigma) in spec.sigmas.iter().enumerate() {
            let mut med: Vec<f64> = Vec::new();
            let mut worst_coef: Vec<Option<f64>> = Vec::new();
            for cell in cells.iter_mut() {
                med.push(median(&mut cell[si].0));
                worst_coef.push(cell[si].1.iter().cloned().reduce(f64::max));
            }
            let non_increasing = med.windows(2).all(|w| w[1] <= w[0]);
            curves.push(json!({
                "target": name,
                "sigma": sigma,
                "sizes": spec.sizes,
                "median_score_error": med,
                "non_increasing": non_increasing,
                "max_coef_rel_error": worst_coef,
            }));
        }
    }
    let mut out = Outcome::default();
    out.summary.insert("curves".into(), Value::Array(curves));
    out.tables.push(rows);
    out.timing.insert("setup_seconds".into(), json!(setup));
    Ok(out)
}

/// Largest relative deviation of the linear block of the fitted coefficient
/// matrix from `-I / (var + sigma^2)`, off-diagonal entries measured
/// against the diagonal value.
fn linear_coef_error(model: &manifold_langevin::dsm::ScoreModel, sigma: f64, var: f64) -> Result<f64> {
    let w = model.coefficient_matrix(sigma)?;
    let d = model.features.dim;
    let exact = -1.0 / (var + sigma * sigma);
    let offset = model.features.centers.len() / d.max(1);
    let mut worst: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            let want = if r == c { exact } else { 0.0 };
            worst = worst.max((w[(r, offset + c)] - want).abs() / exact.abs());
        }
    }
    Ok(worst)
}
