//! Score-error trade-off at a fixed noise level.
//!
//! The final level of the schedule is run alone for `horizon` times its step
//! count with the oracle plus an `eps`-sized error field. One field is drawn
//! per replicate and scaled by each `eps`, and all `eps` share the
//! replicate's Langevin noise. Time is continuous Langevin time
//! `t = step * alpha / 2`.

use manifold_langevin::bounds::{
    cls_convolved, prop1_constants, sup_density_estimate, thm1_argmin, thm1_terms, DomainPolicy, Thm1Inputs,
};
use manifold_langevin::dsm::perturb_oracle;
use manifold_langevin::geometry::ManifoldKind;
use manifold_langevin::metrics::divergence_detect_with_window;
use manifold_langevin::rng::derive_seed;
use manifold_langevin::sampler::{annealed_langevin, NoiseSchedule};
use manifold_langevin::SmoothedOracle;
use serde_json::{json, Value};

use super::{label, replicate_seed, w2_series, Outcome};
use crate::config::{ExperimentConfig, TargetSpec};
use crate::table::{median, num, Table};
use crate::{targets, Result};

/// Log-Sobolev constant of the unsmoothed target where it is known in
/// closed form: `2 r^2` for a uniform circle of radius `r` (Poincaré
/// constant `r^2` on the circle, doubled) and `2 var` for a Gaussian.
pub fn target_cls(spec: &TargetSpec) -> Option<f64> {
    match spec {
        TargetSpec::Gaussian { var, .. } => Some(2.0 * var),
        TargetSpec::Manifold { manifold: ManifoldKind::Circle { radius }, density, .. }
            if *density == manifold_langevin::target::Density::Uniform =>
        {
            Some(2.0 * radius * radius)
        }
        _ => None,
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let full = cfg.schedule.build()?;
    let last = full.levels()[full.len() - 1];
    let sigma = last.sigma;
    let alpha = full.step_size(full.len() - 1);
    let steps = last.steps * cfg.tradeoff.horizon;
    let schedule = NoiseSchedule::constant(sigma, steps, alpha)?;
    let horizon_t = steps as f64 * alpha / 2.0;
    let target = targets::build(&cfg.target)?;
    let oracle = target.oracle.as_ref();
    let mut series = Table::new("series", &["eps", "seed", "step", "t", "w2"]);
    let mut rows = Table::new("divergence", &["eps", "seed", "t_star", "degradation", "diverged", "w0"]);
    let mut eps_rows = Vec::new();
    let mut sampling = 0.0;
    let mut w0_all = Vec::new();

    let refs: Vec<_> = (0..cfg.seeds)
        .map(|i| {
            let seed = replicate_seed(cfg.seed, i);
            oracle.sample_prior(cfg.metrics.reference_size, derive_seed(seed, label::REFERENCE))
        })
        .collect::<Result<_, _>>()?;

    for &eps in &cfg.tradeoff.eps {
        let mut t_stars = Vec::new();
        let mut degradations = Vec::new();
        let mut diverged = 0usize;
        for (i, reference) in refs.iter().enumerate() {
            let seed = replicate_seed(cfg.seed, i);
            let field = perturb_oracle(oracle, eps, sigma, derive_seed(seed, label::FIELD))?;
            let log = annealed_langevin(&field, &schedule, cfg.sampler.chains, seed, cfg.sampler.snapshot_every)?;
            sampling += log.wall_seconds;
            let (points, _) = w2_series(&log, reference, cfg.metrics.estimator, derive_seed(seed, label::METRIC))?;
            let pairs: Vec<(f64, f64)> = points.iter().map(|(s, _, w)| (*s as f64 * alpha / 2.0, *w)).collect();
            for ((step, _, _), (t, w)) in points.iter().zip(&pairs) {
                series.push(vec![num(eps), i.to_string(), step.to_string(), num(*t), num(*w)]);
            }
            let div = divergence_detect_with_window(&pairs, cfg.metrics.window)?;
            rows.push(vec![num(eps), i.to_string(), num(div.t_star), num(div.degradation), div.diverged.to_string(), num(pairs[0].1)]);
            if eps == cfg.tradeoff.eps[0] {
                w0_all.push(pairs[0].1);
            }
            t_stars.push(div.t_star);
            degradations.push(div.degradation);
            diverged += div.diverged as usize;
        }
        eps_rows.push(json!({
            "eps": eps,
            "median_t_star": median(&mut t_stars),
            "median_degradation": median(&mut degradations),
            "diverged": diverged,
            "seeds": cfg.seeds,
        }));
    }

    let (curve, argmins, bound_inputs) =
        bound_curve(cfg, oracle, sigma, horizon_t, median(&mut w0_all))?;

    let mut out = Outcome::default();
    let medians: Vec<f64> = eps_rows.iter().map(|r| r["median_t_star"].as_f64().unwrap_or(f64::NAN)).collect();
    let non_increasing = medians.windows(2).all(|w| w[1] <= w[0]);
    let strictly_lower = medians.len() < 2 || medians[medians.len() - 1] < medians[0];
    out.summary.insert("sigma".into(), json!(sigma));
    out.summary.insert("step_size".into(), json!(alpha));
    out.summary.insert("horizon_t".into(), json!(horizon_t));
    out.summary.insert("per_eps".into(), Value::Array(eps_rows));
    out.summary.insert("t_star_decreasing".into(), json!(non_increasing && strictly_lower));
    out.summary.insert("bound_argmin".into(), Value::Array(argmins));
    out.summary.insert("bound_inputs".into(), bound_inputs);
    out.tables.push(rows);
    out.tables.push(series);
    out.tables.extend(curve);
    out.timing.insert("setup_seconds".into(), json!(target.setup_seconds));
    out.timing.insert("sampling_seconds".into(), json!(sampling));
    Ok(out)
}

/// The sampling-error bound over the run's time horizon, for each `eps`.
/// Needs a target with a known log-Sobolev constant and `d >= 3`; otherwise
/// no curve is produced.
fn bound_curve(
    cfg: &ExperimentConfig,
    oracle: &dyn SmoothedOracle,
    sigma: f64,
    horizon_t: f64,
    w0: f64,
) -> Result<(Option<Table>, Vec<Value>, Value)> {
    let d = oracle.dim();
    let Some(c_target) = target_cls(&cfg.target).filter(|_| d >= 3) else {
        return Ok((None, Vec::new(), Value::Null));
    };
    let c_ls = cls_convolved(c_target, sigma);
    let p1 = prop1_constants(oracle.radius(), sigma)?;
    let probe_seed = derive_seed(replicate_seed(cfg.seed, 0), label::PROBES);
    let p_inf = sup_density_estimate(oracle, sigma, 1024, probe_seed)?;
    let grid: Vec<f64> = (1..=cfg.tradeoff.grid).map(|k| horizon_t * k as f64 / cfg.tradeoff.grid as f64).collect();
    let mut curve = Table::new("bound_curve", &["eps", "t", "bound", "smoothing", "mixing", "score"]);
    let mut argmins = Vec::new();
    for &eps in &cfg.tradeoff.eps {
        let inputs = Thm1Inputs {
            sigma,
            d,
            w0,
            t: horizon_t,
            c_ls,
            eps,
            b: p1.b,
            l: p1.lipschitz,
            p_inf,
            c: cfg.tradeoff.bound_constant,
        };
        for &t in &grid {
            let (terms, _) = thm1_terms(&Thm1Inputs { t, ..inputs }, DomainPolicy::Enforce)?;
            curve.push(vec![num(eps), num(t), num(terms.total), num(terms.smoothing), num(terms.mixing), num(terms.score)]);
        }
        let (t_best, v_best) = thm1_argmin(&inputs, &grid)?;
        argmins.push(json!({ "eps": eps, "t": t_best, "bound": v_best }));
    }
    let inputs = json!({ "c_ls": c_ls, "w0": w0, "b": p1.b, "l": p1.lipschitz, "p_inf": p_inf, "d": d });
    Ok((Some(curve), argmins, inputs))
}
