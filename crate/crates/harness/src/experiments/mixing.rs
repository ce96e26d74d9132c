//! Mixing time against ambient dimension for a fixed intrinsic manifold.
//!
//! For each ambient dimension `d` and replicate, annealed Langevin runs with
//! the exact oracle from `N(0, I)`; the W2 series to a reference sample is
//! compared with `floor + sigma_L sqrt(d)`, where `floor` is the W2 between
//! two independent reference-size samples of the target. Times are global
//! step counts.

use manifold_langevin::rng::derive_seed;
use manifold_langevin::sampler::annealed_langevin;
use manifold_langevin::metrics::mixing_time_with_window;
use serde_json::{json, Value};

use super::{cloud_table, label, replicate_seed, w2, w2_series, Outcome};
use crate::config::ExperimentConfig;
use crate::table::{median_opt, num, opt, Table};
use crate::{targets, Result};

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let schedule = cfg.schedule.build()?;
    let sigma_l = schedule.final_sigma();
    let mut series = Table::new("series", &["d", "seed", "step", "level", "w2", "floor", "estimator"]);
    let mut rows = Table::new("mixing", &["d", "seed", "mixing_time", "floor", "threshold", "final_w2"]);
    let mut per_dim = Vec::new();
    let mut out = Outcome::default();
    let (mut setup, mut sampling) = (0.0, 0.0);

    for &d in &cfg.mixing.dims {
        let target = targets::build(&cfg.target.with_ambient(d))?;
        setup += target.setup_seconds;
        let oracle = target.oracle.as_ref();
        let mut times = Vec::new();
        for i in 0..cfg.seeds {
            let seed = replicate_seed(cfg.seed, i);
            let n = cfg.metrics.reference_size;
            let reference = oracle.sample_prior(n, derive_seed(seed, label::REFERENCE))?;
            let fresh = oracle.sample_prior(n, derive_seed(seed, label::FLOOR))?;
            let metric_seed = derive_seed(seed, label::METRIC);
            let (floor, _) = w2(cfg.metrics.estimator, &fresh, &reference, metric_seed)?;
            let log = annealed_langevin(oracle, &schedule, cfg.sampler.chains, seed, cfg.sampler.snapshot_every)?;
            sampling += log.wall_seconds;
            let (points, estimator) = w2_series(&log, &reference, cfg.metrics.estimator, metric_seed)?;
            let threshold = floor + sigma_l * (d as f64).sqrt();
            let pairs: Vec<(f64, f64)> = points.iter().map(|(s, _, w)| (*s as f64, *w)).collect();
            let t = mixing_time_with_window(&pairs, threshold, cfg.metrics.window)?;
            for (step, level, w) in &points {
                series.push(vec![d.to_string(), i.to_string(), step.to_string(), level.to_string(), num(*w), num(floor), estimator.to_string()]);
            }
            let final_w2 = points.last().map(|p| p.2).unwrap_or(f64::NAN);
            rows.push(vec![d.to_string(), i.to_string(), opt(t), num(floor), num(threshold), num(final_w2)]);
            if i == 0 {
                out.tables.push(cloud_table(&format!("final_cloud_d{d}"), &log.final_cloud));
            }
            times.push(t);
        }
        per_dim.push((d, median_opt(&times)));
    }

    let medians: Vec<Value> = per_dim.iter().map(|(d, t)| json!({ "d": d, "median_mixing_time": t })).collect();
    let finite: Option<Vec<f64>> = per_dim.iter().map(|(_, t)| *t).collect();
    let ratio = finite.filter(|v| !v.is_empty()).map(|v| {
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    });
    let dmin = *cfg.mixing.dims.iter().min().expect("validated nonempty") as f64;
    let dmax = *cfg.mixing.dims.iter().max().expect("validated nonempty") as f64;
    out.summary.insert("medians".into(), Value::Array(medians));
    out.summary.insert("max_over_min".into(), json!(ratio));
    // An exp(d) mixing time would change by (dmax - dmin) / ln 10 decades.
    out.summary.insert("naive_log10_ratio".into(), json!((dmax - dmin) / std::f64::consts::LN_10));
    out.summary.insert("sigma_l".into(), json!(sigma_l));
    out.tables.insert(0, rows);
    out.tables.insert(1, series);
    out.timing.insert("setup_seconds".into(), json!(setup));
    out.timing.insert("sampling_seconds".into(), json!(sampling));
    Ok(out)
}
