//! Property checks: smoothed-score Lipschitz and dissipativity constants,
//! ladder operator norms, Bishop-Gromov volume comparison, the W2 decay
//! contract for a Gaussian target, and decay of a pair-mean pushforward
//! against its base.

use manifold_langevin::geometry::{bishop_gromov_check, build_mesh, summarize};
use manifold_langevin::metrics::{decay_fit, w2_exact, DecayFit};
use manifold_langevin::rng::derive_seed;
use manifold_langevin::sampler::{
    downsample_cloud, downsample_matrix, langevin_from, operator_norm_check, upsample_matrix, NoiseSchedule,
};
use manifold_langevin::target::{dissipativity_check, lipschitz_check, GaussianOracle};
use manifold_langevin::{PointCloud, ScoreField, SmoothedOracle};
use serde_json::{json, Value};

use super::{label, replicate_seed, Outcome};
use crate::config::{DecaySpec, ExperimentConfig, TargetSpec};
use crate::table::{median, num, Table};
use crate::{targets, Result};

/// Radii pairs `(r, R)` of the Bishop-Gromov grid.
pub const BISHOP_GROMOV_RADII: [(f64, f64); 3] = [(0.25, 0.5), (0.25, 1.0), (0.5, 1.0)];
/// Node cap per manifold for the Bishop-Gromov grid.
pub const BISHOP_GROMOV_NODES: usize = 256;

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let sigmas: Vec<f64> = cfg.schedule.build()?.levels().iter().map(|l| l.sigma).collect();
    let (prop1, violations) = prop1_table(cfg, &cfg.checks.targets, &sigmas)?;
    out.summary.insert("prop1_checks".into(), json!(prop1.rows.len() * 2));
    out.summary.insert("prop1_violations".into(), json!(violations));
    out.tables.push(prop1);

    let (norms, norm_summary) = norm_table(cfg.checks.ladder_length)?;
    out.summary.insert("operator_norms".into(), norm_summary);
    out.tables.push(norms);

    let (bg, cells, failures) = bishop_gromov_table(&cfg.checks.targets)?;
    out.summary.insert("bishop_gromov_cells".into(), json!(cells));
    out.summary.insert("bishop_gromov_failures".into(), json!(failures));
    out.tables.push(bg);

    let mut decay_series = Table::new("decay_series", &["seed", "t", "w2", "envelope"]);
    let mut decay_rows = Vec::new();
    let mut push_rows = Vec::new();
    for i in 0..cfg.seeds {
        let seed = replicate_seed(cfg.seed, i);
        let d = decay_contract(&cfg.checks.decay, seed)?;
        for (t, w, env) in &d.points {
            decay_series.push(vec![i.to_string(), num(*t), num(*w), num(*env)]);
        }
        decay_rows.push(json!({
            "seed": i,
            "holds": d.holds,
            "fit_rate": d.fit.rate,
            "rate_bound": d.rate_bound,
            "floor": d.floor,
            "worst_ratio": d.worst_ratio,
        }));
        push_rows.push(pushforward_rates(&cfg.checks.decay, cfg.checks.pushforward_dim, seed)?);
    }
    let decay_all = decay_rows.iter().all(|r| r["holds"] == json!(true));
    let mut ratios: Vec<f64> = push_rows.iter().map(|p| p.push / p.base).collect();
    let pass = ratios.iter().filter(|r| **r >= 0.8).count();
    let mut push_table = Table::new("pushforward", &["seed", "base_rate", "push_rate", "ratio"]);
    for (i, p) in push_rows.iter().enumerate() {
        push_table.push(vec![i.to_string(), num(p.base), num(p.push), num(p.push / p.base)]);
    }
    out.summary.insert("decay_contract".into(), Value::Array(decay_rows));
    out.summary.insert("decay_contract_holds".into(), json!(decay_all));
    out.summary.insert(
        "pushforward".into(),
        json!({ "median_ratio": median(&mut ratios), "seeds_at_least_0_8": pass, "seeds": cfg.seeds }),
    );
    out.tables.push(decay_series);
    out.tables.push(push_table);
    Ok(out)
}

fn prop1_table(cfg: &ExperimentConfig, targets_: &[TargetSpec], sigmas: &[f64]) -> Result<(Table, usize)> {
    let mut t = Table::new(
        "prop1",
        &["target", "sigma", "lipschitz_estimate", "lipschitz_bound", "lipschitz_holds", "min_margin", "dissipativity_holds"],
    );
    let mut violations = 0;
    for spec in targets_ {
        let built = targets::build(spec)?;
        let o = built.oracle.as_ref();
        for (k, &sigma) in sigmas.iter().enumerate() {
            let seed = derive_seed(cfg.seed, label::PROBES + 16 * k as u64);
            let lip = lipschitz_check(o, sigma, cfg.checks.probes, seed)?;
            let dis = dissipativity_check(o, sigma, cfg.checks.probes, seed)?;
            violations += usize::from(!lip.holds) + usize::from(!dis.holds);
            t.push(vec![
                spec.label(),
                num(sigma),
                num(lip.estimate),
                num(lip.bound),
                lip.holds.to_string(),
                num(dis.min_margin),
                dis.holds.to_string(),
            ]);
        }
    }
    Ok((t, violations))
}

fn norm_table(n: usize) -> Result<(Table, Value)> {
    let d1 = downsample_matrix(n)?;
    let d2 = downsample_matrix(n / 2)?;
    let maps = [
        (format!("downsample_{n}"), d1.clone()),
        (format!("downsample_{}", n / 2), d2.clone()),
        (format!("downsample_{n}_to_{}", n / 4), &d2 * &d1),
        (format!("upsample_{}", n / 2), upsample_matrix(n / 2)?),
    ];
    let mut t = Table::new("operator_norms", &["map", "rows", "cols", "norm", "contractive"]);
    let mut summary = serde_json::Map::new();
    for (name, m) in &maps {
        let r = operator_norm_check(m)?;
        t.push(vec![name.clone(), m.nrows().to_string(), m.ncols().to_string(), num(r.norm), r.contractive.to_string()]);
        summary.insert(name.clone(), json!({ "norm": r.norm, "contractive": r.contractive }));
    }
    Ok((t, Value::Object(summary)))
}

fn bishop_gromov_table(specs: &[TargetSpec]) -> Result<(Table, usize, usize)> {
    let mut t = Table::new("bishop_gromov", &["target", "node", "r", "R", "lhs", "rhs", "tolerance", "holds"]);
    let (mut cells, mut failures) = (0, 0);
    for spec in specs {
        let (Some(m), TargetSpec::Manifold { resolution, .. }) = (spec.manifold()?, spec) else {
            continue;
        };
        let mesh = build_mesh(&m, *resolution)?;
        let k = summarize(&mesh, &m, 0.0, 0.0)?.k_eff;
        let stride = mesh.len().div_ceil(BISHOP_GROMOV_NODES).max(1);
        for x in (0..mesh.len()).step_by(stride) {
            for &(r, big_r) in &BISHOP_GROMOV_RADII {
                let bg = bishop_gromov_check(&mesh, k, x, r, big_r)?;
                cells += 1;
                failures += usize::from(!bg.holds);
                t.push(vec![spec.label(), x.to_string(), num(r), num(big_r), num(bg.lhs), num(bg.rhs), num(bg.tolerance), bg.holds.to_string()]);
            }
        }
    }
    Ok((t, cells, failures))
}

pub struct DecayCheck {
    /// `(t, w2, envelope)` with `envelope = 1.1 (w0 e^{-2t/c} + floor)`.
    pub points: Vec<(f64, f64, f64)>,
    pub floor: f64,
    pub fit: DecayFit,
    pub rate_bound: f64,
    /// Largest `w2 / envelope`.
    pub worst_ratio: f64,
    pub holds: bool,
}

/// Single-level Langevin with the exact score of `N(0, I)` smoothed at
/// `sigma`, i.e. of `N(0, (1 + sigma^2) I)`, whose log-Sobolev constant is
/// `c = 2 (1 + sigma^2)`. Chains start from `N(offset e_1, I)`.
pub fn decay_contract(spec: &DecaySpec, seed: u64) -> Result<DecayCheck> {
    let oracle = GaussianOracle::standard(spec.dim);
    let smoothed_var = 1.0 + spec.sigma * spec.sigma;
    let c = 2.0 * smoothed_var;
    let (series, floor) = decay_series(&oracle, smoothed_var, spec, None, seed)?;
    let w0 = series[0].1;
    let points: Vec<(f64, f64, f64)> = series
        .iter()
        .map(|(t, w)| (*t, *w, 1.1 * (w0 * (-2.0 * t / c).exp() + floor)))
        .collect();
    let worst_ratio = points.iter().map(|(_, w, e)| w / e).fold(0.0, f64::max);
    let fit = decay_fit(&series)?;
    let rate_bound = 0.8 * 2.0 / c;
    Ok(DecayCheck { points, floor, fit, rate_bound, worst_ratio, holds: worst_ratio <= 1.0 && fit.rate >= rate_bound })
}

pub struct PushforwardRates {
    pub base: f64,
    pub push: f64,
}

/// Fitted W2 decay rates of Langevin on `N(0, I_n)` and on its pair-mean
/// image `N(0, I_{n/2} / 2)`, started from a cloud and its pair-mean image.
pub fn pushforward_rates(spec: &DecaySpec, n: usize, seed: u64) -> Result<PushforwardRates> {
    let base = GaussianOracle::standard(n);
    let push = GaussianOracle::new(vec![0.0; n / 2], 0.5)?;
    let s2 = spec.sigma * spec.sigma;
    let start = initial_cloud(spec, n, seed)?;
    let (base_series, _) = decay_series(&base, 1.0 + s2, spec, Some(start.clone()), seed)?;
    let (push_series, _) = decay_series(&push, 0.5 + s2, spec, Some(downsample_cloud(&start)?), seed)?;
    Ok(PushforwardRates { base: decay_fit(&base_series)?.rate, push: decay_fit(&push_series)?.rate })
}

fn initial_cloud(spec: &DecaySpec, n: usize, seed: u64) -> Result<PointCloud> {
    let mut mean = vec![0.0; n];
    mean[0] = spec.offset;
    Ok(GaussianOracle::new(mean, 1.0)?.sample_prior(spec.chains, derive_seed(seed, label::DATA))?)
}

/// `(t, W2)` to a sample of `N(0, smoothed_var I)` with `t = step * alpha / 2`,
/// plus the W2 floor between two such samples.
fn decay_series(
    oracle: &GaussianOracle,
    smoothed_var: f64,
    spec: &DecaySpec,
    start: Option<PointCloud>,
    seed: u64,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let d = oracle.dim();
    let start = match start {
        Some(s) => s,
        None => initial_cloud(spec, d, seed)?,
    };
    let target = GaussianOracle::new(vec![0.0; d], smoothed_var)?;
    let reference = target.sample_prior(spec.chains, derive_seed(seed, label::REFERENCE))?;
    let fresh = target.sample_prior(spec.chains, derive_seed(seed, label::FLOOR))?;
    let floor = w2_exact(&fresh, &reference)?;
    let schedule = NoiseSchedule::constant(spec.sigma, spec.steps, spec.step)?;
    let log = langevin_from(oracle, &schedule, &start, derive_seed(seed, label::SAMPLER), spec.snapshot_every)?;
    let mut series = Vec::new();
    for s in log.at_resolution(0) {
        series.push((s.step as f64 * spec.step / 2.0, w2_exact(&s.cloud, &reference)?));
    }
    Ok((series, floor))
}
