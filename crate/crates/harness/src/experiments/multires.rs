//! Multi-resolution presets against full-resolution sampling on a phase
//! torus. Each coarser resolution uses the exact oracle of the pair-mean
//! image of the torus, which is again a phase torus. Cost is the
//! dimension-weighted count of score evaluations.

use manifold_langevin::rng::derive_seed;
use manifold_langevin::sampler::{multires_annealed_langevin, LadderLevel, ResolutionLadder};
use manifold_langevin::target::VonMisesOracle;
use manifold_langevin::SmoothedOracle;
use serde_json::{json, Value};

use super::{label, replicate_seed, w2, Outcome};
use crate::config::{ExperimentConfig, TargetSpec};
use crate::presets::Preset;
use crate::table::{median, num, Table};
use crate::{LabError, Result};

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let schedule = cfg.schedule.build()?;
    let depth = cfg.multires.depth;
    let density = match &cfg.target {
        TargetSpec::Manifold { density, .. } => density.clone(),
        TargetSpec::Gaussian { .. } => return Err(LabError::Validation("multires needs a phase torus".into())),
    };
    let started = std::time::Instant::now();
    let mut manifolds = vec![cfg.target.manifold()?.expect("manifold target")];
    for j in 0..depth {
        let next = manifolds[j].downsampled().map_err(LabError::invalid)?;
        manifolds.push(next);
    }
    let oracles: Vec<VonMisesOracle> = manifolds.iter().map(|m| VonMisesOracle::new(m, &density)).collect::<Result<_, _>>()?;
    let setup = started.elapsed().as_secs_f64();
    let presets: Vec<Preset> = cfg.multires.presets.iter().map(|p| Preset::parse(p)).collect::<Result<_>>()?;

    let mut rows = Table::new("runs", &["preset", "seed", "w2", "cost", "score_evals"]);
    let mut per_preset = Vec::new();
    let mut wall = serde_json::Map::new();
    let refs: Vec<_> = (0..cfg.seeds)
        .map(|i| {
            oracles[0].sample_prior(cfg.metrics.reference_size, derive_seed(replicate_seed(cfg.seed, i), label::REFERENCE))
        })
        .collect::<Result<_, _>>()?;
    // Finite-sample W2 between two independent target samples.
    let mut floors = Vec::new();
    for (i, reference) in refs.iter().enumerate() {
        let seed = replicate_seed(cfg.seed, i);
        let fresh = oracles[0].sample_prior(cfg.metrics.reference_size, derive_seed(seed, label::FLOOR))?;
        floors.push(w2(cfg.metrics.estimator, &fresh, reference, derive_seed(seed, label::METRIC))?.0);
    }

    for preset in &presets {
        let schedules = preset.schedules(&schedule, depth)?;
        let levels = schedules
            .into_iter()
            .enumerate()
            .map(|(j, s)| LadderLevel::new(&oracles[j], s))
            .collect();
        let ladder = ResolutionLadder::new(levels, cfg.sampler.chains)?;
        let mut w2s = Vec::new();
        let mut walls = Vec::new();
        for (i, reference) in refs.iter().enumerate() {
            let seed = replicate_seed(cfg.seed, i);
            let log = multires_annealed_langevin(&ladder, seed, cfg.sampler.snapshot_every)?;
            let (w, _) = w2(cfg.metrics.estimator, &log.final_cloud, reference, derive_seed(seed, label::METRIC))?;
            rows.push(vec![preset.name(), i.to_string(), num(w), log.cost.to_string(), log.score_evals.to_string()]);
            w2s.push(w);
            walls.push(log.wall_seconds);
        }
        wall.insert(preset.name(), json!(median(&mut walls)));
        per_preset.push((preset.name(), median(&mut w2s), ladder.cost()));
    }

    let hrs = per_preset.iter().find(|p| p.0 == "HRS").map(|p| (p.1, p.2));
    let table: Vec<Value> = per_preset
        .iter()
        .map(|(name, w, cost)| {
            let (w_ratio, cost_ratio) = match hrs {
                Some((hw, hc)) => (json!(w / hw), json!(*cost as f64 / hc as f64)),
                None => (Value::Null, Value::Null),
            };
            json!({ "preset": name, "median_w2": w, "cost": cost, "w2_vs_hrs": w_ratio, "cost_vs_hrs": cost_ratio })
        })
        .collect();
    let mut summary_table = Table::new("presets", &["preset", "median_w2", "cost", "w2_vs_hrs", "cost_vs_hrs", "median_wall_seconds"]);
    for row in &table {
        let name = row["preset"].as_str().unwrap_or_default().to_string();
        let f = |k: &str| row[k].as_f64().map(num).unwrap_or_default();
        summary_table.push(vec![name.clone(), f("median_w2"), row["cost"].to_string(), f("w2_vs_hrs"), f("cost_vs_hrs"), num(wall[&name].as_f64().unwrap_or(f64::NAN))]);
    }

    let mut out = Outcome::default();
    out.summary.insert("presets".into(), Value::Array(table));
    out.summary.insert("median_floor".into(), json!(median(&mut floors)));
    out.summary.insert("dims".into(), json!(manifolds.iter().map(|m| m.ambient_dim).collect::<Vec<_>>()));
    out.tables.push(summary_table);
    out.tables.push(rows);
    out.timing.insert("setup_seconds".into(), json!(setup));
    out.timing.insert("median_wall_seconds".into(), Value::Object(wall));
    Ok(out)
}
