//! Bound evaluation, either from given curvature inputs or from a mesh of
//! the configured target.

use manifold_langevin::bounds::{
    cls_general_log, cls_uniform_log, diameter_report, BoundReport, DomainPolicy, GeneralInputs,
};
use manifold_langevin::geometry::{build_mesh, summarize, GeometrySummary};
use manifold_langevin::target::{Density, TargetDistribution};
use serde_json::{json, Value};

use super::Outcome;
use crate::config::{BoundsSpec, ExperimentConfig, TargetSpec};
use crate::table::{num, opt, Table};
use crate::{LabError, Result};

/// Curvature inputs handed to the evaluators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    pub sigma: f64,
    pub k: f64,
    pub dim: usize,
    pub kappa: f64,
    pub l: f64,
    pub b: f64,
    pub diameter: Option<f64>,
}

impl BoundInputs {
    pub fn from_spec(b: &BoundsSpec) -> Self {
        BoundInputs { sigma: b.sigma, k: b.k, dim: b.intrinsic_dim, kappa: b.kappa, l: b.l, b: b.b, diameter: b.diameter }
    }
}

/// Measured `K_eff`, `kappa`, intrinsic dimension and graph diameter of a
/// manifold target at its configured resolution.
pub fn measure(target: &TargetSpec, sigma: f64) -> Result<(BoundInputs, GeometrySummary)> {
    let (resolution, density) = match target {
        TargetSpec::Manifold { resolution, density, .. } => (*resolution, density.clone()),
        TargetSpec::Gaussian { .. } => return Err(LabError::Validation("measured bounds need a manifold target".into())),
    };
    let m = target.manifold()?.expect("manifold target");
    let (b, l) = match density {
        Density::Uniform => (0.0, 0.0),
        tilted => {
            let t = TargetDistribution::new(m.clone(), tilted, resolution)?;
            (t.b(), t.l())
        }
    };
    let mesh = build_mesh(&m, resolution)?;
    let g = summarize(&mesh, &m, b, l)?;
    let inputs = BoundInputs {
        sigma,
        k: g.k_eff,
        dim: g.intrinsic_dim,
        kappa: g.kappa.max(1e-12),
        l: g.l,
        b: g.b,
        diameter: Some(g.diameter_empirical),
    };
    Ok((inputs, g))
}

/// Diameter, uniform and general log-Sobolev reports. A report whose inputs
/// are undefined is returned as an error string instead.
pub fn evaluate(inp: &BoundInputs, policy: DomainPolicy) -> Vec<(String, Result<BoundReport, String>)> {
    let general = GeneralInputs {
        sigma: inp.sigma,
        dim: inp.dim,
        k: inp.k,
        l: inp.l,
        b: inp.b,
        kappa: inp.kappa,
        diameter: inp.diameter,
    };
    vec![
        ("diameter".to_string(), diameter_report(inp.k, inp.dim, inp.kappa, policy).map_err(|e| e.to_string())),
        ("cls_uniform".to_string(), cls_uniform_log(inp.sigma, inp.k, inp.dim, inp.kappa, policy).map_err(|e| e.to_string())),
        ("cls_general".to_string(), cls_general_log(&general, policy).map_err(|e| e.to_string())),
    ]
}

pub fn report_table(reports: &[(String, Result<BoundReport, String>)]) -> Table {
    let mut t = Table::new("bounds", &["name", "log_value", "value", "provenance", "overrides", "error"]);
    for (name, r) in reports {
        match r {
            Ok(r) => {
                let prov: Vec<String> = r.provenance.iter().map(|q| format!("{}={}", q.name, q.value)).collect();
                t.push(vec![
                    name.clone(),
                    num(r.log_value),
                    opt(r.value),
                    prov.join(";"),
                    r.overrides.join(";"),
                    String::new(),
                ]);
            }
            Err(e) => t.push(vec![name.clone(), String::new(), String::new(), String::new(), String::new(), e.replace(',', ";")]),
        }
    }
    t
}

pub fn reports_json(reports: &[(String, Result<BoundReport, String>)]) -> Value {
    Value::Array(
        reports
            .iter()
            .map(|(name, r)| match r {
                Ok(r) => json!({ "name": name, "report": r }),
                Err(e) => json!({ "name": name, "error": e }),
            })
            .collect(),
    )
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = &cfg.bounds;
    let mut out = Outcome::default();
    let inputs = if spec.measured {
        let (inputs, g) = measure(&cfg.target, spec.sigma)?;
        out.documents.push(("geometry".into(), serde_json::to_value(&g).expect("summary serialises")));
        inputs
    } else {
        BoundInputs::from_spec(spec)
    };
    let reports = evaluate(&inputs, spec.policy);
    for (name, r) in &reports {
        let v = match r {
            Ok(r) => json!({ "log_value": r.log_value, "value": r.value, "overrides": r.overrides }),
            Err(e) => json!({ "error": e }),
        };
        out.summary.insert(name.clone(), v);
    }
    out.summary.insert(
        "inputs".into(),
        json!({ "sigma": inputs.sigma, "k": inputs.k, "intrinsic_dim": inputs.dim, "kappa": inputs.kappa, "l": inputs.l, "b": inputs.b, "diameter": inputs.diameter }),
    );
    out.tables.push(report_table(&reports));
    out.documents.push(("bounds".into(), reports_json(&reports)));
    Ok(out)
}
