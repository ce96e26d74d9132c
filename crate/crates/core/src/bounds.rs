//! Closed-form bounds on log-Sobolev constants, diameters, spectral gaps and
//! the sampling error of annealed Langevin.
//!
//! The log-Sobolev bounds grow like `exp(D^2)` and overflow `f64` for modest
//! inputs, so they are evaluated in natural-log space. None of them take the
//! ambient dimension: they depend only on intrinsic geometry (`d'`, `K`,
//! `kappa`, `D`) and on the target's `L` and `B`.
//!
//! Each evaluator enforces the regime its formula is stated for. Passing
//! [`DomainPolicy::Override`] evaluates outside that regime anyway and
//! records the crossing in the report.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::target::SmoothedOracle;
use crate::{Error, Result};

/// Largest log value whose exponential is still reported as a float.
pub const REPRESENTABLE_LOG: f64 = 700.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainPolicy {
    #[default]
    Enforce,
    Override,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    pub value: f64,
}

fn q(name: &str, value: f64) -> Quantity {
    Quantity { name: name.to_string(), value }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub inputs: Vec<Quantity>,
    pub log_value: f64,
    /// `exp(log_value)` when `log_value < 700`.
    pub value: Option<f64>,
    pub provenance: Vec<Quantity>,
    /// Regime assumptions that were knowingly crossed.
    pub overrides: Vec<String>,
}

impl BoundReport {
    fn new(name: &str, inputs: Vec<Quantity>, log_value: f64, provenance: Vec<Quantity>, overrides: Vec<String>) -> Self {
        let value = (log_value < REPRESENTABLE_LOG).then(|| log_value.exp());
        BoundReport { name: name.to_string(), inputs, log_value, value, provenance, overrides }
    }

    pub fn intermediate(&self, name: &str) -> Option<f64> {
        self.provenance.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

struct Regime {
    policy: DomainPolicy,
    crossed: Vec<String>,
}

impl Regime {
    fn new(policy: DomainPolicy) -> Self {
        Regime { policy, crossed: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: &str) -> Result<()> {
        if ok {
            return Ok(());
        }
        match self.policy {
            DomainPolicy::Enforce => Err(Error::param(format!("outside the stated regime: {what}"))),
            DomainPolicy::Override => {
                self.crossed.push(what.to_string());
                Ok(())
            }
        }
    }
}

/// `ln(e^a + e^b)`.
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-Sobolev constant of `N(0, sigma^2 I)`.
pub fn cls_gaussian(sigma: f64) -> f64 {
    2.0 * sigma * sigma
}

/// Upper bound on the log-Sobolev constant of `p * N(0, sigma^2 I)` when `p`
/// has constant `c`.
pub fn cls_convolved(c: f64, sigma: f64) -> f64 {
    cls_gaussian(sigma) + c
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Constants {
    pub lipschitz: f64,
    pub m: f64,
    pub b: f64,
}

/// Lipschitz and `(m, b)`-dissipativity constants of the smoothed score
/// for a target supported in the ball of radius `rho`.
pub fn prop1_constants(rho: f64, sigma: f64) -> Result<Prop1Constants> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    if !(rho >= 0.0) {
        return Err(Error::param(format!("rho must be nonnegative, got {rho}")));
    }
    let s2 = sigma * sigma;
    Ok(Prop1Constants {
        lipschitz: (rho * rho).max(s2) / (s2 * s2),
        m: 1.0 / (2.0 * s2),
        b: rho * rho / (2.0 * s2),
    })
}

fn diameter_core(k: f64, dim: usize, kappa: f64) -> f64 {
    let s = (k * (dim as f64 - 1.0)).sqrt();
    let formula = 8.0 * s * (5.0 + (1024.0 * kappa / s).ln());
    formula.max(2.0 * PI)
}

/// Diameter bound from a Ricci lower bound `-K` and the Kato constant.
pub fn diameter_bound(k: f64, dim: usize, kappa: f64) -> Result<f64> {
    let r = diameter_report(k, dim, kappa, DomainPolicy::Enforce)?;
    Ok(r.intermediate("D").expect("diameter report records D"))
}

pub fn diameter_report(k: f64, dim: usize, kappa: f64, policy: DomainPolicy) -> Result<BoundReport> {
    if !(k > 0.0 && kappa > 0.0 && dim >= 2) {
        return Err(Error::param(format!("diameter bound needs K > 0, kappa > 0, d' >= 2 (got {k}, {kappa}, {dim})")));
    }
    let mut regime = Regime::new(policy);
    regime.require(k > 1.0, "K > 1")?;
    let d = diameter_core(k, dim, kappa);
    Ok(BoundReport::new(
        "diameter",
        vec![q("K", k), q("d'", dim as f64), q("kappa", kappa)],
        d.ln(),
        vec![q("D", d), q("clamped", if d == 2.0 * PI { 1.0 } else { 0.0 })],
        regime.crossed,
    ))
}

/// `ln(1/lambda*)` bound for diameter `D` and Ricci lower bound `-K`.
pub fn spectral_gap_bound(k: f64, dim: usize, diameter: f64) -> Result<f64> {
    if !(diameter >= 0.0 && k >= 0.0 && dim >= 2) {
        return Err(Error::param(format!("spectral gap bound needs D >= 0, K >= 0, d' >= 2 (got {diameter}, {k}, {dim})")));
    }
    if diameter == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((diameter * diameter / (PI * PI)).ln() + 0.5 * diameter * (k * (dim as f64 - 1.0)).sqrt())
}

/// Inputs for a density `e^{-V}` on a manifold with Ricci curvature
/// `>= -K`, `|Hess V| <= L` and `|grad V| <= B`. The diameter is taken from
/// [`diameter_bound`] unless given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralInputs {
    pub sigma: f64,
    pub dim: usize,
    pub k: f64,
    pub l: f64,
    pub b: f64,
    pub kappa: f64,
    #[serde(default)]
    pub diameter: Option<f64>,
}

/// Log-Sobolev bound for [`GeneralInputs`], smoothed at `sigma`.
pub fn cls_general_log(inputs: &GeneralInputs, policy: DomainPolicy) -> Result<BoundReport> {
    let GeneralInputs { sigma, dim, k, l, b, kappa, diameter } = *inputs;
    if dim < 1 || !(sigma >= 0.0) || !(l >= 0.0) || !(b >= 0.0) {
        return Err(Error::param("general bound needs d' >= 1 and nonnegative sigma, L, B"));
    }
    let mut regime = Regime::new(policy);
    regime.require(k > 1.0 / dim as f64, "K > 1/d'")?;
    let d = match diameter {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(Error::param(format!("diameter override must be positive, got {d}"))),
        None => {
            let r = diameter_report(k, dim, kappa, policy)?;
            regime.crossed.extend(r.overrides.iter().cloned());
            r.intermediate("D").expect("diameter report records D")
        }
    };
    let n = dim as f64 + 1.0;
    let exponent = 4.0 + n * d * d * (2.0 * k + 2.0 * l + b * b);
    let main = (2.0 * n * d * d).ln() + exponent;
    let log_value = log_add(main, (2.0 * sigma * sigma).ln());
    Ok(BoundReport::new(
        "cls_general",
        vec![q("sigma", sigma), q("d'", dim as f64), q("K", k), q("L", l), q("B", b), q("kappa", kappa)],
        log_value,
        vec![q("D", d), q("K'", k + l), q("R", k + l + b * b), q("log_cls_unsmoothed", main)],
        regime.crossed,
    ))
}

/// Log-Sobolev bound for the uniform distribution on a manifold with Ricci
/// curvature `>= -K` and Kato constant `kappa`, smoothed at `sigma`.
pub fn cls_uniform_log(sigma: f64, k: f64, dim: usize, kappa: f64, policy: DomainPolicy) -> Result<BoundReport> {
    if !(sigma >= 0.0) {
        return Err(Error::param(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mut regime = Regime::new(policy);
    regime.require(k > 1.0, "K > 1")?;
    regime.require(kappa > 1.0, "kappa > 1")?;
    let d = diameter_report(k, dim, kappa, policy)?.intermediate("D").expect("diameter report records D");
    let log_inv_gap = spectral_gap_bound(k, dim, d)?;
    let ln8 = 8f64.ln();
    let curved = ln8 + log_inv_gap + ((k * k + 1.0) * d * d).ln_1p();
    let flat = log_add(ln8 + log_inv_gap, 0.0);
    let main = curved.max(flat);
    let log_value = log_add(main, (2.0 * sigma * sigma).ln());
    Ok(BoundReport::new(
        "cls_uniform",
        vec![q("sigma", sigma), q("K", k), q("d'", dim as f64), q("kappa", kappa)],
        log_value,
        vec![
            q("D", d),
            q("log_inv_gap", log_inv_gap),
            q("log_curved_branch", curved),
            q("log_flat_branch", flat),
            q("log_cls_unsmoothed", main),
        ],
        regime.crossed,
    ))
}

/// `w0 exp(-2t / c)`.
pub fn w2_decay_bound(w0: f64, c_ls: f64, t: f64) -> Result<f64> {
    if !(c_ls > 0.0) {
        return Err(Error::param(format!("log-Sobolev constant must be positive, got {c_ls}")));
    }
    Ok(w0 * (-2.0 * t / c_ls).exp())
}

fn default_c() -> f64 {
    1.0
}

/// Inputs of the sampling-error bound. `c` is an unspecified absolute
/// constant; it defaults to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thm1Inputs {
    pub sigma: f64,
    pub d: usize,
    pub w0: f64,
    pub t: f64,
    pub c_ls: f64,
    pub eps: f64,
    pub b: f64,
    pub l: f64,
    pub p_inf: f64,
    #[serde(default = "default_c")]
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thm1Terms {
    pub smoothing: f64,
    pub mixing: f64,
    pub score: f64,
    pub total: f64,
}

/// The three terms of the sampling-error bound at time `t`.
pub fn thm1_terms(inp: &Thm1Inputs, policy: DomainPolicy) -> Result<(Thm1Terms, Vec<String>)> {
    let mut regime = Regime::new(policy);
    regime.require(inp.d >= 3, "d >= 3")?;
    if inp.d == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    if !(inp.sigma >= 0.0 && inp.w0 >= 0.0 && inp.t >= 0.0 && inp.eps >= 0.0 && inp.b >= 0.0 && inp.p_inf > 0.0 && inp.c >= 0.0) {
        return Err(Error::param("bound inputs must be nonnegative, with p_inf > 0"));
    }
    let d = inp.d as f64;
    let smoothing = inp.sigma * d.sqrt();
    let mixing = w2_decay_bound(inp.w0, inp.c_ls, inp.t)?;
    let score = if inp.eps == 0.0 || inp.t == 0.0 || inp.c == 0.0 {
        0.0
    } else {
        // ln(eps t + p^(1/2 - 1/d) e^(L sqrt(d) t / 4) sqrt(t) eps^(1/d))
        let drift = (inp.eps * inp.t).ln();
        let growth = (0.5 - 1.0 / d) * inp.p_inf.ln() + 0.25 * inp.l * d.sqrt() * inp.t + 0.5 * inp.t.ln() + inp.eps.ln() / d;
        let inner = log_add(drift, growth);
        (inp.c.ln() + 0.5 * ((inp.b + d) * inp.t).ln() + 0.25 * inner).exp()
    };
    Ok((Thm1Terms { smoothing, mixing, score, total: smoothing + mixing + score }, regime.crossed))
}

pub fn thm1_bound(inp: &Thm1Inputs) -> Result<f64> {
    Ok(thm1_terms(inp, DomainPolicy::Enforce)?.0.total)
}

pub fn thm1_report(inp: &Thm1Inputs, policy: DomainPolicy) -> Result<BoundReport> {
    let (terms, crossed) = thm1_terms(inp, policy)?;
    Ok(BoundReport::new(
        "thm1",
        vec![
            q("sigma", inp.sigma),
            q("d", inp.d as f64),
            q("w0", inp.w0),
            q("t", inp.t),
            q("c_ls", inp.c_ls),
            q("eps", inp.eps),
            q("b", inp.b),
            q("L", inp.l),
            q("p_inf", inp.p_inf),
            q("C", inp.c),
        ],
        terms.total.ln(),
        vec![q("smoothing", terms.smoothing), q("mixing", terms.mixing), q("score", terms.score)],
        crossed,
    ))
}

/// Grid minimiser of the bound over `t`: `(t, value)` with the earliest `t`
/// on ties.
pub fn thm1_argmin(inp: &Thm1Inputs, grid: &[f64]) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &t in grid {
        let v = thm1_bound(&Thm1Inputs { t, ..*inp })?;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((t, v));
        }
    }
    best.ok_or_else(|| Error::param("empty time grid"))
}

/// Largest smoothed density seen at `probes` points near the support. This
/// is a lower bound on the supremum.
pub fn sup_density_estimate<O: SmoothedOracle + ?Sized>(oracle: &O, sigma: f64, probes: usize, seed: u64) -> Result<f64> {
    let prior = oracle.sample_prior(probes, seed)?;
    let mut best = f64::NEG_INFINITY;
    for p in prior.points() {
        best = best.max(oracle.log_density(p, sigma)?);
    }
    Ok(best.exp())
}
