//! Exponential-decay fits of metric series, mixing time and divergence
//! detection. Series are `(t, w)` pairs with `t` increasing.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Estimator;
use crate::{Error, Result};

/// Default moving-average window for threshold and minimum extraction.
pub const DEFAULT_WINDOW: usize = 3;
/// `w_end / w_min` above which a run is declared divergent.
pub const DIVERGENCE_RATIO: f64 = 1.2;

/// Least-squares fit of `amplitude * exp(-rate * t) + floor`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub floor: f64,
    /// Root-mean-square residual; infinite when the solver did not converge.
    pub residual: f64,
    pub converged: bool,
}

impl DecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-self.rate * t).exp() + self.floor
    }
}

pub fn decay_fit(series: &[(f64, f64)]) -> Result<DecayFit> {
    if series.len() < 4 {
        return Err(Error::Size(format!(
            "decay fit needs at least 4 points, got {}",
            series.len()
        )));
    }
    if let Some(&(t, w)) = series.iter().find(|(t, w)| !(t.is_finite() && w.is_finite() && *w > 0.0)) {
        return Err(Error::param(format!("decay fit needs finite w > 0, got w({t}) = {w}")));
    }

    // Work on rescaled data: t in [0, 1] relative to the span, w relative to max.
    let t0 = series[0].0;
    let t_scale = (series[series.len() - 1].0 - t0).max(f64::MIN_POSITIVE);
    let w_scale = series.iter().map(|s| s.1).fold(0.0, f64::max);
    let ts: Vec<f64> = series.iter().map(|s| (s.0 - t0) / t_scale).collect();
    let ws: Vec<f64> = series.iter().map(|s| s.1 / w_scale).collect();

    let floor0 = ws.iter().copied().fold(f64::INFINITY, f64::min);
    let excess: Vec<(f64, f64)> = ts
        .iter()
        .zip(&ws)
        .filter(|(_, w)| **w - floor0 > 1e-12)
        .map(|(t, w)| (*t, (w - floor0).ln()))
        .collect();

    let unscale = |p: [f64; 3], residual: f64, converged: bool| {
        // amplitude is referenced to t = 0 of the rescaled axis, i.e. t = t0.
        let rate = p[1] / t_scale;
        DecayFit {
            rate,
            amplitude: p[0] * w_scale * (rate * t0).exp(),
            floor: p[2] * w_scale,
            residual: residual * w_scale,
            converged,
        }
    };

    if excess.len() < 2 {
        let mean = ws.iter().sum::<f64>() / ws.len() as f64;
        let rms = rms_residual(&ts, &ws, [0.0, 0.0, mean]);
        return Ok(unscale([0.0, 0.0, mean], rms, true));
    }
    let (slope, intercept) = linear_fit(&excess);
    let init = [intercept.exp(), (-slope).max(0.0), floor0];

    match levenberg_marquardt(&ts, &ws, init) {
        Some(p) => Ok(unscale(p, rms_residual(&ts, &ws, p), true)),
        None => Ok(DecayFit {
            residual: f64::INFINITY,
            converged: false,
            ..unscale(init, 0.0, false)
        }),
    }
}

fn model(p: [f64; 3], t: f64) -> f64 {
    p[0] * (-p[1] * t).exp() + p[2]
}

fn sse(ts: &[f64], ws: &[f64], p: [f64; 3]) -> f64 {
    ts.iter().zip(ws).map(|(t, w)| (model(p, *t) - w).powi(2)).sum()
}

fn rms_residual(ts: &[f64], ws: &[f64], p: [f64; 3]) -> f64 {
    (sse(ts, ws, p) / ts.len() as f64).sqrt()
}

fn project(mut p: [f64; 3]) -> [f64; 3] {
    p[1] = p[1].max(0.0);
    p[2] = p[2].max(0.0);
    p
}

/// Projected Levenberg–Marquardt on `(amplitude, rate, floor)` with
/// `rate, floor >= 0`. Returns `None` if the iteration budget runs out.
fn levenberg_marquardt(ts: &[f64], ws: &[f64], init: [f64; 3]) -> Option<[f64; 3]> {
    let mut p = project(init);
    let mut cost = sse(ts, ws, p);
    let mut lambda = 1e-3;
    for _ in 0..2000 {
        if cost < 1e-30 {
            return Some(p);
        }
        let mut jtj = nalgebra::Matrix3::<f64>::zeros();
        let mut jtr = nalgebra::Vector3::<f64>::zeros();
        for (t, w) in ts.iter().zip(ws) {
            let e = (-p[1] * t).exp();
            let grad = nalgebra::Vector3::new(e, -p[0] * t * e, 1.0);
            let r = model(p, *t) - w;
            jtj += grad * grad.transpose();
            jtr += grad * r;
        }
        let mut improved = false;
        while lambda < 1e20 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * (jtj[(k, k)] + 1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 4.0;
                continue;
            };
            let cand = project([p[0] + step[0], p[1] + step[1], p[2] + step[2]]);
            let cand_cost = sse(ts, ws, cand);
            if cand_cost < cost {
                let rel = (cost - cand_cost) / cost.max(1e-300);
                let moved = (0..3).map(|k| (cand[k] - p[k]).abs()).fold(0.0, f64::max);
                p = cand;
                cost = cand_cost;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-15 || moved < 1e-14 {
                    return Some(p);
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // No descent direction left at any damping: stationary point.
            return Some(p);
        }
    }
    None
}

fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Centered moving average; the window shrinks at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// First `t` whose smoothed value is at or below `threshold`.
pub fn mixing_time(series: &[(f64, f64)], threshold: f64) -> Result<Option<f64>> {
    mixing_time_with_window(series, threshold, DEFAULT_WINDOW)
}

pub fn mixing_time_with_window(
    series: &[(f64, f64)],
    threshold: f64,
    window: usize,
) -> Result<Option<f64>> {
    if !(threshold > 0.0) {
        return Err(Error::param(format!("mixing threshold must be positive, got {threshold}")));
    }
    let values: Vec<f64> = series.iter().map(|s| s.1).collect();
    let smooth = moving_average(&values, window);
    Ok(series
        .iter()
        .zip(&smooth)
        .find(|(_, m)| **m <= threshold)
        .map(|(s, _)| s.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    /// Time of the smoothed minimum.
    pub t_star: f64,
    /// Smoothed final value over smoothed minimum.
    pub degradation: f64,
    pub diverged: bool,
}

pub fn divergence_detect(series: &[(f64, f64)]) -> Result<Divergence> {
    divergence_detect_with_window(series, DEFAULT_WINDOW)
}

pub fn divergence_detect_with_window(series: &[(f64, f64)], window: usize) -> Result<Divergence> {
    if series.len() < 3 {
        return Err(Error::Size(format!(
            "divergence detection needs at least 3 points, got {}",
            series.len()
        )));
    }
    let values: Vec<f64> = series.iter().map(|s| s.1).collect();
    let smooth = moving_average(&values, window);
    let (idx, min) = smooth
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if *v < best.1 { (i, *v) } else { best });
    let end = smooth[smooth.len() - 1];
    let degradation = if min > 0.0 { end / min } else if end > 0.0 { f64::INFINITY } else { 1.0 };
    Ok(Divergence {
        t_star: series[idx].0,
        degradation,
        diverged: degradation > DIVERGENCE_RATIO,
    })
}

/// A labelled metric series, the unit of CSV export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub estimator: Estimator,
    pub floor: f64,
    pub seed: u64,
    pub points: Vec<(f64, f64)>,
}

impl MetricSeries {
    pub fn write_csv_header<W: Write>(mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,estimator,value,floor,seed")
    }

    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (t, v) in &self.points {
            writeln!(w, "{t},{},{v},{},{}", self.estimator, self.floor, self.seed)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let s: Vec<(f64, f64)> = (0..=10).map(|t| (t as f64, 3.0 * (-0.5 * t as f64).exp())).collect();
        let fit = decay_fit(&s).unwrap();
        assert!((fit.rate - 0.5).abs() < 1e-6, "{fit:?}");
        assert!(fit.floor.abs() < 1e-6);
        assert!(fit.residual < 1e-8);
    }

    #[test]
    fn constant_series() {
        let s: Vec<(f64, f64)> = (0..8).map(|t| (t as f64, 2.0)).collect();
        let fit = decay_fit(&s).unwrap();
        assert_eq!(fit.rate, 0.0);
        assert!((fit.floor - 2.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_own_model_with_floor() {
        let truth = DecayFit { rate: 0.3, amplitude: 1.5, floor: 0.2, residual: 0.0, converged: true };
        let s: Vec<(f64, f64)> = (0..40).map(|i| {
            let t = i as f64 * 0.5;
            (t, truth.eval(t))
        }).collect();
        let fit = decay_fit(&s).unwrap();
        assert!((fit.rate - 0.3).abs() < 0.003, "{fit:?}");
        assert!((fit.amplitude - 1.5).abs() < 0.015);
        assert!((fit.floor - 0.2).abs() < 0.002);
    }

    #[test]
    fn offset_time_axis() {
        let s: Vec<(f64, f64)> = (0..20).map(|i| {
            let t = 100.0 + i as f64;
            (t, 2.0 * (-0.1 * t).exp() + 0.05)
        }).collect();
        let fit = decay_fit(&s).unwrap();
        assert!((fit.rate - 0.1).abs() < 1e-5, "{fit:?}");
        assert!((fit.amplitude - 2.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_series() {
        assert!(decay_fit(&[(0.0, 1.0), (1.0, 0.5), (2.0, 0.25)]).is_err());
        assert!(decay_fit(&[(0.0, 1.0), (1.0, 0.5), (2.0, 0.0), (3.0, 0.1)]).is_err());
    }

    #[test]
    fn mixing_crossing() {
        let s: Vec<(f64, f64)> = (0..=12).map(|t| (t as f64, 10.0 - t as f64)).collect();
        assert_eq!(mixing_time(&s, 3.0).unwrap(), Some(7.0));
        assert_eq!(mixing_time(&s, -1.0).ok(), None);
        let high: Vec<(f64, f64)> = (0..5).map(|t| (t as f64, 5.0)).collect();
        assert_eq!(mixing_time(&high, 1.0).unwrap(), None);
    }

    #[test]
    fn divergence_shapes() {
        let down: Vec<(f64, f64)> = (0..10).map(|t| (t as f64, 10.0 / (1.0 + t as f64))).collect();
        let d = divergence_detect(&down).unwrap();
        assert!(!d.diverged);
        assert!(d.degradation <= 1.0);

        let v: Vec<(f64, f64)> = (0..21)
            .map(|t| (t as f64, 1.0 + (t as f64 - 10.0).abs() * 0.05))
            .collect();
        let d = divergence_detect(&v).unwrap();
        assert_eq!(d.t_star, 10.0);
        assert!(d.diverged);
        assert!(divergence_detect(&v[..2]).is_err());
    }
}
