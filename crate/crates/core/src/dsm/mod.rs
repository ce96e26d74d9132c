//! Denoising score matching: the empirical and population losses, a
//! closed-form ridge score model, the measured score error, and controlled
//! perturbations of an exact oracle.

mod model;
mod perturb;

use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, domain, StreamKey};
use crate::target::{check_sigma, ScoreField, SmoothedOracle};
use crate::{Error, PointCloud, Result};

pub use model::{fit_score_model, FeatureConfig, Features, ScoreModel, MODEL_FORMAT};
pub use perturb::{perturb_oracle, PerturbedOracle, FIELD_CENTERS, NORMALISATION_SAMPLES};

/// `(1/n) sum_i |s(x_i + sigma xi_i) + xi_i / sigma|^2` with `xi_i` drawn
/// from `seed`.
pub fn dsm_empirical_loss<S: ScoreField + ?Sized>(s: &S, data: &PointCloud, sigma: f64, seed: u64) -> Result<f64> {
    let d = data.dim();
    let noise: Vec<f64> = (0..data.len()).flat_map(|i| model::dsm_noise(seed, i, d)).collect();
    dsm_loss_with_noise(s, data, sigma, &noise)
}

/// The empirical DSM loss for explicit noise (row-major, one row per point).
pub fn dsm_loss_with_noise<S: ScoreField + ?Sized>(s: &S, data: &PointCloud, sigma: f64, noise: &[f64]) -> Result<f64> {
    check_sigma(sigma)?;
    if data.is_empty() {
        return Err(Error::Size("DSM loss of empty data".into()));
    }
    let d = data.dim();
    Error::check_dim(s.dim(), d)?;
    if noise.len() != data.len() * d {
        return Err(Error::Size(format!("{} noise values for {} points", noise.len(), data.len())));
    }
    let mut y = vec![0.0; d];
    let mut out = vec![0.0; d];
    let mut total = 0.0;
    for (x, xi) in data.points().zip(noise.chunks_exact(d)) {
        for ((yk, xk), zk) in y.iter_mut().zip(x).zip(xi) {
            *yk = xk + sigma * zk;
        }
        s.score_into(&y, sigma, &mut out)?;
        total += out.iter().zip(xi).map(|(a, z)| (a + z / sigma).powi(2)).sum::<f64>();
    }
    Ok(total / data.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationLoss {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of `E_{Y ~ p_sigma} |s(Y) - grad log p_sigma(Y)|^2`.
pub fn dsm_population_loss<S, O>(s: &S, o: &O, sigma: f64, probes: usize, seed: u64) -> Result<PopulationLoss>
where
    S: ScoreField + ?Sized,
    O: SmoothedOracle + ?Sized,
{
    check_sigma(sigma)?;
    if probes == 0 {
        return Err(Error::param("need at least one probe"));
    }
    let d = o.dim();
    Error::check_dim(d, s.dim())?;
    let s_seed = derive_seed(seed, 0x5c0e);
    let prior = o.sample_prior(probes, s_seed)?;
    let key = StreamKey::new(s_seed, domain::PROBES);
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    let mut values = Vec::with_capacity(probes);
    for (i, x) in prior.points().enumerate() {
        let z = key.normals(i as u64, 0, d);
        let y: Vec<f64> = x.iter().zip(z).map(|(p, q)| p + sigma * q).collect();
        s.score_into(&y, sigma, &mut a)?;
        o.score_into(&y, sigma, &mut b)?;
        values.push(a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>());
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(PopulationLoss { mean, std_error: (var / n).sqrt() })
}

/// `eps = sqrt(E |s - grad log p_sigma|^2)`.
pub fn score_error<S, O>(s: &S, o: &O, sigma: f64, probes: usize, seed: u64) -> Result<f64>
where
    S: ScoreField + ?Sized,
    O: SmoothedOracle + ?Sized,
{
    Ok(dsm_population_loss(s, o, sigma, probes, seed)?.mean.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::FnScore;

    #[test]
    fn single_point_loss() {
        let data = PointCloud::from_rows(&[[0.0, 0.0]]).unwrap();
        let zero = FnScore::new(2, |_: &[f64], _: f64, out: &mut [f64]| out.fill(0.0));
        assert_eq!(dsm_loss_with_noise(&zero, &data, 1.0, &[1.0, 0.0]).unwrap(), 1.0);
        assert!(dsm_loss_with_noise(&zero, &PointCloud::empty(2), 1.0, &[]).is_err());
        assert!(dsm_loss_with_noise(&zero, &data, 0.0, &[1.0, 0.0]).is_err());
    }
}
