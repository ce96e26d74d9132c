use nalgebra::DMatrix;

use crate::rng::{derive_seed, domain, StreamKey};
use crate::target::{ScoreField, SmoothedOracle};
use crate::{Error, PointCloud, Result};

/// Number of RBF bumps in the perturbation field.
pub const FIELD_CENTERS: usize = 16;
/// Monte Carlo sample size for the RMS normalisation.
pub const NORMALISATION_SAMPLES: usize = 4096;

/// Exact oracle plus a fixed smooth error field: `s(x) = score(x) + eps u(x)`
/// with `E_{p_sigma}|u|^2 = 1` at the normalisation level.
#[derive(Clone, Debug)]
pub struct PerturbedOracle<O> {
    base: O,
    eps: f64,
    centers: Vec<f64>,
    amplitudes: Vec<f64>,
    bandwidth: f64,
    scale: f64,
}

/// Builds the perturbation from `seed`: 16 centres drawn from `p_sigma_norm`,
/// standard normal amplitude vectors, bandwidth the median centre distance,
/// and RMS normalised under `p_sigma_norm` by Monte Carlo.
pub fn perturb_oracle<O: SmoothedOracle>(base: O, eps: f64, sigma_norm: f64, seed: u64) -> Result<PerturbedOracle<O>> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::param(format!("perturbation size must be >= 0, got {eps}")));
    }
    crate::target::check_sigma(sigma_norm)?;
    let d = base.dim();
    let smoothed = |n: usize, label: u64| -> Result<PointCloud> {
        let s = derive_seed(seed, label);
        let prior = base.sample_prior(n, s)?;
        let key = StreamKey::new(s, domain::FIELD);
        let data: Vec<f64> = prior
            .points()
            .enumerate()
            .flat_map(|(i, p)| {
                let z = key.normals(i as u64, 0, d);
                p.iter().zip(z).map(|(a, b)| a + sigma_norm * b).collect::<Vec<_>>()
            })
            .collect();
        PointCloud::new(d, data)
    };
    let centers = smoothed(FIELD_CENTERS, 1)?.into_vec();
    let amplitudes = StreamKey::new(seed, domain::FIELD).normals(u64::MAX, 0, FIELD_CENTERS * d);
    let mut pairs = Vec::new();
    for i in 0..FIELD_CENTERS {
        for j in i + 1..FIELD_CENTERS {
            let a = &centers[i * d..(i + 1) * d];
            let b = &centers[j * d..(j + 1) * d];
            pairs.push(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    pairs.sort_by(f64::total_cmp);
    let bandwidth = pairs[pairs.len() / 2].max(sigma_norm);
    let probes = smoothed(NORMALISATION_SAMPLES, 2)?;
    let mut field = PerturbedOracle { base, eps, centers, amplitudes, bandwidth, scale: 1.0 };
    let mut u = vec![0.0; d];
    let mut total = 0.0;
    for p in probes.points() {
        field.raw_field(p, &mut u);
        total += u.iter().map(|v| v * v).sum::<f64>();
    }
    let rms = (total / NORMALISATION_SAMPLES as f64).sqrt();
    if !(rms > 0.0 && rms.is_finite()) {
        return Err(Error::Numerical("perturbation field vanishes under p_sigma".into()));
    }
    field.scale = 1.0 / rms;
    Ok(field)
}

impl<O: SmoothedOracle> PerturbedOracle<O> {
    fn raw_field(&self, x: &[f64], out: &mut [f64]) {
        let d = out.len();
        out.fill(0.0);
        let inv = 0.5 / (self.bandwidth * self.bandwidth);
        for (c, a) in self.centers.chunks_exact(d).zip(self.amplitudes.chunks_exact(d)) {
            let d2: f64 = x.iter().zip(c).map(|(u, v)| (u - v) * (u - v)).sum();
            let w = (-d2 * inv).exp();
            for (o, ak) in out.iter_mut().zip(a) {
                *o += w * ak;
            }
        }
    }

    /// The unit-RMS error direction `u(x)`.
    pub fn field(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.raw_field(x, &mut out);
        out.iter_mut().for_each(|v| *v *= self.scale);
        out
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn base(&self) -> &O {
        &self.base
    }
}

impl<O: SmoothedOracle> ScoreField for PerturbedOracle<O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn score_into(&self, x: &[f64], sigma: f64, out: &mut [f64]) -> Result<()> {
        self.base.score_into(x, sigma, out)?;
        if self.eps == 0.0 {
            return Ok(());
        }
        let u = self.field(x);
        for (o, v) in out.iter_mut().zip(u) {
            *o += self.eps * v;
        }
        Ok(())
    }
}

/// Density, Hessian and prior come from the base oracle; only the score is
/// perturbed.
impl<O: SmoothedOracle> SmoothedOracle for PerturbedOracle<O> {
    fn log_density(&self, x: &[f64], sigma: f64) -> Result<f64> {
        self.base.log_density(x, sigma)
    }

    fn hessian(&self, x: &[f64], sigma: f64) -> Result<DMatrix<f64>> {
        self.base.hessian(x, sigma)
    }

    fn radius(&self) -> f64 {
        self.base.radius()
    }

    fn sample_prior(&self, n: usize, seed: u64) -> Result<PointCloud> {
        self.base.sample_prior(n, seed)
    }
}
