use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{domain, seeded, StreamKey};
use crate::target::{check_sigma, ScoreField};
use crate::{Error, PointCloud, Result};

pub const MODEL_FORMAT: &str = "langevin-score-model/1";

/// Requested feature map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    /// Number of RBF centres drawn from the data.
    #[serde(default)]
    pub centers: usize,
    /// RBF length scale; the median pairwise centre distance when absent.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "yes")]
    pub linear: bool,
    #[serde(default = "yes")]
    pub constant: bool,
}

fn yes() -> bool {
    true
}

impl FeatureConfig {
    pub fn linear_only() -> Self {
        FeatureConfig { centers: 0, bandwidth: None, linear: true, constant: false }
    }

    pub fn affine() -> Self {
        FeatureConfig { centers: 0, bandwidth: None, linear: true, constant: true }
    }

    pub fn rbf(centers: usize) -> Self {
        FeatureConfig { centers, bandwidth: None, linear: true, constant: true }
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self::rbf(32)
    }
}

/// `phi(y) = [exp(-|y - c_k|^2 / 2h^2)]_k ++ y ++ [1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub dim: usize,
    /// Row-major centres, `dim` columns.
    pub centers: Vec<f64>,
    pub bandwidth: f64,
    pub linear: bool,
    pub constant: bool,
}

impl Features {
    pub fn len(&self) -> usize {
        self.centers.len() / self.dim.max(1)
            + if self.linear { self.dim } else { 0 }
            + usize::from(self.constant)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        let inv = 0.5 / (self.bandwidth * self.bandwidth);
        let mut k = 0;
        for c in self.centers.chunks_exact(self.dim) {
            let d2: f64 = y.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            out[k] = (-d2 * inv).exp();
            k += 1;
        }
        if self.linear {
            out[k..k + self.dim].copy_from_slice(y);
            k += self.dim;
        }
        if self.constant {
            out[k] = 1.0;
        }
    }

    pub fn from_config(config: &FeatureConfig, data: &PointCloud, seed: u64) -> Result<Self> {
        let d = data.dim();
        let n = data.len();
        if n == 0 {
            return Err(Error::Size("cannot draw feature centres from empty data".into()));
        }
        let mut rng = seeded(seed, domain::FEATURES);
        // Uniform subsample; with replacement only when more centres than points.
        let picks: Vec<usize> = if config.centers <= n {
            index::sample(&mut rng, n, config.centers).into_vec()
        } else {
            (0..config.centers).map(|_| rng.random_range(0..n)).collect()
        };
        let centers: Vec<f64> = picks.iter().flat_map(|i| data.point(*i).iter().copied()).collect();
        let bandwidth = match config.bandwidth {
            Some(h) if h > 0.0 && h.is_finite() => h,
            Some(h) => return Err(Error::param(format!("RBF bandwidth must be positive, got {h}"))),
            None => median_pairwise(&centers, d).filter(|h| *h > 0.0).unwrap_or(1.0),
        };
        let f = Features { dim: d, centers, bandwidth, linear: config.linear, constant: config.constant };
        if f.is_empty() {
            return Err(Error::param("feature map is empty"));
        }
        Ok(f)
    }
}

fn median_pairwise(points: &[f64], d: usize) -> Option<f64> {
    let m = points.len() / d;
    let mut dists = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            let a = &points[i * d..(i + 1) * d];
            let b = &points[j * d..(j + 1) * d];
            dists.push(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    if dists.is_empty() {
        return None;
    }
    let mid = dists.len() / 2;
    let (_, v, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    Some(*v)
}

/// Noise-conditional linear-in-features score model: one `d x F`
/// coefficient block per noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    pub format: String,
    pub schedule: Vec<f64>,
    pub features: Features,
    pub ridge: f64,
    /// Row-major `d x F` blocks, one per schedule entry.
    pub coefficients: Vec<Vec<f64>>,
}

impl ScoreModel {
    fn level(&self, sigma: f64) -> Result<usize> {
        self.schedule
            .iter()
            .position(|s| (s - sigma).abs() <= 1e-12 * s.abs())
            .ok_or_else(|| Error::param(format!("sigma {sigma} is not one of the model's noise levels")))
    }

    pub fn coefficient_matrix(&self, sigma: f64) -> Result<DMatrix<f64>> {
        let l = self.level(sigma)?;
        Ok(DMatrix::from_row_slice(self.features.dim, self.features.len(), &self.coefficients[l]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ScoreModel = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Config(format!("unknown score model format {:?}", model.format)));
        }
        let size = model.features.dim * model.features.len();
        if model.coefficients.len() != model.schedule.len() || model.coefficients.iter().any(|c| c.len() != size) {
            return Err(Error::Config("coefficient blocks do not match schedule and features".into()));
        }
        Ok(model)
    }
}

impl ScoreField for ScoreModel {
    fn dim(&self) -> usize {
        self.features.dim
    }

    fn score_into(&self, x: &[f64], sigma: f64, out: &mut [f64]) -> Result<()> {
        Error::check_dim(self.dim(), x.len())?;
        Error::check_dim(self.dim(), out.len())?;
        let w = &self.coefficients[self.level(sigma)?];
        let f = self.features.len();
        let mut phi = vec![0.0; f];
        self.features.eval_into(x, &mut phi);
        for (o, row) in out.iter_mut().zip(w.chunks_exact(f)) {
            *o = row.iter().zip(&phi).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }
}

/// Standard-normal DSM noise for data point `i`; shared by the empirical loss
/// and the fit so the fit minimises exactly that loss.
pub(crate) fn dsm_noise(seed: u64, i: usize, d: usize) -> Vec<f64> {
    StreamKey::new(seed, domain::DSM_NOISE).normals(i as u64, 0, d)
}

/// Closed-form ridge minimiser, per noise level, of
/// `(1/n) sum_i |W phi(x_i + sigma xi_i) + xi_i / sigma|^2 + ridge |W|^2`.
pub fn fit_score_model(
    data: &PointCloud,
    schedule: &[f64],
    features: &FeatureConfig,
    ridge: f64,
    seed: u64,
) -> Result<ScoreModel> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Size("cannot fit a score model to empty data".into()));
    }
    if schedule.is_empty() {
        return Err(Error::param("schedule is empty"));
    }
    for s in schedule {
        check_sigma(*s)?;
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::param(format!("ridge must be >= 0, got {ridge}")));
    }
    let feats = Features::from_config(features, data, seed)?;
    let d = data.dim();
    let f = feats.len();
    let noise: Vec<f64> = (0..n).flat_map(|i| dsm_noise(seed, i, d)).collect();

    let coefficients = schedule
        .par_iter()
        .map(|&sigma| {
            let mut gram = DMatrix::<f64>::zeros(f, f);
            let mut cross = DMatrix::<f64>::zeros(f, d);
            let mut phi = vec![0.0; f];
            let mut y = vec![0.0; d];
            for i in 0..n {
                let xi = &noise[i * d..(i + 1) * d];
                for ((yk, xk), zk) in y.iter_mut().zip(data.point(i)).zip(xi) {
                    *yk = xk + sigma * zk;
                }
                feats.eval_into(&y, &mut phi);
                let p = DVector::from_column_slice(&phi);
                gram.ger(1.0, &p, &p, 1.0);
                for a in 0..f {
                    for (k, z) in xi.iter().enumerate() {
                        cross[(a, k)] -= phi[a] * z / sigma;
                    }
                }
            }
            solve_ridge(gram, cross, n as f64 * ridge, sigma)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ScoreModel {
        format: MODEL_FORMAT.to_string(),
        schedule: schedule.to_vec(),
        features: feats,
        ridge,
        coefficients,
    })
}

/// Solves `(G + lambda I) W^T = C` and returns `W` row-major.
fn solve_ridge(mut gram: DMatrix<f64>, cross: DMatrix<f64>, lambda: f64, sigma: f64) -> Result<Vec<f64>> {
    let f = gram.nrows();
    if lambda == 0.0 {
        let eig = gram.clone().symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 1e-12 * hi) {
            return Err(Error::Singular(format!(
                "feature Gram matrix at sigma = {sigma} is singular (eigenvalues {lo:.3e} .. {hi:.3e}); use ridge > 0"
            )));
        }
    }
    for a in 0..f {
        gram[(a, a)] += lambda;
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Singular(format!("regularised Gram matrix at sigma = {sigma} is not positive definite"))
    })?;
    let wt = chol.solve(&cross);
    let w = wt.transpose();
    Ok((0..w.nrows()).flat_map(|r| w.row(r).iter().copied().collect::<Vec<_>>()).collect())
}
