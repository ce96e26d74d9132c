use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An ensemble of points in `R^dim`, stored row-major, with optional
/// probability weights (uniform when absent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("point cloud dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::Size(format!(
                "{} coordinates do not split into points of dimension {dim}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite coordinate in point {}",
                bad / dim
            )));
        }
        Ok(PointCloud { dim, data, weights: None })
    }

    pub fn empty(dim: usize) -> Self {
        PointCloud { dim, data: Vec::new(), weights: None }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            Error::check_dim(dim, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        PointCloud::new(dim, data)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::Size(format!(
                "{} weights for {} points",
                weights.len(),
                self.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::param("weights sum to zero"));
        }
        self.weights = Some(weights.into_iter().map(|w| w / total).collect());
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.is_none()
    }

    /// Weight of point `i`; `1/n` for uniform clouds.
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.len() as f64,
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (i, p) in self.points().enumerate() {
            let w = self.weight(i);
            for (acc, v) in m.iter_mut().zip(p) {
                *acc += w * v;
            }
        }
        m
    }

    /// Per-coordinate (weighted) variance.
    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut var = vec![0.0; self.dim];
        for (i, p) in self.points().enumerate() {
            let w = self.weight(i);
            for ((acc, v), m) in var.iter_mut().zip(p).zip(&mean) {
                *acc += w * (v - m) * (v - m);
            }
        }
        var
    }

    /// Applies `f` to every point, producing a cloud of dimension `out_dim`.
    pub fn map_points<F>(&self, out_dim: usize, mut f: F) -> Result<PointCloud>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut data = vec![0.0; self.len() * out_dim];
        for (p, out) in self.points().zip(data.chunks_exact_mut(out_dim)) {
            f(p, out);
        }
        let cloud = PointCloud::new(out_dim, data)?;
        match &self.weights {
            Some(w) => cloud.with_weights(w.clone()),
            None => Ok(cloud),
        }
    }

    pub fn translated(&self, v: &[f64]) -> Result<PointCloud> {
        Error::check_dim(self.dim, v.len())?;
        self.map_points(self.dim, |p, out| {
            for ((o, a), b) in out.iter_mut().zip(p).zip(v) {
                *o = a + b;
            }
        })
    }
}
