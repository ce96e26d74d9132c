use nalgebra::{DMatrix, DVector};

use crate::{Error, PointCloud, Result};

const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITER: usize = 10_000;
const CONTRACTION_SLACK: f64 = 1e-8;

/// Adjacent-pair means: `out[i] = (x[2i] + x[2i+1]) / 2`.
pub fn downsample(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() || x.len() % 2 != 0 {
        return Err(Error::Size(format!("cannot halve a signal of length {}", x.len())));
    }
    Ok(x.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

/// Periodic linear interpolation onto twice as many samples. Not an inverse
/// of [`downsample`].
pub fn upsample(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Size("cannot upsample an empty signal".into()));
    }
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        out.push(x[i]);
        out.push(0.5 * (x[i] + x[(i + 1) % n]));
    }
    Ok(out)
}

pub fn downsample_cloud(cloud: &PointCloud) -> Result<PointCloud> {
    let d = cloud.dim();
    if d % 2 != 0 {
        return Err(Error::Size(format!("cannot halve dimension {d}")));
    }
    cloud.map_points(d / 2, |p, out| {
        for (o, pair) in out.iter_mut().zip(p.chunks_exact(2)) {
            *o = 0.5 * (pair[0] + pair[1]);
        }
    })
}

pub fn upsample_cloud(cloud: &PointCloud) -> Result<PointCloud> {
    let n = cloud.dim();
    cloud.map_points(2 * n, |p, out| {
        for i in 0..n {
            out[2 * i] = p[i];
            out[2 * i + 1] = 0.5 * (p[i] + p[(i + 1) % n]);
        }
    })
}

/// Matrix of [`downsample`] on signals of length `n`.
pub fn downsample_matrix(n: usize) -> Result<DMatrix<f64>> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::Size(format!("cannot halve a signal of length {n}")));
    }
    let mut m = DMatrix::zeros(n / 2, n);
    for i in 0..n / 2 {
        m[(i, 2 * i)] = 0.5;
        m[(i, 2 * i + 1)] = 0.5;
    }
    Ok(m)
}

/// Matrix of [`upsample`] on signals of length `n`.
pub fn upsample_matrix(n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Size("cannot upsample an empty signal".into()));
    }
    let mut m = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        m[(2 * i, i)] = 1.0;
        m[(2 * i + 1, i)] += 0.5;
        m[(2 * i + 1, (i + 1) % n)] += 0.5;
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorNorm {
    pub norm: f64,
    pub contractive: bool,
    pub iterations: usize,
}

/// Largest singular value by power iteration on `M^T M`.
pub fn operator_norm_check(m: &DMatrix<f64>) -> Result<OperatorNorm> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return Ok(OperatorNorm { norm: 0.0, contractive: true, iterations: 0 });
    }
    let gram = m.transpose() * m;
    // A fixed, non-symmetric start avoids being orthogonal to the top
    // eigenvector for the structured maps used here.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt() * 1e-3);
    v /= v.norm();
    let mut lambda = 0.0;
    for it in 1..=POWER_MAX_ITER {
        let w = &gram * &v;
        let next = v.dot(&w);
        let len = w.norm();
        if len == 0.0 {
            return Ok(OperatorNorm { norm: 0.0, contractive: true, iterations: it });
        }
        v = w / len;
        if (next - lambda).abs() <= POWER_TOL * next.abs().max(f64::MIN_POSITIVE) {
            let norm = next.max(0.0).sqrt();
            return Ok(OperatorNorm { norm, contractive: norm <= 1.0 + CONTRACTION_SLACK, iterations: it });
        }
        lambda = next;
    }
    Err(Error::Numerical(format!("power iteration did not converge in {POWER_MAX_ITER} iterations")))
}
