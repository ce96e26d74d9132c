use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assignment::solve_assignment;
use super::PointCloud;
use crate::rng::{domain, StreamKey};
use crate::{Error, Result};

/// Largest cloud the exact assignment solver accepts.
pub const EXACT_MAX_POINTS: usize = 2048;
/// Projection count used when the exact solver is out of reach.
pub const DEFAULT_PROJECTIONS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Exact,
    Sliced { projections: usize },
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Estimator::Exact => write!(f, "exact"),
            Estimator::Sliced { projections } => write!(f, "sliced{projections}"),
        }
    }
}

/// Exact W2 between two equal-size uniform clouds via optimal assignment.
pub fn w2_exact(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Error::check_dim(a.dim(), b.dim())?;
    if a.len() != b.len() {
        return Err(Error::Size(format!(
            "exact W2 needs equal sizes, got {} and {} (use the sliced estimator)",
            a.len(),
            b.len()
        )));
    }
    if !a.is_uniform() || !b.is_uniform() {
        return Err(Error::param("exact W2 needs uniformly weighted clouds"));
    }
    let n = a.len();
    if n > EXACT_MAX_POINTS {
        return Err(Error::Size(format!(
            "exact W2 is capped at {EXACT_MAX_POINTS} points, got {n}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let cost = squared_distance_matrix(a, b);
    let (perm, _) = solve_assignment(n, &cost)?;
    // Summing the matched costs in sorted order makes the result exactly
    // symmetric in (a, b).
    let mut matched: Vec<f64> = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).collect();
    matched.sort_by(f64::total_cmp);
    let total: f64 = matched.iter().sum();
    Ok((total.max(0.0) / n as f64).sqrt())
}

pub(crate) fn squared_distance_matrix(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    let n = a.len();
    let m = b.len();
    let mut cost = vec![0.0; n * m];
    cost.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let p = a.point(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = p
                .iter()
                .zip(b.point(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
        }
    });
    cost
}

/// Sliced W2: root of `dim` times the mean over random unit directions of
/// the squared 1-D W2 of the projected clouds. The `dim` factor undoes the
/// `1/dim` shrinkage of projected squared lengths, so a pure translation by
/// `v` gives `|v|` in expectation. Sizes and weights may differ.
pub fn w2_sliced(a: &PointCloud, b: &PointCloud, n_projections: usize, seed: u64) -> Result<f64> {
    Error::check_dim(a.dim(), b.dim())?;
    if n_projections == 0 {
        return Err(Error::param("sliced W2 needs at least one projection"));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Size("sliced W2 of an empty cloud".into()));
    }
    let dim = a.dim();
    let key = StreamKey::new(seed, domain::PROJECTIONS);
    let per_projection: Vec<f64> = (0..n_projections)
        .into_par_iter()
        .map(|p| {
            let mut dir = key.normals(p as u64, 0, dim);
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                dir.iter_mut().for_each(|v| *v /= norm);
            } else {
                dir[0] = 1.0;
            }
            w2_squared_1d(&project(a, &dir), &project(b, &dir))
        })
        .collect();
    let mean = per_projection.iter().sum::<f64>() / n_projections as f64;
    Ok((dim as f64 * mean).max(0.0).sqrt())
}

/// Exact when the clouds allow it, otherwise sliced with the default
/// projection count. The estimator used is returned alongside.
pub fn w2_auto(a: &PointCloud, b: &PointCloud, seed: u64) -> Result<(f64, Estimator)> {
    let exact_ok = a.len() == b.len()
        && a.len() <= EXACT_MAX_POINTS
        && a.is_uniform()
        && b.is_uniform();
    if exact_ok {
        Ok((w2_exact(a, b)?, Estimator::Exact))
    } else {
        Ok((
            w2_sliced(a, b, DEFAULT_PROJECTIONS, seed)?,
            Estimator::Sliced { projections: DEFAULT_PROJECTIONS },
        ))
    }
}

pub fn w2_with(estimator: Estimator, a: &PointCloud, b: &PointCloud, seed: u64) -> Result<f64> {
    match estimator {
        Estimator::Exact => w2_exact(a, b),
        Estimator::Sliced { projections } => w2_sliced(a, b, projections, seed),
    }
}

fn project(c: &PointCloud, dir: &[f64]) -> Vec<(f64, f64)> {
    c.points()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(dir).map(|(x, d)| x * d).sum(), c.weight(i)))
        .collect()
}

/// Squared W2 between two weighted 1-D empirical measures, by integrating the
/// squared difference of their quantile functions.
pub fn w2_squared_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.0.total_cmp(&y.0));
    b.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let step = ra.min(rb);
        let diff = a[i].0 - b[j].0;
        acc += step * diff * diff;
        ra -= step;
        rb -= step;
        if ra <= 1e-15 {
            i += 1;
            if i < a.len() {
                ra = a[i].1;
            }
        }
        if rb <= 1e-15 {
            j += 1;
            if j < b.len() {
                rb = b[j].1;
            }
        }
    }
    acc
}
