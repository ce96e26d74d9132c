use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifold::ParamManifold;
use super::mesh::ManifoldMesh;
use crate::{Error, Result};

/// Margin above 1 for the Ricci magnitude fed to the bound evaluators when
/// the manifold is not negatively curved.
pub const K_FLOOR: f64 = 1.0 + 1e-6;

/// `sqrt((d'-1)/K) ln 2`.
pub fn kato_radius(k: f64, intrinsic_dim: usize) -> Result<f64> {
    kato_radius_with(k, intrinsic_dim, std::f64::consts::LN_2)
}

/// `sqrt((d'-1)/K) ln 4`, the radius used by the diameter estimate.
pub fn kato_radius_ln4(k: f64, intrinsic_dim: usize) -> Result<f64> {
    kato_radius_with(k, intrinsic_dim, 2.0 * std::f64::consts::LN_2)
}

fn kato_radius_with(k: f64, intrinsic_dim: usize, log: f64) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::param(format!("K must be positive, got {k}")));
    }
    if intrinsic_dim < 2 {
        return Err(Error::param(format!("Kato radius needs d' >= 2, got {intrinsic_dim}")));
    }
    Ok(((intrinsic_dim as f64 - 1.0) / k).sqrt() * log)
}

/// Per-node `ric_-` on the mesh.
pub fn ricci_field(mesh: &ManifoldMesh, m: &ParamManifold) -> Result<Vec<f64>> {
    check_mesh(mesh, m)?;
    (0..mesh.len()).map(|i| m.ricci_lower(mesh.node(i))).collect()
}

fn check_mesh(mesh: &ManifoldMesh, m: &ParamManifold) -> Result<()> {
    if mesh.intrinsic_dim() != m.intrinsic_dim() || mesh.ambient_dim() != m.ambient_dim {
        return Err(Error::Mesh(format!(
            "mesh ({}, {}) does not belong to a manifold of dims ({}, {})",
            mesh.intrinsic_dim(),
            mesh.ambient_dim(),
            m.intrinsic_dim(),
            m.ambient_dim
        )));
    }
    Ok(())
}

/// `sup_x` of the weighted ball average of `(d' - 1 - ric_-)_+` over
/// `B_R(x)`. Nodes count fully when their graph distance is at most `R`.
pub fn kato_constant(mesh: &ManifoldMesh, m: &ParamManifold, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::param(format!("radius must be positive, got {radius}")));
    }
    if radius < mesh.spacing() {
        return Err(Error::Resolution(format!(
            "radius {radius} is below mesh spacing {}",
            mesh.spacing()
        )));
    }
    let excess = m.intrinsic_dim() as f64 - 1.0;
    let integrand: Vec<f64> = ricci_field(mesh, m)?
        .into_iter()
        .map(|r| (excess - r).max(0.0))
        .collect();
    let w = mesh.weights();
    Ok((0..mesh.len())
        .into_par_iter()
        .map(|x| {
            let (mut num, mut den) = (0.0, 0.0);
            for (j, _) in mesh.ball(x, radius) {
                num += w[j] * integrand[j];
                den += w[j];
            }
            num / den
        })
        .reduce(|| 0.0, f64::max))
}

pub fn diameter_empirical(mesh: &ManifoldMesh) -> f64 {
    mesh.diameter()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BishopGromov {
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Compares `vol B_R(x) / vol B_r(x)` on the mesh with the model-space ratio
/// for `ric >= -K g`, `s(u) = sinh(u sqrt(K / (d'-1)))`.
pub fn bishop_gromov_check(
    mesh: &ManifoldMesh,
    k: f64,
    x: usize,
    r: f64,
    big_r: f64,
) -> Result<BishopGromov> {
    if !(k > 0.0) {
        return Err(Error::param(format!("K must be positive, got {k}")));
    }
    if x >= mesh.len() {
        return Err(Error::param(format!("node {x} out of range")));
    }
    if !(r > 0.0) || r > big_r {
        return Err(Error::param(format!("need 0 < r <= R, got r = {r}, R = {big_r}")));
    }
    if r == big_r {
        return Ok(BishopGromov { lhs: 1.0, rhs: 1.0, tolerance: 0.0, holds: true });
    }
    let w = mesh.weights();
    let ball = mesh.ball(x, big_r);
    let vol_big: f64 = ball.iter().map(|(j, _)| w[*j]).sum();
    let vol_small: f64 = ball.iter().filter(|(_, d)| *d <= r).map(|(j, _)| w[*j]).sum();
    let lhs = vol_big / vol_small;
    let dp = mesh.intrinsic_dim().max(1);
    let rhs = model_volume(k, dp, big_r) / model_volume(k, dp, r);
    let h = mesh.spacing();
    let grow = |rad: f64| (1.0 + h / rad).powi(dp as i32) - 1.0;
    let tolerance = grow(r) + grow(big_r);
    Ok(BishopGromov { lhs, rhs, tolerance, holds: lhs <= rhs * (1.0 + tolerance) })
}

/// `int_0^R s(u)^{d'-1} du` by composite Simpson.
pub fn model_volume(k: f64, intrinsic_dim: usize, radius: f64) -> f64 {
    if intrinsic_dim <= 1 {
        return radius;
    }
    let p = intrinsic_dim as i32 - 1;
    let a = (k / p as f64).sqrt();
    let f = |u: f64| (a * u).sinh().powi(p);
    let n = 2048;
    let h = radius / n as f64;
    let mut sum = f(0.0) + f(radius);
    for i in 1..n {
        sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub intrinsic_dim: usize,
    /// `max(0, -min ric_-)` over the mesh.
    pub k: f64,
    /// `max(K, 1 + 1e-6)`, the value handed to the bound evaluators.
    pub k_eff: f64,
    pub rho: f64,
    /// Kato constant at `sqrt((d'-1)/K_eff) ln 2`.
    pub kappa: f64,
    /// Kato constant at `sqrt((d'-1)/K_eff) ln 4`.
    pub kappa_ln4: f64,
    pub kato_radius: f64,
    pub diameter_empirical: f64,
    pub b: f64,
    pub l: f64,
}

/// Collects the curvature inputs of the bound evaluators. `b` and `l` are the
/// density's gradient bound and Lipschitz constant on the manifold.
pub fn summarize(mesh: &ManifoldMesh, m: &ParamManifold, b: f64, l: f64) -> Result<GeometrySummary> {
    if !(b >= 0.0 && l >= 0.0) {
        return Err(Error::param(format!("B and L must be nonnegative, got {b}, {l}")));
    }
    let dp = m.intrinsic_dim();
    let ric = ricci_field(mesh, m)?;
    let k = (-ric.iter().copied().fold(f64::INFINITY, f64::min)).max(0.0);
    let k_eff = k.max(K_FLOOR);
    let (kato_r, kappa, kappa_ln4) = if dp >= 2 {
        let r2 = kato_radius(k_eff, dp)?;
        let r4 = kato_radius_ln4(k_eff, dp)?;
        (r2, kato_constant(mesh, m, r2)?, kato_constant(mesh, m, r4)?)
    } else {
        (0.0, 0.0, 0.0)
    };
    Ok(GeometrySummary {
        intrinsic_dim: dp,
        k,
        k_eff,
        rho: m.embedding_radius(),
        kappa,
        kappa_ln4,
        kato_radius: kato_r,
        diameter_empirical: mesh.diameter(),
        b,
        l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_mesh;

    #[test]
    fn radii() {
        assert!((kato_radius(1.0, 2).unwrap() - 0.693_147_180_559_945_3).abs() < 1e-15);
        assert!((kato_radius(4.0, 5).unwrap() - 0.693_147_180_559_945_3).abs() < 1e-15);
        assert!((kato_radius(0.25, 2).unwrap() - 1.386_294_361_119_890_6).abs() < 1e-15);
        assert!((kato_radius_ln4(1.0, 2).unwrap() - 1.386_294_361_119_890_6).abs() < 1e-15);
        assert!(kato_radius(0.0, 2).is_err());
        assert!(kato_radius(-1.0, 2).is_err());
        assert!(kato_radius(1.0, 1).is_err());
    }

    #[test]
    fn model_volume_closed_form() {
        // d' = 2: (cosh(aR) - 1) / a with a = sqrt(K).
        let k: f64 = 0.7;
        let a = k.sqrt();
        let want = ((a * 1.3).cosh() - 1.0) / a;
        assert!((model_volume(k, 2, 1.3) - want).abs() < 1e-12);
        assert_eq!(model_volume(1.0, 1, 2.5), 2.5);
    }

    #[test]
    fn kato_below_spacing_is_resolution_error() {
        let m = ParamManifold::sphere(2, 1.0, 3).unwrap();
        let mesh = build_mesh(&m, 16).unwrap();
        assert!(matches!(kato_constant(&mesh, &m, 0.01), Err(Error::Resolution(_))));
    }

    #[test]
    fn equal_radii() {
        let m = ParamManifold::circle(1.0, 2).unwrap();
        let mesh = build_mesh(&m, 16).unwrap();
        let bg = bishop_gromov_check(&mesh, 1.0, 0, 0.5, 0.5).unwrap();
        assert_eq!((bg.lhs, bg.rhs, bg.holds), (1.0, 1.0, true));
        assert!(bishop_gromov_check(&mesh, 1.0, 0, 0.6, 0.5).is_err());
    }
}
