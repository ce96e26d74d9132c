use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Closed manifolds with an analytic chart and isometric embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldKind {
    Circle {
        radius: f64,
    },
    /// Round sphere of intrinsic dimension `dim` in `R^{dim+1}`.
    Sphere {
        dim: usize,
        radius: f64,
    },
    /// Surface of revolution with tube radius `minor` around a circle of
    /// radius `major`.
    EmbeddedTorus {
        minor: f64,
        major: f64,
    },
    /// Signals `A1 cos(2 pi k1 t / N + th1 + p1) + A2 cos(2 pi k2 t / N + th2 + p2)`
    /// for `t = 0..N`, a flat torus in `R^N`.
    PhaseTorus {
        amplitudes: [f64; 2],
        frequencies: [usize; 2],
        length: usize,
        #[serde(default)]
        phases: [f64; 2],
    },
}

/// Shape of a chart coordinate axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// `[0, 2 pi)` with periodic identification.
    Periodic,
    /// Closed latitude interval `[-pi/2, pi/2]`.
    Latitude,
}

impl Axis {
    pub fn length(self) -> f64 {
        match self {
            Axis::Periodic => TAU,
            Axis::Latitude => PI,
        }
    }

    fn contains(self, t: f64) -> bool {
        match self {
            Axis::Periodic => (0.0..TAU).contains(&t),
            Axis::Latitude => (-FRAC_PI_2..=FRAC_PI_2).contains(&t),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamManifold {
    pub kind: ManifoldKind,
    pub ambient_dim: usize,
}

impl ParamManifold {
    pub fn circle(radius: f64, ambient_dim: usize) -> Result<Self> {
        Self::new(ManifoldKind::Circle { radius }, ambient_dim)
    }

    pub fn sphere(dim: usize, radius: f64, ambient_dim: usize) -> Result<Self> {
        Self::new(ManifoldKind::Sphere { dim, radius }, ambient_dim)
    }

    pub fn embedded_torus(minor: f64, major: f64, ambient_dim: usize) -> Result<Self> {
        Self::new(ManifoldKind::EmbeddedTorus { minor, major }, ambient_dim)
    }

    pub fn phase_torus(amplitudes: [f64; 2], frequencies: [usize; 2], length: usize) -> Result<Self> {
        Self::new(
            ManifoldKind::PhaseTorus { amplitudes, frequencies, length, phases: [0.0; 2] },
            length,
        )
    }

    pub fn new(kind: ManifoldKind, ambient_dim: usize) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match &kind {
            ManifoldKind::Circle { radius } => positive("radius", *radius)?,
            ManifoldKind::Sphere { dim, radius } => {
                positive("radius", *radius)?;
                if *dim == 0 {
                    return Err(Error::param("sphere dimension must be at least 1"));
                }
            }
            ManifoldKind::EmbeddedTorus { minor, major } => {
                positive("minor radius", *minor)?;
                positive("major radius", *major)?;
                if minor >= major {
                    return Err(Error::param(format!(
                        "torus needs minor < major for an embedding, got {minor} >= {major}"
                    )));
                }
            }
            ManifoldKind::PhaseTorus { amplitudes, frequencies, length, phases } => {
                positive("amplitude", amplitudes[0])?;
                positive("amplitude", amplitudes[1])?;
                let [k1, k2] = *frequencies;
                if k1 == k2 || k1 == 0 || k2 == 0 || 2 * k1 >= *length || 2 * k2 >= *length {
                    return Err(Error::param(format!(
                        "phase torus needs distinct frequencies in (0, N/2), got {k1}, {k2} with N = {length}"
                    )));
                }
                if !phases.iter().all(|p| p.is_finite()) {
                    return Err(Error::param("phase offsets must be finite"));
                }
                if ambient_dim != *length {
                    return Err(Error::param(format!(
                        "phase torus lives in R^N, got ambient {ambient_dim} for N = {length}"
                    )));
                }
            }
        }
        let m = ParamManifold { kind, ambient_dim };
        if m.intrinsic_dim() >= ambient_dim {
            return Err(Error::param(format!(
                "ambient dimension {ambient_dim} must exceed intrinsic dimension {}",
                m.intrinsic_dim()
            )));
        }
        // Embedding coordinates must fit in the ambient space.
        if m.embedding_dim() > ambient_dim {
            return Err(Error::param(format!(
                "{:?} needs at least {} ambient coordinates",
                m.kind,
                m.embedding_dim()
            )));
        }
        Ok(m)
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle { .. } => 1,
            ManifoldKind::Sphere { dim, .. } => dim,
            ManifoldKind::EmbeddedTorus { .. } | ManifoldKind::PhaseTorus { .. } => 2,
        }
    }

    /// Number of leading ambient coordinates that can be nonzero.
    pub fn embedding_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle { .. } => 2,
            ManifoldKind::Sphere { dim, .. } => dim + 1,
            ManifoldKind::EmbeddedTorus { .. } => 3,
            ManifoldKind::PhaseTorus { length, .. } => length,
        }
    }

    pub fn axes(&self) -> Vec<Axis> {
        match self.kind {
            ManifoldKind::Sphere { dim, .. } => {
                let mut axes = vec![Axis::Latitude; dim - 1];
                axes.push(Axis::Periodic);
                axes
            }
            _ => vec![Axis::Periodic; self.intrinsic_dim()],
        }
    }

    /// `sup |psi(theta)|`.
    pub fn embedding_radius(&self) -> f64 {
        match self.kind {
            ManifoldKind::Circle { radius } | ManifoldKind::Sphere { radius, .. } => radius,
            ManifoldKind::EmbeddedTorus { minor, major } => minor + major,
            ManifoldKind::PhaseTorus { amplitudes, length, .. } => {
                (0.5 * length as f64 * (amplitudes[0].powi(2) + amplitudes[1].powi(2))).sqrt()
            }
        }
    }

    /// Analytic Riemannian volume.
    pub fn volume(&self) -> f64 {
        match self.kind {
            ManifoldKind::Circle { radius } => TAU * radius,
            ManifoldKind::Sphere { dim, radius } => unit_sphere_area(dim) * radius.powi(dim as i32),
            ManifoldKind::EmbeddedTorus { minor, major } => 4.0 * PI * PI * minor * major,
            ManifoldKind::PhaseTorus { amplitudes, length, .. } => {
                TAU * TAU * amplitudes[0] * amplitudes[1] * 0.5 * length as f64
            }
        }
    }

    pub fn check_domain(&self, theta: &[f64]) -> Result<()> {
        Error::check_dim(self.intrinsic_dim(), theta.len())?;
        for (i, (axis, t)) in self.axes().into_iter().zip(theta).enumerate() {
            if !axis.contains(*t) {
                return Err(Error::Domain(format!("coordinate {i} = {t} outside {axis:?} range")));
            }
        }
        Ok(())
    }

    /// Writes `psi(theta)` into `out` (length `ambient_dim`). No domain check.
    pub fn embed_into(&self, theta: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match self.kind {
            ManifoldKind::Circle { radius } => {
                out[0] = radius * theta[0].cos();
                out[1] = radius * theta[0].sin();
            }
            ManifoldKind::Sphere { dim, radius } => {
                for (c, slot) in out[..=dim].iter_mut().enumerate() {
                    *slot = radius * sphere_component(theta, dim, c, None);
                }
            }
            ManifoldKind::EmbeddedTorus { minor, major } => {
                let (u, v) = (theta[0], theta[1]);
                let ring = major + minor * v.cos();
                out[0] = ring * u.cos();
                out[1] = ring * u.sin();
                out[2] = minor * v.sin();
            }
            ManifoldKind::PhaseTorus { amplitudes, frequencies, length, phases } => {
                for j in 0..2 {
                    let w = TAU * frequencies[j] as f64 / length as f64;
                    let shift = theta[j] + phases[j];
                    for (t, slot) in out.iter_mut().enumerate() {
                        *slot += amplitudes[j] * (w * t as f64 + shift).cos();
                    }
                }
            }
        }
    }

    pub fn embed(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(theta)?;
        let mut out = vec![0.0; self.ambient_dim];
        self.embed_into(theta, &mut out);
        Ok(out)
    }

    /// Analytic `d x d'` Jacobian of the embedding.
    pub fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(theta)?;
        let (d, k) = (self.ambient_dim, self.intrinsic_dim());
        let mut j = DMatrix::zeros(d, k);
        match self.kind {
            ManifoldKind::Circle { radius } => {
                j[(0, 0)] = -radius * theta[0].sin();
                j[(1, 0)] = radius * theta[0].cos();
            }
            ManifoldKind::Sphere { dim, radius } => {
                for c in 0..=dim {
                    for a in 0..dim {
                        j[(c, a)] = radius * sphere_component(theta, dim, c, Some(a));
                    }
                }
            }
            ManifoldKind::EmbeddedTorus { minor, major } => {
                let (u, v) = (theta[0], theta[1]);
                let ring = major + minor * v.cos();
                j[(0, 0)] = -ring * u.sin();
                j[(1, 0)] = ring * u.cos();
                j[(0, 1)] = -minor * v.sin() * u.cos();
                j[(1, 1)] = -minor * v.sin() * u.sin();
                j[(2, 1)] = minor * v.cos();
            }
            ManifoldKind::PhaseTorus { amplitudes, frequencies, length, phases } => {
                for a in 0..2 {
                    let w = TAU * frequencies[a] as f64 / length as f64;
                    for t in 0..d {
                        j[(t, a)] = -amplitudes[a] * (w * t as f64 + theta[a] + phases[a]).sin();
                    }
                }
            }
        }
        Ok(j)
    }

    /// Analytic metric tensor `g = J^T J`.
    pub fn metric(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(theta)?;
        let k = self.intrinsic_dim();
        let diag: Vec<f64> = match self.kind {
            ManifoldKind::Circle { radius } => vec![radius * radius],
            ManifoldKind::Sphere { dim, radius } => {
                let mut scale = radius * radius;
                (0..dim)
                    .map(|a| {
                        let g = scale;
                        if a + 1 < dim {
                            scale *= theta[a].cos().powi(2);
                        }
                        g
                    })
                    .collect()
            }
            ManifoldKind::EmbeddedTorus { minor, major } => {
                vec![(major + minor * theta[1].cos()).powi(2), minor * minor]
            }
            ManifoldKind::PhaseTorus { amplitudes, length, .. } => {
                amplitudes.iter().map(|a| a * a * 0.5 * length as f64).collect()
            }
        };
        debug_assert_eq!(diag.len(), k);
        Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    /// Embedded point together with the metric tensor.
    pub fn chart_eval(&self, theta: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        Ok((self.embed(theta)?, self.metric(theta)?))
    }

    /// `sqrt(det g)`; every supported chart has a diagonal metric.
    pub fn volume_density(&self, theta: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::Circle { radius } => radius,
            ManifoldKind::Sphere { dim, radius } => {
                let mut v = radius.powi(dim as i32);
                for (a, t) in theta.iter().take(dim - 1).enumerate() {
                    v *= t.cos().abs().powi((dim - 1 - a) as i32);
                }
                v
            }
            ManifoldKind::EmbeddedTorus { minor, major } => minor * (major + minor * theta[1].cos()),
            ManifoldKind::PhaseTorus { amplitudes, length, .. } => {
                amplitudes[0] * amplitudes[1] * 0.5 * length as f64
            }
        }
    }

    /// Smallest eigenvalue of the Ricci tensor relative to `g`.
    pub fn ricci_lower(&self, theta: &[f64]) -> Result<f64> {
        self.check_domain(theta)?;
        Ok(match self.kind {
            ManifoldKind::Circle { .. } | ManifoldKind::PhaseTorus { .. } => 0.0,
            ManifoldKind::Sphere { dim, radius } => (dim as f64 - 1.0) / (radius * radius),
            ManifoldKind::EmbeddedTorus { minor, major } => {
                let v = theta[1];
                v.cos() / (minor * (major + minor * v.cos()))
            }
        })
    }

    /// Unit speed of the chart along a periodic axis, when it is constant.
    pub fn axis_speed(&self, axis: usize) -> Option<f64> {
        match self.kind {
            ManifoldKind::Circle { radius } if axis == 0 => Some(radius),
            ManifoldKind::PhaseTorus { amplitudes, length, .. } if axis < 2 => {
                Some(amplitudes[axis] * (0.5 * length as f64).sqrt())
            }
            _ => None,
        }
    }

    /// Pair-mean downsampling of a phase torus is again a phase torus on
    /// half the samples, with damped amplitudes and shifted phases.
    pub fn downsampled(&self) -> Result<ParamManifold> {
        match self.kind {
            ManifoldKind::PhaseTorus { amplitudes, frequencies, length, phases } => {
                if length % 2 != 0 {
                    return Err(Error::param(format!("cannot halve odd length {length}")));
                }
                let half = PI / length as f64;
                let mut amp = [0.0; 2];
                let mut ph = [0.0; 2];
                for j in 0..2 {
                    let shift = half * frequencies[j] as f64;
                    amp[j] = amplitudes[j] * shift.cos();
                    ph[j] = phases[j] + shift;
                }
                Self::new(
                    ManifoldKind::PhaseTorus {
                        amplitudes: amp,
                        frequencies,
                        length: length / 2,
                        phases: ph,
                    },
                    length / 2,
                )
            }
            _ => Err(Error::param("only phase tori have a closed-form downsampled image")),
        }
    }
}

/// Component `c` of the unit sphere embedding, or its derivative in chart
/// coordinate `wrt`. Latitudes come first, the longitude last; the chart
/// origin lands on the last ambient axis.
fn sphere_component(theta: &[f64], dim: usize, c: usize, wrt: Option<usize>) -> f64 {
    // Work in reversed order so component m is a product of factors.
    // m = 0: prod cos(lat) * cos(lon); m = 1: prod cos(lat) * sin(lon);
    // m >= 2: prod_{a < dim - m + 1 - 1} cos(theta_a) * sin(theta_{dim - m}).
    let m = dim - c;
    let lon = dim - 1;
    let factor = |a: usize, sine: bool| -> f64 {
        let t = theta[a];
        match (wrt == Some(a), sine) {
            (false, false) => t.cos(),
            (false, true) => t.sin(),
            (true, false) => -t.sin(),
            (true, true) => t.cos(),
        }
    };
    let mut value = 1.0;
    let mut used = false;
    let cos_upto = if m < 2 { lon } else { dim - m };
    for a in 0..cos_upto {
        value *= factor(a, false);
        used |= wrt == Some(a);
    }
    let last = if m < 2 { lon } else { dim - m };
    value *= factor(last, m != 0);
    used |= wrt == Some(last);
    if wrt.is_some() && !used {
        0.0
    } else {
        value
    }
}

fn unit_sphere_area(dim: usize) -> f64 {
    // |S^n| = 2 pi^{(n+1)/2} / Gamma((n+1)/2), by the recursion |S^n| = 2 pi/(n-1) |S^{n-2}|.
    let (mut area, mut n) = if dim % 2 == 0 { (2.0, 0) } else { (TAU, 1) };
    while n < dim {
        n += 2;
        area *= TAU / (n - 1) as f64;
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_jacobian(m: &ParamManifold, theta: &[f64]) -> DMatrix<f64> {
        let (d, k) = (m.ambient_dim, m.intrinsic_dim());
        let h = 1e-6;
        let mut j = DMatrix::zeros(d, k);
        for a in 0..k {
            let mut p = theta.to_vec();
            let mut q = theta.to_vec();
            p[a] += h;
            q[a] -= h;
            let (mut fp, mut fq) = (vec![0.0; d], vec![0.0; d]);
            m.embed_into(&p, &mut fp);
            m.embed_into(&q, &mut fq);
            for i in 0..d {
                j[(i, a)] = (fp[i] - fq[i]) / (2.0 * h);
            }
        }
        j
    }

    fn samples() -> Vec<(ParamManifold, Vec<f64>)> {
        vec![
            (ParamManifold::circle(2.0, 5).unwrap(), vec![1.1]),
            (ParamManifold::sphere(2, 1.5, 4).unwrap(), vec![0.4, 2.0]),
            (ParamManifold::sphere(3, 0.7, 4).unwrap(), vec![-0.3, 0.9, 5.0]),
            (ParamManifold::embedded_torus(1.0, 3.0, 3).unwrap(), vec![0.3, 2.2]),
            (ParamManifold::phase_torus([1.0, 0.5], [1, 3], 16).unwrap(), vec![0.7, 4.0]),
        ]
    }

    #[test]
    fn jacobian_and_metric_match_finite_differences() {
        for (m, theta) in samples() {
            let j = m.jacobian(&theta).unwrap();
            let jn = numeric_jacobian(&m, &theta);
            assert!((&j - &jn).amax() < 1e-7, "{:?}", m.kind);
            let g = m.metric(&theta).unwrap();
            let gn = jn.transpose() * &jn;
            assert!((&g - &gn).amax() < 1e-6 * gn.amax().max(1.0), "{:?}", m.kind);
            let det = g.determinant().sqrt();
            assert!((m.volume_density(&theta) - det).abs() < 1e-10 * det, "{:?}", m.kind);
        }
    }

    #[test]
    fn embedding_radius_bounds_points() {
        for (m, theta) in samples() {
            let p = m.embed(&theta).unwrap();
            let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(n <= m.embedding_radius() + 1e-12);
        }
    }

    #[test]
    fn sphere_chart_origin() {
        let m = ParamManifold::sphere(2, 1.0, 3).unwrap();
        let (p, g) = m.chart_eval(&[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0]);
        assert_eq!(g, DMatrix::identity(2, 2));
    }

    #[test]
    fn domain_and_parameter_errors() {
        let c = ParamManifold::circle(1.0, 2).unwrap();
        assert!(matches!(c.embed(&[TAU]), Err(Error::Domain(_))));
        assert!(matches!(c.embed(&[-0.1]), Err(Error::Domain(_))));
        let s = ParamManifold::sphere(2, 1.0, 3).unwrap();
        assert!(s.embed(&[FRAC_PI_2, 0.0]).is_ok());
        assert!(matches!(s.embed(&[1.6, 0.0]), Err(Error::Domain(_))));
        assert!(ParamManifold::circle(1.0, 1).is_err());
        assert!(ParamManifold::embedded_torus(3.0, 1.0, 3).is_err());
        assert!(ParamManifold::phase_torus([1.0, 1.0], [2, 2], 16).is_err());
        assert!(ParamManifold::phase_torus([1.0, 1.0], [1, 8], 16).is_err());
    }

    #[test]
    fn analytic_volumes() {
        assert!((ParamManifold::sphere(2, 1.0, 3).unwrap().volume() - 4.0 * PI).abs() < 1e-12);
        assert!((ParamManifold::sphere(1, 1.0, 2).unwrap().volume() - TAU).abs() < 1e-12);
        assert!((ParamManifold::sphere(3, 1.0, 4).unwrap().volume() - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn downsampled_phase_torus_is_pair_mean() {
        let m = ParamManifold::phase_torus([1.0, 0.7], [1, 3], 16).unwrap();
        let small = m.downsampled().unwrap();
        let theta = [0.9, 5.1];
        let big = m.embed(&theta).unwrap();
        let got = small.embed(&theta).unwrap();
        for s in 0..8 {
            let want = 0.5 * (big[2 * s] + big[2 * s + 1]);
            assert!((got[s] - want).abs() < 1e-12);
        }
    }
}
