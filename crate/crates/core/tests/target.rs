use std::f64::consts::TAU;

use manifold_langevin::geometry::ParamManifold;
use manifold_langevin::target::{
    dissipativity_check, dissipativity_check_in, lipschitz_check, Density, GaussianOracle, ScoreOracle, Tilt,
    TargetDistribution, VonMisesOracle,
};
use manifold_langevin::{ScoreField, SmoothedOracle};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

const SCHEDULE: [f64; 10] = [1.0, 0.59, 0.35, 0.21, 0.12, 0.07, 0.04, 0.027, 0.016, 0.01];

fn quad(m: ParamManifold, res: usize) -> ScoreOracle {
    ScoreOracle::new(TargetDistribution::uniform(m, res).unwrap())
}

fn all_oracles() -> Vec<(&'static str, Box<dyn SmoothedOracle>)> {
    let circle = ParamManifold::circle(1.0, 3).unwrap();
    let torus = ParamManifold::phase_torus([1.0, 0.6], [1, 3], 8).unwrap();
    let tilt = Tilt { axis: 0, concentration: 2.0, mean: 1.0, b: None, l: None };
    vec![
        ("circle quadrature", Box::new(quad(circle.clone(), 256))),
        ("circle analytic", Box::new(VonMisesOracle::new(&circle, &Density::Uniform).unwrap())),
        (
            "tilted circle analytic",
            Box::new(VonMisesOracle::new(&circle, &Density::Tilted(tilt)).unwrap()),
        ),
        ("sphere quadrature", Box::new(quad(ParamManifold::sphere(2, 1.0, 3).unwrap(), 48))),
        ("torus quadrature", Box::new(quad(ParamManifold::embedded_torus(0.5, 1.5, 4).unwrap(), 32))),
        ("phase torus analytic", Box::new(VonMisesOracle::new(&torus, &Density::Uniform).unwrap())),
        ("point mass", Box::new(ScoreOracle::point_mass(&[0.3, -0.4]).unwrap())),
        ("gaussian", Box::new(GaussianOracle::new(vec![0.5, 0.0, -1.0], 0.3).unwrap())),
    ]
}

fn probes(o: &dyn SmoothedOracle, sigma: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let prior = o.sample_prior(n, seed).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    prior
        .points()
        .map(|p| p.iter().map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn prior_sampling() {
    let t = TargetDistribution::uniform(ParamManifold::circle(1.0, 2).unwrap(), 128).unwrap();
    assert!(t.sample(0, 4).is_empty());
    let cloud = t.sample(10_000, 4);
    for m in cloud.mean() {
        assert!(m.abs() < 0.05);
    }
    assert_eq!(cloud, t.sample(10_000, 4));
}

#[test]
fn circle_density_at_origin() {
    for r in [0.5, 1.0, 2.0] {
        let m = ParamManifold::circle(r, 2).unwrap();
        for sigma in [0.3, 1.0] {
            let want = (TAU * sigma * sigma).recip() * (-r * r / (2.0 * sigma * sigma)).exp();
            let q = quad(m.clone(), 64).density(&[0.0, 0.0], sigma).unwrap();
            let a = VonMisesOracle::new(&m, &Density::Uniform).unwrap().density(&[0.0, 0.0], sigma).unwrap();
            assert!((q - want).abs() < 1e-12 * want);
            assert!((a - want).abs() < 1e-12 * want);
            assert!(norm(&quad(m.clone(), 64).score(&[0.0, 0.0], sigma).unwrap()) < 1e-12);
        }
    }
}

#[test]
fn point_mass_density_is_gaussian() {
    let y0 = [1.0, 2.0];
    let o = ScoreOracle::point_mass(&y0).unwrap();
    let x = [0.0, 0.5];
    let sigma: f64 = 0.8;
    let d2 = 1.0 + 1.5 * 1.5;
    let want = (TAU * sigma * sigma).recip() * (-d2 / (2.0 * sigma * sigma)).exp();
    assert!((o.density(&x, sigma).unwrap() - want).abs() < 1e-14);
}

#[test]
fn sphere_density_refines() {
    let m = ParamManifold::sphere(2, 1.0, 3).unwrap();
    let x = [0.3, -0.5, 0.7];
    for sigma in [0.2, 0.5] {
        let a = quad(m.clone(), 48).density(&x, sigma).unwrap();
        let b = quad(m.clone(), 96).density(&x, sigma).unwrap();
        assert!((a - b).abs() < 0.01 * b, "sigma {sigma}: {a} vs {b}");
    }
}

#[test]
fn posterior_mean_matches_monte_carlo() {
    // Self-normalised importance sampling over theta ~ U[0, 2 pi).
    let (x, sigma) = ([2.0, 0.0], 0.5);
    let n = 1_000_000;
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let t: f64 = rng.random::<f64>() * TAU;
        let (c, s) = (t.cos(), t.sin());
        let w = (-((x[0] - c).powi(2) + (x[1] - s).powi(2)) / (2.0 * sigma * sigma)).exp();
        samples.push((w, c, s));
    }
    let wsum: f64 = samples.iter().map(|s| s.0).sum();
    let e = [
        samples.iter().map(|s| s.0 * s.1).sum::<f64>() / wsum,
        samples.iter().map(|s| s.0 * s.2).sum::<f64>() / wsum,
    ];
    let se: Vec<f64> = (0..2)
        .map(|k| {
            let var: f64 = samples
                .iter()
                .map(|s| {
                    let y = if k == 0 { s.1 } else { s.2 };
                    (s.0 / wsum).powi(2) * (y - e[k]).powi(2)
                })
                .sum();
            var.sqrt()
        })
        .collect();
    let m = ParamManifold::circle(1.0, 2).unwrap();
    for o in [
        Box::new(quad(m.clone(), 512)) as Box<dyn SmoothedOracle>,
        Box::new(VonMisesOracle::new(&m, &Density::Uniform).unwrap()),
    ] {
        let s = o.score(&x, sigma).unwrap();
        for k in 0..2 {
            let mean = s[k] * sigma * sigma + x[k];
            assert!((mean - e[k]).abs() <= 3.0 * se[k] + 1e-12, "coord {k}: {mean} vs {} ± {}", e[k], se[k]);
        }
    }
}

#[test]
fn circle_hessian_at_origin() {
    let r: f64 = 1.3;
    let sigma: f64 = 0.4;
    let h = quad(ParamManifold::circle(r, 3).unwrap(), 128).hessian(&[0.0; 3], sigma).unwrap();
    let diag = (r * r / 2.0 - sigma * sigma) / sigma.powi(4);
    assert!((h[(0, 0)] - diag).abs() < 1e-9 * diag.abs());
    assert!((h[(1, 1)] - diag).abs() < 1e-9 * diag.abs());
    assert!((h[(2, 2)] + 1.0 / (sigma * sigma)).abs() < 1e-12);
    assert!(h[(0, 1)].abs() < 1e-9);
}

#[test]
fn score_is_gradient_of_log_density() {
    for (name, o) in all_oracles() {
        for sigma in [0.1, 0.5, 1.0] {
            for (i, x) in probes(o.as_ref(), sigma, 64, 5).into_iter().enumerate() {
                let s = o.score(&x, sigma).unwrap();
                let h = 1e-5 * sigma;
                let fd: Vec<f64> = (0..x.len())
                    .map(|k| {
                        let mut p = x.clone();
                        let mut q = x.clone();
                        p[k] += h;
                        q[k] -= h;
                        (o.log_density(&p, sigma).unwrap() - o.log_density(&q, sigma).unwrap()) / (2.0 * h)
                    })
                    .collect();
                let err = norm(&fd.iter().zip(&s).map(|(a, b)| a - b).collect::<Vec<_>>());
                assert!(
                    err <= 1e-5 * norm(&s) + 1e-6 / sigma,
                    "{name}, sigma {sigma}, probe {i}: err {err}, |s| {}",
                    norm(&s)
                );
            }
        }
    }
}

#[test]
fn hessian_is_jacobian_of_score() {
    for (name, o) in all_oracles() {
        for sigma in [0.1, 0.5, 1.0] {
            for x in probes(o.as_ref(), sigma, 16, 6) {
                let hess = o.hessian(&x, sigma).unwrap();
                let d = x.len();
                let h = 1e-4 * sigma;
                let mut fd = DMatrix::zeros(d, d);
                for k in 0..d {
                    let mut p = x.clone();
                    let mut q = x.clone();
                    p[k] += h;
                    q[k] -= h;
                    let sp = o.score(&p, sigma).unwrap();
                    let sq = o.score(&q, sigma).unwrap();
                    for i in 0..d {
                        fd[(i, k)] = (sp[i] - sq[i]) / (2.0 * h);
                    }
                }
                let err = (&hess - &fd).norm();
                assert!(
                    err <= 1e-4 * hess.norm() + 1e-6 / (sigma * sigma),
                    "{name}, sigma {sigma}: err {err}, |H| {}",
                    hess.norm()
                );
                assert!((&hess - hess.transpose()).amax() < 1e-9 * hess.amax().max(1.0));
            }
        }
    }
}

#[test]
fn smoothed_density_normalises() {
    // Importance sampling with proposal N(0, (rho^2 / d + sigma^2 + 0.5) I).
    for (name, o) in all_oracles() {
        let d = o.dim();
        if d > 4 {
            continue;
        }
        let sigma = 0.5;
        let rho = if o.radius().is_finite() { o.radius() } else { 2.0 };
        let s = (rho * rho / d as f64 + sigma * sigma + 0.5).sqrt();
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let n = 40_000;
        let mut total = 0.0;
        for _ in 0..n {
            let z: Vec<f64> = (0..d).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
            let log_q = -0.5 * d as f64 * (TAU * s * s).ln() - z.iter().map(|v| v * v).sum::<f64>() / (2.0 * s * s);
            total += (o.log_density(&z, sigma).unwrap() - log_q).exp();
        }
        let integral = total / n as f64;
        assert!((integral - 1.0).abs() < 0.02, "{name}: {integral}");
    }
}

#[test]
fn analytic_matches_quadrature() {
    let circle = ParamManifold::circle(1.2, 3).unwrap();
    let torus = ParamManifold::phase_torus([1.0, 0.5], [1, 3], 16).unwrap();
    let tilt = Tilt { axis: 1, concentration: 1.5, mean: 2.0, b: None, l: None };
    let cases = [
        (circle.clone(), Density::Uniform, 512),
        (circle, Density::Tilted(Tilt { axis: 0, ..tilt.clone() }), 512),
        (torus.clone(), Density::Uniform, 96),
        (torus.clone(), Density::Tilted(tilt), 96),
        (torus.downsampled().unwrap(), Density::Uniform, 96),
    ];
    for (m, density, res) in cases {
        let a = VonMisesOracle::new(&m, &density).unwrap();
        let q = ScoreOracle::new(TargetDistribution::new(m.clone(), density.clone(), res).unwrap());
        for sigma in [0.5, 1.0] {
            for x in probes(&a, sigma, 16, 8) {
                let (sa, sq) = (a.score(&x, sigma).unwrap(), q.score(&x, sigma).unwrap());
                let err = norm(&sa.iter().zip(&sq).map(|(u, v)| u - v).collect::<Vec<_>>());
                assert!(err < 1e-8 * (1.0 + norm(&sa)), "{:?} {density:?}: {err}", m.kind);
                let (la, lq) = (a.log_density(&x, sigma).unwrap(), q.log_density(&x, sigma).unwrap());
                assert!((la - lq).abs() < 1e-8, "{la} vs {lq}");
                let (ha, hq) = (a.hessian(&x, sigma).unwrap(), q.hessian(&x, sigma).unwrap());
                assert!((&ha - &hq).amax() < 1e-7 * (1.0 + ha.amax()));
            }
        }
    }
}

#[test]
fn zero_padding_factorises() {
    let sigma = 0.3;
    let small = quad(ParamManifold::circle(1.0, 2).unwrap(), 64);
    let big = quad(ParamManifold::circle(1.0, 7).unwrap(), 64);
    let x = [0.4, -0.9, 0.2, -0.1, 0.5, 0.0, 1.0];
    let s2 = small.score(&x[..2], sigma).unwrap();
    let s7 = big.score(&x, sigma).unwrap();
    assert_eq!(s2[..], s7[..2]);
    for k in 2..7 {
        assert_eq!(s7[k], -x[k] / (sigma * sigma));
    }
}

#[test]
fn prop1_checks_across_schedule() {
    let oracles: Vec<(&str, Box<dyn SmoothedOracle>)> = vec![
        ("circle", Box::new(quad(ParamManifold::circle(1.0, 3).unwrap(), 256))),
        ("sphere", Box::new(quad(ParamManifold::sphere(2, 1.0, 3).unwrap(), 48))),
        ("torus", Box::new(quad(ParamManifold::embedded_torus(0.5, 1.5, 3).unwrap(), 32))),
        (
            "phase torus",
            Box::new(
                VonMisesOracle::new(&ParamManifold::phase_torus([1.0, 1.0], [1, 3], 16).unwrap(), &Density::Uniform)
                    .unwrap(),
            ),
        ),
    ];
    for (name, o) in &oracles {
        for sigma in SCHEDULE {
            let l = lipschitz_check(o.as_ref(), sigma, 64, 3).unwrap();
            assert!(l.holds, "{name} sigma {sigma}: {l:?}");
            let d = dissipativity_check(o.as_ref(), sigma, 64, 3).unwrap();
            assert!(d.holds, "{name} sigma {sigma}: {d:?}");
        }
    }
    let circle = quad(ParamManifold::circle(1.0, 2).unwrap(), 256);
    let r = lipschitz_check(&circle, 0.5, 64, 1).unwrap();
    assert_eq!(r.bound, 16.0);
    assert!(r.holds);
    let d = dissipativity_check(&circle, 0.3, 256, 1).unwrap();
    assert!(d.holds);
}

#[test]
fn dissipativity_margin_at_origin() {
    let o = quad(ParamManifold::sphere(2, 1.5, 3).unwrap(), 24);
    let sigma: f64 = 0.4;
    // One ball probe of radius zero is the origin.
    let r = dissipativity_check_in(&o, sigma, 1, 0.0, 0).unwrap();
    assert!((r.min_margin - 1.5 * 1.5 / (2.0 * sigma * sigma)).abs() < 1e-12);
    assert!(r.holds);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn point_mass_dissipativity_identity(
        x in prop::collection::vec(-5.0f64..5.0, 3),
        y in prop::collection::vec(-2.0f64..2.0, 3),
        sigma in 0.05f64..2.0,
    ) {
        let o = ScoreOracle::point_mass(&y).unwrap();
        let s = o.score(&x, sigma).unwrap();
        let x2: f64 = x.iter().map(|v| v * v).sum();
        let y2: f64 = y.iter().map(|v| v * v).sum();
        let inner: f64 = s.iter().zip(&x).map(|(a, b)| -a * b).sum();
        let margin = inner - x2 / (2.0 * sigma * sigma) + y2 / (2.0 * sigma * sigma);
        prop_assert!(margin >= -1e-8 * (1.0 + x2 / (sigma * sigma)));
    }

    #[test]
    fn quadrature_score_is_finite_near_support(theta in 0.0f64..6.28, offset in -0.5f64..0.5, sigma in 0.01f64..1.0) {
        let o = quad(ParamManifold::circle(1.0, 2).unwrap(), 64);
        let x = [(1.0 + offset) * theta.cos(), (1.0 + offset) * theta.sin()];
        let s = o.score(&x, sigma).unwrap();
        prop_assert!(s.iter().all(|v| v.is_finite()));
    }
}
