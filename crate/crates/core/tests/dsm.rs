use manifold_langevin::dsm::{
    dsm_empirical_loss, dsm_loss_with_noise, dsm_population_loss, fit_score_model, perturb_oracle,
    score_error, FeatureConfig,
};
use manifold_langevin::geometry::ParamManifold;
use manifold_langevin::target::{
    Density, FnScore, GaussianOracle, ScoreOracle, TargetDistribution, VonMisesOracle,
};
use manifold_langevin::{Error, PointCloud, ScoreField, SmoothedOracle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_data(n: usize, d: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    PointCloud::new(d, data).unwrap()
}

fn zero(d: usize) -> impl ScoreField {
    FnScore::new(d, |_: &[f64], _: f64, out: &mut [f64]| out.fill(0.0))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn zero_model_loss_concentrates() {
    let data = gaussian_data(10_000, 2, 1);
    let loss = dsm_empirical_loss(&zero(2), &data, 1.0, 7).unwrap();
    assert!((loss - 2.0).abs() < 0.1, "{loss}");
}

#[test]
fn optimal_gaussian_loss() {
    // E|s*(X + sigma xi) + xi/sigma|^2 = d / (sigma^2 (1 + sigma^2)).
    let data = gaussian_data(100_000, 2, 2);
    let s = FnScore::new(2, |y: &[f64], sigma: f64, out: &mut [f64]| {
        for (o, v) in out.iter_mut().zip(y) {
            *o = -v / (1.0 + sigma * sigma);
        }
    });
    let loss = dsm_empirical_loss(&s, &data, 1.0, 3).unwrap();
    assert!((loss - 1.0).abs() < 0.05, "{loss}");
}

#[test]
fn explicit_noise_plug_in() {
    let data = PointCloud::from_rows(&[[0.0, 0.0]]).unwrap();
    assert_eq!(dsm_loss_with_noise(&zero(2), &data, 1.0, &[1.0, 0.0]).unwrap(), 1.0);
}

#[test]
fn linear_fit_recovers_gaussian_score() {
    let data = gaussian_data(100_000, 2, 4);
    let model = fit_score_model(&data, &[1.0], &FeatureConfig::linear_only(), 1e-6, 5).unwrap();
    let w = model.coefficient_matrix(1.0).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { -0.5 } else { 0.0 };
            assert!((w[(i, j)] - want).abs() < 0.01, "W[{i},{j}] = {}", w[(i, j)]);
        }
    }
}

#[test]
fn point_mass_data_gives_point_mass_score() {
    let y0 = [0.7, -1.2];
    let data = PointCloud::from_rows(&vec![y0; 2000]).unwrap();
    let model = fit_score_model(&data, &[1.0], &FeatureConfig::affine(), 0.0, 1).unwrap();
    for probe in [[0.8, -1.0], [0.5, -1.5], [0.7, -1.2]] {
        let s = model.score(&probe, 1.0).unwrap();
        for k in 0..2 {
            let want = y0[k] - probe[k];
            assert!((s[k] - want).abs() <= 0.05 * want.abs().max(0.1));
        }
    }
}

#[test]
fn underdetermined_fit_errors() {
    let data = gaussian_data(3, 2, 9);
    let err = fit_score_model(&data, &[1.0], &FeatureConfig::rbf(50), 0.0, 1).unwrap_err();
    assert!(matches!(err, Error::Singular(_)));
}

#[test]
fn population_loss_examples() {
    let m = ParamManifold::circle(1.0, 2).unwrap();
    let o = VonMisesOracle::new(&m, &Density::Uniform).unwrap();
    let exact = dsm_population_loss(&o, &o, 0.5, 500, 1).unwrap();
    assert_eq!(exact.mean, 0.0);
    let c = [0.3, -0.4];
    let shifted = FnScore::new(2, |y: &[f64], s: f64, out: &mut [f64]| {
        let base = VonMisesOracle::new(&ParamManifold::circle(1.0, 2).unwrap(), &Density::Uniform).unwrap();
        base.score_into(y, s, out).unwrap();
        out[0] += 0.3;
        out[1] -= 0.4;
    });
    let l = dsm_population_loss(&shifted, &o, 0.5, 500, 1).unwrap();
    let want = c[0] * c[0] + c[1] * c[1];
    assert!((l.mean - want).abs() <= 3.0 * l.std_error + 1e-12);
    assert!((score_error(&shifted, &o, 0.5, 500, 1).unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn rbf_fit_improves_with_data() {
    let m = ParamManifold::circle(1.0, 2).unwrap();
    let o = VonMisesOracle::new(&m, &Density::Uniform).unwrap();
    let sigma = 0.5;
    let mut small = Vec::new();
    let mut large = Vec::new();
    for seed in 0..5 {
        for (n, bucket) in [(1_000, &mut small), (10_000, &mut large)] {
            let data = o.sample_prior(n, 100 + seed).unwrap();
            let model = fit_score_model(&data, &[sigma], &FeatureConfig::rbf(24), 1e-6, seed).unwrap();
            bucket.push(dsm_population_loss(&model, &o, sigma, 4000, 55).unwrap().mean);
        }
    }
    let (a, b) = (median(small), median(large));
    assert!(b <= a, "median population loss {a} -> {b}");
}

#[test]
fn coefficient_error_shrinks_like_inverse_root_n() {
    let mut scaled = Vec::new();
    for n in [1_000, 10_000, 100_000] {
        let mut sq = 0.0;
        for seed in 0..5 {
            let data = gaussian_data(n, 2, 1000 + seed);
            let model = fit_score_model(&data, &[1.0], &FeatureConfig::linear_only(), 1e-9, seed).unwrap();
            let w = model.coefficient_matrix(1.0).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { -0.5 } else { 0.0 };
                    sq += (w[(i, j)] - want).powi(2);
                }
            }
        }
        scaled.push((sq / 20.0).sqrt() * (n as f64).sqrt());
    }
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi / lo < 4.0, "sqrt(n)-scaled errors {scaled:?}");
}

#[test]
fn perturbation_examples() {
    let m = ParamManifold::circle(1.0, 2).unwrap();
    let base = VonMisesOracle::new(&m, &Density::Uniform).unwrap();
    let zero = perturb_oracle(base.clone(), 0.0, 0.5, 3).unwrap();
    let probes = base.sample_prior(100, 8).unwrap();
    for p in probes.points() {
        let a = base.score(p, 0.5).unwrap();
        let b = zero.score(p, 0.5).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
    let half = perturb_oracle(base.clone(), 0.5, 0.5, 3).unwrap();
    let err = score_error(&half, &base, 0.5, 4000, 11).unwrap();
    assert!((0.4..=0.6).contains(&err), "{err}");
    let again = perturb_oracle(base.clone(), 0.5, 0.5, 3).unwrap();
    assert_eq!(half.field(&[0.3, 0.2]), again.field(&[0.3, 0.2]));
    let other = perturb_oracle(base, 0.5, 0.5, 4).unwrap();
    assert_ne!(half.field(&[0.3, 0.2]), other.field(&[0.3, 0.2]));
}

#[test]
fn perturbation_composes_on_all_targets() {
    let circle = ParamManifold::circle(1.0, 3).unwrap();
    let torus = ParamManifold::phase_torus([1.0, 0.5], [1, 3], 16).unwrap();
    let oracles: Vec<Box<dyn SmoothedOracle>> = vec![
        Box::new(VonMisesOracle::new(&circle, &Density::Uniform).unwrap()),
        Box::new(VonMisesOracle::new(&torus, &Density::Uniform).unwrap()),
        Box::new(ScoreOracle::new(
            TargetDistribution::uniform(ParamManifold::sphere(2, 1.0, 3).unwrap(), 32).unwrap(),
        )),
        Box::new(ScoreOracle::new(
            TargetDistribution::uniform(ParamManifold::embedded_torus(0.5, 1.5, 3).unwrap(), 32).unwrap(),
        )),
        Box::new(GaussianOracle::standard(2)),
    ];
    for (k, o) in oracles.iter().enumerate() {
        for eps in [0.1, 0.5, 1.0] {
            let p = perturb_oracle(o.as_ref(), eps, 0.5, 21).unwrap();
            let err = score_error(&p, o.as_ref(), 0.5, 4000, 5).unwrap();
            assert!(err >= 0.8 * eps && err <= 1.2 * eps, "oracle {k}, eps {eps}: {err}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fitted_loss_beats_zero_model(seed in 0u64..1000, n in 50usize..300, sigma in 0.1f64..2.0) {
        let data = gaussian_data(n, 2, seed).map_points(2, |p, out| {
            out[0] = p[0] * 2.0 + 1.0;
            out[1] = p[0] * p[1];
        }).unwrap();
        let model = fit_score_model(&data, &[sigma], &FeatureConfig::rbf(8), 1e-8, seed).unwrap();
        let fitted = dsm_empirical_loss(&model, &data, sigma, seed).unwrap();
        let baseline = dsm_empirical_loss(&zero(2), &data, sigma, seed).unwrap();
        prop_assert!(fitted <= baseline * (1.0 + 1e-9));
    }
}
