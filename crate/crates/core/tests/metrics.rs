use manifold_langevin::metrics::{
    decay_fit, divergence_detect, mixing_time, solve_assignment, w2_exact, w2_sliced, Estimator, MetricSeries,
};
use manifold_langevin::PointCloud;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_cloud(n: usize, d: usize, rng: &mut ChaCha20Rng) -> PointCloud {
    let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
    PointCloud::new(d, data).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn matching_cost(a: &PointCloud, b: &PointCloud, perm: &[usize]) -> f64 {
    let total: f64 = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| a.point(i).iter().zip(b.point(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum();
    (total / perm.len() as f64).sqrt()
}

#[test]
fn exact_matches_brute_force() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for trial in 0..200 {
        let n = 1 + trial % 7;
        let d = 1 + trial % 3;
        let a = random_cloud(n, d, &mut rng);
        let b = random_cloud(n, d, &mut rng);
        let brute = permutations(n).iter().map(|p| matching_cost(&a, &b, p)).fold(f64::INFINITY, f64::min);
        let got = w2_exact(&a, &b).unwrap();
        assert!((got - brute).abs() < 1e-9, "trial {trial}: {got} vs {brute}");
    }
}

#[test]
fn assignment_small_example() {
    // Best: row 0 -> col 1, row 1 -> col 0, row 2 -> col 2.
    let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
    let (perm, total) = solve_assignment(3, &cost).unwrap();
    assert_eq!(perm, vec![1, 0, 2]);
    assert!((total - 5.0).abs() < 1e-12);
}

#[test]
fn metric_axioms() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for _ in 0..50 {
        let n = rng.random_range(2..20);
        let a = random_cloud(n, 2, &mut rng);
        let b = random_cloud(n, 2, &mut rng);
        let c = random_cloud(n, 2, &mut rng);
        let ab = w2_exact(&a, &b).unwrap();
        assert_eq!(ab, w2_exact(&b, &a).unwrap());
        let ac = w2_exact(&a, &c).unwrap();
        let cb = w2_exact(&c, &b).unwrap();
        assert!(ab <= ac + cb + 1e-9);
        assert_eq!(w2_exact(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn solver_beats_random_matchings() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let a = random_cloud(40, 3, &mut rng);
    let b = random_cloud(40, 3, &mut rng);
    let w = w2_exact(&a, &b).unwrap();
    let mut perm: Vec<usize> = (0..40).collect();
    for _ in 0..100 {
        perm.shuffle(&mut rng);
        assert!(matching_cost(&a, &b, &perm) >= w - 1e-12);
    }
}

#[test]
fn translation_behaviour() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let a = random_cloud(64, 2, &mut rng);
    let b = random_cloud(64, 2, &mut rng);
    let v = [0.7f64, -1.9];
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let base = w2_exact(&a, &b).unwrap();
    let both = w2_exact(&a.translated(&v).unwrap(), &b.translated(&v).unwrap()).unwrap();
    assert!((both - base).abs() < 1e-12);
    let one = w2_exact(&a.translated(&v).unwrap(), &b).unwrap();
    assert!((one - base).abs() <= norm + 1e-12);
    let selfshift = w2_exact(&a.translated(&v).unwrap(), &a).unwrap();
    assert!((selfshift - norm).abs() < 1e-12);
}

#[test]
fn sliced_tracks_exact_on_gaussians() {
    for seed in 0..5 {
        let mut rng = ChaCha20Rng::seed_from_u64(100 + seed);
        let a = random_cloud(512, 2, &mut rng);
        let b = random_cloud(512, 2, &mut rng);
        for shift in [0.5, 1.0, 2.0] {
            let b = b.translated(&[shift, 0.0]).unwrap();
            let e = w2_exact(&a, &b).unwrap();
            let s = w2_sliced(&a, &b, 128, seed).unwrap();
            assert!((s - e).abs() <= 0.25 * e, "seed {seed}: sliced {s}, exact {e}");
        }
    }
}

#[test]
fn noisy_decay_rate() {
    let mut rates = Vec::new();
    for seed in 0..10 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let series: Vec<(f64, f64)> = (0..=40)
            .map(|i| {
                let t = 0.5 * i as f64;
                let z: f64 = StandardNormal.sample(&mut rng);
                (t, (1.5 * (-0.3 * t).exp() + 0.2) * (1.0 + 0.01 * z))
            })
            .collect();
        let fit = decay_fit(&series).unwrap();
        assert!(fit.converged);
        rates.push(fit.rate);
    }
    assert!(rates.iter().all(|r| (0.25..=0.35).contains(r)), "{rates:?}");
}

#[test]
fn noisy_mixing_crossing() {
    // Noiseless crossing of 2 e^{-0.4 t} + 0.1 through 0.5 is at ln(5) / 0.4.
    let t_cross = (5f64).ln() / 0.4;
    let clean = (t_cross).ceil();
    for seed in 0..10 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let series: Vec<(f64, f64)> = (0..30)
            .map(|i| {
                let t = i as f64;
                let z: f64 = StandardNormal.sample(&mut rng);
                (t, (2.0 * (-0.4 * t).exp() + 0.1) * (1.0 + 0.02 * z))
            })
            .collect();
        let got = mixing_time(&series, 0.5).unwrap().unwrap();
        assert!((got - clean).abs() <= 1.0, "seed {seed}: {got} vs {clean}");
    }
}

#[test]
fn divergence_on_synthetic_shapes() {
    let falling: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 2.0 / (1.0 + i as f64))).collect();
    let d = divergence_detect(&falling).unwrap();
    assert!(!d.diverged && d.degradation <= 1.0);
    let v: Vec<(f64, f64)> = (0..21).map(|i| (i as f64, 1.0 + 0.05 * (i as f64 - 10.0).abs())).collect();
    let d = divergence_detect(&v).unwrap();
    assert_eq!(d.t_star, 10.0);
    assert!(d.diverged && (d.degradation - 1.475 / (3.1 / 3.0)).abs() < 1e-9);
}

#[test]
fn series_csv() {
    let s = MetricSeries { estimator: Estimator::Exact, floor: 0.1, seed: 3, points: vec![(0.0, 1.0), (1.0, 0.5)] };
    let mut buf = Vec::new();
    MetricSeries::write_csv_header(&mut buf).unwrap();
    s.write_csv_rows(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,estimator,value,floor,seed");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("1,exact,0.5,0.1,3"));
}

proptest! {
    #[test]
    fn fit_recovers_own_model(rate in 0.05f64..2.0, amp in 0.1f64..10.0, floor in 0.0f64..2.0) {
        let series: Vec<(f64, f64)> = (0..60).map(|i| {
            let t = i as f64 * 3.0 / (rate * 60.0);
            (t, amp * (-rate * t).exp() + floor)
        }).collect();
        let fit = decay_fit(&series).unwrap();
        prop_assert!((fit.rate - rate).abs() <= 0.01 * rate);
        prop_assert!((fit.amplitude - amp).abs() <= 0.01 * amp);
        prop_assert!((fit.floor - floor).abs() <= 0.01 * floor.max(0.01 * amp));
    }

    #[test]
    fn one_dimensional_sliced_is_exact(xs in prop::collection::vec(-5.0f64..5.0, 2..30), shift in -2.0f64..2.0) {
        let a = PointCloud::new(1, xs.clone()).unwrap();
        let b = PointCloud::new(1, xs.iter().rev().map(|x| x * 0.5 + shift).collect()).unwrap();
        let e = w2_exact(&a, &b).unwrap();
        let s = w2_sliced(&a, &b, 3, 1).unwrap();
        prop_assert!((e - s).abs() < 1e-9);
    }
}
