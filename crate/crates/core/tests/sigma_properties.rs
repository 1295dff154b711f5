use nalgebra::{SMatrix, SVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ecut_mppi::sigma::{
    compress, ecut_step, empirical_moments, expand_sigma_points, generate_ut_points, GaussianMoments, SigmaPointSet,
    UtParams,
};

fn rel(a: f64, scale: f64) -> f64 {
    a / scale.max(1e-300)
}

fn random_moments<const D: usize>(seed: u64) -> GaussianMoments<D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = SVector::<f64, D>::from_fn(|_, _| 3.0 * rng.sample::<f64, _>(StandardNormal));
    let a = SMatrix::<f64, D, D>::from_fn(|_, _| rng.sample(StandardNormal));
    GaussianMoments::new(mean, a * a.transpose()).unwrap()
}

fn round_trip_error<const D: usize>(seed: u64) -> f64 {
    let m = random_moments::<D>(seed);
    let back = empirical_moments(&generate_ut_points(&m, UtParams::default()).unwrap());
    rel((back.mean - m.mean).norm(), m.mean.norm()).max(rel((back.covariance - m.covariance).norm(), m.covariance.norm()))
}

/// A random weighted set whose weights sum to one and may be negative.
fn random_set<const D: usize>(seed: u64, len: usize) -> SigmaPointSet<D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<SVector<f64, D>> = (0..len)
        .map(|_| SVector::<f64, D>::from_fn(|_, _| rng.sample(StandardNormal)))
        .collect();
    let mut weights: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    SigmaPointSet::new(points, weights).unwrap()
}

proptest! {
    #[test]
    fn ut_points_reproduce_the_moments(seed in any::<u64>(), dim in 1usize..=6) {
        let e = match dim {
            1 => round_trip_error::<1>(seed),
            2 => round_trip_error::<2>(seed),
            3 => round_trip_error::<3>(seed),
            4 => round_trip_error::<4>(seed),
            5 => round_trip_error::<5>(seed),
            _ => round_trip_error::<6>(seed),
        };
        prop_assert!(e <= 1e-8, "relative error {e}");
    }

    #[test]
    fn ut_weights_sum_to_one_and_centre_is_the_mean(seed in any::<u64>()) {
        let m = random_moments::<3>(seed);
        let set = generate_ut_points(&m, UtParams::default()).unwrap();
        prop_assert_eq!(set.len(), 7);
        prop_assert!((set.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert_eq!(set.points()[0], m.mean);
    }

    #[test]
    fn compression_preserves_moments(seed in any::<u64>(), len in 3usize..40) {
        let set = random_set::<2>(seed, len);
        let before = empirical_moments(&set);
        let out = compress(&set, UtParams::default()).unwrap();
        let after = empirical_moments(&out);
        prop_assert_eq!(out.len(), 5);
        prop_assert!((out.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(rel((after.mean - before.mean).norm(), before.mean.norm().max(1.0)) <= 1e-8);
        prop_assert!(rel((after.covariance - before.covariance).norm(), before.covariance.norm()) <= 1e-8);
    }

    #[test]
    fn affine_maps_are_propagated_exactly(seed in any::<u64>(), noise in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = SMatrix::<f64, 2, 2>::from_fn(|_, _| rng.sample(StandardNormal));
        let b = SVector::<f64, 2>::from_fn(|_, _| rng.sample(StandardNormal));
        let q = SMatrix::<f64, 2, 2>::identity() * noise;
        let m = random_moments::<2>(seed ^ 1);
        let map = |x: &SVector<f64, 2>| GaussianMoments::new(a * x + b, q).unwrap();
        let set = generate_ut_points(&m, UtParams::default()).unwrap();
        let out = empirical_moments(&ecut_step(&map, &set, UtParams::default()).unwrap());
        let mean = a * m.mean + b;
        let cov = a * m.covariance * a.transpose() + q;
        prop_assert!(rel((out.mean - mean).norm(), mean.norm().max(1.0)) <= 1e-8);
        prop_assert!(rel((out.covariance - cov).norm(), cov.norm()) <= 1e-8);
    }

    #[test]
    fn expansion_multiplies_counts_and_keeps_unit_mass(seed in any::<u64>(), len in 1usize..12) {
        let set = random_set::<2>(seed, len);
        let map = |x: &SVector<f64, 2>| GaussianMoments::isotropic(x * 0.5, 0.1);
        let out = expand_sigma_points(&map, &set, UtParams::default()).unwrap();
        prop_assert_eq!(out.len(), len * 5);
        prop_assert!((out.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let stepped = ecut_step(&map, &set, UtParams::default()).unwrap();
        prop_assert_eq!(stepped.len(), 5);
    }
}

#[test]
fn one_nonlinear_step_agrees_with_monte_carlo() {
    // x ↦ N(sin x₀ + x₁², 0.2 I + diag(x₀²))
    let map = |x: &SVector<f64, 2>| {
        let mean = SVector::<f64, 2>::new(x[0].sin() + 0.3 * x[1] * x[1], x[0] + 0.5 * x[1]);
        let cov = SMatrix::<f64, 2, 2>::from_diagonal(&SVector::<f64, 2>::new(0.2 + x[0] * x[0] * 0.1, 0.2));
        GaussianMoments::new(mean, cov).unwrap()
    };
    let m0 = GaussianMoments::new(
        SVector::<f64, 2>::new(0.3, -0.2),
        SMatrix::<f64, 2, 2>::new(0.05, 0.01, 0.01, 0.04),
    )
    .unwrap();
    let set = generate_ut_points(&m0, UtParams::default()).unwrap();
    let ut = empirical_moments(&ecut_step(&map, &set, UtParams::default()).unwrap());

    let l = m0.covariance.cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 1_000_000;
    let (mut s1, mut s2) = (SVector::<f64, 2>::zeros(), SVector::<f64, 2>::zeros());
    for _ in 0..n {
        let z0 = SVector::<f64, 2>::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let x = m0.mean + l * z0;
        let g = map(&x);
        let z1 = SVector::<f64, 2>::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let y = g.mean + g.covariance.map(f64::sqrt) * z1 - ut.mean;
        s1 += y;
        s2 += y.component_mul(&y);
    }
    let off = s1 / n as f64;
    for k in 0..2 {
        let var = s2[k] / n as f64 - off[k] * off[k];
        let se = (var / n as f64).sqrt();
        assert!(off[k].abs() <= 3.0 * se, "axis {k}: {} vs se {se}", off[k]);
    }
}
