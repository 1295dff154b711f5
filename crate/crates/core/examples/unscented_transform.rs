//! Sigma points of a 2-D Gaussian, their moments, and one pass through a
//! nonlinear map compared with sampling.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ecut_mppi::sigma::{empirical_moments, generate_ut_points, GaussianMoments, SigmaPointSet, UtParams};

fn main() {
    let m = GaussianMoments::new(Vector2::new(1.0, 0.5), Matrix2::new(0.3, 0.1, 0.1, 0.2)).unwrap();
    let set = generate_ut_points(&m, UtParams::default()).unwrap();
    for (p, w) in set.iter() {
        println!("point ({:+.4}, {:+.4})  weight {:+.4}", p[0], p[1], w);
    }
    let back = empirical_moments(&set);
    println!("recovered mean {:?}", back.mean.as_slice());
    println!("recovered covariance {:?}", back.covariance.as_slice());

    // polar-to-Cartesian style map
    let f = |x: &Vector2<f64>| Vector2::new(x[0] * x[1].cos(), x[0] * x[1].sin());
    let mapped = SigmaPointSet::new(set.points().iter().map(f).collect(), set.weights().to_vec()).unwrap();
    let ut = empirical_moments(&mapped);

    let l = m.covariance.cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 200_000;
    let mut mean = Vector2::zeros();
    for _ in 0..n {
        let z = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        mean += f(&(m.mean + l * z));
    }
    mean /= n as f64;
    println!("mapped mean: unscented {:?}, sampled {:?}", ut.mean.as_slice(), mean.as_slice());
}
