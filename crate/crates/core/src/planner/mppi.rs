//! Sampling, softmax weighting and the weighted-average control update.

use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ControlSequence, PlannerConfig, PlannerError};
use crate::dynamics::Vec2;
use crate::sigma::psd_cholesky;

/// Lower factor `L` with `L Lᵀ = Σ_ε`.
pub fn noise_factor(cfg: &PlannerConfig) -> Result<Matrix2<f64>, PlannerError> {
    psd_cholesky(&cfg.noise_matrix())
        .map_err(|e| PlannerError::Config(format!("noise_covariance: {e}")))
}

/// `Σ_ε⁻¹`, or the pseudo-inverse when `Σ_ε` is singular.
pub fn noise_precision(cfg: &PlannerConfig) -> Matrix2<f64> {
    let s = cfg.noise_matrix();
    s.try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .unwrap_or_else(|| s.pseudo_inverse(1e-12).unwrap_or_else(|_| Matrix2::zeros()))
}

/// Draws `M` sequences of `H` perturbations from `N(0, Σ_ε)`.
///
/// Draws are taken sample by sample, step by step, two standard normals each.
pub fn sample_perturbations<R: Rng + ?Sized>(
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<Vec<ControlSequence>, PlannerError> {
    let l = noise_factor(cfg)?;
    Ok(draw_with_factor(&l, cfg.samples, cfg.horizon, rng))
}

pub(crate) fn draw_with_factor<R: Rng + ?Sized>(
    l: &Matrix2<f64>,
    samples: usize,
    horizon: usize,
    rng: &mut R,
) -> Vec<ControlSequence> {
    (0..samples)
        .map(|_| {
            ControlSequence(
                (0..horizon)
                    .map(|_| {
                        let z = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                        l * z
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Unnormalized weights `exp(-(S_m - β)/λ)` with `β = min S`.
pub fn mppi_weights(costs: &[f64], temperature: f64) -> Vec<f64> {
    let beta = costs.iter().copied().fold(f64::INFINITY, f64::min);
    costs
        .iter()
        .map(|s| (-(s - beta) / temperature).exp())
        .collect()
}

/// `Σ w / max w`, between 1 and `M`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let max = weights.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        weights.iter().sum::<f64>() / max
    } else {
        0.0
    }
}

/// `v⁺ = Σ w_m u^m / Σ w_m`. If every weight underflows to zero the
/// sequence of the first largest-weight sample is returned.
pub fn update_control(weights: &[f64], sequences: &[ControlSequence]) -> ControlSequence {
    let total: f64 = weights.iter().sum();
    let horizon = sequences.first().map_or(0, ControlSequence::len);
    if !(total > 0.0) || !total.is_finite() {
        let best = weights
            .iter()
            .enumerate()
            .fold(0, |b, (i, w)| if *w > weights[b] { i } else { b });
        return sequences.get(best).cloned().unwrap_or_else(|| ControlSequence::zeros(horizon));
    }
    let mut out = vec![Vec2::zeros(); horizon];
    for (w, seq) in weights.iter().zip(sequences) {
        let w = w / total;
        if w == 0.0 {
            continue;
        }
        for (o, u) in out.iter_mut().zip(&seq.0) {
            *o += u * w;
        }
    }
    ControlSequence(out)
}

/// Falls back to the minimum-cost sample when the weights are all zero.
pub(crate) fn update_or_best(weights: &[f64], costs: &[f64], sequences: &[ControlSequence]) -> ControlSequence {
    if weights.iter().any(|w| *w > 0.0) {
        return update_control(weights, sequences);
    }
    let best = costs
        .iter()
        .enumerate()
        .fold(0, |b, (i, c)| if *c < costs[b] { i } else { b });
    sequences[best].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(v: &[[f64; 2]]) -> ControlSequence {
        ControlSequence(v.iter().map(|u| Vec2::new(u[0], u[1])).collect())
    }

    #[test]
    fn weights_examples() {
        assert_eq!(mppi_weights(&[3.0, 3.0, 3.0], 0.7), vec![1.0; 3]);
        let w = mppi_weights(&[0.0, 2.0], 2.0);
        assert_eq!(w[0], 1.0);
        assert_relative_eq!(w[1], (-1.0f64).exp(), epsilon = 1e-15);
        let w = mppi_weights(&[5.0, 1.0, 9.0], 1.0);
        assert_eq!(w[1], 1.0);
        assert!(w[0] < 1.0 && w[2] < w[0]);
    }

    #[test]
    fn update_examples() {
        let a = seq(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = seq(&[[3.0, 0.0], [1.0, 0.0]]);
        assert_eq!(update_control(&[0.4], &[a.clone()]), a);
        assert_eq!(update_control(&[0.3, 0.3], &[a.clone(), b.clone()]), seq(&[[2.0, 1.0], [2.0, 2.0]]));
        let e = (-1.0f64).exp();
        let v = update_control(&[1.0, e], &[a.clone(), b.clone()]);
        for t in 0..2 {
            let expected = (a.0[t] + b.0[t] * e) / (1.0 + e);
            assert_relative_eq!(v.0[t], expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn all_zero_weights_fall_back_to_best() {
        let a = seq(&[[1.0, 0.0]]);
        let b = seq(&[[2.0, 0.0]]);
        let v = update_or_best(&[0.0, 0.0], &[5.0, 1.0], &[a, b.clone()]);
        assert_eq!(v, b);
        let w = mppi_weights(&[0.0, 1e6], 1.0);
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn effective_size() {
        assert_eq!(effective_sample_size(&[1.0; 7]), 7.0);
        assert_eq!(effective_sample_size(&[1.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn zero_covariance_gives_zero_perturbations() {
        let cfg = PlannerConfig {
            noise_covariance: [[0.0, 0.0], [0.0, 0.0]],
            samples: 4,
            horizon: 3,
            ..Default::default()
        };
        let eps = sample_perturbations(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(eps.len(), 4);
        assert!(eps.iter().all(|s| s.len() == 3 && s.0.iter().all(|u| *u == Vec2::zeros())));
    }

    #[test]
    fn perturbations_are_reproducible_and_have_the_right_variance() {
        let cfg = PlannerConfig {
            noise_covariance: [[4.0, 1.0], [1.0, 2.0]],
            samples: 1000,
            horizon: 100,
            ..Default::default()
        };
        let a = sample_perturbations(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_perturbations(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let n = (cfg.samples * cfg.horizon) as f64;
        let mut cov = Matrix2::zeros();
        for s in &a {
            for e in &s.0 {
                cov += e * e.transpose();
            }
        }
        cov /= n;
        let target = cfg.noise_matrix();
        for (c, t) in cov.iter().zip(target.iter()) {
            assert!((c - t).abs() <= 0.05 * t.abs(), "{cov} vs {target}");
        }
    }

    #[test]
    fn singular_noise_has_a_pseudo_inverse() {
        let cfg = PlannerConfig { noise_covariance: [[2.0, 0.0], [0.0, 0.0]], ..Default::default() };
        let p = noise_precision(&cfg);
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-12);
        assert_eq!(p[(1, 1)], 0.0);
        let cfg = PlannerConfig::default();
        assert_relative_eq!(noise_precision(&cfg)[(1, 1)], 0.25);
    }
}
