//! Sigma-point sets and the expansion-compression unscented transform.
//!
//! A [`SigmaPointSet`] is a weighted particle representation of a distribution.
//! [`generate_ut_points`] builds the classical `2n + 1` point set whose empirical
//! moments equal a given mean and covariance. Pushing a set through a
//! [`StochasticMap`] turns every point into its own Gaussian, which
//! [`expand_sigma_points`] represents by a child set per parent; [`compress`]
//! moment-matches the enlarged set back down to `2n + 1` points so the
//! particle count stays fixed over a horizon.
//!
//! All functions here are pure and deterministic.

mod cholesky;

pub use cholesky::{psd_cholesky, CholeskyError};

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

pub type Vector<const D: usize> = SVector<f64, D>;
pub type Matrix<const D: usize> = SMatrix<f64, D, D>;

/// Tolerance on `Σ wᵢ = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Tolerance on covariance asymmetry.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Diagonal load added once when a compressed covariance fails factorization.
pub const PSD_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SigmaError {
    #[error("covariance is not positive semi-definite (pivot {pivot} = {value:e}): {matrix}")]
    NotPositiveSemiDefinite {
        pivot: usize,
        value: f64,
        matrix: String,
    },
    #[error("covariance is not symmetric (max asymmetry {asymmetry:e}): {matrix}")]
    NotSymmetric { asymmetry: f64, matrix: String },
    #[error("invalid sigma point set: {0}")]
    InvalidSet(String),
    #[error("invalid unscented spread: n + kappa = {0} must be positive")]
    InvalidSpread(f64),
    #[error("expanding parent point {parent}: {source}")]
    Expansion {
        parent: usize,
        #[source]
        source: Box<SigmaError>,
    },
}

fn format_matrix<const D: usize>(m: &Matrix<D>) -> String {
    let rows: Vec<String> = (0..D)
        .map(|i| {
            let row: Vec<String> = (0..D).map(|j| format!("{:e}", m[(i, j)])).collect();
            format!("[{}]", row.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

/// Spread parameter of the unscented transform.
///
/// `kappa = None` selects the classical `3 - n`, which matches the fourth
/// moments of a Gaussian. For `n > 3` that makes the centre weight negative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UtParams {
    pub kappa: Option<f64>,
}

impl UtParams {
    pub fn with_kappa(kappa: f64) -> Self {
        Self { kappa: Some(kappa) }
    }

    pub fn kappa_for(&self, n: usize) -> f64 {
        self.kappa.unwrap_or(3.0 - n as f64)
    }
}

/// Mean and covariance of a distribution over `D`-dimensional states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMoments<const D: usize> {
    pub mean: Vector<D>,
    pub covariance: Matrix<D>,
}

impl<const D: usize> GaussianMoments<D> {
    /// Checks symmetry of the covariance. Positive semi-definiteness is
    /// checked when sigma points are generated.
    pub fn new(mean: Vector<D>, covariance: Matrix<D>) -> Result<Self, SigmaError> {
        let asymmetry = (covariance - covariance.transpose()).amax();
        if !(asymmetry <= SYMMETRY_TOL) {
            return Err(SigmaError::NotSymmetric {
                asymmetry,
                matrix: format_matrix(&covariance),
            });
        }
        Ok(Self { mean, covariance })
    }

    pub fn point_mass(mean: Vector<D>) -> Self {
        Self {
            mean,
            covariance: Matrix::<D>::zeros(),
        }
    }

    pub fn isotropic(mean: Vector<D>, variance: f64) -> Self {
        Self {
            mean,
            covariance: Matrix::<D>::identity() * variance,
        }
    }

    /// Draws one sample, given a standard normal vector `z`.
    pub fn sample_with(&self, z: &Vector<D>) -> Result<Vector<D>, SigmaError> {
        let l = factor(&self.covariance)?;
        Ok(self.mean + l * z)
    }
}

/// Weighted particles. Weights sum to one; individual weights may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPointSet<const D: usize> {
    points: Vec<Vector<D>>,
    weights: Vec<f64>,
}

impl<const D: usize> SigmaPointSet<D> {
    pub fn new(points: Vec<Vector<D>>, weights: Vec<f64>) -> Result<Self, SigmaError> {
        if points.is_empty() {
            return Err(SigmaError::InvalidSet("no points".into()));
        }
        if points.len() != weights.len() {
            return Err(SigmaError::InvalidSet(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite()))
            || weights.iter().any(|w| !w.is_finite())
        {
            return Err(SigmaError::InvalidSet("non-finite entry".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(SigmaError::InvalidSet(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { points, weights })
    }

    /// A single point carrying all the mass.
    pub fn dirac(point: Vector<D>) -> Self {
        Self {
            points: vec![point],
            weights: vec![1.0],
        }
    }

    pub fn points(&self) -> &[Vector<D>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vector<D>, f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> Vector<D> {
        self.iter()
            .fold(Vector::<D>::zeros(), |acc, (p, w)| acc + p * w)
    }
}

/// A one-step transition whose next-state law is summarised by its first two moments.
///
/// A deterministic map returns zero covariance. `index` is the position of the
/// parent point in its set, so a map may carry per-point data such as a mode
/// decided beforehand. Plain closures over the state ignore it.
pub trait StochasticMap<const D: usize> {
    fn transition(&self, index: usize, state: &Vector<D>) -> GaussianMoments<D>;
}

impl<const D: usize, F> StochasticMap<D> for F
where
    F: Fn(&Vector<D>) -> GaussianMoments<D>,
{
    fn transition(&self, _index: usize, state: &Vector<D>) -> GaussianMoments<D> {
        self(state)
    }
}

fn factor<const D: usize>(cov: &Matrix<D>) -> Result<Matrix<D>, SigmaError> {
    psd_cholesky(cov).map_err(|e| SigmaError::NotPositiveSemiDefinite {
        pivot: e.pivot,
        value: e.value,
        matrix: format_matrix(cov),
    })
}

/// Writes the `2n + 1` unscented points of `moments` into the given buffers.
fn fill_ut_points<const D: usize>(
    moments: &GaussianMoments<D>,
    params: UtParams,
    points: &mut Vec<Vector<D>>,
    weights: &mut Vec<f64>,
) -> Result<(), SigmaError> {
    let kappa = params.kappa_for(D);
    let spread = D as f64 + kappa;
    if !(spread > 0.0) {
        return Err(SigmaError::InvalidSpread(spread));
    }
    let l = factor(&moments.covariance)? * spread.sqrt();
    let side = 1.0 / (2.0 * spread);

    points.clear();
    weights.clear();
    points.push(moments.mean);
    weights.push(kappa / spread);
    for i in 0..D {
        points.push(moments.mean + l.column(i));
        weights.push(side);
    }
    for i in 0..D {
        points.push(moments.mean - l.column(i));
        weights.push(side);
    }
    Ok(())
}

/// The `2n + 1` point unscented set of `moments`. Point 0 is the mean.
///
/// Points `1..=n` are `μ + Lᵢ` and `n+1..=2n` are `μ - Lᵢ`, where `Lᵢ` is the
/// i-th column of the lower Cholesky factor of `(n + κ) Σ`.
pub fn generate_ut_points<const D: usize>(
    moments: &GaussianMoments<D>,
    params: UtParams,
) -> Result<SigmaPointSet<D>, SigmaError> {
    let mut points = Vec::with_capacity(2 * D + 1);
    let mut weights = Vec::with_capacity(2 * D + 1);
    fill_ut_points(moments, params, &mut points, &mut weights)?;
    Ok(SigmaPointSet { points, weights })
}

/// Weighted sample mean and covariance of a set. The covariance is symmetrized.
pub fn empirical_moments<const D: usize>(set: &SigmaPointSet<D>) -> GaussianMoments<D> {
    let mean = set.mean();
    let mut cov = Matrix::<D>::zeros();
    for (p, w) in set.iter() {
        let d = p - mean;
        cov += d * d.transpose() * w;
    }
    GaussianMoments {
        mean,
        covariance: (cov + cov.transpose()) * 0.5,
    }
}

/// Replaces every point by the unscented set of its transition law.
///
/// Child weights are the product of parent and child weight, so the expanded
/// set has `N (2n + 1)` points and still sums to one.
pub fn expand_sigma_points<const D: usize, M: StochasticMap<D> + ?Sized>(
    map: &M,
    set: &SigmaPointSet<D>,
    params: UtParams,
) -> Result<SigmaPointSet<D>, SigmaError> {
    let per_parent = 2 * D + 1;
    let mut points = Vec::with_capacity(set.len() * per_parent);
    let mut weights = Vec::with_capacity(set.len() * per_parent);
    for (parent, (p, w)) in set.iter().enumerate() {
        let children = generate_ut_points(&map.transition(parent, p), params).map_err(|e| {
            SigmaError::Expansion {
                parent,
                source: Box::new(e),
            }
        })?;
        points.extend_from_slice(&children.points);
        weights.extend(children.weights.iter().map(|c| c * w));
    }
    Ok(SigmaPointSet { points, weights })
}

fn regenerate_with_jitter<const D: usize>(
    moments: &GaussianMoments<D>,
    params: UtParams,
    points: &mut Vec<Vector<D>>,
    weights: &mut Vec<f64>,
) -> Result<(), SigmaError> {
    match fill_ut_points(moments, params, points, weights) {
        Err(SigmaError::NotPositiveSemiDefinite { .. }) => {
            let jittered = GaussianMoments {
                mean: moments.mean,
                covariance: moments.covariance + Matrix::<D>::identity() * PSD_JITTER,
            };
            fill_ut_points(&jittered, params, points, weights)
        }
        other => other,
    }
}

/// Moment-matches a set back to `2n + 1` unscented points.
///
/// If the empirical covariance fails to factor, `PSD_JITTER · I` is added once
/// before giving up.
pub fn compress<const D: usize>(
    set: &SigmaPointSet<D>,
    params: UtParams,
) -> Result<SigmaPointSet<D>, SigmaError> {
    let moments = empirical_moments(set);
    let mut points = Vec::with_capacity(2 * D + 1);
    let mut weights = Vec::with_capacity(2 * D + 1);
    regenerate_with_jitter(&moments, params, &mut points, &mut weights)?;
    Ok(SigmaPointSet { points, weights })
}

/// One expansion-compression step: `compress(expand_sigma_points(map, set))`.
pub fn ecut_step<const D: usize, M: StochasticMap<D> + ?Sized>(
    map: &M,
    set: &SigmaPointSet<D>,
    params: UtParams,
) -> Result<SigmaPointSet<D>, SigmaError> {
    compress(&expand_sigma_points(map, set, params)?, params)
}

/// Moments of the expanded set, without materializing it.
///
/// Each child set reproduces its parent's transition moments exactly, so the
/// expanded set's moments follow from the laws of total expectation and
/// variance: `μ = Σ wᵢ μᵢ` and `Σ = Σ wᵢ (Σᵢ + (μᵢ - μ)(μᵢ - μ)ᵀ)`.
/// Transition covariances are taken as given and not checked for definiteness.
pub fn propagate_moments<const D: usize, M: StochasticMap<D> + ?Sized>(
    map: &M,
    set: &SigmaPointSet<D>,
) -> GaussianMoments<D> {
    // Accumulate second moments about the first child mean to limit cancellation.
    let mut origin: Option<Vector<D>> = None;
    let mut first = Vector::<D>::zeros();
    let mut second = Matrix::<D>::zeros();
    for (i, (p, w)) in set.iter().enumerate() {
        let m = map.transition(i, p);
        let c = *origin.get_or_insert(m.mean);
        let d = m.mean - c;
        first += d * w;
        second += (m.covariance + d * d.transpose()) * w;
    }
    let c = origin.unwrap_or_else(Vector::<D>::zeros);
    let cov = second - first * first.transpose();
    GaussianMoments {
        mean: c + first,
        covariance: (cov + cov.transpose()) * 0.5,
    }
}

/// Allocation-free expansion-compression step used on the planner's hot path.
///
/// Produces the same set as [`ecut_step`] up to round-off, by compressing the
/// moments from [`propagate_moments`] directly.
pub fn ecut_step_in_place<const D: usize, M: StochasticMap<D> + ?Sized>(
    map: &M,
    set: &mut SigmaPointSet<D>,
    params: UtParams,
) -> Result<(), SigmaError> {
    let moments = propagate_moments(map, set);
    regenerate_with_jitter(&moments, params, &mut set.points, &mut set.weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix2, Vector1, Vector2};

    fn rel_err<const D: usize>(a: &Matrix<D>, b: &Matrix<D>) -> f64 {
        (a - b).norm() / b.norm().max(1.0)
    }

    #[test]
    fn zero_covariance_collapses_to_mean() {
        let m = GaussianMoments::point_mass(Vector2::zeros());
        let set = generate_ut_points(&m, UtParams::default()).unwrap();
        assert_eq!(set.len(), 5);
        assert!(set.points().iter().all(|p| *p == Vector2::zeros()));
        assert_relative_eq!(set.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn point_zero_is_mean_and_weights_follow_kappa() {
        let m = GaussianMoments::new(Vector2::new(1.0, -2.0), Matrix2::new(2.0, 0.3, 0.3, 1.0))
            .unwrap();
        let set = generate_ut_points(&m, UtParams::default()).unwrap();
        assert_eq!(set.points()[0], m.mean);
        // n = 2, kappa = 1: centre weight 1/3, others 1/6
        assert_relative_eq!(set.weights()[0], 1.0 / 3.0, epsilon = 1e-15);
        assert!(set.weights()[1..].iter().all(|w| (w - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn quadratic_of_standard_normal_is_exact() {
        let m = GaussianMoments::new(Vector1::new(0.0), nalgebra::Matrix1::new(1.0)).unwrap();
        let set = generate_ut_points(&m, UtParams::default()).unwrap();
        let e_x2: f64 = set.iter().map(|(p, w)| w * p[0] * p[0]).sum();
        assert_relative_eq!(e_x2, 1.0, epsilon = 1e-14);
        // kappa = 3 - n also matches the fourth moment E[x⁴] = 3
        let e_x4: f64 = set.iter().map(|(p, w)| w * p[0].powi(4)).sum();
        assert_relative_eq!(e_x4, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn empirical_moments_of_single_point() {
        let p = Vector2::new(3.0, 4.0);
        let m = empirical_moments(&SigmaPointSet::dirac(p));
        assert_eq!(m.mean, p);
        assert_eq!(m.covariance, Matrix2::zeros());
    }

    #[test]
    fn empirical_moments_of_two_points() {
        let set = SigmaPointSet::new(vec![Vector1::new(-1.0), Vector1::new(1.0)], vec![0.5, 0.5])
            .unwrap();
        let m = empirical_moments(&set);
        assert_eq!(m.mean[0], 0.0);
        assert_eq!(m.covariance[(0, 0)], 1.0);
    }

    #[test]
    fn set_validation() {
        let p = Vector1::new(0.0);
        assert!(SigmaPointSet::<1>::new(vec![], vec![]).is_err());
        assert!(SigmaPointSet::new(vec![p], vec![0.5]).is_err());
        assert!(SigmaPointSet::new(vec![p, p], vec![1.0]).is_err());
        assert!(SigmaPointSet::new(vec![p, p], vec![1.5, -0.5]).is_ok());
        assert!(SigmaPointSet::new(vec![Vector1::new(f64::NAN)], vec![1.0]).is_err());
    }

    #[test]
    fn non_psd_covariance_is_reported() {
        let m = GaussianMoments {
            mean: Vector2::zeros(),
            covariance: Matrix2::new(1.0, 2.0, 2.0, 1.0),
        };
        let err = generate_ut_points(&m, UtParams::default()).unwrap_err();
        match err {
            SigmaError::NotPositiveSemiDefinite { matrix, .. } => {
                assert!(matrix.contains("2e0"), "{matrix}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_covariance_is_rejected() {
        let r = GaussianMoments::new(Vector2::zeros(), Matrix2::new(1.0, 0.5, 0.0, 1.0));
        assert!(matches!(r, Err(SigmaError::NotSymmetric { .. })));
    }

    #[test]
    fn invalid_spread_is_rejected() {
        let m = GaussianMoments::isotropic(Vector2::zeros(), 1.0);
        let r = generate_ut_points(&m, UtParams::with_kappa(-2.0));
        assert!(matches!(r, Err(SigmaError::InvalidSpread(_))));
    }

    #[test]
    fn deterministic_map_children_coincide() {
        let set = generate_ut_points(
            &GaussianMoments::new(Vector2::new(1.0, 1.0), Matrix2::new(0.5, 0.1, 0.1, 0.2))
                .unwrap(),
            UtParams::default(),
        )
        .unwrap();
        let f = |x: &Vector2<f64>| GaussianMoments::point_mass(Vector2::new(x[0] * x[1], x[0].sin()));
        let expanded = expand_sigma_points(&f, &set, UtParams::default()).unwrap();
        assert_eq!(expanded.len(), 25);
        for (i, parent) in set.points().iter().enumerate() {
            let target = f(parent).mean;
            for child in &expanded.points()[i * 5..(i + 1) * 5] {
                assert_eq!(*child, target);
            }
        }
        let expected: Vector2<f64> = set.iter().map(|(p, w)| f(p).mean * w).sum();
        assert!((empirical_moments(&expanded).mean - expected).norm() < 1e-14);
        assert_relative_eq!(expanded.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn expansion_error_names_parent() {
        let set = SigmaPointSet::new(
            vec![Vector1::new(0.0), Vector1::new(1.0)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let f = |x: &Vector1<f64>| GaussianMoments {
            mean: *x,
            covariance: nalgebra::Matrix1::new(if x[0] > 0.5 { -1.0 } else { 1.0 }),
        };
        match expand_sigma_points(&f, &set, UtParams::default()).unwrap_err() {
            SigmaError::Expansion { parent, .. } => assert_eq!(parent, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn compress_of_identical_points() {
        let p = Vector2::new(-1.0, 7.0);
        let set = SigmaPointSet::new(vec![p; 4], vec![0.25; 4]).unwrap();
        let out = compress(&set, UtParams::default()).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.points().iter().all(|q| (q - p).norm() < 1e-12));
    }

    #[test]
    fn compress_is_idempotent_in_moment_space() {
        let m = GaussianMoments::new(Vector2::new(0.3, 0.1), Matrix2::new(1.2, -0.4, -0.4, 0.9))
            .unwrap();
        let set = generate_ut_points(&m, UtParams::default()).unwrap();
        let out = compress(&set, UtParams::default()).unwrap();
        let a = empirical_moments(&set);
        let b = empirical_moments(&out);
        assert!((a.mean - b.mean).norm() < 1e-12);
        assert!(rel_err(&b.covariance, &a.covariance) < 1e-12);
    }

    #[test]
    fn compress_jitter_rescues_marginally_indefinite_covariance() {
        // Negative weights can push the empirical covariance slightly below zero:
        // here it is -1.5e-9, just past the factorization tolerance.
        let set = SigmaPointSet::new(
            vec![Vector1::new(0.0), Vector1::new(1e-3), Vector1::new(-1e-3)],
            vec![1.0 + 1.5e-3, -7.5e-4, -7.5e-4],
        )
        .unwrap();
        let m = empirical_moments(&set);
        assert!((m.covariance[(0, 0)] + 1.5e-9).abs() < 1e-15);
        assert!(generate_ut_points(&m, UtParams::default()).is_err());
        assert!(compress(&set, UtParams::default()).is_ok());

        let bad = SigmaPointSet::new(
            vec![Vector1::new(0.0), Vector1::new(1.0), Vector1::new(-1.0)],
            vec![1.2, -0.1, -0.1],
        )
        .unwrap();
        assert!(compress(&bad, UtParams::default()).is_err());
    }

    #[test]
    fn linear_map_is_exact() {
        let a = Matrix2::new(1.0, 0.05, -0.2, 0.9);
        let b = Vector2::new(0.3, -0.1);
        let m = GaussianMoments::new(Vector2::new(1.0, 2.0), Matrix2::new(0.4, 0.1, 0.1, 0.3))
            .unwrap();
        let set = generate_ut_points(&m, UtParams::default()).unwrap();
        let f = move |x: &Vector2<f64>| GaussianMoments::point_mass(a * x + b);
        let out = empirical_moments(&ecut_step(&f, &set, UtParams::default()).unwrap());
        assert!((out.mean - (a * m.mean + b)).norm() < 1e-12);
        let expected = a * m.covariance * a.transpose();
        assert!(rel_err(&out.covariance, &expected) < 1e-12);
    }

    #[test]
    fn in_place_step_matches_explicit_step() {
        let m = GaussianMoments::new(Vector2::new(0.5, -0.5), Matrix2::new(0.3, 0.05, 0.05, 0.2))
            .unwrap();
        let set = generate_ut_points(&m, UtParams::default()).unwrap();
        let f = |x: &Vector2<f64>| {
            let speed = x.norm();
            GaussianMoments::isotropic(x + Vector2::new(x[1].sin(), 0.1), 0.01 + 0.02 * speed)
        };
        let explicit = ecut_step(&f, &set, UtParams::default()).unwrap();
        let mut fused = set.clone();
        ecut_step_in_place(&f, &mut fused, UtParams::default()).unwrap();
        assert_eq!(explicit.len(), fused.len());
        for (a, b) in explicit.points().iter().zip(fused.points()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(explicit.weights(), fused.weights());
    }

    #[test]
    fn ecut_output_size_is_fixed() {
        let set = SigmaPointSet::new(
            (0..11).map(|i| Vector2::new(i as f64, 0.0)).collect(),
            vec![1.0 / 11.0; 11],
        )
        .unwrap();
        let f = |x: &Vector2<f64>| GaussianMoments::isotropic(*x, 0.1);
        assert_eq!(ecut_step(&f, &set, UtParams::default()).unwrap().len(), 5);
    }
}
