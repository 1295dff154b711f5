use nalgebra::SMatrix;

/// Pivots at or below this fraction of the largest diagonal entry are treated as zero.
const ZERO_PIVOT_REL: f64 = 1e-12;
/// Negative pivots and orphaned off-diagonal residuals up to this size are tolerated.
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("matrix is not positive semi-definite (pivot {pivot} = {value:e})")]
pub struct CholeskyError {
    pub pivot: usize,
    pub value: f64,
}

/// Lower-triangular `L` with `L Lᵀ = A` for a symmetric positive semi-definite `A`.
///
/// Unlike a strict Cholesky this accepts singular matrices: a vanishing pivot
/// yields a zero column as long as the remaining entries of that column vanish too.
pub fn psd_cholesky<const D: usize>(
    a: &SMatrix<f64, D, D>,
) -> Result<SMatrix<f64, D, D>, CholeskyError> {
    let scale = (0..D).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max);
    let zero_tol = ZERO_PIVOT_REL * scale;
    let neg_tol = PSD_TOL * scale.max(1.0);

    let mut l = SMatrix::<f64, D, D>::zeros();
    for j in 0..D {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !d.is_finite() || d < -neg_tol {
            return Err(CholeskyError { pivot: j, value: d });
        }
        if d > zero_tol {
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..D {
                let mut r = a[(i, j)];
                for k in 0..j {
                    r -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = r / ljj;
            }
        } else {
            for i in (j + 1)..D {
                let mut r = a[(i, j)];
                for k in 0..j {
                    r -= l[(i, k)] * l[(j, k)];
                }
                if r.abs() > neg_tol {
                    return Err(CholeskyError { pivot: j, value: d });
                }
            }
        }
    }
    Ok(l)
}
