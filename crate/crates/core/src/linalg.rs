//! Small dense symmetric linear algebra used by the metric and bound code.
//!
//! Matrices here are k×k with k rarely above a handful, so everything goes
//! through nalgebra's dense Cholesky and symmetric eigen solvers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative pivot floor below which a Cholesky factor is treated as singular.
const PIVOT_FLOOR: f64 = 1e-14;

/// Returns `(M + Mᵀ)/2` together with the relative asymmetry
/// `max|M − Mᵀ| / max(1, max|M|)`.
pub fn symmetrize(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let asym = (m - m.transpose()).amax();
    let scale = m.amax().max(1.0);
    (sym, asym / scale)
}

pub fn trace(m: &DMatrix<f64>) -> f64 {
    m.diagonal().sum()
}

fn well_conditioned(chol: &Cholesky<f64, Dyn>) -> bool {
    let diag = chol.l_dirty().diagonal();
    let max = diag.iter().fold(0.0_f64, |a, &b| a.max(b * b));
    let min = diag.iter().fold(f64::INFINITY, |a, &b| a.min(b * b));
    max > 0.0 && min > PIVOT_FLOOR * max
}

/// Cholesky factorization with one retry after adding `1e-10·trace` to the
/// diagonal. Returns the factor and the jitter that was applied (0 when the
/// first attempt succeeded).
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Option<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        if well_conditioned(&c) {
            return Some((c, 0.0));
        }
    }
    let jitter = 1e-10 * trace(m).abs();
    if jitter == 0.0 {
        return None;
    }
    let shifted = m + DMatrix::identity(m.nrows(), m.ncols()) * jitter;
    Cholesky::new(shifted)
        .filter(well_conditioned)
        .map(|c| (c, jitter))
}

fn factor(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    Cholesky::new(m.clone())
        .filter(well_conditioned)
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite: {m}")))
}

/// Solves `M x = b` for symmetric positive definite `M`.
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(factor(m, "matrix")?.solve(b))
}

/// `M⁻¹` for symmetric positive definite `M`, obtained by solving `M X = I`.
/// The result is symmetrized.
pub fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = factor(m, "matrix")?;
    let inv = chol.solve(&DMatrix::identity(m.nrows(), m.ncols()));
    Ok(symmetrize(&inv).0)
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let (sym, _) = symmetrize(m);
    sym.symmetric_eigenvalues().min()
}

/// Smallest eigenvalue of `a − b`; non-negative iff `a ≥ b` in the Loewner order.
pub fn psd_margin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    min_eigenvalue(&(a - b))
}

/// Mean and covariance of the rows of `values` (d×k) under weights `w`
/// (length d, summing to one). Two-pass: the covariance is formed from
/// centered values.
pub fn weighted_moments(w: &[f64], values: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (d, k) = values.shape();
    let mean = DVector::from_fn(k, |i, _| (0..d).map(|x| w[x] * values[(x, i)]).sum());
    let mut cov = DMatrix::zeros(k, k);
    for x in 0..d {
        let c = DVector::from_fn(k, |i, _| values[(x, i)] - mean[i]);
        cov += &c * c.transpose() * w[x];
    }
    (mean, symmetrize(&cov).0)
}
