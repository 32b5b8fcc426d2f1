//! Dense multivariate normal helpers: log-density, conditioning on a subset
//! of coordinates, and a PSD square root for sampling.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::{select, spd_factor_auto, symmetrize, Matrix, Vector};

pub fn logpdf(x: &Vector, mean: &Vector, cov: &Matrix) -> Result<f64> {
    if x.len() != mean.len() || cov.shape() != (x.len(), x.len()) {
        return Err(Error::dim(format!(
            "gaussian logpdf: x has {} entries, mean {}, covariance {}x{}",
            x.len(),
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let f = spd_factor_auto(cov, "covariance")?;
    let white = f.solve_lower(&Matrix::from_column_slice(x.len(), 1, (x - mean).as_slice()))?;
    Ok(-0.5 * (x.len() as f64 * (2.0 * PI).ln() + f.log_det() + white.norm_squared()))
}

/// Result of conditioning a dense Gaussian on observed coordinates.
#[derive(Debug, Clone)]
pub struct Conditioned {
    pub mean: Vector,
    pub cov: Matrix,
    /// Log-density of the observed coordinates under their marginal.
    pub log_evidence: f64,
}

/// Conditions `N(mean, cov)` on `x[observed] = values` and returns the
/// distribution of `x[target]`.
pub fn condition(
    mean: &Vector,
    cov: &Matrix,
    observed: &[usize],
    values: &Vector,
    target: &[usize],
) -> Result<Conditioned> {
    if values.len() != observed.len() {
        return Err(Error::dim("observed values do not match observed indices"));
    }
    let pick = |idx: &[usize]| Vector::from_iterator(idx.len(), idx.iter().map(|&i| mean[i]));
    let mu_o = pick(observed);
    let mu_t = pick(target);
    let s_oo = select(cov, observed, observed);
    let s_ot = select(cov, observed, target);
    let s_tt = select(cov, target, target);

    let f = spd_factor_auto(&s_oo, "observed covariance")?;
    let resid = values - &mu_o;
    let gain_t = f.solve(&s_ot)?; // Σ_oo⁻¹ Σ_ot
    let mean = mu_t + gain_t.transpose() * &resid;
    let mut cov = s_tt - s_ot.transpose() * &gain_t;
    symmetrize(&mut cov);

    let white = f.solve_lower(&Matrix::from_column_slice(resid.len(), 1, resid.as_slice()))?;
    let log_evidence =
        -0.5 * (resid.len() as f64 * (2.0 * PI).ln() + f.log_det() + white.norm_squared());
    Ok(Conditioned {
        mean,
        cov,
        log_evidence,
    })
}

/// Symmetric square root factor `A` with `A Aᵀ = cov`, clamping tiny negative
/// eigenvalues to zero so that degenerate covariances are allowed.
pub fn psd_factor(cov: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(cov.clone());
    let scaled = Vector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    let mut a = eig.eigenvectors.clone();
    for (j, s) in scaled.iter().enumerate() {
        a.column_mut(j).scale_mut(*s);
    }
    a
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(cov: &Matrix) -> f64 {
    SymmetricEigen::new(cov.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
