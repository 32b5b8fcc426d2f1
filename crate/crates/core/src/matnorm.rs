//! Matrix normal distribution `MN(M, U, V)`: `vec(X) ~ N(vec(M), V ⊗ U)`.
//!
//! `U` (D×D) is the row/feature covariance and `V` (τ×τ) the column/temporal
//! covariance. Nothing here ever materializes the (Dτ)×(Dτ) covariance.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{select, spd_factor_auto, symmetrize, BlockSplit, Matrix, SpdFactor};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixNormalParams {
    pub mean: Matrix,
    pub row_cov: Matrix,
    pub col_cov: Matrix,
}

impl MatrixNormalParams {
    pub fn new(mean: Matrix, row_cov: Matrix, col_cov: Matrix) -> Result<Self> {
        let (d, tau) = mean.shape();
        if row_cov.shape() != (d, d) || col_cov.shape() != (tau, tau) {
            return Err(Error::dim(format!(
                "mean is {d}x{tau} but U is {}x{} and V is {}x{}",
                row_cov.nrows(),
                row_cov.ncols(),
                col_cov.nrows(),
                col_cov.ncols()
            )));
        }
        Ok(Self {
            mean,
            row_cov,
            col_cov,
        })
    }

    /// Zero mean, identity covariances.
    pub fn standard(rows: usize, cols: usize) -> Self {
        Self {
            mean: Matrix::zeros(rows, cols),
            row_cov: Matrix::identity(rows, rows),
            col_cov: Matrix::identity(cols, cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.mean.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mean.ncols()
    }

    pub fn factor(&self) -> Result<FactoredMatrixNormal> {
        FactoredMatrixNormal::new(self)
    }

    pub fn logpdf(&self, x: &Matrix) -> Result<f64> {
        self.factor()?.logpdf(x)
    }

    /// Draws `M + L_U Z L_V^T` with `Z` filled column by column.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Matrix> {
        Ok(self.factor()?.sample(rng))
    }

    /// Conditions on the first `split.first` columns being `observed`.
    ///
    /// Returns the distribution of the remaining columns:
    /// mean `M₂ + (O − M₁) V₁₁⁻¹ V₁₂`, row covariance `U`,
    /// column covariance `V₂₂ − V₂₁ V₁₁⁻¹ V₁₂`.
    pub fn condition_cols(&self, split: BlockSplit, observed: &Matrix) -> Result<Self> {
        split.check(self.cols(), "column")?;
        let (d, t) = (self.rows(), split.first);
        if observed.shape() != (d, t) {
            return Err(Error::dim(format!(
                "observed block is {}x{}, expected {d}x{t}",
                observed.nrows(),
                observed.ncols()
            )));
        }
        let dt = split.second;
        let v11 = self.col_cov.view((0, 0), (t, t)).into_owned();
        let v12 = self.col_cov.view((0, t), (t, dt)).into_owned();
        let v21 = self.col_cov.view((t, 0), (dt, t));
        let v22 = self.col_cov.view((t, t), (dt, dt));
        let gain = spd_factor_auto(&v11, "V11")?.solve(&v12)?;

        let resid = observed - self.mean.view((0, 0), (d, t));
        let mean = self.mean.view((0, t), (d, dt)) + resid * &gain;
        let mut col_cov = v22 - v21 * &gain;
        symmetrize(&mut col_cov);
        Ok(Self {
            mean,
            row_cov: self.row_cov.clone(),
            col_cov,
        })
    }

    /// Conditions on the first `split.first` rows being `observed`.
    ///
    /// Mirror of [`condition_cols`](Self::condition_cols) with the roles of
    /// `U` and `V` swapped.
    pub fn condition_rows(&self, split: BlockSplit, observed: &Matrix) -> Result<Self> {
        split.check(self.rows(), "row")?;
        let (dx, tau) = (split.first, self.cols());
        if observed.shape() != (dx, tau) {
            return Err(Error::dim(format!(
                "observed block is {}x{}, expected {dx}x{tau}",
                observed.nrows(),
                observed.ncols()
            )));
        }
        let dy = split.second;
        let u11 = self.row_cov.view((0, 0), (dx, dx)).into_owned();
        let u12 = self.row_cov.view((0, dx), (dx, dy)).into_owned();
        let u21 = self.row_cov.view((dx, 0), (dy, dx));
        let u22 = self.row_cov.view((dx, dx), (dy, dy));
        let gain = spd_factor_auto(&u11, "U11")?.solve(&u12)?;

        let resid = observed - self.mean.view((0, 0), (dx, tau));
        let mean = self.mean.view((dx, 0), (dy, tau)) + gain.transpose() * resid;
        let mut row_cov = u22 - u21 * &gain;
        symmetrize(&mut row_cov);
        Ok(Self {
            mean,
            row_cov,
            col_cov: self.col_cov.clone(),
        })
    }

    /// Marginal over the selected rows and columns (index selection).
    pub fn marginal(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::dim("marginal selection must be non-empty"));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= self.rows()) {
            return Err(Error::dim(format!("row index {r} out of bounds")));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= self.cols()) {
            return Err(Error::dim(format!("column index {c} out of bounds")));
        }
        Ok(Self {
            mean: select(&self.mean, rows, cols),
            row_cov: select(&self.row_cov, rows, rows),
            col_cov: select(&self.col_cov, cols, cols),
        })
    }

    /// `(M, ξU, V/ξ)` with `ξ = trace(V)/τ`, so that `trace(V') = τ`.
    pub fn normalize_scale(&self) -> Self {
        let xi = self.col_cov.trace() / self.cols() as f64;
        self.rescaled(xi)
    }

    /// `(M, ξU, V/ξ)`; leaves the distribution unchanged.
    pub fn rescaled(&self, xi: f64) -> Self {
        Self {
            mean: self.mean.clone(),
            row_cov: &self.row_cov * xi,
            col_cov: &self.col_cov / xi,
        }
    }

    /// Distribution of `X^T`: `MN(M^T, V, U)`.
    pub fn transpose(&self) -> Self {
        Self {
            mean: self.mean.transpose(),
            row_cov: self.col_cov.clone(),
            col_cov: self.row_cov.clone(),
        }
    }
}

/// Matrix normal with both covariance factors precomputed, for repeated
/// density evaluation.
#[derive(Debug, Clone)]
pub struct FactoredMatrixNormal {
    mean: Matrix,
    row: SpdFactor,
    col: SpdFactor,
    row_whiten: Matrix,
    col_whiten_t: Matrix,
    log_norm: f64,
}

impl FactoredMatrixNormal {
    pub fn new(p: &MatrixNormalParams) -> Result<Self> {
        let row = spd_factor_auto(&p.row_cov, "U")?;
        let col = spd_factor_auto(&p.col_cov, "V")?;
        let (d, tau) = (p.rows() as f64, p.cols() as f64);
        let log_norm = -0.5 * (d * tau * (2.0 * PI).ln() + d * col.log_det() + tau * row.log_det());
        Ok(Self {
            mean: p.mean.clone(),
            row_whiten: row.lower_inverse(),
            col_whiten_t: col.lower_inverse().transpose(),
            row,
            col,
            log_norm,
        })
    }

    pub fn row_factor(&self) -> &SpdFactor {
        &self.row
    }

    pub fn col_factor(&self) -> &SpdFactor {
        &self.col
    }

    /// `−½[Dτ ln 2π + D ln|V| + τ ln|U| + ‖L_U⁻¹ (X − M) L_V⁻ᵀ‖²_F]`.
    pub fn logpdf(&self, x: &Matrix) -> Result<f64> {
        if x.shape() != self.mean.shape() {
            return Err(Error::dim(format!(
                "observation is {}x{}, distribution is {}x{}",
                x.nrows(),
                x.ncols(),
                self.mean.nrows(),
                self.mean.ncols()
            )));
        }
        let white = &self.row_whiten * (x - &self.mean) * &self.col_whiten_t;
        Ok(self.log_norm - 0.5 * white.norm_squared())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Matrix {
        let (d, tau) = self.mean.shape();
        let z = Matrix::from_fn(d, tau, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + self.row.lower() * z * self.col.lower().transpose()
    }
}
