//! Dense linear-algebra kernel: Kronecker products, column-stacking
//! vectorization, SPD factorization and block partitions.
//!
//! All matrices are `nalgebra` dense matrices. `vec` always stacks columns,
//! so the covariance of `vec(X)` for a matrix normal `X ~ MN(M, U, V)` is
//! `kron(V, U)` in that order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative asymmetry tolerated by [`spd_factor`].
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            let mut block = out.view_mut((i * br, j * bc), (br, bc));
            block.zip_apply(b, |o, v| *o = s * v);
        }
    }
    out
}

/// Column-stacking vectorization: element `i + rows * j` is `x[(i, j)]`.
pub fn vec(x: &Matrix) -> Vector {
    // nalgebra storage is column-major, which is exactly column stacking.
    Vector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::dim(format!(
            "cannot reshape vector of length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Matrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Split of one dimension into a leading and a trailing block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSplit {
    pub first: usize,
    pub second: usize,
}

impl BlockSplit {
    pub fn new(first: usize, second: usize) -> Result<Self> {
        if first == 0 || second == 0 {
            return Err(Error::dim(format!(
                "block split ({first}, {second}) has an empty block"
            )));
        }
        Ok(Self { first, second })
    }

    pub fn total(&self) -> usize {
        self.first + self.second
    }

    pub(crate) fn check(&self, dim: usize, what: &str) -> Result<()> {
        if self.total() != dim {
            return Err(Error::dim(format!(
                "split {}+{} does not match {what} dimension {dim}",
                self.first, self.second
            )));
        }
        Ok(())
    }
}

/// Cholesky factor `L` of an SPD matrix (plus the ridge that was added).
#[derive(Debug, Clone)]
pub struct SpdFactor {
    lower: Matrix,
    log_det: f64,
    ridge: f64,
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// `ln |S + ridge I|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Solves `S X = B`.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let y = self.solve_lower(b)?;
        Ok(self
            .lower
            .tr_solve_lower_triangular(&y)
            .expect("cholesky diagonal is positive"))
    }

    pub fn solve_vec(&self, b: &Vector) -> Result<Vector> {
        let m = Matrix::from_column_slice(b.len(), 1, b.as_slice());
        Ok(Vector::from_column_slice(self.solve(&m)?.as_slice()))
    }

    /// Solves `L Y = B` (whitening).
    pub fn solve_lower(&self, b: &Matrix) -> Result<Matrix> {
        if b.nrows() != self.dim() {
            return Err(Error::dim(format!(
                "solve: factor is {}x{}, right-hand side has {} rows",
                self.dim(),
                self.dim(),
                b.nrows()
            )));
        }
        Ok(self
            .lower
            .solve_lower_triangular(b)
            .expect("cholesky diagonal is positive"))
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = self
            .solve(&Matrix::identity(n, n))
            .expect("identity has matching dimension");
        symmetrize(&mut inv);
        inv
    }

    /// `L^{-1}`, handy when the same whitening is applied many times.
    pub fn lower_inverse(&self) -> Matrix {
        let n = self.dim();
        self.solve_lower(&Matrix::identity(n, n))
            .expect("identity has matching dimension")
    }
}

/// Scale-aware jitter: `1e-9 * trace(S) / dim`.
pub fn default_ridge(s: &Matrix) -> f64 {
    let n = s.nrows().max(1) as f64;
    (1e-9 * s.trace() / n).abs()
}

/// Largest `|S_ij - S_ji|` relative to the largest `|S_ij|`.
pub fn relative_asymmetry(s: &Matrix) -> f64 {
    let scale = s.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for j in 0..s.ncols() {
        for i in 0..j {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Cholesky factorization of `S + ridge I`.
///
/// `name` identifies the matrix in error messages.
pub fn spd_factor(s: &Matrix, ridge: f64, name: &str) -> Result<SpdFactor> {
    if !s.is_square() || s.nrows() == 0 {
        return Err(Error::dim(format!(
            "`{name}` must be square and non-empty, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let asym = relative_asymmetry(s);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            name: name.to_string(),
            asymmetry: asym,
        });
    }
    let n = s.nrows();
    let mut l = Matrix::zeros(n, n);
    let mut log_det = 0.0;
    for j in 0..n {
        let mut d = s[(j, j)] + ridge;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                name: name.to_string(),
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        log_det += 2.0 * djj.ln();
        for i in (j + 1)..n {
            // Lower triangle only; the upper triangle of `s` is trusted to match.
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Ok(SpdFactor {
        lower: l,
        log_det,
        ridge,
    })
}

/// Factorizes `S` as is, retrying once with [`default_ridge`] if that fails.
pub fn spd_factor_auto(s: &Matrix, name: &str) -> Result<SpdFactor> {
    match spd_factor(s, 0.0, name) {
        Err(Error::NotPositiveDefinite { .. }) => spd_factor(s, default_ridge(s), name),
        other => other,
    }
}

pub fn spd_solve(f: &SpdFactor, b: &Matrix) -> Result<Matrix> {
    f.solve(b)
}

/// Replaces `m` by `(m + m^T) / 2`.
pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Principal submatrix / general selection of rows and columns.
pub fn select(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Row-major flattening, used by the file formats.
pub fn to_row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Matrix> {
    if data.len() != rows * cols {
        return Err(Error::dim(format!(
            "expected {} row-major entries for {rows}x{cols}, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(Matrix::from_row_slice(rows, cols, data))
}

/// Correlation matrix: `diag(S)^{-1/2} S diag(S)^{-1/2}`.
pub fn correlation(s: &Matrix) -> Matrix {
    let d: Vec<f64> = (0..s.nrows()).map(|i| s[(i, i)].max(0.0).sqrt()).collect();
    Matrix::from_fn(s.nrows(), s.ncols(), |i, j| {
        if i == j {
            1.0
        } else if d[i] == 0.0 || d[j] == 0.0 {
            0.0
        } else {
            (s[(i, j)] / (d[i] * d[j])).clamp(-1.0, 1.0)
        }
    })
}
