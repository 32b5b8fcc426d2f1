use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Per-feature-row z-scoring statistics, fitted on training windows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Zero mean, unit scale for every row.
    pub fn identity(names: Vec<String>) -> Self {
        let d = names.len();
        Self {
            names,
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn with_generic_names(d: usize) -> Self {
        Self::identity((0..d).map(|i| format!("f{i}")).collect())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Pooled per-row mean and (population) standard deviation over every
    /// entry of every window.
    pub fn fit(windows: &[Matrix], names: &[String]) -> Result<Self> {
        if windows.len() < 2 {
            return Err(Error::Data(format!(
                "standardization needs at least 2 windows, got {}",
                windows.len()
            )));
        }
        let d = windows[0].nrows();
        if names.len() != d {
            return Err(Error::dim(format!("{} feature names for {d} rows", names.len())));
        }
        if let Some(w) = windows.iter().find(|w| w.nrows() != d) {
            return Err(Error::dim(format!("window with {} rows among {d}-row windows", w.nrows())));
        }
        let mut mean = vec![0.0; d];
        let mut count = 0usize;
        for w in windows {
            for j in 0..w.ncols() {
                for i in 0..d {
                    mean[i] += w[(i, j)];
                }
            }
            count += w.ncols();
        }
        let n = count as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for w in windows {
            for j in 0..w.ncols() {
                for i in 0..d {
                    let e = w[(i, j)] - mean[i];
                    var[i] += e * e;
                }
            }
        }
        let mut std = Vec::with_capacity(d);
        for (i, v) in var.into_iter().enumerate() {
            let s = (v / n).sqrt();
            // Relative check so that large-offset constant series are caught.
            if !(s > 1e-12 * mean[i].abs().max(1.0)) {
                return Err(Error::ZeroVariance(names[i].clone()));
            }
            std.push(s);
        }
        Ok(Self {
            names: names.to_vec(),
            mean,
            std,
        })
    }

    fn check(&self, m: &Matrix) -> Result<()> {
        if m.nrows() != self.dim() {
            return Err(Error::dim(format!(
                "matrix has {} rows, standardization has {}",
                m.nrows(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m)?;
        Ok(Matrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            (m[(i, j)] - self.mean[i]) / self.std[i]
        }))
    }

    pub fn invert(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m)?;
        Ok(Matrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            m[(i, j)] * self.std[i] + self.mean[i]
        }))
    }

    pub fn apply_all(&self, windows: &[Matrix]) -> Result<Vec<Matrix>> {
        windows.iter().map(|w| self.apply(w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    fn windows(seed: u64, n: usize) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Matrix::from_fn(3, 4, |i, _| 10.0 * i as f64 + rng.random_range(-2.0..2.0) * (i + 1) as f64)
            })
            .collect()
    }

    #[test]
    fn constant_feature_is_rejected() {
        let mut ws = windows(1, 10);
        for w in ws.iter_mut() {
            w.row_mut(1).fill(7.5);
        }
        match StandardizationStats::fit(&ws, &names(3)) {
            Err(Error::ZeroVariance(name)) => assert_eq!(name, "x1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn train_rows_are_standard() {
        let ws = windows(2, 50);
        let stats = StandardizationStats::fit(&ws, &names(3)).unwrap();
        let z = stats.apply_all(&ws).unwrap();
        for i in 0..3 {
            let vals: Vec<f64> = z.iter().flat_map(|w| w.row(i).iter().copied().collect::<Vec<_>>()).collect();
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let s = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            assert!(m.abs() < 1e-10);
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn test_windows_use_train_stats() {
        let stats = StandardizationStats::fit(&windows(3, 50), &names(3)).unwrap();
        let shifted: Vec<Matrix> = windows(4, 50).into_iter().map(|w| w.add_scalar(5.0)).collect();
        let z = stats.apply_all(&shifted).unwrap();
        let m: f64 = z.iter().map(|w| w.row(0).mean()).sum::<f64>() / z.len() as f64;
        assert!(m > 1.0);
    }

    #[test]
    fn invert_undoes_apply() {
        let ws = windows(5, 10);
        let stats = StandardizationStats::fit(&ws, &names(3)).unwrap();
        for w in &ws {
            let back = stats.invert(&stats.apply(w).unwrap()).unwrap();
            assert!((back - w).amax() < 1e-12);
        }
    }

    #[test]
    fn needs_two_windows() {
        assert!(StandardizationStats::fit(&windows(6, 1), &names(3)).is_err());
    }
}
