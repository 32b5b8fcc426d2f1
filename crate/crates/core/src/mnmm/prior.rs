//! Hyperparameters and the generative side of the mixture: LKJ correlation
//! draws, the full prior over models, and datasets drawn from a model.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_row_major, spd_factor_auto, symmetrize, Matrix, Vector};
use crate::matnorm::MatrixNormalParams;
use crate::mnmr::WindowSpec;

use super::model::{FitMetadata, MnmmModel};

/// Strength of the identity shrinkage applied to both covariance updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shrinkage {
    /// `γ_k = factor · n_k · max(D, τ)`.
    Relative { factor: f64 },
    /// The same `γ` for every component.
    Fixed { gamma: f64 },
}

impl Shrinkage {
    pub fn gamma(&self, n_k: f64, d: usize, tau: usize) -> f64 {
        match *self {
            Shrinkage::Relative { factor } => factor * n_k * d.max(tau) as f64,
            Shrinkage::Fixed { gamma } => gamma,
        }
    }
}

/// Optional stationary structure blended into sampled temporal correlations:
/// `corr(V) = weight · AR1(rho) + (1 − weight) · LKJ(η)` with unit column
/// scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalDecay {
    pub rho: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Symmetric Dirichlet concentration for the mixing weights.
    pub alpha: f64,
    /// LKJ shape shared by the row and column correlations.
    pub eta: f64,
    pub lambda_u: f64,
    pub lambda_v: f64,
    /// Row-major `D×τ` prior mean of `M_k`; zeros when absent.
    #[serde(default)]
    pub m0: Option<Vec<f64>>,
    /// Row-major `D×D`; identity when absent.
    #[serde(default)]
    pub u0: Option<Vec<f64>>,
    /// Row-major `τ×τ`; identity when absent.
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    pub shrinkage: Shrinkage,
    #[serde(default)]
    pub temporal_decay: Option<TemporalDecay>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            eta: 1.0,
            lambda_u: 1.0,
            lambda_v: 1.0,
            m0: None,
            u0: None,
            v0: None,
            shrinkage: Shrinkage::Relative { factor: 0.01 },
            temporal_decay: None,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("eta", self.eta),
            ("lambda_u", self.lambda_u),
            ("lambda_v", self.lambda_v),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("prior {name} must be positive, got {v}")));
            }
        }
        let g = match self.shrinkage {
            Shrinkage::Relative { factor } => factor,
            Shrinkage::Fixed { gamma } => gamma,
        };
        if !(g >= 0.0) {
            return Err(Error::Config(format!("shrinkage must be non-negative, got {g}")));
        }
        if let Some(td) = self.temporal_decay {
            if !(td.rho.abs() < 1.0) || !(0.0..=1.0).contains(&td.weight) {
                return Err(Error::Config(format!(
                    "temporal decay needs |rho| < 1 and weight in [0, 1], got {td:?}"
                )));
            }
        }
        Ok(())
    }

    /// `(M₀, U₀, V₀)` at the requested shape.
    pub fn mean_prior(&self, d: usize, tau: usize) -> Result<MatrixNormalParams> {
        let m0 = match &self.m0 {
            Some(v) => from_row_major(d, tau, v)?,
            None => Matrix::zeros(d, tau),
        };
        let u0 = match &self.u0 {
            Some(v) => from_row_major(d, d, v)?,
            None => Matrix::identity(d, d),
        };
        let v0 = match &self.v0 {
            Some(v) => from_row_major(tau, tau, v)?,
            None => Matrix::identity(tau, tau),
        };
        MatrixNormalParams::new(m0, u0, v0)
    }
}

/// Correlation matrix drawn from `LKJ(η)` with the onion construction.
pub fn sample_lkj<R: Rng + ?Sized>(dim: usize, eta: f64, rng: &mut R) -> Matrix {
    assert!(dim >= 1 && eta > 0.0, "LKJ needs dim ≥ 1 and η > 0");
    let mut c = Matrix::identity(dim, dim);
    if dim == 1 {
        return c;
    }
    let mut beta = eta + (dim as f64 - 2.0) / 2.0;
    let r = 2.0 * Beta::new(beta, beta).expect("positive shape").sample(rng) - 1.0;
    c[(0, 1)] = r;
    c[(1, 0)] = r;
    for k in 2..dim {
        beta -= 0.5;
        let y = Beta::new(k as f64 / 2.0, beta).expect("positive shape").sample(rng);
        let mut u = Vector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = u.norm();
        u /= norm;
        let w = u * y.sqrt();
        let lead = c.view((0, 0), (k, k)).into_owned();
        let chol = spd_factor_auto(&lead, "onion block").expect("leading block is a correlation matrix");
        let z = chol.lower() * w;
        for i in 0..k {
            c[(i, k)] = z[i];
            c[(k, i)] = z[i];
        }
    }
    c
}

/// Symmetric Dirichlet draw via normalized Gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(k: usize, alpha: f64, rng: &mut R) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let g = Gamma::new(alpha, 1.0).expect("positive concentration");
    let draws: Vec<f64> = (0..k).map(|_| g.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.into_iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}

fn ar1(dim: usize, rho: f64) -> Matrix {
    Matrix::from_fn(dim, dim, |i, j| rho.powi((i as i32 - j as i32).abs()))
}

fn scaled_covariance<R: Rng + ?Sized>(corr: &Matrix, lambda: f64, rng: &mut R) -> Matrix {
    let exp = Exp::new(lambda).expect("positive rate");
    let sigma: Vec<f64> = (0..corr.nrows()).map(|_| exp.sample(rng)).collect();
    let mut cov = Matrix::from_fn(corr.nrows(), corr.ncols(), |i, j| sigma[i] * corr[(i, j)] * sigma[j]);
    symmetrize(&mut cov);
    cov
}

/// One scale-normalized component: LKJ correlations with exponential scales
/// for `U` and `V`, and `M ~ MN(M₀, U₀, V₀)`.
pub fn sample_component<R: Rng + ?Sized>(
    spec: &WindowSpec,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<MatrixNormalParams> {
    let (d, tau) = (spec.d(), spec.tau());
    let mean_prior = prior.mean_prior(d, tau)?.factor()?;
    let row_cov = scaled_covariance(&sample_lkj(d, prior.eta, rng), prior.lambda_u, rng);
    let col_cov = match prior.temporal_decay {
        None => scaled_covariance(&sample_lkj(tau, prior.eta, rng), prior.lambda_v, rng),
        Some(td) => ar1(tau, td.rho) * td.weight + sample_lkj(tau, prior.eta, rng) * (1.0 - td.weight),
    };
    let mean = mean_prior.sample(rng);
    Ok(MatrixNormalParams::new(mean, row_cov, col_cov)?.normalize_scale())
}

/// Draws a complete model from the prior: `π ~ Dir(α)`, LKJ correlations
/// with exponential scales for `U_k` and `V_k`, and `M_k ~ MN(M₀, U₀, V₀)`.
pub fn sample_prior<R: Rng + ?Sized>(
    spec: &WindowSpec,
    k: usize,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<MnmmModel> {
    spec.validate()?;
    prior.validate()?;
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let weights = sample_dirichlet(k, prior.alpha, rng);
    let components = (0..k)
        .map(|_| sample_component(spec, prior, rng))
        .collect::<Result<Vec<_>>>()?;
    MnmmModel::new(
        weights,
        components,
        spec.clone(),
        crate::data::StandardizationStats::with_generic_names(spec.d()),
        prior.clone(),
        FitMetadata::default(),
    )
}

/// Draws `n` windows with their component labels (0-based).
pub fn sample_dataset<R: Rng + ?Sized>(
    model: &MnmmModel,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<Matrix>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let factored = model
        .components
        .iter()
        .map(|c| c.factor())
        .collect::<Result<Vec<_>>>()?;
    let mut windows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z = sample_categorical(&model.weights, rng);
        windows.push(factored[z].sample(rng));
        labels.push(z);
    }
    Ok((windows, labels))
}

/// Inverse-CDF categorical draw.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::min_eigenvalue;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lkj_dim_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_lkj(1, 2.0, &mut rng), Matrix::identity(1, 1));
    }

    #[test]
    fn lkj_draws_are_correlation_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in 2..9 {
            for eta in [0.5, 1.0, 2.0, 10.0] {
                let c = sample_lkj(dim, eta, &mut rng);
                for i in 0..dim {
                    assert!((c[(i, i)] - 1.0).abs() < 1e-15);
                    for j in 0..dim {
                        assert_eq!(c[(i, j)], c[(j, i)]);
                        assert!(c[(i, j)].abs() <= 1.0);
                    }
                }
                assert!(min_eigenvalue(&c) > 0.0);
            }
        }
    }

    #[test]
    fn lkj_two_by_two_uniform_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 50_000;
        let m: f64 = (0..n).map(|_| sample_lkj(2, 1.0, &mut rng)[(0, 1)]).sum::<f64>() / n as f64;
        assert!(m.abs() < 0.02, "mean {m}");
    }

    #[test]
    fn lkj_large_eta_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let c = sample_lkj(4, 50.0, &mut rng);
            let mut s = 0.0;
            for i in 0..4 {
                for j in 0..i {
                    s += c[(i, j)].abs();
                }
            }
            acc += s / 6.0;
        }
        assert!(acc / (n as f64) < 0.15);
    }

    #[test]
    fn lkj_marginal_matches_beta_for_higher_dims() {
        // Every off-diagonal of LKJ(η) in dimension d is 2·Beta(b, b) − 1 with
        // b = η − 1 + d/2, so its variance is 1 / (2b + 1).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (d, eta) = (5, 1.5);
        let b = eta - 1.0 + d as f64 / 2.0;
        let n = 20_000;
        let mut acc = vec![0.0; 3];
        for _ in 0..n {
            let c = sample_lkj(d, eta, &mut rng);
            acc[0] += c[(1, 0)].powi(2);
            acc[1] += c[(4, 2)].powi(2);
            acc[2] += c[(4, 3)].powi(2);
        }
        for a in acc {
            let var = a / n as f64;
            assert!((var - 1.0 / (2.0 * b + 1.0)).abs() < 0.01, "var {var}");
        }
    }

    #[test]
    fn prior_k1_has_unit_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = sample_prior(&WindowSpec::new(2, 2), 1, &PriorConfig::default(), &mut rng).unwrap();
        assert_eq!(m.weights, vec![1.0]);
    }

    #[test]
    fn dirichlet_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let prior = PriorConfig {
            alpha: 1000.0,
            ..Default::default()
        };
        let spec = WindowSpec::new(2, 1);
        let mut acc = [0.0; 4];
        let n = 1_000;
        for _ in 0..n {
            let m = sample_prior(&spec, 4, &prior, &mut rng).unwrap();
            for (a, w) in acc.iter_mut().zip(&m.weights) {
                *a += w;
            }
        }
        for a in acc {
            assert!((a / n as f64 - 0.25).abs() < 0.05);
        }
    }

    #[test]
    fn sampled_models_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for td in [None, Some(TemporalDecay { rho: 0.8, weight: 0.7 })] {
            let prior = PriorConfig {
                temporal_decay: td,
                ..Default::default()
            };
            for _ in 0..20 {
                let m = sample_prior(&WindowSpec::new(5, 3), 4, &prior, &mut rng).unwrap();
                m.check_invariants().unwrap();
            }
        }
    }

    #[test]
    fn dataset_labels_follow_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = sample_prior(&WindowSpec::new(2, 2), 3, &PriorConfig::default(), &mut rng).unwrap();
        m.weights = vec![0.5, 0.3, 0.2];
        let n = 10_000;
        let (ws, labels) = sample_dataset(&m, n, &mut rng).unwrap();
        assert_eq!(ws.len(), n);
        for k in 0..3 {
            let freq = labels.iter().filter(|&&l| l == k).count() as f64 / n as f64;
            assert!((freq - m.weights[k]).abs() < 0.02);
            let members: Vec<&Matrix> = ws.iter().zip(&labels).filter(|(_, &l)| l == k).map(|(w, _)| w).collect();
            let mean = members.iter().fold(Matrix::zeros(4, 4), |acc, w| acc + *w) / members.len() as f64;
            // Tolerance scales with the component's standard error.
            let c = &m.components[k];
            for i in 0..4 {
                for j in 0..4 {
                    let se = (c.row_cov[(i, i)] * c.col_cov[(j, j)] / members.len() as f64).sqrt();
                    assert!((mean[(i, j)] - c.mean[(i, j)]).abs() < 0.05f64.max(5.0 * se));
                }
            }
        }
    }

    #[test]
    fn single_component_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = sample_prior(&WindowSpec::new(2, 2), 1, &PriorConfig::default(), &mut rng).unwrap();
        let (_, labels) = sample_dataset(&m, 100, &mut rng).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn prior_validation() {
        let bad = PriorConfig {
            eta: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PriorConfig {
            shrinkage: Shrinkage::Fixed { gamma: -1.0 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
