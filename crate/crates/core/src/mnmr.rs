//! Regression by conditioning a fitted mixture on an observed past window.
//!
//! For each component the first `T` columns are conditioned on, the future
//! regressor rows are marginalized out, and the result is a Gaussian over
//! `vec(Y')` with covariance `V₂₂|₁ ⊗ U_yy`. The mixture of these with
//! posterior weights `β_k` is the predictive distribution.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::windows::feature_matrix;
use crate::data::TrajectoryPair;
use crate::error::{Error, Result};
use crate::gaussian::{self, psd_factor};
use crate::linalg::{kron, spd_factor_auto, vec, BlockSplit, Matrix, Vector};
use crate::matnorm::FactoredMatrixNormal;
use crate::mnmm::prior::sample_categorical;
use crate::mnmm::{log_sum_exp, MnmmModel};

/// Components whose log-weight is this far below the maximum get `β = 0`.
pub const BETA_CUTOFF: f64 = 745.0;

/// Window geometry: `D_x` regressor rows over `D_y` response rows, `T` past
/// columns followed by `ΔT` future columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub d_x: usize,
    pub d_y: usize,
    /// `T`.
    pub past: usize,
    /// `ΔT`.
    pub horizon: usize,
    pub step_seconds: f64,
}

impl WindowSpec {
    /// Car-following layout: 3 regressors, acceleration response, 5 Hz.
    pub fn new(past: usize, horizon: usize) -> Self {
        Self {
            d_x: 3,
            d_y: 1,
            past,
            horizon,
            step_seconds: 0.2,
        }
    }

    pub fn d(&self) -> usize {
        self.d_x + self.d_y
    }

    pub fn tau(&self) -> usize {
        self.past + self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_x == 0 || self.d_y == 0 || self.past == 0 || self.horizon == 0 {
            return Err(Error::Config(format!(
                "window counts must all be at least 1 (D_x={}, D_y={}, T={}, ΔT={})",
                self.d_x, self.d_y, self.past, self.horizon
            )));
        }
        if !(self.step_seconds > 0.0) {
            return Err(Error::Config(format!("step_seconds must be positive, got {}", self.step_seconds)));
        }
        Ok(())
    }

    fn response_rows(&self) -> Vec<usize> {
        (self.d_x..self.d()).collect()
    }
}

/// Gaussian mixture over `vec(Y')`, a vector of length `D_y·ΔT` ordered
/// step by step (`i + D_y·j` for response row `i` at future step `j`).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vector>,
    pub covs: Vec<Matrix>,
}

impl PredictiveMixture {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    /// Mixture mean and per-coordinate mixture variance.
    pub fn point_predict(&self) -> (Vector, Vector) {
        let n = self.dim();
        let mut mean = Vector::zeros(n);
        let mut second = Vector::zeros(n);
        for ((b, mu), cov) in self.weights.iter().zip(&self.means).zip(&self.covs) {
            if *b == 0.0 {
                continue;
            }
            mean.axpy(*b, mu, 1.0);
            for i in 0..n {
                second[i] += b * (cov[(i, i)] + mu[i] * mu[i]);
            }
        }
        let var = Vector::from_iterator(n, (0..n).map(|i| (second[i] - mean[i] * mean[i]).max(0.0)));
        (mean, var)
    }

    /// Component by `Cat(β)`, then a Gaussian draw.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vector> {
        let roots: Vec<Matrix> = self.covs.iter().map(psd_factor).collect();
        let dim = self.dim();
        (0..n)
            .map(|_| {
                let k = sample_categorical(&self.weights, rng);
                let z = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
                &self.means[k] + &roots[k] * z
            })
            .collect()
    }

    /// `ln Σ_k β_k N(y | μ_k, Σ_k)`.
    pub fn log_density(&self, y: &Vector) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.k());
        for ((b, mu), cov) in self.weights.iter().zip(&self.means).zip(&self.covs) {
            if *b > 0.0 {
                terms.push(b.ln() + gaussian::logpdf(y, mu, cov)?);
            }
        }
        Ok(log_sum_exp(&terms))
    }

    /// Component indices and weights, largest weight first, ties by index.
    pub fn top(&self, n: usize) -> Vec<(usize, f64)> {
        let mut idx: Vec<(usize, f64)> = self.weights.iter().copied().enumerate().collect();
        idx.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        idx.truncate(n);
        idx
    }

    /// Maps a mixture over standardized responses back to physical units;
    /// `mean`/`std` are the statistics of the `D_y` response rows.
    pub fn destandardize(&self, mean: &[f64], std: &[f64]) -> Self {
        let dy = mean.len();
        let scale = |i: usize| std[i % dy];
        let shift = |i: usize| mean[i % dy];
        Self {
            weights: self.weights.clone(),
            means: self
                .means
                .iter()
                .map(|m| Vector::from_fn(m.len(), |i, _| m[i] * scale(i) + shift(i)))
                .collect(),
            covs: self
                .covs
                .iter()
                .map(|c| Matrix::from_fn(c.nrows(), c.ncols(), |a, b| c[(a, b)] * scale(a) * scale(b)))
                .collect(),
        }
    }
}

fn response_stats(model: &MnmmModel) -> (Vec<f64>, Vec<f64>) {
    let rows = model.window_spec.response_rows();
    let s = &model.standardization;
    (
        rows.iter().map(|&i| s.mean[i]).collect(),
        rows.iter().map(|&i| s.std[i]).collect(),
    )
}

/// Normalized weights from log-weights; entries below `max − 745` are 0.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<f64> = log_w.iter().copied().filter(|&l| l >= max - BETA_CUTOFF).collect();
    let lse = log_sum_exp(&kept);
    let mut w: Vec<f64> = log_w
        .iter()
        .map(|&l| if l >= max - BETA_CUTOFF { (l - lse).exp() } else { 0.0 })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

struct ComponentPredictor {
    log_pi: f64,
    past: FactoredMatrixNormal,
    past_mean: Matrix,
    /// Response rows of the future mean block, `D_y×ΔT`.
    future_mean_y: Matrix,
    /// `V₁₁⁻¹ V₁₂`.
    gain: Matrix,
    cov: Matrix,
}

/// Per-component quantities that do not depend on the observed past, cached
/// for repeated prediction with one model.
pub struct Predictor<'a> {
    model: &'a MnmmModel,
    components: Vec<ComponentPredictor>,
    response_mean: Vec<f64>,
    response_std: Vec<f64>,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a MnmmModel) -> Result<Self> {
        let spec = &model.window_spec;
        spec.validate()?;
        let (t, dt, dx, dy) = (spec.past, spec.horizon, spec.d_x, spec.d_y);
        let d = spec.d();
        let past_cols: Vec<usize> = (0..t).collect();
        let all_rows: Vec<usize> = (0..d).collect();
        let components = model
            .weights
            .iter()
            .zip(&model.components)
            .map(|(&pi, c)| -> Result<ComponentPredictor> {
                let marginal = c.marginal(&all_rows, &past_cols)?;
                let past = FactoredMatrixNormal::new(&marginal)?;
                let v11 = c.col_cov.view((0, 0), (t, t)).into_owned();
                let v12 = c.col_cov.view((0, t), (t, dt)).into_owned();
                let gain = spd_factor_auto(&v11, "V11")?.solve(&v12)?;
                // Column covariance and mean come from the generic conditioning
                // at the prior mean; only the mean shift depends on the past.
                let cond = c.condition_cols(BlockSplit::new(t, dt)?, &marginal.mean)?;
                let u_yy = c.row_cov.view((dx, dx), (dy, dy)).into_owned();
                Ok(ComponentPredictor {
                    log_pi: pi.ln(),
                    past,
                    past_mean: marginal.mean,
                    future_mean_y: c.mean.view((dx, t), (dy, dt)).into_owned(),
                    gain,
                    cov: kron(&cond.col_cov, &u_yy),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (response_mean, response_std) = response_stats(model);
        Ok(Self {
            model,
            components,
            response_mean,
            response_std,
        })
    }

    fn check_past(&self, past: &Matrix) -> Result<()> {
        let s = &self.model.window_spec;
        if past.shape() != (s.d(), s.past) {
            return Err(Error::dim(format!(
                "past window is {}x{}, model expects {}x{}",
                past.nrows(),
                past.ncols(),
                s.d(),
                s.past
            )));
        }
        Ok(())
    }

    /// `β` only, from a standardized past.
    pub fn weights_standardized(&self, past: &Matrix) -> Result<Vec<f64>> {
        self.check_past(past)?;
        let log_w = self
            .components
            .iter()
            .map(|c| Ok(c.log_pi + c.past.logpdf(past)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(normalize_log_weights(&log_w))
    }

    /// Predictive mixture in standardized units from a standardized past.
    pub fn predict_standardized(&self, past: &Matrix) -> Result<PredictiveMixture> {
        let weights = self.weights_standardized(past)?;
        let dx = self.model.window_spec.d_x;
        let dy = self.model.window_spec.d_y;
        let means = self
            .components
            .iter()
            .map(|c| {
                let resid = (past - &c.past_mean).rows(dx, dy).into_owned();
                vec(&(&c.future_mean_y + resid * &c.gain))
            })
            .collect();
        let covs = self.components.iter().map(|c| c.cov.clone()).collect();
        Ok(PredictiveMixture { weights, means, covs })
    }

    /// Predictive mixture in physical units from a past in physical units.
    pub fn predict(&self, past: &Matrix) -> Result<PredictiveMixture> {
        let std_past = self.model.standardization.apply(past)?;
        Ok(self
            .predict_standardized(&std_past)?
            .destandardize(&self.response_mean, &self.response_std))
    }
}

/// Predictive mixture in standardized units; `past` is already standardized.
pub fn predictive_standardized(model: &MnmmModel, past: &Matrix) -> Result<PredictiveMixture> {
    Predictor::new(model)?.predict_standardized(past)
}

/// Predictive mixture in physical units for a past window in physical units.
pub fn predictive_distribution(model: &MnmmModel, past: &Matrix) -> Result<PredictiveMixture> {
    Predictor::new(model)?.predict(past)
}

/// Dense reference: conditions each component's full `N(vec M, V ⊗ U)` on the
/// observed past coordinates and keeps only the future response coordinates.
pub fn oracle_condition_vectorized(model: &MnmmModel, past: &Matrix) -> Result<PredictiveMixture> {
    let spec = &model.window_spec;
    let (d, t, dt, dx, dy) = (spec.d(), spec.past, spec.horizon, spec.d_x, spec.d_y);
    if past.shape() != (d, t) {
        return Err(Error::dim(format!(
            "past window is {}x{}, model expects {d}x{t}",
            past.nrows(),
            past.ncols()
        )));
    }
    let std_past = model.standardization.apply(past)?;
    let observed: Vec<usize> = (0..t).flat_map(|j| (0..d).map(move |i| i + d * j)).collect();
    let target: Vec<usize> = (0..dt)
        .flat_map(|j| (0..dy).map(move |i| (dx + i) + d * (t + j)))
        .collect();
    let values = vec(&std_past);
    let mut log_w = Vec::with_capacity(model.k());
    let mut means = Vec::with_capacity(model.k());
    let mut covs = Vec::with_capacity(model.k());
    for (pi, c) in model.weights.iter().zip(&model.components) {
        let full_cov = kron(&c.col_cov, &c.row_cov);
        let cond = gaussian::condition(&vec(&c.mean), &full_cov, &observed, &values, &target)?;
        log_w.push(pi.ln() + cond.log_evidence);
        means.push(cond.mean);
        covs.push(cond.cov);
    }
    let (m, s) = response_stats(model);
    Ok(PredictiveMixture {
        weights: normalize_log_weights(&log_w),
        means,
        covs,
    }
    .destandardize(&m, &s))
}

/// `β` along a trajectory, one vector per stride-1 window.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSeries {
    /// Timestamp of the first predicted step of each window.
    pub t_predict: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
}

pub fn responsibilities_over_time(model: &MnmmModel, pair: &TrajectoryPair) -> Result<BetaSeries> {
    let spec = &model.window_spec;
    let tau = spec.tau();
    if pair.len() < tau {
        return Err(Error::Data(format!(
            "pair {} has {} samples, fewer than T + ΔT = {tau}",
            pair.pair_id,
            pair.len()
        )));
    }
    if spec.d() != 4 {
        return Err(Error::Config("trajectory prediction needs a 4-row window spec".into()));
    }
    let predictor = Predictor::new(model)?;
    let full = model.standardization.apply(&feature_matrix(pair))?;
    let starts: Vec<usize> = (0..=pair.len() - tau).collect();
    let betas = starts
        .par_iter()
        .map(|&s| predictor.weights_standardized(&full.columns(s, spec.past).into_owned()))
        .collect::<Result<Vec<_>>>()?;
    Ok(BetaSeries {
        t_predict: starts.iter().map(|&s| pair.samples[s + spec.past].time).collect(),
        betas,
    })
}

/// One output row of batch prediction, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub pair_id: String,
    pub t_predict: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Observed responses over the horizon.
    pub truth: Vec<f64>,
    /// `(component, β)` for the three largest weights.
    pub top: Vec<(usize, f64)>,
}

/// Predicts every stride-1 window of `pair`.
pub fn predict_pair(predictor: &Predictor<'_>, pair: &TrajectoryPair, stride: usize) -> Result<Vec<PredictionRecord>> {
    let spec = &predictor.model.window_spec;
    let (t, tau) = (spec.past, spec.tau());
    if spec.d() != 4 || spec.d_y != 1 {
        return Err(Error::Config("trajectory prediction needs D_x=3, D_y=1".into()));
    }
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    if pair.len() < tau {
        return Ok(Vec::new());
    }
    let full = feature_matrix(pair);
    let starts: Vec<usize> = (0..=pair.len() - tau).step_by(stride).collect();
    starts
        .par_iter()
        .map(|&s| {
            let pm = predictor.predict(&full.columns(s, t).into_owned())?;
            let (mean, var) = pm.point_predict();
            Ok(PredictionRecord {
                pair_id: pair.pair_id.clone(),
                t_predict: pair.samples[s + t].time,
                mean: mean.iter().copied().collect(),
                std: var.iter().map(|v| v.sqrt()).collect(),
                truth: (0..spec.horizon).map(|j| full[(3, s + t + j)]).collect(),
                top: pm.top(3),
            })
        })
        .collect()
}
