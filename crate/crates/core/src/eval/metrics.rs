//! Point-forecast errors and the training negative log-likelihood.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{vec, Matrix};
use crate::mnmm::MnmmModel;
use crate::mnmr::Predictor;

/// Pooled over all windows and steps: `(sqrt(mean e²), mean |e|)`.
pub fn rmse_mae(predictions: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<(f64, f64)> {
    if predictions.len() != truths.len() {
        return Err(Error::dim(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut n = 0usize;
    for (p, t) in predictions.iter().zip(truths) {
        if p.len() != t.len() {
            return Err(Error::dim("prediction and truth lengths differ"));
        }
        for (a, b) in p.iter().zip(t) {
            let e = a - b;
            sq += e * e;
            abs += e.abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Data("no errors to average".into()));
    }
    Ok(((sq / n as f64).sqrt(), abs / n as f64))
}

/// Mean over windows of `−ln p(vec Y' | past)` under the predictive mixture,
/// in standardized units. Windows are in physical units.
pub fn train_nll(model: &MnmmModel, windows: &[Matrix]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::Data("no training windows".into()));
    }
    let spec = &model.window_spec;
    let predictor = Predictor::new(model)?;
    let terms = windows
        .par_iter()
        .map(|w| -> Result<f64> {
            if w.shape() != (spec.d(), spec.tau()) {
                return Err(Error::dim(format!(
                    "window is {}x{}, model expects {}x{}",
                    w.nrows(),
                    w.ncols(),
                    spec.d(),
                    spec.tau()
                )));
            }
            let s = model.standardization.apply(w)?;
            let pm = predictor.predict_standardized(&s.columns(0, spec.past).into_owned())?;
            let y = vec(&s.view((spec.d_x, spec.past), (spec.d_y, spec.horizon)).into_owned());
            Ok(-pm.log_density(&y)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// One grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "dT")]
    pub dt: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    /// m/s².
    pub rmse: Option<f64>,
    /// m/s².
    pub mae: Option<f64>,
    /// Nats per window, standardized units.
    pub train_nll: Option<f64>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub fit_seconds: Option<f64>,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl MetricReport {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}
