//! Matrix normal mixture model: priors, sampling, and penalized EM.

pub mod em;
pub mod kmeans;
pub mod model;
pub mod prior;

pub use em::{
    e_step, fit_em, m_step, penalized_objective, update_col_cov, update_row_cov, FitConfig, FitOutcome, MStep,
    Responsibilities, RestartSummary,
};
pub use model::{FitMetadata, MnmmModel, MODEL_SCHEMA_VERSION};
pub use prior::{
    sample_categorical, sample_component, sample_dataset, sample_dirichlet, sample_lkj, sample_prior, PriorConfig, Shrinkage,
    TemporalDecay,
};

/// `ln Σ exp(x_i)`, stable for large magnitudes. Empty or all `-∞` gives `-∞`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
