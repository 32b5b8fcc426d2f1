//! Penalized EM for the matrix normal mixture.
//!
//! The objective maximized is
//!
//! ```text
//! J = Σ_i log Σ_k π_k MN(X_i | M_k, U_k, V_k)
//!     + (α − 1) Σ_k ln π_k
//!     − Σ_k γ_k/2 · (ln|U_k| + tr U_k⁻¹ + ln|V_k| + tr V_k⁻¹)
//! ```
//!
//! The Dirichlet term yields the pseudo-count weight update and the
//! inverse-Wishart-style terms yield the identity-shrunk flip-flop updates.
//! Every update is an exact coordinate maximizer of the expected complete
//! log-likelihood plus penalty, so `J` never decreases. The penalty is not
//! invariant under `(ξU, V/ξ)`, so the iterates are kept unnormalized and
//! only returned models are scale-normalized.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::StandardizationStats;
use crate::error::{Error, Result};
use crate::linalg::{spd_factor_auto, symmetrize, vec, Matrix};
use crate::matnorm::{FactoredMatrixNormal, MatrixNormalParams};
use crate::mnmr::WindowSpec;

use super::kmeans::kmeans;
use super::log_sum_exp;
use super::model::{FitMetadata, MnmmModel};
use super::prior::PriorConfig;

/// Minimum mixing weight before a component counts as starved.
pub const MIN_WEIGHT: f64 = 1e-4;
/// Effective count below which a component's weighted mean is not computed.
const MIN_MASS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Responsibilities {
    /// `N×K`, rows on the simplex.
    pub resp: Matrix,
    /// Per-window log-likelihood `log Σ_k π_k MN(X_i | θ_k)`.
    pub log_lik: Vec<f64>,
}

impl Responsibilities {
    pub fn total_log_lik(&self) -> f64 {
        self.log_lik.iter().sum()
    }

    pub fn counts(&self) -> Vec<f64> {
        (0..self.resp.ncols()).map(|k| self.resp.column(k).sum()).collect()
    }

    /// One-hot responsibilities from hard labels.
    pub fn from_labels(labels: &[usize], k: usize) -> Self {
        let mut resp = Matrix::zeros(labels.len(), k);
        for (i, &l) in labels.iter().enumerate() {
            resp[(i, l)] = 1.0;
        }
        Self {
            resp,
            log_lik: vec![0.0; labels.len()],
        }
    }
}

fn check_windows(windows: &[Matrix], d: usize, tau: usize) -> Result<()> {
    if let Some((i, w)) = windows.iter().enumerate().find(|(_, w)| w.shape() != (d, tau)) {
        return Err(Error::dim(format!(
            "window {i} is {}x{}, model expects {d}x{tau}",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

/// Posterior component probabilities `r_ik ∝ π_k MN(X_i | θ_k)`.
pub fn e_step(model: &MnmmModel, windows: &[Matrix]) -> Result<Responsibilities> {
    check_windows(windows, model.window_spec.d(), model.window_spec.tau())?;
    e_step_parts(&model.weights, &model.components, windows)
}

pub(crate) fn e_step_parts(
    weights: &[f64],
    components: &[MatrixNormalParams],
    windows: &[Matrix],
) -> Result<Responsibilities> {
    let factored = components
        .iter()
        .map(FactoredMatrixNormal::new)
        .collect::<Result<Vec<_>>>()?;
    let log_pi: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let k = weights.len();
    let rows = windows
        .par_iter()
        .map(|x| -> Result<(Vec<f64>, f64)> {
            let mut lw = Vec::with_capacity(k);
            for (lp, f) in log_pi.iter().zip(&factored) {
                lw.push(lp + f.logpdf(x)?);
            }
            let lse = log_sum_exp(&lw);
            if !lse.is_finite() {
                return Err(Error::Fit("window has zero likelihood under every component".into()));
            }
            Ok((lw.into_iter().map(|l| (l - lse).exp()).collect(), lse))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut resp = Matrix::zeros(windows.len(), k);
    let mut log_lik = Vec::with_capacity(windows.len());
    for (i, (r, lse)) in rows.into_iter().enumerate() {
        let s: f64 = r.iter().sum();
        for (j, v) in r.into_iter().enumerate() {
            resp[(i, j)] = v / s;
        }
        log_lik.push(lse);
    }
    Ok(Responsibilities { resp, log_lik })
}

fn weighted_mean(windows: &[Matrix], r: &[f64], n_k: f64) -> Matrix {
    let mut acc = Matrix::zeros(windows[0].nrows(), windows[0].ncols());
    for (x, &w) in windows.iter().zip(r) {
        if w > 0.0 {
            acc += x * w;
        }
    }
    acc / n_k
}

/// `U = [Σ_i r_i (X_i − M) V⁻¹ (X_i − M)ᵀ + γ I] / (n τ + γ)`.
pub fn update_row_cov(windows: &[Matrix], r: &[f64], mean: &Matrix, col_cov: &Matrix, gamma: f64) -> Result<Matrix> {
    let (d, tau) = mean.shape();
    let whiten_t = spd_factor_auto(col_cov, "V")?.lower_inverse().transpose();
    let mut scatter = Matrix::zeros(d, d);
    let mut n = 0.0;
    for (x, &w) in windows.iter().zip(r) {
        n += w;
        if w > 0.0 {
            let a = (x - mean) * &whiten_t;
            scatter.gemm(w, &a, &a.transpose(), 1.0);
        }
    }
    let mut u = (scatter + Matrix::identity(d, d) * gamma) / (n * tau as f64 + gamma);
    symmetrize(&mut u);
    Ok(u)
}

/// `V = [Σ_i r_i (X_i − M)ᵀ U⁻¹ (X_i − M) + γ I] / (n D + γ)`.
pub fn update_col_cov(windows: &[Matrix], r: &[f64], mean: &Matrix, row_cov: &Matrix, gamma: f64) -> Result<Matrix> {
    let (d, tau) = mean.shape();
    let whiten = spd_factor_auto(row_cov, "U")?.lower_inverse();
    let mut scatter = Matrix::zeros(tau, tau);
    let mut n = 0.0;
    for (x, &w) in windows.iter().zip(r) {
        n += w;
        if w > 0.0 {
            let a = &whiten * (x - mean);
            scatter.gemm(w, &a.transpose(), &a, 1.0);
        }
    }
    let mut v = (scatter + Matrix::identity(tau, tau) * gamma) / (n * d as f64 + gamma);
    symmetrize(&mut v);
    Ok(v)
}

/// Output of a single maximization step.
#[derive(Debug, Clone)]
pub struct MStep {
    pub weights: Vec<f64>,
    /// Scale-normalized components.
    pub components: Vec<MatrixNormalParams>,
    /// Effective counts `n_k = Σ_i r_ik`.
    pub counts: Vec<f64>,
    /// Components below the starvation thresholds.
    pub starved: Vec<bool>,
    /// Starved components whose update was ill-posed and that were set to the
    /// prior mean parameters.
    pub frozen: Vec<bool>,
}

struct Maximizer<'a> {
    windows: &'a [Matrix],
    prior: &'a PriorConfig,
    flip_flop_iters: usize,
    gammas: &'a [f64],
    fallback: &'a MatrixNormalParams,
}

struct RawStep {
    weights: Vec<f64>,
    components: Vec<MatrixNormalParams>,
    counts: Vec<f64>,
    starved: Vec<bool>,
    frozen: Vec<bool>,
}

impl Maximizer<'_> {
    /// `previous` supplies the flip-flop starting `V` and the parameters of
    /// already frozen components.
    fn run(&self, resp: &Matrix, previous: Option<&[MatrixNormalParams]>, frozen: &[bool]) -> Result<RawStep> {
        let n = self.windows.len() as f64;
        let k = resp.ncols();
        let (d, tau) = self.windows[0].shape();
        let alpha = self.prior.alpha;
        let counts: Vec<f64> = (0..k).map(|j| resp.column(j).sum()).collect();
        let denom = n + k as f64 * (alpha - 1.0);
        let weights: Vec<f64> = counts.iter().map(|c| (c + alpha - 1.0) / denom).collect();

        let results = (0..k)
            .into_par_iter()
            .map(|j| -> Result<(MatrixNormalParams, bool, bool)> {
                let starved = counts[j] < (d + tau) as f64 || weights[j] < MIN_WEIGHT;
                if frozen[j] {
                    let p = previous.map(|p| p[j].clone()).unwrap_or_else(|| self.fallback.clone());
                    return Ok((p, starved, true));
                }
                // With γ_k > 0 the shrunk update stays well-posed for a starved
                // component and remains an exact maximizer, so only components
                // without shrinkage or without mass are frozen.
                if starved && (self.gammas[j] <= 0.0 || counts[j] < MIN_MASS) {
                    return Ok((self.fallback.clone(), true, true));
                }
                let r: Vec<f64> = resp.column(j).iter().copied().collect();
                let mean = weighted_mean(self.windows, &r, counts[j]);
                let mut col_cov = match previous {
                    Some(p) => p[j].col_cov.clone(),
                    None => Matrix::identity(tau, tau),
                };
                let mut row_cov = Matrix::identity(d, d);
                for _ in 0..self.flip_flop_iters {
                    row_cov = update_row_cov(self.windows, &r, &mean, &col_cov, self.gammas[j])?;
                    col_cov = update_col_cov(self.windows, &r, &mean, &row_cov, self.gammas[j])?;
                }
                Ok((MatrixNormalParams::new(mean, row_cov, col_cov)?, starved, false))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut components = Vec::with_capacity(k);
        let mut starved = Vec::with_capacity(k);
        let mut frozen_now = Vec::with_capacity(k);
        for (c, s, f) in results {
            components.push(c);
            starved.push(s);
            frozen_now.push(f);
        }
        Ok(RawStep {
            weights,
            components,
            counts,
            starved,
            frozen: frozen_now,
        })
    }
}

fn prior_fallback(prior: &PriorConfig, d: usize, tau: usize) -> Result<MatrixNormalParams> {
    Ok(prior.mean_prior(d, tau)?.normalize_scale())
}

fn check_prior_for_fit(prior: &PriorConfig) -> Result<()> {
    prior.validate()?;
    if prior.alpha < 1.0 {
        return Err(Error::Config(format!(
            "MAP mixing weights need alpha ≥ 1, got {}",
            prior.alpha
        )));
    }
    Ok(())
}

/// One maximization step from the given responsibilities, starting the
/// flip-flop at `V = I`, with `γ_k` taken from the current counts.
pub fn m_step(
    windows: &[Matrix],
    resp: &Responsibilities,
    prior: &PriorConfig,
    flip_flop_iters: usize,
) -> Result<MStep> {
    check_prior_for_fit(prior)?;
    if windows.is_empty() || resp.resp.nrows() != windows.len() {
        return Err(Error::dim("responsibilities do not match the windows"));
    }
    if flip_flop_iters == 0 {
        return Err(Error::Config("flip_flop_iters must be at least 1".into()));
    }
    let (d, tau) = windows[0].shape();
    check_windows(windows, d, tau)?;
    let counts = resp.counts();
    let gammas: Vec<f64> = counts.iter().map(|&c| prior.shrinkage.gamma(c, d, tau)).collect();
    let fallback = prior_fallback(prior, d, tau)?;
    let frozen = vec![false; counts.len()];
    let step = Maximizer {
        windows,
        prior,
        flip_flop_iters,
        gammas: &gammas,
        fallback: &fallback,
    }
    .run(&resp.resp, None, &frozen)?;
    Ok(MStep {
        weights: step.weights,
        components: step.components.iter().map(|c| c.normalize_scale()).collect(),
        counts: step.counts,
        starved: step.starved,
        frozen: step.frozen,
    })
}

/// Penalized log-likelihood `J` (see module docs).
pub fn penalized_objective(
    log_lik: f64,
    weights: &[f64],
    components: &[MatrixNormalParams],
    gammas: &[f64],
    alpha: f64,
) -> Result<f64> {
    let mut j = log_lik;
    if alpha != 1.0 {
        j += (alpha - 1.0) * weights.iter().map(|w| w.ln()).sum::<f64>();
    }
    for (c, &g) in components.iter().zip(gammas) {
        if g == 0.0 {
            continue;
        }
        let fu = spd_factor_auto(&c.row_cov, "U")?;
        let fv = spd_factor_auto(&c.col_cov, "V")?;
        let pen = fu.log_det() + fu.inverse().trace() + fv.log_det() + fv.inverse().trace();
        j -= 0.5 * g * pen;
    }
    Ok(j)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub restarts: usize,
    pub flip_flop_iters: usize,
    pub seed: u64,
    pub kmeans_iters: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            rel_tol: 1e-6,
            restarts: 5,
            flip_flop_iters: 2,
            seed: 0,
            kmeans_iters: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: MnmmModel,
    /// Penalized objective after each maximization, for the chosen restart.
    pub trace: Vec<f64>,
    pub restarts: Vec<RestartSummary>,
}

struct RestartResult {
    weights: Vec<f64>,
    components: Vec<MatrixNormalParams>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    starved: Vec<bool>,
    frozen: Vec<bool>,
}

fn restart_rng(seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_restart(
    windows: &[Matrix],
    k: usize,
    prior: &PriorConfig,
    config: &FitConfig,
    index: usize,
) -> Result<RestartResult> {
    let (d, tau) = windows[0].shape();
    let mut rng = restart_rng(config.seed, index);
    let points: Vec<_> = windows.iter().map(vec).collect();
    let labels = kmeans(&points, k, config.kmeans_iters, &mut rng);
    let init = Responsibilities::from_labels(&labels, k);
    // γ_k is fixed from the initial partition so the objective stays the
    // same function across iterations.
    let gammas: Vec<f64> = init
        .counts()
        .iter()
        .map(|&c| prior.shrinkage.gamma(c, d, tau))
        .collect();
    let fallback = prior_fallback(prior, d, tau)?;
    let maximizer = Maximizer {
        windows,
        prior,
        flip_flop_iters: config.flip_flop_iters,
        gammas: &gammas,
        fallback: &fallback,
    };
    let mut frozen = vec![false; k];
    let mut starved = vec![false; k];
    let mut step = maximizer.run(&init.resp, None, &frozen)?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        for (f, s) in frozen.iter_mut().zip(&step.frozen) {
            *f |= *s;
        }
        for (f, s) in starved.iter_mut().zip(&step.starved) {
            *f |= *s;
        }
        let e = e_step_parts(&step.weights, &step.components, windows)?;
        let j = penalized_objective(e.total_log_lik(), &step.weights, &step.components, &gammas, prior.alpha)?;
        if !j.is_finite() {
            return Err(Error::Fit(format!("objective became {j} at iteration {iterations}")));
        }
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if (j - prev).abs() <= config.rel_tol * prev.abs() {
                trace.push(j);
                converged = true;
                break;
            }
        }
        trace.push(j);
        if iterations >= config.max_iters {
            break;
        }
        step = maximizer.run(&e.resp, Some(&step.components), &frozen)?;
        iterations += 1;
    }
    Ok(RestartResult {
        weights: step.weights,
        components: step.components,
        trace,
        iterations,
        converged,
        starved,
        frozen,
    })
}

/// Best-of-restarts penalized EM. Restarts run in parallel; the result is
/// deterministic given `config.seed`.
pub fn fit_em(
    windows: &[Matrix],
    spec: &WindowSpec,
    k: usize,
    prior: &PriorConfig,
    config: &FitConfig,
) -> Result<FitOutcome> {
    spec.validate()?;
    check_prior_for_fit(prior)?;
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    if config.restarts == 0 || config.flip_flop_iters == 0 {
        return Err(Error::Config("restarts and flip_flop_iters must be at least 1".into()));
    }
    if windows.len() < k {
        return Err(Error::Config(format!(
            "cannot fit K={k} components to {} windows",
            windows.len()
        )));
    }
    check_windows(windows, spec.d(), spec.tau())?;

    let results: Vec<Result<RestartResult>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(windows, k, prior, config, r))
        .collect();

    let mut summaries = Vec::with_capacity(results.len());
    let mut best: Option<(usize, RestartResult)> = None;
    for (index, res) in results.into_iter().enumerate() {
        match res {
            Ok(r) => {
                let obj = *r.trace.last().expect("trace has an entry");
                summaries.push(RestartSummary {
                    index,
                    objective: Some(obj),
                    iterations: r.iterations,
                    converged: r.converged,
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((_, b)) => obj > *b.trace.last().expect("trace has an entry"),
                };
                if better {
                    best = Some((index, r));
                }
            }
            Err(e) => summaries.push(RestartSummary {
                index,
                objective: None,
                iterations: 0,
                converged: false,
                error: Some(e.to_string()),
            }),
        }
    }
    let Some((index, r)) = best else {
        let diag: Vec<String> = summaries
            .iter()
            .map(|s| format!("restart {}: {}", s.index, s.error.as_deref().unwrap_or("?")))
            .collect();
        return Err(Error::Fit(format!("every restart failed ({})", diag.join("; "))));
    };
    let names = if spec.d() == 4 && spec.d_y == 1 {
        crate::data::trajectory::feature_names()
    } else {
        (0..spec.d()).map(|i| format!("f{i}")).collect()
    };
    let model = MnmmModel::new(
        r.weights,
        r.components.iter().map(|c| c.normalize_scale()).collect(),
        spec.clone(),
        StandardizationStats::identity(names),
        prior.clone(),
        FitMetadata {
            iterations: r.iterations,
            final_objective: *r.trace.last().expect("trace has an entry"),
            restart_index: index,
            seed: config.seed,
            converged: r.converged,
            starved: r.starved,
            frozen: r.frozen,
        },
    )?;
    Ok(FitOutcome {
        model,
        trace: r.trace,
        restarts: summaries,
    })
}
