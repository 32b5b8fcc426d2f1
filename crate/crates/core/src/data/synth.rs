//! Synthetic car-following data drawn from a mixture sampled from the prior.
//!
//! Each sampled window is mapped to physical units with a fixed affine map
//! and stored as its own short pair, so the usual canonical files and
//! windowing code apply unchanged.
//!
//! Components are drawn from the prior conditioned on physical plausibility:
//! a component is redrawn unless every entry of its windows keeps a positive
//! gap and non-negative speeds at least [`MIN_MARGIN_SD`] standard deviations
//! from the limit. Windows are then almost never rejected, so the data follow
//! the returned truth model rather than a truncated version of it.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::matnorm::MatrixNormalParams;
use crate::mnmm::{sample_categorical, sample_component, sample_prior, MnmmModel, PriorConfig};
use crate::mnmr::WindowSpec;

use super::dataset::{Dataset, Provenance, SplitParams, GAP_CONVENTION};
use super::standardize::StandardizationStats;
use super::trajectory::{feature_names, TrajectoryPair, TrajectorySample};
use super::windows::Windowing;

/// Physical centre of `(v_fv, Δv, gap, a_fv)` for a standardized value of 0.
pub const SYNTH_CENTER: [f64; 4] = [25.0, 0.0, 35.0, 0.0];
/// Physical size of one standardized unit.
pub const SYNTH_SCALE: [f64; 4] = [3.0, 1.5, 6.0, 0.5];

const MAX_REDRAWS: usize = 10_000;
/// Distance to a physical limit, in marginal standard deviations, required of
/// every window entry of a truth component.
pub const MIN_MARGIN_SD: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub spec: WindowSpec,
    pub k: usize,
    pub prior: PriorConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    /// Ground truth, with standardization equal to the physical map.
    pub truth: MnmmModel,
    pub train_labels: Vec<usize>,
    pub test_labels: Vec<usize>,
}

pub fn physical_stats() -> StandardizationStats {
    StandardizationStats {
        names: feature_names(),
        mean: SYNTH_CENTER.to_vec(),
        std: SYNTH_SCALE.to_vec(),
    }
}

/// Smallest distance, in standard deviations, from a physical limit over all
/// entries of a standardized component: `gap > 0`, `v_fv ≥ 0`, `v_lv ≥ 0`.
pub fn plausibility_margin(c: &MatrixNormalParams) -> f64 {
    let (u, v) = (&c.row_cov, &c.col_cov);
    let [c0, c1, c2, _] = SYNTH_CENTER;
    let [s0, s1, s2, _] = SYNTH_SCALE;
    // v_lv = v_fv − Δv is the linear form (s0, −s1) on rows 0 and 1.
    let var_lv = s0 * s0 * u[(0, 0)] - 2.0 * s0 * s1 * u[(0, 1)] + s1 * s1 * u[(1, 1)];
    let mut worst = f64::INFINITY;
    for j in 0..c.cols() {
        let vj = v[(j, j)];
        let m = |i: usize| c.mean[(i, j)];
        let gap = (c2 + s2 * m(2)) / (s2 * (u[(2, 2)] * vj).sqrt());
        let v_fv = (c0 + s0 * m(0)) / (s0 * (u[(0, 0)] * vj).sqrt());
        let v_lv = (c0 - c1 + s0 * m(0) - s1 * m(1)) / (var_lv * vj).sqrt();
        worst = worst.min(gap).min(v_fv).min(v_lv);
    }
    worst
}

fn window_to_pair(id: String, window: &Matrix, step: f64) -> Option<TrajectoryPair> {
    let mut samples = Vec::with_capacity(window.ncols());
    for j in 0..window.ncols() {
        let v_fv = window[(0, j)];
        let v_lv = v_fv - window[(1, j)];
        let gap = window[(2, j)];
        if !(gap > 0.0 && v_fv >= 0.0 && v_lv >= 0.0) {
            return None;
        }
        samples.push(TrajectorySample {
            time: j as f64 * step,
            v_fv,
            v_lv,
            gap,
            a_fv: window[(3, j)],
        });
    }
    Some(TrajectoryPair {
        pair_id: id,
        samples,
        rate_hz: 1.0 / step,
    })
}

/// Samples a truth model and `n_train + n_test` single-window pairs. Windows
/// that would have a non-positive gap or a negative speed are redrawn from
/// the same component.
pub fn synth_generate(config: &SynthConfig) -> Result<SynthOutput> {
    let spec = &config.spec;
    if spec.d() != 4 || spec.d_y != 1 {
        return Err(Error::Config("synthetic trajectories need D_x=3, D_y=1".into()));
    }
    if config.n_train < 2 || config.n_test < 1 {
        return Err(Error::Config(format!(
            "synthetic data needs at least 2 train and 1 test windows, got {} and {}",
            config.n_train, config.n_test
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut truth = sample_prior(spec, config.k, &config.prior, &mut rng)?;
    for (z, c) in truth.components.iter_mut().enumerate() {
        let mut attempt = 0;
        while plausibility_margin(c) < MIN_MARGIN_SD {
            attempt += 1;
            if attempt >= MAX_REDRAWS {
                return Err(Error::Config(format!(
                    "component {z}: no physically plausible draw from the prior; prior is too diffuse"
                )));
            }
            *c = sample_component(spec, &config.prior, &mut rng)?;
        }
    }
    truth.standardization = physical_stats();
    let factored = truth
        .components
        .iter()
        .map(|c| c.factor())
        .collect::<Result<Vec<_>>>()?;

    let mut draw = |prefix: &str, n: usize| -> Result<(Vec<TrajectoryPair>, Vec<usize>)> {
        let mut pairs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let z = sample_categorical(&truth.weights, &mut rng);
            let id = format!("{prefix}{i:06}");
            let mut attempt = 0;
            let pair = loop {
                let physical = truth.standardization.invert(&factored[z].sample(&mut rng))?;
                if let Some(p) = window_to_pair(id.clone(), &physical, spec.step_seconds) {
                    break p;
                }
                attempt += 1;
                if attempt >= MAX_REDRAWS {
                    return Err(Error::Config(format!(
                        "component {z} rarely yields a positive gap and speeds; prior is too diffuse"
                    )));
                }
            };
            pairs.push(pair);
            labels.push(z);
        }
        Ok((pairs, labels))
    };
    let (train, train_labels) = draw("syn-train-", config.n_train)?;
    let (test, test_labels) = draw("syn-test-", config.n_test)?;

    let total = (config.n_train + config.n_test) as f64;
    let provenance = Provenance {
        source: "synthetic".into(),
        source_files: Vec::new(),
        seed: config.seed,
        downsample_factor: None,
        min_duration_s: None,
        split: SplitParams {
            train_fraction: config.n_train as f64 / total,
            rounding: "fixed counts".into(),
            seed: config.seed,
        },
        windowing: Windowing::Anchored { anchor: spec.past },
        gap_convention: GAP_CONVENTION.into(),
        extra: serde_json::json!({
            "K": config.k,
            "T": spec.past,
            "dT": spec.horizon,
            "prior": config.prior,
            "physical_center": SYNTH_CENTER,
            "physical_scale": SYNTH_SCALE,
        }),
    };
    Ok(SynthOutput {
        dataset: Dataset {
            train,
            test,
            provenance,
        },
        truth,
        train_labels,
        test_labels,
    })
}
