//! End-to-end steps shared by the CLI, the examples and the grid: building a
//! dataset from HighD files, fitting on a dataset, and evaluating a model.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::dataset::GAP_CONVENTION;
use crate::data::highd::FollowerCounts;
use crate::data::trajectory::feature_names;
use crate::data::{
    downsample, filter_pairs, ingest_highd, split, Dataset, Provenance, StandardizationStats, WindowMatrix,
    Windowing,
};
use crate::error::{Error, Result};
use crate::eval::metrics::{rmse_mae, train_nll};
use crate::mnmm::{fit_em, FitConfig, FitOutcome, PriorConfig};
use crate::mnmr::{Predictor, WindowSpec};
use crate::mnmm::MnmmModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub downsample_factor: usize,
    pub min_duration_s: f64,
    pub train_fraction: f64,
    pub stride: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            downsample_factor: 5,
            min_duration_s: 50.0,
            train_fraction: 0.75,
            stride: 1,
        }
    }
}

/// `(tracks, tracksMeta)` file pairs found in a HighD `data/` directory,
/// sorted by recording.
pub fn highd_recordings(dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(rec) = name.strip_suffix("_tracks.csv") {
            let meta = dir.join(format!("{rec}_tracksMeta.csv"));
            if meta.exists() {
                out.push((path.clone(), meta));
            }
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::Data(format!("no *_tracks.csv with matching *_tracksMeta.csv in {}", dir.display())));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSummary {
    pub recordings: usize,
    pub raw_pairs: usize,
    pub kept_pairs: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub followers: Vec<FollowerCounts>,
}

/// Ingests every recording, downsamples, filters by duration and splits.
pub fn build_highd_dataset(
    recordings: &[(PathBuf, PathBuf)],
    options: &IngestOptions,
    seed: u64,
) -> Result<(Dataset, IngestSummary)> {
    if options.downsample_factor == 0 || options.stride == 0 {
        return Err(Error::Config("downsample factor and stride must be at least 1".into()));
    }
    let reports = recordings
        .par_iter()
        .map(|(t, m)| ingest_highd(t, m))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    let mut followers = Vec::new();
    for r in reports {
        pairs.extend(r.pairs);
        followers.extend(r.followers);
    }
    let raw_pairs = pairs.len();
    let pairs: Vec<_> = pairs.iter().map(|p| downsample(p, options.downsample_factor)).collect();
    let pairs = filter_pairs(pairs, options.min_duration_s);
    let kept_pairs = pairs.len();
    let (train, test, split_params) = split(pairs, options.train_fraction, seed)?;
    let summary = IngestSummary {
        recordings: recordings.len(),
        raw_pairs,
        kept_pairs,
        train_pairs: train.len(),
        test_pairs: test.len(),
        followers: Vec::new(),
    };
    let dataset = Dataset {
        train,
        test,
        provenance: Provenance {
            source: "highD".into(),
            source_files: recordings
                .iter()
                .flat_map(|(t, m)| [t, m])
                .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
                .collect(),
            seed,
            downsample_factor: Some(options.downsample_factor),
            min_duration_s: Some(options.min_duration_s),
            split: split_params,
            windowing: Windowing::Sliding { stride: options.stride },
            gap_convention: GAP_CONVENTION.into(),
            extra: serde_json::json!({
                "raw_pairs": raw_pairs,
                "kept_pairs": kept_pairs,
                "dropped_rows": followers.iter().map(|f: &FollowerCounts| {
                    f.dropped_nonpositive_gap + f.dropped_missing_leader + f.dropped_negative_speed
                }).sum::<usize>(),
            }),
        },
    };
    Ok((dataset, IngestSummary { followers, ..summary }))
}

/// Standardizes with train statistics, fits, and attaches the statistics to
/// the returned model.
pub fn fit_windows(
    raw_windows: &[WindowMatrix],
    spec: &WindowSpec,
    k: usize,
    prior: &PriorConfig,
    config: &FitConfig,
) -> Result<FitOutcome> {
    let names = if spec.d() == 4 {
        feature_names()
    } else {
        (0..spec.d()).map(|i| format!("f{i}")).collect()
    };
    let stats = StandardizationStats::fit(raw_windows, &names)?;
    let standardized = stats.apply_all(raw_windows)?;
    let mut outcome = fit_em(&standardized, spec, k, prior, config)?;
    outcome.model.standardization = stats;
    Ok(outcome)
}

pub fn fit_dataset(
    dataset: &Dataset,
    spec: &WindowSpec,
    k: usize,
    prior: &PriorConfig,
    config: &FitConfig,
) -> Result<FitOutcome> {
    let windows = dataset.train_windows(spec)?;
    if windows.is_empty() {
        return Err(Error::Data(format!(
            "no training windows of length {} in the dataset",
            spec.tau()
        )));
    }
    fit_windows(&windows, spec, k, prior, config)
}

/// Test metrics of a model: point forecasts in physical units against the
/// observed responses of every test window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rmse: f64,
    pub mae: f64,
    pub train_nll: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Point forecasts for the response block of each window.
pub fn forecast_windows(model: &MnmmModel, windows: &[WindowMatrix]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let spec = &model.window_spec;
    let predictor = Predictor::new(model)?;
    let pairs = windows
        .par_iter()
        .map(|w| -> Result<(Vec<f64>, Vec<f64>)> {
            let past = w.columns(0, spec.past).into_owned();
            let (mean, _) = predictor.predict(&past)?.point_predict();
            let truth = crate::linalg::vec(&w.view((spec.d_x, spec.past), (spec.d_y, spec.horizon)).into_owned());
            Ok((mean.iter().copied().collect(), truth.iter().copied().collect()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs.into_iter().unzip())
}

pub fn evaluate_windows(model: &MnmmModel, train: &[WindowMatrix], test: &[WindowMatrix]) -> Result<Evaluation> {
    let (pred, truth) = forecast_windows(model, test)?;
    let (rmse, mae) = rmse_mae(&pred, &truth)?;
    Ok(Evaluation {
        rmse,
        mae,
        train_nll: train_nll(model, train)?,
        n_train: train.len(),
        n_test: test.len(),
    })
}

pub fn evaluate_dataset(model: &MnmmModel, dataset: &Dataset) -> Result<Evaluation> {
    let spec = &model.window_spec;
    evaluate_windows(model, &dataset.train_windows(spec)?, &dataset.test_windows(spec)?)
}
