//! Interpretability exports: component shares along trajectories, mean
//! matrices, and feature/temporal correlation structure of the dominant
//! components.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::dataset::{write_file, write_json};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{correlation, kron, Matrix};
use crate::mnmm::MnmmModel;
use crate::mnmr::{responsibilities_over_time, BetaSeries};

use super::svg::{heatmap, stacked_shares, ColorScale};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantComponent {
    pub component: usize,
    /// Average `β` over every window of the requested pairs.
    pub mean_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretSummary {
    pub pairs: Vec<String>,
    pub top_n: usize,
    pub windows: usize,
    pub dominant: Vec<DominantComponent>,
    /// Sum of the dominant components' average shares.
    pub share_sum: f64,
    pub files: Vec<String>,
}

/// File-name-safe version of a pair id.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Step labels relative to the last observed column: `-T+1 … 0 | +1 … +ΔT`.
fn step_labels(model: &MnmmModel) -> Vec<String> {
    let t = model.window_spec.past as i64;
    (0..model.window_spec.tau() as i64)
        .map(|j| {
            let rel = j - (t - 1);
            if rel > 0 { format!("+{rel}") } else { rel.to_string() }
        })
        .collect()
}

fn matrix_csv(m: &Matrix, row_labels: &[String], col_labels: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(col_labels.iter().cloned());
    w.write_record(&header)?;
    for (i, label) in row_labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("csv buffer: {e}")))
}

/// Components ranked by average share, largest first, ties by index.
pub fn dominant_components(series: &[BetaSeries], k: usize, top_n: usize) -> (Vec<DominantComponent>, usize) {
    let mut sums = vec![0.0; k];
    let mut count = 0usize;
    for s in series {
        for b in &s.betas {
            for (acc, v) in sums.iter_mut().zip(b) {
                *acc += v;
            }
            count += 1;
        }
    }
    let mut ranked: Vec<DominantComponent> = sums
        .iter()
        .enumerate()
        .map(|(component, s)| DominantComponent {
            component,
            mean_beta: if count > 0 { s / count as f64 } else { 0.0 },
        })
        .collect();
    ranked.sort_by(|a, b| b.mean_beta.total_cmp(&a.mean_beta).then(a.component.cmp(&b.component)));
    ranked.truncate(top_n);
    (ranked, count)
}

pub fn export_interpretability(
    model: &MnmmModel,
    dataset: &Dataset,
    pair_ids: &[String],
    top_n: usize,
    out: &Path,
) -> Result<InterpretSummary> {
    if top_n == 0 {
        return Err(Error::Config("top_n must be at least 1".into()));
    }
    if pair_ids.is_empty() {
        return Err(Error::Config("no pair ids given".into()));
    }
    let pairs = pair_ids
        .iter()
        .map(|id| dataset.find_pair(id).ok_or_else(|| Error::Data(format!("unknown pair id `{id}`"))))
        .collect::<Result<Vec<_>>>()?;
    let series = pairs
        .iter()
        .map(|p| responsibilities_over_time(model, p))
        .collect::<Result<Vec<_>>>()?;
    let (dominant, windows) = dominant_components(&series, model.k(), top_n.min(model.k()));
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = Vec::new();
    let mut emit = |name: String, bytes: &[u8]| -> Result<()> {
        write_file(&out.join(&name), bytes)?;
        files.push(name);
        Ok(())
    };

    let t = model.window_spec.past;
    for (pair, s) in pairs.iter().zip(&series) {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["t_predict", "v_lv", "v_fv", "gap_m"].iter().map(|h| h.to_string()).collect();
        header.extend(dominant.iter().map(|d| format!("beta_k{}", d.component)));
        header.push("beta_other".into());
        w.write_record(&header)?;
        let mut bands: Vec<(String, Vec<f64>)> = dominant
            .iter()
            .map(|d| (format!("k{}", d.component), Vec::new()))
            .collect();
        bands.push(("other".into(), Vec::new()));
        for (idx, (time, b)) in s.t_predict.iter().zip(&s.betas).enumerate() {
            let sample = &pair.samples[idx + t];
            let mut rec = vec![time.to_string(), sample.v_lv.to_string(), sample.v_fv.to_string(), sample.gap.to_string()];
            let mut dominant_sum = 0.0;
            for (band, d) in bands.iter_mut().zip(&dominant) {
                let v = b[d.component];
                dominant_sum += v;
                rec.push(v.to_string());
                band.1.push(v);
            }
            let other = (1.0 - dominant_sum).max(0.0);
            rec.push(other.to_string());
            bands.last_mut().expect("other band").1.push(other);
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(format!("csv buffer: {e}")))?;
        let stem = format!("beta_{}", sanitize(&pair.pair_id));
        emit(format!("{stem}.csv"), &bytes)?;
        let svg = stacked_shares(&s.t_predict, &bands, &format!("component shares, pair {}", pair.pair_id));
        emit(format!("{stem}.svg"), svg.as_bytes())?;
    }

    let names = model.standardization.names.clone();
    let steps = step_labels(model);
    let cells: Vec<String> = steps
        .iter()
        .flat_map(|s| names.iter().map(move |n| format!("{n}@{s}")))
        .collect();
    for d in &dominant {
        let c = &model.components[d.component];
        let k = d.component;
        let mean = model.standardization.invert(&c.mean)?;
        emit(format!("mean_k{k}.csv"), &matrix_csv(&mean, &names, &steps)?)?;
        let svg = heatmap(
            &c.mean,
            &names,
            &steps,
            ColorScale::PerRow,
            &format!("component {k} mean (standardized, per-row scale)"),
        );
        emit(format!("mean_k{k}.svg"), svg.as_bytes())?;

        let full = correlation(&kron(&c.col_cov, &c.row_cov));
        let feat = correlation(&c.row_cov);
        let time = correlation(&c.col_cov);
        for (tag, m, labels, what) in [
            ("full", &full, &cells, "corr(V⊗U)"),
            ("feat", &feat, &names, "corr(U), features"),
            ("time", &time, &steps, "corr(V), time steps"),
        ] {
            emit(format!("corr_{tag}_k{k}.csv"), &matrix_csv(m, labels, labels)?)?;
            let svg = heatmap(m, labels, labels, ColorScale::Fixed(1.0), &format!("component {k} {what}"));
            emit(format!("corr_{tag}_k{k}.svg"), svg.as_bytes())?;
        }
    }

    let summary = InterpretSummary {
        pairs: pair_ids.to_vec(),
        top_n,
        windows,
        share_sum: dominant.iter().map(|d| d.mean_beta).sum(),
        dominant,
        files,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
