//! The `{T, ΔT, K}` experiment grid with per-cell result caching.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::dataset::{write_file, write_json};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mnmm::{FitConfig, PriorConfig};
use crate::mnmr::WindowSpec;
use crate::pipeline::{evaluate_dataset, fit_dataset};

use super::metrics::MetricReport;

pub const GRID_CSV: &str = "grid_results.csv";
pub const GRID_TABLE: &str = "grid_table.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(rename = "T_set")]
    pub t_set: Vec<usize>,
    #[serde(rename = "dT_set")]
    pub dt_set: Vec<usize>,
    #[serde(rename = "K_set")]
    pub k_set: Vec<usize>,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub fit: FitConfig,
    /// Per-cell result cache; no caching when absent.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Wall-clock fit time makes the output non-reproducible, so it is only
    /// recorded on request.
    #[serde(default)]
    pub record_timing: bool,
}

impl GridConfig {
    /// The full experiment: T and ΔT in {1, 3, 5, 7, 9}, K in {5, 10, 20, 40, 60}.
    pub fn full(fit: FitConfig) -> Self {
        Self {
            t_set: vec![1, 3, 5, 7, 9],
            dt_set: vec![1, 3, 5, 7, 9],
            k_set: vec![5, 10, 20, 40, 60],
            prior: PriorConfig::default(),
            fit,
            cache_dir: None,
            record_timing: false,
        }
    }

    /// Cells in table order: `ΔT`, then `T`, then `K`.
    pub fn cells(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for &dt in &self.dt_set {
            for &t in &self.t_set {
                for &k in &self.k_set {
                    out.push((t, dt, k));
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.t_set.is_empty() || self.dt_set.is_empty() || self.k_set.is_empty() {
            return Err(Error::Config("grid sets must be non-empty".into()));
        }
        if self.t_set.iter().chain(&self.dt_set).chain(&self.k_set).any(|&v| v == 0) {
            return Err(Error::Config("grid values must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub reports: Vec<MetricReport>,
    /// Cells that were fitted in this run rather than read from the cache.
    pub refits: usize,
}

fn cache_key(config: &GridConfig, checksum: &str, cell: (usize, usize, usize)) -> Result<String> {
    let key = serde_json::json!({
        "version": 1,
        "data": checksum,
        "T": cell.0,
        "dT": cell.1,
        "K": cell.2,
        "prior": config.prior,
        "fit": config.fit,
        "record_timing": config.record_timing,
    });
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&key)?)))
}

fn run_cell(dataset: &Dataset, config: &GridConfig, (t, dt, k): (usize, usize, usize)) -> MetricReport {
    let spec = WindowSpec::new(t, dt);
    let start = Instant::now();
    let result = fit_dataset(dataset, &spec, k, &config.prior, &config.fit)
        .and_then(|outcome| evaluate_dataset(&outcome.model, dataset));
    let seconds = start.elapsed().as_secs_f64();
    let mut report = MetricReport {
        t,
        dt,
        k,
        seed: config.fit.seed,
        rmse: None,
        mae: None,
        train_nll: None,
        n_train: None,
        n_test: None,
        fit_seconds: config.record_timing.then_some(seconds),
        status: "ok".into(),
    };
    match result {
        Ok(e) => {
            report.rmse = Some(e.rmse);
            report.mae = Some(e.mae);
            report.train_nll = Some(e.train_nll);
            report.n_train = Some(e.n_train);
            report.n_test = Some(e.n_test);
        }
        Err(e) => report.status = format!("failed: {e}"),
    }
    report
}

/// Fits and evaluates every cell. Failures are recorded in their row and do
/// not stop the grid.
pub fn run_grid(dataset: &Dataset, config: &GridConfig) -> Result<GridResult> {
    config.validate()?;
    let checksum = dataset.checksum()?;
    if let Some(dir) = &config.cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let refits = AtomicUsize::new(0);
    let reports = config
        .cells()
        .into_par_iter()
        .map(|cell| -> Result<MetricReport> {
            let path = match &config.cache_dir {
                Some(dir) => Some(dir.join(format!("{}.json", cache_key(config, &checksum, cell)?))),
                None => None,
            };
            if let Some(p) = &path {
                if let Ok(bytes) = std::fs::read(p) {
                    if let Ok(report) = serde_json::from_slice::<MetricReport>(&bytes) {
                        return Ok(report);
                    }
                }
            }
            refits.fetch_add(1, Ordering::Relaxed);
            let report = run_cell(dataset, config, cell);
            if let Some(p) = &path {
                write_json(p, &report)?;
            }
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridResult {
        reports,
        refits: refits.into_inner(),
    })
}

pub fn grid_csv_bytes(reports: &[MetricReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(r)?;
    }
    if reports.is_empty() {
        w.write_record([
            "T", "dT", "K", "seed", "rmse", "mae", "train_nll", "n_train", "n_test", "fit_seconds", "status",
        ])?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("csv buffer: {e}")))
}

fn cell_text(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

/// Plain-text table: one row per `(ΔT, T)`, RMSE, MAE and NLL blocks over K.
pub fn grid_table(reports: &[MetricReport]) -> String {
    let mut ks: Vec<usize> = reports.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for r in reports {
        if !rows.contains(&(r.dt, r.t)) {
            rows.push((r.dt, r.t));
        }
    }
    let w = 8;
    let mut s = String::new();
    let _ = writeln!(s, "Regression performance on the acceleration response");
    let _ = writeln!(s, "RMSE and MAE on test windows in m/s^2; NLL per training window in standardized units");
    let block = |name: &str| format!("{name:<width$}", width = w * ks.len());
    let _ = writeln!(s, "{:>4} {:>4} | {} | {} | {}", "", "", block("RMSE / K"), block("MAE / K"), block("NLL / K"));
    let kh: String = ks.iter().map(|k| format!("{k:>w$}")).collect();
    let _ = writeln!(s, "{:>4} {:>4} | {kh} | {kh} | {kh}", "dT", "T");
    for (dt, t) in rows {
        let get = |k: usize| reports.iter().find(|r| r.dt == dt && r.t == t && r.k == k);
        let col = |f: &dyn Fn(&MetricReport) -> Option<f64>| -> String {
            ks.iter()
                .map(|&k| format!("{:>w$}", cell_text(get(k).and_then(f))))
                .collect()
        };
        let _ = writeln!(
            s,
            "{dt:>4} {t:>4} | {} | {} | {}",
            col(&|r| r.rmse),
            col(&|r| r.mae),
            col(&|r| r.train_nll)
        );
    }
    let failed = reports.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        let _ = writeln!(s, "{failed} cell(s) failed; see the status column of {GRID_CSV}");
    }
    s
}

/// Writes the CSV and the text table into `out`.
pub fn write_grid(result: &GridResult, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_file(&out.join(GRID_CSV), &grid_csv_bytes(&result.reports)?)?;
    write_file(&out.join(GRID_TABLE), grid_table(&result.reports).as_bytes())
}
