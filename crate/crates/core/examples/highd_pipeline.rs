//! HighD ingestion, fit and evaluation of one `(T, ΔT, K)` cell.
//!
//! Usage: `cargo run --release --example highd_pipeline -- <highD data dir>`

use std::path::PathBuf;

use mnmr::mnmm::{FitConfig, PriorConfig};
use mnmr::mnmr::WindowSpec;
use mnmr::pipeline::{build_highd_dataset, evaluate_dataset, fit_dataset, highd_recordings, IngestOptions};

fn main() -> mnmr::Result<()> {
    let Some(dir) = std::env::args_os().nth(1).map(PathBuf::from) else {
        eprintln!("usage: highd_pipeline <directory with XX_tracks.csv and XX_tracksMeta.csv>");
        std::process::exit(2);
    };
    let recordings = highd_recordings(&dir)?;
    let (dataset, summary) = build_highd_dataset(&recordings, &IngestOptions::default(), 0)?;
    println!(
        "{} recordings, {} pairs, {} longer than 50 s ({} train / {} test)",
        summary.recordings, summary.raw_pairs, summary.kept_pairs, summary.train_pairs, summary.test_pairs
    );
    let spec = WindowSpec::new(3, 1);
    let outcome = fit_dataset(&dataset, &spec, 5, &PriorConfig::default(), &FitConfig::default())?;
    let e = evaluate_dataset(&outcome.model, &dataset)?;
    println!(
        "T=3 dT=1 K=5: RMSE {:.4} m/s^2, MAE {:.4} m/s^2, train NLL {:.3} ({} train / {} test windows)",
        e.rmse, e.mae, e.train_nll, e.n_train, e.n_test
    );
    Ok(())
}
