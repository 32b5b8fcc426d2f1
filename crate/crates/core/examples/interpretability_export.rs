//! Component shares along a trajectory, mean matrices and correlation
//! heatmaps of the dominant components, written as CSV and SVG.

use std::path::PathBuf;

use mnmr::data::{synth_generate, SynthConfig};
use mnmr::eval::interpret::export_interpretability;
use mnmr::mnmm::{FitConfig, PriorConfig};
use mnmr::mnmr::WindowSpec;
use mnmr::pipeline::fit_dataset;

fn main() -> mnmr::Result<()> {
    let out = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("interpret_out"));
    let spec = WindowSpec::new(3, 1);
    // Long pairs give a β series with more than one point.
    let generated = synth_generate(&SynthConfig {
        spec: WindowSpec::new(8, 4),
        k: 3,
        prior: PriorConfig::default(),
        n_train: 600,
        n_test: 50,
        seed: 11,
    })?;
    let mut dataset = generated.dataset;
    dataset.provenance.windowing = mnmr::data::Windowing::Sliding { stride: 1 };
    let model = fit_dataset(&dataset, &spec, 3, &PriorConfig::default(), &FitConfig::default())?.model;
    let ids: Vec<String> = dataset.test.iter().take(2).map(|p| p.pair_id.clone()).collect();
    let summary = export_interpretability(&model, &dataset, &ids, 2, &out)?;
    println!("{} windows; dominant components {:?}", summary.windows, summary.dominant);
    for f in &summary.files {
        println!("wrote {}", out.join(f).display());
    }
    Ok(())
}
