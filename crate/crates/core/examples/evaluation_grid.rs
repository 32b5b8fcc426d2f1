//! A small `{T, ΔT, K}` grid with a result cache, printed as a table.

use mnmr::data::{synth_generate, SynthConfig};
use mnmr::eval::grid::{grid_table, run_grid, GridConfig};
use mnmr::mnmm::{FitConfig, PriorConfig};
use mnmr::mnmr::WindowSpec;

fn main() -> mnmr::Result<()> {
    let dataset = synth_generate(&SynthConfig {
        spec: WindowSpec::new(5, 5),
        k: 3,
        prior: PriorConfig::default(),
        n_train: 600,
        n_test: 150,
        seed: 3,
    })?
    .dataset;
    let cache = std::env::temp_dir().join("mnmr-grid-example");
    let config = GridConfig {
        t_set: vec![1, 3, 5],
        dt_set: vec![1, 3, 5],
        k_set: vec![1, 3],
        prior: PriorConfig::default(),
        fit: FitConfig {
            restarts: 2,
            ..Default::default()
        },
        cache_dir: Some(cache.clone()),
        record_timing: false,
    };
    let result = run_grid(&dataset, &config)?;
    print!("{}", grid_table(&result.reports));
    println!("{} cells fitted, the rest read from {}", result.refits, cache.display());
    Ok(())
}
