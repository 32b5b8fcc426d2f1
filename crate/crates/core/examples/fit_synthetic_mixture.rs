//! Generates synthetic car-following windows from a known mixture and fits
//! it back with penalized EM.

use mnmr::data::{synth_generate, SynthConfig};
use mnmr::mnmm::{FitConfig, PriorConfig};
use mnmr::mnmr::WindowSpec;
use mnmr::pipeline::{evaluate_dataset, fit_dataset};

fn main() -> mnmr::Result<()> {
    let spec = WindowSpec::new(5, 3);
    let generated = synth_generate(&SynthConfig {
        spec: spec.clone(),
        k: 3,
        prior: PriorConfig::default(),
        n_train: 1500,
        n_test: 300,
        seed: 42,
    })?;
    let outcome = fit_dataset(&generated.dataset, &spec, 3, &PriorConfig::default(), &FitConfig::default())?;

    for r in &outcome.restarts {
        println!("restart {}: objective {:?}, {} iterations", r.index, r.objective, r.iterations);
    }
    println!("objective trace: {:?}", outcome.trace.iter().map(|j| format!("{j:.1}")).collect::<Vec<_>>());
    let mut truth = generated.truth.weights.clone();
    truth.sort_by(f64::total_cmp);
    let mut fitted = outcome.model.weights.clone();
    fitted.sort_by(f64::total_cmp);
    println!("sorted weights, truth:  {truth:.3?}");
    println!("sorted weights, fitted: {fitted:.3?}");

    let e = evaluate_dataset(&outcome.model, &generated.dataset)?;
    println!("test RMSE {:.4} m/s^2, MAE {:.4} m/s^2, train NLL {:.3}", e.rmse, e.mae, e.train_nll);
    Ok(())
}
