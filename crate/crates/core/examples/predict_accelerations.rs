//! Forecasts follower acceleration along a held-out trajectory and shows the
//! predictive mixture of one window.

use mnmr::data::{synth_generate, SynthConfig};
use mnmr::mnmm::{FitConfig, PriorConfig};
use mnmr::mnmr::{predict_pair, Predictor, WindowSpec};
use mnmr::pipeline::fit_dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> mnmr::Result<()> {
    let spec = WindowSpec::new(3, 2);
    let generated = synth_generate(&SynthConfig {
        spec: spec.clone(),
        k: 2,
        prior: PriorConfig::default(),
        n_train: 800,
        n_test: 5,
        seed: 7,
    })?;
    let model = fit_dataset(&generated.dataset, &spec, 2, &PriorConfig::default(), &FitConfig::default())?.model;
    let predictor = Predictor::new(&model)?;

    for pair in &generated.dataset.test {
        for r in predict_pair(&predictor, pair, 1)? {
            println!(
                "{} t={:.1}s mean {:?} ± {:?} truth {:?} top {:?}",
                r.pair_id, r.t_predict, r.mean, r.std, r.truth, r.top
            );
        }
    }

    let past = generated.dataset.test_windows(&spec)?[0].columns(0, spec.past).into_owned();
    let mix = predictor.predict(&past)?;
    println!("β = {:?}", mix.weights);
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let draws = mix.sample(4, &mut rng);
    println!("four draws of the next {} accelerations: {:?}", spec.horizon, draws.iter().map(|d| d.as_slice().to_vec()).collect::<Vec<_>>());
    Ok(())
}
