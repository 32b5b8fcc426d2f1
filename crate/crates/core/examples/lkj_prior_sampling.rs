//! Draws LKJ correlation matrices and a full mixture from the prior.

use mnmr::mnmm::{sample_dataset, sample_lkj, sample_prior, PriorConfig};
use mnmr::mnmr::WindowSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> mnmr::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for eta in [0.5, 1.0, 5.0, 50.0] {
        let n = 5000;
        let mean_abs: f64 = (0..n)
            .map(|_| {
                let c = sample_lkj(4, eta, &mut rng);
                (c.sum() - c.trace()).abs() / 12.0
            })
            .sum::<f64>()
            / n as f64;
        println!("eta {eta:>4}: mean |average off-diagonal| over 4x4 draws = {mean_abs:.3}");
    }

    let spec = WindowSpec::new(3, 2);
    let prior = PriorConfig {
        eta: 2.0,
        ..Default::default()
    };
    let model = sample_prior(&spec, 3, &prior, &mut rng)?;
    println!("mixing weights: {:?}", model.weights);
    for (k, c) in model.components.iter().enumerate() {
        println!("component {k}: trace(V) = {:.3}, diag(U) = {:?}", c.col_cov.trace(), c.row_cov.diagonal().as_slice());
    }
    let (windows, labels) = sample_dataset(&model, 5, &mut rng)?;
    println!("first window (label {}):{}", labels[0], windows[0]);
    Ok(())
}
