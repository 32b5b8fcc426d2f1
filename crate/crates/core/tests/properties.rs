mod common;

use mnmr::data::{make_windows, StandardizationStats, TrajectoryPair, TrajectorySample};
use mnmr::linalg::{vec, Matrix, Vector};
use mnmr::mnmm::{e_step, sample_dataset, sample_prior, MnmmModel, PriorConfig};
use mnmr::mnmr::{predictive_distribution, Predictor, WindowSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use common::dense_kron;

fn model_from_seed(seed: u64) -> MnmmModel {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d = rng.random_range(2..=4);
    let d_y = rng.random_range(1..d);
    let past = rng.random_range(1..=4);
    let horizon = rng.random_range(1..=3);
    let spec = WindowSpec {
        d_x: d - d_y,
        d_y,
        past,
        horizon,
        step_seconds: 0.2,
    };
    let k = rng.random_range(1..=4);
    let mut m = sample_prior(&spec, k, &PriorConfig::default(), &mut rng).unwrap();
    for i in 0..d {
        m.standardization.mean[i] = rng.random_range(-3.0..3.0);
        m.standardization.std[i] = rng.random_range(0.5..2.0);
    }
    m
}

fn past_for(model: &MnmmModel, seed: u64) -> Matrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xabcdef);
    let s = &model.window_spec;
    let st = &model.standardization;
    Matrix::from_fn(s.d(), s.past, |i, _| st.mean[i] + st.std[i] * rng.random_range(-2.0..2.0))
}

/// Dense Gaussian conditioning written from the textbook formulas with an
/// explicit inverse, independent of the library's solvers.
fn dense_condition(mean: &Vector, cov: &Matrix, obs: &[usize], values: &Vector, target: &[usize]) -> (Vector, Matrix, f64) {
    let pick = |rows: &[usize], cols: &[usize]| Matrix::from_fn(rows.len(), cols.len(), |i, j| cov[(rows[i], cols[j])]);
    let s11 = pick(obs, obs);
    let s21 = pick(target, obs);
    let s22 = pick(target, target);
    let inv = s11.clone().try_inverse().unwrap();
    let diff = Vector::from_fn(obs.len(), |i, _| values[i] - mean[obs[i]]);
    let mu = Vector::from_fn(target.len(), |i, _| mean[target[i]]) + &s21 * &inv * &diff;
    let sigma = &s22 - &s21 * &inv * s21.transpose();
    let n = obs.len() as f64;
    let quad = (diff.transpose() * &inv * &diff)[(0, 0)];
    let log_ev = -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + s11.determinant().ln() + quad);
    (mu, sigma, log_ev)
}

#[test]
fn predictor_matches_textbook_conditioning() {
    for seed in 0..60u64 {
        let model = model_from_seed(seed);
        let past = past_for(&model, seed);
        let s = &model.window_spec;
        let st = &model.standardization;
        let (d, t) = (s.d(), s.past);
        let obs: Vec<usize> = (0..d * t).collect();
        let target: Vec<usize> = (0..s.horizon)
            .flat_map(|j| (0..s.d_y).map(move |i| s.d_x + i + d * (t + j)))
            .collect();
        let z = Matrix::from_fn(d, t, |i, j| (past[(i, j)] - st.mean[i]) / st.std[i]);
        let values = vec(&z);
        let mut log_w = Vec::new();
        let mut expected = Vec::new();
        for (pi, c) in model.weights.iter().zip(&model.components) {
            let (mu, sigma, le) = dense_condition(&vec(&c.mean), &dense_kron(&c.col_cov, &c.row_cov), &obs, &values, &target);
            log_w.push(pi.ln() + le);
            let scale: Vec<f64> = (0..target.len()).map(|i| st.std[s.d_x + i % s.d_y]).collect();
            let shift: Vec<f64> = (0..target.len()).map(|i| st.mean[s.d_x + i % s.d_y]).collect();
            let mu = Vector::from_fn(mu.len(), |i, _| mu[i] * scale[i] + shift[i]);
            let sigma = Matrix::from_fn(sigma.nrows(), sigma.ncols(), |i, j| sigma[(i, j)] * scale[i] * scale[j]);
            expected.push((mu, sigma));
        }
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = log_w.iter().map(|l| (l - top).exp()).sum();
        let beta: Vec<f64> = log_w.iter().map(|l| (l - top).exp() / total).collect();

        let got = predictive_distribution(&model, &past).unwrap();
        for k in 0..model.k() {
            assert!((got.weights[k] - beta[k]).abs() < 1e-8, "seed {seed} β");
            assert!((&got.means[k] - &expected[k].0).amax() < 1e-6, "seed {seed} mean");
            assert!((&got.covs[k] - &expected[k].1).amax() < 1e-6, "seed {seed} cov");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_on_simplex_and_covariances_psd(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        let mix = predictive_distribution(&model, &past_for(&model, seed)).unwrap();
        let sum: f64 = mix.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(mix.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
        for c in &mix.covs {
            prop_assert!((c - c.transpose()).amax() <= 1e-10 * c.amax().max(1.0));
            let min_eig = c.clone().symmetric_eigenvalues().min();
            prop_assert!(min_eig >= -1e-10 * c.amax().max(1.0));
        }
    }

    #[test]
    fn point_prediction_is_beta_weighted_mean(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        let mix = Predictor::new(&model).unwrap().predict(&past_for(&model, seed)).unwrap();
        let (mean, var) = mix.point_predict();
        let mut expected = Vector::zeros(mix.dim());
        for (w, m) in mix.weights.iter().zip(&mix.means) {
            expected += m * *w;
        }
        prop_assert!((&mean - &expected).amax() < 1e-9 * expected.amax().max(1.0));
        prop_assert!(var.iter().all(|&v| v >= -1e-9));
    }

    #[test]
    fn fitted_components_are_scale_normalized(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        let tau = model.window_spec.tau() as f64;
        for c in &model.components {
            prop_assert!((c.col_cov.trace() - tau).abs() < 1e-9);
        }
        prop_assert!((model.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn responsibilities_rows_sum_to_one(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (ws, _) = sample_dataset(&model, 20, &mut rng).unwrap();
        let r = e_step(&model, &ws).unwrap();
        for i in 0..ws.len() {
            prop_assert!((r.resp.row(i).sum() - 1.0).abs() < 1e-10);
            prop_assert!(r.resp.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn standardization_inverts(values in proptest::collection::vec(-50.0f64..50.0, 24)) {
        let w = Matrix::from_column_slice(4, 6, &values);
        let w2 = w.map(|v| v * 0.5 + 1.0);
        let names: Vec<String> = (0..4).map(|i| format!("f{i}")).collect();
        prop_assume!((0..4).all(|i| (w[(i, 0)] - w[(i, 1)]).abs() > 1e-3));
        let stats = StandardizationStats::fit(&[w.clone(), w2], &names).unwrap();
        let back = stats.invert(&stats.apply(&w).unwrap()).unwrap();
        prop_assert!((&back - &w).amax() <= 1e-12 * w.amax().max(1.0));
    }

    #[test]
    fn window_count_formula(len in 2usize..60, past in 1usize..6, horizon in 1usize..4, stride in 1usize..5) {
        let pair = TrajectoryPair {
            pair_id: "p".into(),
            samples: (0..len)
                .map(|j| TrajectorySample { time: j as f64 * 0.2, v_fv: 20.0, v_lv: 21.0, gap: 30.0, a_fv: 0.1 * j as f64 })
                .collect(),
            rate_hz: 5.0,
        };
        let spec = WindowSpec::new(past, horizon);
        let tau = spec.tau();
        let ws = make_windows(&pair, &spec, stride).unwrap();
        let expected = if len >= tau { (len - tau) / stride + 1 } else { 0 };
        prop_assert_eq!(ws.len(), expected);
        for (n, w) in ws.iter().enumerate() {
            prop_assert_eq!(w[(3, 0)], 0.1 * (n * stride) as f64);
        }
    }
}
