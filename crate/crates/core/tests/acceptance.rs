//! Acceptance gate. Prints one line per criterion and exits non-zero when any
//! criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mnmr::data::synth::physical_stats;
use mnmr::data::{synth_generate, Dataset, SynthConfig, Windowing};
use mnmr::linalg::{vec, Matrix};
use mnmr::matnorm::MatrixNormalParams;
use mnmr::mnmm::{sample_lkj, sample_prior, FitConfig, MnmmModel, PriorConfig, Shrinkage};
use mnmr::mnmr::{oracle_condition_vectorized, predictive_distribution, PredictiveMixture, WindowSpec};
use mnmr::pipeline::{build_highd_dataset, evaluate_dataset, fit_dataset, highd_recordings, IngestOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use common::{dense_kron, dense_logpdf, random_spd, write_highd_recording};

enum Outcome {
    Pass(String),
    Fail(String),
    Skipped(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn random_spec<R: Rng>(rng: &mut R, max_d: usize, max_tau: usize) -> WindowSpec {
    let d = rng.random_range(2..=max_d);
    let d_y = rng.random_range(1..d);
    let past = rng.random_range(1..max_tau);
    let horizon = rng.random_range(1..=max_tau - past);
    WindowSpec {
        d_x: d - d_y,
        d_y,
        past,
        horizon,
        step_seconds: 0.2,
    }
}

fn random_model<R: Rng>(rng: &mut R, max_k: usize, max_d: usize, max_tau: usize) -> MnmmModel {
    let spec = random_spec(rng, max_d, max_tau);
    let k = rng.random_range(1..=max_k);
    let mut model = sample_prior(&spec, k, &PriorConfig::default(), rng).unwrap();
    for i in 0..spec.d() {
        model.standardization.mean[i] = rng.random_range(-5.0..5.0);
        model.standardization.std[i] = rng.random_range(0.2..3.0);
    }
    model
}

fn random_past<R: Rng>(model: &MnmmModel, rng: &mut R) -> Matrix {
    let spec = &model.window_spec;
    let st = &model.standardization;
    Matrix::from_fn(spec.d(), spec.past, |i, _| st.mean[i] + st.std[i] * rng.random_range(-2.5..2.5))
}

fn mixture_gap(a: &PredictiveMixture, b: &PredictiveMixture) -> (f64, f64, f64) {
    let w = a.weights.iter().zip(&b.weights).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let m = a.means.iter().zip(&b.means).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
    let c = a.covs.iter().zip(&b.covs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    (w, m, c)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(1..=4);
        let tau = rng.random_range(1..=6);
        let u = random_spd(d, &mut rng);
        let v = random_spd(tau, &mut rng);
        let m = Matrix::from_fn(d, tau, |_, _| rng.random_range(-2.0..2.0));
        let x = Matrix::from_fn(d, tau, |_, _| rng.random_range(-3.0..3.0));
        let params = MatrixNormalParams::new(m.clone(), u.clone(), v.clone()).unwrap();
        let fast = params.logpdf(&x).unwrap();
        let dense = dense_logpdf(vec(&x).as_slice(), vec(&m).as_slice(), &dense_kron(&v, &u));
        worst = worst.max((fast - dense).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-8 && secs < 10.0,
        format!("max |Δ logpdf| = {worst:.2e} (tol 1e-8), {secs:.2} s (limit 10 s)"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(202);
    let (mut w, mut m, mut c) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let model = random_model(&mut rng, 5, 4, 8);
        let past = random_past(&model, &mut rng);
        let fast = predictive_distribution(&model, &past).unwrap();
        let oracle = oracle_condition_vectorized(&model, &past).unwrap();
        let (dw, dm, dc) = mixture_gap(&fast, &oracle);
        w = w.max(dw);
        m = m.max(dm);
        c = c.max(dc);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        w <= 1e-10 && m <= 1e-8 && c <= 1e-8 && secs < 60.0,
        format!("β {w:.2e} (tol 1e-10), means {m:.2e} (tol 1e-8), covs {c:.2e} (tol 1e-8), {secs:.2} s (limit 60 s)"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let model = random_model(&mut rng, 4, 4, 8);
        let past = random_past(&model, &mut rng);
        let base = predictive_distribution(&model, &past).unwrap();
        for i in 0..model.k() {
            let c = &model.components[i];
            // Points drawn from the component keep the log-density at a magnitude
            // where 1e-10 is above the rounding floor.
            let x = c.sample(&mut rng).unwrap();
            for xi in [0.5, 2.0, 10.0] {
                let scaled = c.rescaled(xi);
                worst = worst.max((c.logpdf(&x).unwrap() - scaled.logpdf(&x).unwrap()).abs());
                let mut other = model.clone();
                other.components[i] = scaled;
                let (dw, dm, dc) = mixture_gap(&base, &predictive_distribution(&other, &past).unwrap());
                worst = worst.max(dw).max(dm).max(dc);
            }
        }
    }
    verdict(worst <= 1e-10, format!("max change {worst:.2e} (tol 1e-10)"))
}

fn criterion_4() -> Outcome {
    let mut worst_drop: f64 = 0.0;
    let mut fits = 0;
    let mut failures = Vec::new();
    for (i, k) in [1usize, 3, 5].iter().cycle().take(20).enumerate() {
        let generated = synth_generate(&SynthConfig {
            spec: WindowSpec::new(3, 2),
            k: *k,
            prior: PriorConfig::default(),
            n_train: 400,
            n_test: 10,
            seed: 400 + i as u64,
        })
        .unwrap();
        let config = FitConfig {
            restarts: 1,
            seed: i as u64,
            ..Default::default()
        };
        match fit_dataset(&generated.dataset, &WindowSpec::new(3, 2), *k, &PriorConfig::default(), &config) {
            Ok(outcome) => {
                fits += 1;
                for pair in outcome.trace.windows(2) {
                    worst_drop = worst_drop.max(pair[0] - pair[1]);
                }
            }
            Err(e) => failures.push(format!("fit {i}: {e}")),
        }
    }
    verdict(
        fits == 20 && worst_drop <= 1e-6,
        format!("{fits}/20 fits, largest per-iteration decrease {worst_drop:.2e} (tol 1e-6) {}", failures.join("; ")),
    )
}

/// A model expressed in the standardized coordinates of `target`.
fn restandardize(c: &MatrixNormalParams, from: (&[f64], &[f64]), to: (&[f64], &[f64])) -> MatrixNormalParams {
    let d = c.rows();
    let ratio: Vec<f64> = (0..d).map(|i| from.1[i] / to.1[i]).collect();
    let mean = Matrix::from_fn(d, c.cols(), |i, j| (from.0[i] + from.1[i] * c.mean[(i, j)] - to.0[i]) / to.1[i]);
    let row_cov = Matrix::from_fn(d, d, |i, j| ratio[i] * c.row_cov[(i, j)] * ratio[j]);
    MatrixNormalParams::new(mean, row_cov, c.col_cov.clone()).unwrap().normalize_scale()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm()
}

struct RecoveryRun {
    passed: usize,
    slowest: f64,
    lines: Vec<String>,
}

fn recovery(fit_prior: &PriorConfig) -> RecoveryRun {
    let spec = WindowSpec::new(5, 3);
    let k = 3;
    let mut run = RecoveryRun {
        passed: 0,
        slowest: 0.0,
        lines: Vec::new(),
    };
    for seed in 0..5u64 {
        let generated = synth_generate(&SynthConfig {
            spec: spec.clone(),
            k,
            prior: PriorConfig::default(),
            n_train: 2000,
            n_test: 10,
            seed: 500 + seed,
        })
        .unwrap();
        let start = Instant::now();
        let fitted = fit_dataset(&generated.dataset, &spec, k, fit_prior, &FitConfig {
            seed,
            ..Default::default()
        });
        let secs = start.elapsed().as_secs_f64();
        run.slowest = run.slowest.max(secs);
        let model = match fitted {
            Ok(o) => o.model,
            Err(e) => {
                run.lines.push(format!("seed {seed}: fit failed ({e})"));
                continue;
            }
        };
        let phys = physical_stats();
        let st = &model.standardization;
        let truth: Vec<MatrixNormalParams> = generated
            .truth
            .components
            .iter()
            .map(|c| restandardize(c, (&phys.mean, &phys.std), (&st.mean, &st.std)))
            .collect();
        let best = permutations(k)
            .into_iter()
            .map(|p| {
                let cost: f64 = (0..k).map(|i| (&model.components[p[i]].mean - &truth[i].mean).norm()).sum();
                (cost, p)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        let (mut dpi, mut dmean, mut du, mut dv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..k {
            let f = &model.components[best[i]];
            let t = &truth[i];
            dpi = dpi.max((model.weights[best[i]] - generated.truth.weights[i]).abs());
            dmean = dmean.max((&f.mean - &t.mean).amax());
            du = du.max(rel(&f.row_cov, &t.row_cov));
            dv = dv.max(rel(&f.col_cov, &t.col_cov));
        }
        let ok = dpi <= 0.05 && dmean <= 0.1 && du <= 0.15 && dv <= 0.15 && secs < 180.0;
        run.passed += ok as usize;
        run.lines.push(format!(
            "seed {seed}: {} π {dpi:.3} mean {dmean:.3} U {du:.3} V {dv:.3} ({secs:.1} s)",
            if ok { "ok" } else { "miss" }
        ));
    }
    run
}

/// Gated on the maximum-likelihood fit. The default shrinkage grows with
/// `n_k`, so its bias does not vanish with N; that run is reported only.
fn criterion_5() -> Outcome {
    let ml = recovery(&PriorConfig {
        shrinkage: Shrinkage::Fixed { gamma: 0.0 },
        ..Default::default()
    });
    let shrunk = recovery(&PriorConfig::default());
    verdict(
        ml.passed >= 4 && ml.slowest < 180.0,
        format!(
            "{}/5 seeds within π 0.05, mean 0.1, cov 0.15 (need 4), slowest fit {:.1} s (limit 180 s)\n    {}\n  \
             default shrinkage (not gated): {}/5\n    {}",
            ml.passed,
            ml.slowest,
            ml.lines.join("\n    "),
            shrunk.passed,
            shrunk.lines.join("\n    ")
        ),
    )
}

/// Temporally correlated truth: `V` from LKJ(η=2).
fn trend_prior() -> PriorConfig {
    PriorConfig {
        eta: 2.0,
        ..Default::default()
    }
}

fn criterion_6() -> Outcome {
    let k = 3;
    let cells = [(5usize, 1usize), (5, 3), (5, 5), (1, 3)];
    let mut sums = [0.0f64; 4];
    for seed in 0..5u64 {
        let generated = synth_generate(&SynthConfig {
            spec: WindowSpec::new(5, 5),
            k,
            prior: trend_prior(),
            n_train: 2000,
            n_test: 500,
            seed: 600 + seed,
        })
        .unwrap();
        assert_eq!(generated.dataset.provenance.windowing, Windowing::Anchored { anchor: 5 });
        for (idx, &(t, dt)) in cells.iter().enumerate() {
            let spec = WindowSpec::new(t, dt);
            let fitted = fit_dataset(&generated.dataset, &spec, k, &PriorConfig::default(), &FitConfig {
                seed,
                restarts: 3,
                ..Default::default()
            });
            match fitted.and_then(|o| evaluate_dataset(&o.model, &generated.dataset)) {
                Ok(e) => sums[idx] += e.rmse / 5.0,
                Err(e) => return Outcome::Fail(format!("seed {seed} T={t} ΔT={dt}: {e}")),
            }
        }
    }
    let [r1, r3, r5, t1] = sums;
    verdict(
        r1 < r3 && r3 < r5 && r3 <= t1,
        format!("mean RMSE T=5: ΔT=1 {r1:.4}, ΔT=3 {r3:.4}, ΔT=5 {r5:.4}; T=1 ΔT=3 {t1:.4}"),
    )
}

fn criterion_7() -> Outcome {
    let Some(dir) = std::env::var_os("HIGHD_DIR") else {
        return Outcome::Skipped("HIGHD_DIR not set".into());
    };
    let dir = Path::new(&dir);
    let run = || -> mnmr::Result<(usize, f64)> {
        let recordings = highd_recordings(dir)?;
        let (dataset, summary) = build_highd_dataset(&recordings, &IngestOptions::default(), 0)?;
        let spec = WindowSpec::new(3, 1);
        let outcome = fit_dataset(&dataset, &spec, 5, &PriorConfig::default(), &FitConfig::default())?;
        let e = evaluate_dataset(&outcome.model, &dataset)?;
        Ok((summary.kept_pairs, e.rmse))
    };
    match run() {
        Ok((pairs, rmse)) => {
            let pairs_ok = (111..=135).contains(&pairs);
            let rmse_ok = rmse <= 0.013 * 5.0 && rmse >= 0.013 / 5.0;
            verdict(
                pairs_ok && rmse_ok,
                format!("{pairs} pairs (expected about 123, accepted 111..=135), RMSE {rmse:.4} m/s^2 (accepted 0.0026..=0.065)"),
            )
        }
        Err(e) => Outcome::Fail(format!("pipeline error: {e}")),
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(808);
    let n = 50_000;
    let mut draws: Vec<f64> = (0..n).map(|_| sample_lkj(2, 1.0, &mut rng)[(0, 1)]).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    draws.sort_by(f64::total_cmp);
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x + 1.0) / 2.0;
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    verdict(
        mean.abs() <= 0.02 && ks < 0.02,
        format!("mean {mean:.4} (tol 0.02), KS {ks:.4} (limit 0.02)"),
    )
}

fn cli(out: &Path, args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_mnmr"))
        .args(["--seed", "7", "--out"])
        .arg(out)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr)))
    }
}

fn run_cli_suite(root: &Path, highd: &Path) -> Result<(), String> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let data = root.join("synth");
    let fit = root.join("fit");
    let cfg = root.join("config.json");
    std::fs::write(&cfg, r#"{"fit": {"restarts": 2, "max_iters": 40}, "grid": {"T_set": [1, 2], "dT_set": [1], "K_set": [1, 2]}}"#)
        .map_err(|e| e.to_string())?;
    let c = s(&cfg);
    cli(&data, &["--config", &c, "synth", "--k", "2", "--n-train", "150", "--n-test", "40", "--past", "3", "--horizon", "2"])?;
    cli(&fit, &["--config", &c, "fit", "--data", &s(&data), "--k", "2", "--past", "3", "--horizon", "2"])?;
    let model = s(&fit.join("model.json"));
    cli(&root.join("predict"), &["predict", "--model", &model, "--data", &s(&data), "--split", "all"])?;
    cli(&root.join("evaluate"), &["evaluate", "--model", &model, "--data", &s(&data)])?;
    cli(&root.join("grid"), &["--config", &c, "grid", "--data", &s(&data)])?;
    let dataset = Dataset::read(&data).map_err(|e| e.to_string())?;
    let pair = dataset.train[0].pair_id.clone();
    cli(&root.join("inspect"), &["inspect", "--model", &model, "--data", &s(&data), "--pair", &pair, "--top-n", "2"])?;
    cli(&root.join("ingest"), &["ingest", "--highd-dir", &s(highd)])?;
    Ok(())
}

fn collect_outputs(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if matches!(path.extension().and_then(|e| e.to_str()), Some("csv" | "json")) {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_9() -> Outcome {
    let highd = tempfile::tempdir().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(909);
    write_highd_recording(highd.path(), "01", 3, 1600, &mut rng);
    write_highd_recording(highd.path(), "02", 2, 1500, &mut rng);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for root in [a.path(), b.path()] {
        if let Err(e) = run_cli_suite(root, highd.path()) {
            return Outcome::Fail(format!("command failed: {e}"));
        }
    }
    let (fa, fb) = (collect_outputs(a.path()), collect_outputs(b.path()));
    let names_match = fa.iter().map(|f| &f.0).eq(fb.iter().map(|f| &f.0));
    let differing: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    verdict(
        names_match && differing.is_empty() && !fa.is_empty(),
        format!("{} CSV/JSON files compared across two runs, {} differ {:?}", fa.len(), differing.len(), differing),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("kronecker/vec log-density equivalence", criterion_1),
        ("regression oracle equivalence", criterion_2),
        ("scale identifiability", criterion_3),
        ("EM monotonicity", criterion_4),
        ("parameter recovery", criterion_5),
        ("trend reproduction", criterion_6),
        ("HighD reproduction", criterion_7),
        ("LKJ sampler", criterion_8),
        ("CLI determinism", criterion_9),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass(d) => println!("criterion {n} ({name}): PASS [{secs:.1} s] {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.1} s] {d}");
            }
            Outcome::Skipped(d) => println!("criterion {n} ({name}): SKIPPED {d}"),
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
