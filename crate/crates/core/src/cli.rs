//! Command-line front end. Every command reads an optional JSON run config,
//! takes all randomness from `--seed`, and writes into `--out`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::dataset::{write_file, write_json};
use crate::data::{synth_generate, Dataset, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::grid::{run_grid, write_grid, GridConfig};
use crate::eval::interpret::export_interpretability;
use crate::mnmm::{FitConfig, MnmmModel, PriorConfig, RestartSummary};
use crate::mnmr::{predict_pair, Predictor, WindowSpec};
use crate::pipeline::{build_highd_dataset, evaluate_dataset, fit_dataset, highd_recordings, IngestOptions};

#[derive(Debug, Parser)]
#[command(name = "mnmr", version, about = "Matrix normal mixture regression for car-following data")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a canonical dataset from HighD recordings.
    Ingest(IngestArgs),
    /// Sample a ground-truth mixture and a synthetic dataset from it.
    Synth(SynthArgs),
    /// Fit a mixture on a dataset's training pairs.
    Fit(FitArgs),
    /// Predict every window of a dataset split.
    Predict(PredictArgs),
    /// Test RMSE/MAE and training NLL of a model.
    Evaluate(ModelDataArgs),
    /// Fit and evaluate over a grid of T, ΔT and K.
    Grid(GridArgs),
    /// Export component shares, means and correlations.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory holding `XX_tracks.csv` and `XX_tracksMeta.csv` files.
    #[arg(long, conflicts_with_all = ["tracks", "meta"])]
    pub highd_dir: Option<PathBuf>,
    #[arg(long, requires = "meta")]
    pub tracks: Vec<PathBuf>,
    #[arg(long, requires = "tracks")]
    pub meta: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub past: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Past steps `T`.
    #[arg(long)]
    pub past: Option<usize>,
    /// Future steps `ΔT`.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Args)]
pub struct ModelDataArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitChoice {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub io: ModelDataArgs,
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    pub split: SplitChoice,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub past_set: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub horizon_set: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub k_set: Option<Vec<usize>>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Record wall-clock fit seconds (output is then not reproducible).
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub io: ModelDataArgs,
    /// Pair ids to analyse; comma separated or repeated.
    #[arg(long = "pair", value_delimiter = ',', required = true)]
    pub pairs: Vec<String>,
    #[arg(long)]
    pub top_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    #[serde(rename = "T")]
    pub past: usize,
    #[serde(rename = "dT")]
    pub horizon: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { past: 3, horizon: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    #[serde(rename = "K")]
    pub k: usize,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(rename = "T")]
    pub past: usize,
    #[serde(rename = "dT")]
    pub horizon: usize,
    pub prior: PriorConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            k: 3,
            n_train: 2000,
            n_test: 500,
            past: 5,
            horizon: 3,
            prior: PriorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    #[serde(rename = "T_set")]
    pub t_set: Vec<usize>,
    #[serde(rename = "dT_set")]
    pub dt_set: Vec<usize>,
    #[serde(rename = "K_set")]
    pub k_set: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            t_set: vec![1, 3, 5, 7, 9],
            dt_set: vec![1, 3, 5, 7, 9],
            k_set: vec![5, 10, 20, 40, 60],
        }
    }
}

/// Contents of `--config`; every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub prior: PriorConfig,
    pub fit: FitConfig,
    pub window: WindowConfig,
    #[serde(rename = "K")]
    pub k: usize,
    pub ingest: IngestOptions,
    pub synth: SynthSection,
    pub grid: GridSection,
    pub top_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            prior: PriorConfig::default(),
            fit: FitConfig::default(),
            window: WindowConfig::default(),
            k: 5,
            ingest: IngestOptions::default(),
            synth: SynthSection::default(),
            grid: GridSection::default(),
            top_n: 5,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn ensure_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

#[derive(Serialize)]
struct FitReport<'a> {
    trace: &'a [f64],
    restarts: &'a [RestartSummary],
}

fn window_spec(cfg: &RunConfig, w: &WindowArgs) -> WindowSpec {
    WindowSpec::new(w.past.unwrap_or(cfg.window.past), w.horizon.unwrap_or(cfg.window.horizon))
}

fn predictions_csv(model: &MnmmModel, dataset: &Dataset, split: SplitChoice, stride: usize) -> Result<Vec<u8>> {
    let predictor = Predictor::new(model)?;
    let pairs: Vec<_> = match split {
        SplitChoice::Train => dataset.train.iter().collect(),
        SplitChoice::Test => dataset.test.iter().collect(),
        SplitChoice::All => dataset.train.iter().chain(&dataset.test).collect(),
    };
    let horizon = model.window_spec.horizon;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["pair_id".to_string(), "t_predict".to_string()];
    for j in 1..=horizon {
        header.extend([format!("mean_{j}"), format!("std_{j}"), format!("truth_{j}")]);
    }
    for r in 1..=3 {
        header.extend([format!("top{r}_k"), format!("top{r}_beta")]);
    }
    w.write_record(&header)?;
    for pair in pairs {
        for rec in predict_pair(&predictor, pair, stride)? {
            let mut row = vec![rec.pair_id.clone(), rec.t_predict.to_string()];
            for j in 0..horizon {
                row.extend([rec.mean[j].to_string(), rec.std[j].to_string(), rec.truth[j].to_string()]);
            }
            for r in 0..3 {
                match rec.top.get(r) {
                    Some((k, b)) => row.extend([k.to_string(), b.to_string()]),
                    None => row.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(|e| Error::Data(format!("csv buffer: {e}")))
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let out = &cli.out;
    let fit_config = FitConfig {
        seed: cli.seed,
        ..cfg.fit.clone()
    };
    match cli.command {
        Command::Ingest(args) => {
            let recordings = match args.highd_dir {
                Some(dir) => highd_recordings(&dir)?,
                None => {
                    if args.tracks.is_empty() || args.tracks.len() != args.meta.len() {
                        return Err(Error::Config(
                            "give --highd-dir, or matching numbers of --tracks and --meta".into(),
                        ));
                    }
                    args.tracks.into_iter().zip(args.meta).collect()
                }
            };
            let (dataset, summary) = build_highd_dataset(&recordings, &cfg.ingest, cli.seed)?;
            ensure_out(out)?;
            dataset.write(out)?;
            write_json(&out.join("ingest_report.json"), &summary)?;
            eprintln!(
                "{} pairs kept of {} ({} train / {} test)",
                summary.kept_pairs, summary.raw_pairs, summary.train_pairs, summary.test_pairs
            );
        }
        Command::Synth(args) => {
            let s = &cfg.synth;
            let config = SynthConfig {
                spec: WindowSpec::new(args.past.unwrap_or(s.past), args.horizon.unwrap_or(s.horizon)),
                k: args.k.unwrap_or(s.k),
                prior: s.prior.clone(),
                n_train: args.n_train.unwrap_or(s.n_train),
                n_test: args.n_test.unwrap_or(s.n_test),
                seed: cli.seed,
            };
            let generated = synth_generate(&config)?;
            ensure_out(out)?;
            generated.dataset.write(out)?;
            generated.truth.save(&out.join("truth_model.json"))?;
            write_json(&out.join("truth_labels.json"), &serde_json::json!({
                "train": generated.train_labels,
                "test": generated.test_labels,
            }))?;
        }
        Command::Fit(args) => {
            let dataset = Dataset::read(&args.data)?;
            let spec = window_spec(&cfg, &args.window);
            let outcome = fit_dataset(&dataset, &spec, args.k.unwrap_or(cfg.k), &cfg.prior, &fit_config)?;
            ensure_out(out)?;
            outcome.model.save(&out.join("model.json"))?;
            write_json(
                &out.join("fit_report.json"),
                &FitReport {
                    trace: &outcome.trace,
                    restarts: &outcome.restarts,
                },
            )?;
        }
        Command::Predict(args) => {
            let model = MnmmModel::load(&args.io.model)?;
            let dataset = Dataset::read(&args.io.data)?;
            let bytes = predictions_csv(&model, &dataset, args.split, args.stride)?;
            ensure_out(out)?;
            write_file(&out.join("predictions.csv"), &bytes)?;
        }
        Command::Evaluate(args) => {
            let model = MnmmModel::load(&args.model)?;
            let dataset = Dataset::read(&args.data)?;
            let e = evaluate_dataset(&model, &dataset)?;
            ensure_out(out)?;
            let s = &model.window_spec;
            write_json(
                &out.join("metrics.json"),
                &serde_json::json!({
                    "T": s.past,
                    "dT": s.horizon,
                    "K": model.k(),
                    "seed": model.fit.seed,
                    "rmse": e.rmse,
                    "mae": e.mae,
                    "train_nll": e.train_nll,
                    "n_train": e.n_train,
                    "n_test": e.n_test,
                    "units": "rmse/mae in m/s^2; train_nll in nats per window, standardized",
                }),
            )?;
        }
        Command::Grid(args) => {
            let dataset = Dataset::read(&args.data)?;
            let grid = GridConfig {
                t_set: args.past_set.unwrap_or(cfg.grid.t_set.clone()),
                dt_set: args.horizon_set.unwrap_or(cfg.grid.dt_set.clone()),
                k_set: args.k_set.unwrap_or(cfg.grid.k_set.clone()),
                prior: cfg.prior.clone(),
                fit: fit_config,
                cache_dir: args.cache_dir,
                record_timing: args.record_timing,
            };
            let result = run_grid(&dataset, &grid)?;
            write_grid(&result, out)?;
            eprintln!("{} cells, {} fitted", result.reports.len(), result.refits);
        }
        Command::Inspect(args) => {
            let model = MnmmModel::load(&args.io.model)?;
            let dataset = Dataset::read(&args.io.data)?;
            let summary = export_interpretability(&model, &dataset, &args.pairs, args.top_n.unwrap_or(cfg.top_n), out)?;
            eprintln!(
                "top {} components hold {:.3} of the average share",
                summary.dominant.len(),
                summary.share_sum
            );
        }
    }
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
