//! Trajectories, windows, standardization, datasets and synthetic data.

pub mod dataset;
pub mod highd;
pub mod standardize;
pub mod synth;
pub mod trajectory;
pub mod windows;

pub use dataset::{split, Dataset, Manifest, Provenance, SplitParams};
pub use highd::{ingest_highd, IngestReport};
pub use standardize::StandardizationStats;
pub use synth::{synth_generate, SynthConfig, SynthOutput};
pub use trajectory::{downsample, filter_pairs, TrajectoryPair, TrajectorySample};
pub use windows::{make_windows, windows_for, windows_for_all, WindowMatrix, Windowing};
