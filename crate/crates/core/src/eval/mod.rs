//! Metrics, the experiment grid, interpretability exports and SVG output.

pub mod grid;
pub mod interpret;
pub mod metrics;
pub mod svg;

pub use grid::{run_grid, GridConfig, GridResult};
pub use interpret::{export_interpretability, InterpretSummary};
pub use metrics::{rmse_mae, train_nll, MetricReport};
