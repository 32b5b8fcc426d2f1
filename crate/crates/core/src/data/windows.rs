use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mnmr::WindowSpec;

use super::trajectory::TrajectoryPair;

/// A D×τ slice of a trajectory: rows are features, columns time steps.
pub type WindowMatrix = Matrix;

/// How windows are cut from a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Windowing {
    /// Every start index at the given stride.
    Sliding { stride: usize },
    /// One window per pair whose past block ends at column `anchor`:
    /// columns `anchor − T .. anchor + ΔT`.
    Anchored { anchor: usize },
}

impl Default for Windowing {
    fn default() -> Self {
        Windowing::Sliding { stride: 1 }
    }
}

/// The full `4 × len` feature matrix of a pair.
pub fn feature_matrix(pair: &TrajectoryPair) -> Matrix {
    let mut m = Matrix::zeros(4, pair.len());
    for (j, s) in pair.samples.iter().enumerate() {
        for (i, v) in s.features().into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    m
}

fn check_spec(spec: &WindowSpec) -> Result<()> {
    if spec.d() != 4 || spec.d_y != 1 {
        return Err(Error::Config(format!(
            "trajectory windows have 3 regressor rows and 1 response row, spec has D_x={} D_y={}",
            spec.d_x, spec.d_y
        )));
    }
    Ok(())
}

/// Sliding windows; `⌊(L − τ)/stride⌋ + 1` of them, or none if the pair is
/// shorter than τ.
pub fn make_windows(pair: &TrajectoryPair, spec: &WindowSpec, stride: usize) -> Result<Vec<WindowMatrix>> {
    check_spec(spec)?;
    if stride == 0 {
        return Err(Error::Config("window stride must be at least 1".into()));
    }
    let tau = spec.tau();
    if pair.len() < tau {
        return Ok(Vec::new());
    }
    let full = feature_matrix(pair);
    Ok((0..=pair.len() - tau)
        .step_by(stride)
        .map(|s| full.columns(s, tau).into_owned())
        .collect())
}

/// Windows according to `windowing`.
pub fn windows_for(pair: &TrajectoryPair, spec: &WindowSpec, windowing: Windowing) -> Result<Vec<WindowMatrix>> {
    match windowing {
        Windowing::Sliding { stride } => make_windows(pair, spec, stride),
        Windowing::Anchored { anchor } => {
            check_spec(spec)?;
            if anchor < spec.past || anchor + spec.horizon > pair.len() {
                return Err(Error::Config(format!(
                    "anchored window T={} ΔT={} at column {anchor} does not fit pair {} of length {}",
                    spec.past,
                    spec.horizon,
                    pair.pair_id,
                    pair.len()
                )));
            }
            let full = feature_matrix(pair);
            Ok(vec![full.columns(anchor - spec.past, spec.tau()).into_owned()])
        }
    }
}

pub fn windows_for_all(pairs: &[TrajectoryPair], spec: &WindowSpec, windowing: Windowing) -> Result<Vec<WindowMatrix>> {
    let mut out = Vec::new();
    for p in pairs {
        out.extend(windows_for(p, spec, windowing)?);
    }
    Ok(out)
}
