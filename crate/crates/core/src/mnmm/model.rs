use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::dataset::write_json;
use crate::data::StandardizationStats;
use crate::error::{Error, Result};
use crate::linalg::{from_row_major, to_row_major};
use crate::matnorm::MatrixNormalParams;
use crate::mnmr::WindowSpec;

use super::prior::PriorConfig;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub iterations: usize,
    pub final_objective: f64,
    pub restart_index: usize,
    pub seed: u64,
    pub converged: bool,
    /// Components that fell below the starvation thresholds at some iteration.
    #[serde(default)]
    pub starved: Vec<bool>,
    /// Starved components held at the prior mean.
    pub frozen: Vec<bool>,
}

/// A fitted (or sampled) matrix normal mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MnmmModel {
    pub weights: Vec<f64>,
    pub components: Vec<MatrixNormalParams>,
    pub window_spec: WindowSpec,
    pub standardization: StandardizationStats,
    pub prior: PriorConfig,
    pub fit: FitMetadata,
}

impl MnmmModel {
    pub fn new(
        weights: Vec<f64>,
        components: Vec<MatrixNormalParams>,
        window_spec: WindowSpec,
        standardization: StandardizationStats,
        prior: PriorConfig,
        fit: FitMetadata,
    ) -> Result<Self> {
        let model = Self {
            weights,
            components,
            window_spec,
            standardization,
            prior,
            fit,
        };
        model.check_shapes()?;
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    fn check_shapes(&self) -> Result<()> {
        self.window_spec.validate()?;
        let (d, tau) = (self.window_spec.d(), self.window_spec.tau());
        if self.components.len() != self.weights.len() || self.weights.is_empty() {
            return Err(Error::dim(format!(
                "{} weights for {} components",
                self.weights.len(),
                self.components.len()
            )));
        }
        for (k, c) in self.components.iter().enumerate() {
            if c.mean.shape() != (d, tau) || c.row_cov.shape() != (d, d) || c.col_cov.shape() != (tau, tau) {
                return Err(Error::dim(format!("component {k} does not match D={d}, τ={tau}")));
            }
        }
        if self.standardization.dim() != d {
            return Err(Error::dim(format!(
                "standardization covers {} features, model has {d}",
                self.standardization.dim()
            )));
        }
        Ok(())
    }

    /// Simplex weights, normalized SPD components, consistent shapes.
    pub fn check_invariants(&self) -> Result<()> {
        self.check_shapes()?;
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Fit(format!("mixing weights are not a simplex: {:?}", self.weights)));
        }
        let tau = self.window_spec.tau() as f64;
        for (k, c) in self.components.iter().enumerate() {
            c.factor()?;
            if (c.col_cov.trace() - tau).abs() > 1e-9 * tau {
                return Err(Error::Fit(format!("component {k} is not scale-normalized")));
            }
        }
        Ok(())
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(&ModelFile::from(self))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let file: ModelFile = serde_json::from_slice(bytes)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &ModelFile::from(self))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_bytes(&bytes)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ComponentFile {
    #[serde(rename = "M")]
    mean: Vec<f64>,
    #[serde(rename = "U")]
    row_cov: Vec<f64>,
    #[serde(rename = "V")]
    col_cov: Vec<f64>,
}

/// On-disk layout. Matrices are row-major arrays.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "D")]
    d: usize,
    tau: usize,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "dT")]
    dt: usize,
    #[serde(rename = "D_x")]
    d_x: usize,
    #[serde(rename = "D_y")]
    d_y: usize,
    step_seconds: f64,
    pi: Vec<f64>,
    components: Vec<ComponentFile>,
    standardization: StandardizationStats,
    prior: PriorConfig,
    fit: FitMetadata,
}

impl From<&MnmmModel> for ModelFile {
    fn from(m: &MnmmModel) -> Self {
        let s = &m.window_spec;
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            k: m.k(),
            d: s.d(),
            tau: s.tau(),
            t: s.past,
            dt: s.horizon,
            d_x: s.d_x,
            d_y: s.d_y,
            step_seconds: s.step_seconds,
            pi: m.weights.clone(),
            components: m
                .components
                .iter()
                .map(|c| ComponentFile {
                    mean: to_row_major(&c.mean),
                    row_cov: to_row_major(&c.row_cov),
                    col_cov: to_row_major(&c.col_cov),
                })
                .collect(),
            standardization: m.standardization.clone(),
            prior: m.prior.clone(),
            fit: m.fit.clone(),
        }
    }
}

impl TryFrom<ModelFile> for MnmmModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Data(format!("unsupported model schema version {}", f.schema_version)));
        }
        let spec = WindowSpec {
            d_x: f.d_x,
            d_y: f.d_y,
            past: f.t,
            horizon: f.dt,
            step_seconds: f.step_seconds,
        };
        if spec.d() != f.d || spec.tau() != f.tau || f.k != f.pi.len() {
            return Err(Error::Data("model header fields are inconsistent".into()));
        }
        let components = f
            .components
            .into_iter()
            .map(|c| {
                MatrixNormalParams::new(
                    from_row_major(f.d, f.tau, &c.mean)?,
                    from_row_major(f.d, f.d, &c.row_cov)?,
                    from_row_major(f.tau, f.tau, &c.col_cov)?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        MnmmModel::new(f.pi, components, spec, f.standardization, f.prior, f.fit)
    }
}
