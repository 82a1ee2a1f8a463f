//! Run configuration and trajectory sidecar files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fbm::{Generator, TimeGrid};
use crate::fhdam::FactorDecomposition;
use crate::gfhp::{GfhpConfig, SimulationMode};
use crate::wright::{validate_params, Pair, WrightParams};

use super::CliError;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: String,
    pub process: ProcessBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessBlock {
    #[serde(default)]
    pub upper: Vec<Pair>,
    #[serde(default)]
    pub lower: Vec<Pair>,
    pub hurst: f64,
    #[serde(default)]
    pub decomposition: FactorDecomposition,
}

impl ProcessBlock {
    pub fn params(&self) -> WrightParams {
        WrightParams::new(self.upper.clone(), self.lower.clone())
    }

    /// Validates the parameters and matches the decomposition's moments.
    pub fn build(&self) -> Result<GfhpConfig, CliError> {
        let spec = validate_params(self.params())?;
        Ok(GfhpConfig::new(spec, self.decomposition.clone(), self.hurst)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: SimulationMode,
}

fn default_mode() -> SimulationMode {
    SimulationMode::Scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_name")]
    pub name: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: default_directory(), name: default_name() }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from(".")
}

fn default_name() -> String {
    "trajectories".into()
}

/// Accepts any `1.x` version.
pub fn check_schema_version(v: &str) -> Result<(), CliError> {
    match v.split('.').next() {
        Some("1") => Ok(()),
        _ => Err(CliError::format(format!("unsupported schema_version {v:?}, expected {SCHEMA_VERSION}"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::format(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::format(format!("malformed config {}: {e}", path.display())))?;
        check_schema_version(&cfg.schema_version)?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        let grid = self.grid.ok_or_else(|| CliError::format("config has no grid block"))?;
        grid.validate().map_err(|e| CliError::format(format!("grid: {e}")))?;
        Ok(grid)
    }

    pub fn ensemble(&self) -> Result<EnsembleBlock, CliError> {
        let e = self.ensemble.ok_or_else(|| CliError::format("config has no ensemble block"))?;
        if e.n_paths == 0 {
            return Err(CliError::format("ensemble: n_paths must be at least 1"));
        }
        Ok(e)
    }
}

/// JSON written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub schema_version: String,
    pub hurst: f64,
    pub spec: WrightParams,
    pub decomposition: FactorDecomposition,
    pub seed: u64,
    pub generator_tag: Generator,
    pub mode: SimulationMode,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub spec_id: String,
}

impl Sidecar {
    pub fn to_run_config(&self) -> RunConfig {
        RunConfig {
            schema_version: self.schema_version.clone(),
            process: ProcessBlock {
                upper: self.spec.upper.clone(),
                lower: self.spec.lower.clone(),
                hurst: self.hurst,
                decomposition: self.decomposition.clone(),
            },
            grid: Some(self.grid),
            ensemble: Some(EnsembleBlock { n_paths: self.n_paths, seed: self.seed, mode: self.mode }),
            output: OutputBlock::default(),
        }
    }
}
