//! Run configurations: one JSON schema per subcommand, unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use aoi_sched::info_metrics::LossFunction;
use aoi_sched::penalty::ServiceSpec;
use aoi_sched::policy::PolicySpec;
use aoi_sched::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

fn one() -> usize {
    1
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Time-series CSV (`t,y,v1,…`).
    pub data: PathBuf,
    /// Optional training series; switches the output to the cross-entropy curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default = "one")]
    pub window: usize,
    pub loss: LossFunction,
    pub theta_max: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GittinsConfig {
    pub penalty: PathBuf,
    pub service: ServiceSpec,
    /// Last AoI to print; defaults to `δ_max + T_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<usize>,
    /// Stopping-time search horizon; defaults to the safe horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub penalty: PathBuf,
    pub service: ServiceSpec,
    #[serde(default = "one")]
    pub buffer: usize,
    /// AoI clamp for `--oracle`; defaults to `4 · (δ_max + T_max)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_truncate: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub penalty: PathBuf,
    pub service: ServiceSpec,
    #[serde(default = "unit_weight")]
    pub weight: f64,
    #[serde(default = "one")]
    pub buffer: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhittleConfig {
    pub sources: Vec<SourceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Source weight `w_l`.
    Weight,
    /// Log-normal scale `σ` of the source's service time.
    Sigma,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub source: usize,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub sources: Vec<SourceConfig>,
    pub policies: Vec<PolicySpec>,
    /// Slots measured after the warmup.
    pub horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_aoi: Option<usize>,
    /// Rows kept for `--trace`.
    #[serde(default = "default_trace_limit")]
    pub trace_limit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

fn default_trace_limit() -> usize {
    10_000
}

/// A parsed config plus the directory its relative paths are resolved against.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub config: T,
    pub base: PathBuf,
}

impl<T> Loaded<T> {
    pub fn path(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }
}

impl<T: Serialize> Loaded<T> {
    /// SHA-256 of the resolved config (after flag overrides) in compact JSON.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(&self.config).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}
