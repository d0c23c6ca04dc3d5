use serde::{Deserialize, Serialize};

use cbic::experiments::{Design, ExperimentSpec};
use cbic::io::GraphFormat;
use cbic::selection::PenaltyKind;
use cbic::spectral::Method;
use cbic::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectConfig {
    pub input: String,
    pub format: GraphFormat,
    pub model: Model,
    pub method: Method,
    pub penalty: PenaltyKind,
    pub lambda: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub refine: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub design: Design,
    /// Block count; ignored by sim4.
    pub k: usize,
    /// Network size of sim1.
    pub n: usize,
    pub r: f64,
    pub rho: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub input: String,
    pub format: GraphFormat,
    pub symmetrize: bool,
    /// Upper quantile level of the binarizing threshold.
    pub threshold: Option<f64>,
    pub largest_component: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum RunConfig {
    Select(SelectConfig),
    Simulate(SimulateConfig),
    Experiment(ExperimentSpec),
    Preprocess(PreprocessConfig),
}

/// Written beside every run's outputs; feeding it to `rerun` repeats the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub run: RunConfig,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(run: RunConfig, outputs: Vec<String>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            run,
            outputs,
        }
    }
}
