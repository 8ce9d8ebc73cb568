//! Run configuration: command-line flags layered over an optional JSON file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use betadiff::inference::BootstrapSpec;
use betadiff::quadrature::QuadratureSpec;
use betadiff::simulation::{Check, CheckThresholds, ModelSpec};
use betadiff::weights::{MomentProfile, Theorem, WeightSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A weight given either as shorthand (`"pht:0.75"`) or as an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightArg {
    Short(String),
    Spec(WeightSpec),
}

impl WeightArg {
    pub fn resolve(&self) -> Result<WeightSpec, CliError> {
        match self {
            WeightArg::Short(s) => s.parse().map_err(CliError::from),
            WeightArg::Spec(spec) => Ok(spec.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Estimate,
    Infer,
    Variance,
    Simulate,
    CheckAssumptions,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Estimate => "estimate",
            CommandName::Infer => "infer",
            CommandName::Variance => "variance",
            CommandName::Simulate => "simulate",
            CommandName::CheckAssumptions => "check-assumptions",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandName>,
    pub input_path: Option<PathBuf>,
    pub columns: Option<String>,
    pub weight: Option<WeightArg>,
    pub theorem: Option<Theorem>,
    pub bootstrap: Option<BootstrapSpec>,
    pub quadrature: Option<QuadratureSpec>,
    pub model: Option<ModelSpec>,
    /// Moment information for `check-assumptions` when no model is given.
    pub moments: Option<MomentProfile>,
    pub plan: Option<PlanSpec>,
    pub plan_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// A Monte Carlo plan as written in a JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub model: ModelSpec,
    pub weight: WeightArg,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    pub checks: BTreeSet<Check>,
    #[serde(default)]
    pub bootstrap: Option<BootstrapSpec>,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default)]
    pub keep_replicates: bool,
    #[serde(default)]
    pub thresholds: Option<CheckThresholds>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid {what} {}: {e}", path.display())))
}

/// Inline JSON when the argument starts with `{`, otherwise a file path.
pub fn json_arg<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T, CliError> {
    if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| CliError::Usage(format!("invalid {what}: {e}")))
    } else {
        read_json(Path::new(arg), what)
    }
}
