//! Run configuration: a JSON file whose fields are overridden by flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cognoise::inference::{SamplerConfig, Variant};
use cognoise::Task;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Which tasks a simulated dataset contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskSelection {
    Altruism,
    Number,
    Both,
}

impl TaskSelection {
    pub fn tasks(self) -> &'static [Task] {
        match self {
            TaskSelection::Altruism => &[Task::Altruism],
            TaskSelection::Number => &[Task::Number],
            TaskSelection::Both => &[Task::Altruism, Task::Number],
        }
    }
}

/// Sampler fields of the config file; unset fields keep the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub chains: Option<usize>,
    pub warmup: Option<usize>,
    pub draws: Option<usize>,
    pub target_accept: Option<f64>,
    pub max_depth: Option<usize>,
    pub init_radius: Option<f64>,
}

impl SamplerSettings {
    /// Fields of `over` win over `self`.
    pub fn merged(&self, over: &SamplerSettings) -> SamplerSettings {
        SamplerSettings {
            chains: over.chains.or(self.chains),
            warmup: over.warmup.or(self.warmup),
            draws: over.draws.or(self.draws),
            target_accept: over.target_accept.or(self.target_accept),
            max_depth: over.max_depth.or(self.max_depth),
            init_radius: over.init_radius.or(self.init_radius),
        }
    }

    pub fn build(&self, seed: u64) -> CliResult<SamplerConfig> {
        let d = SamplerConfig::default();
        let cfg = SamplerConfig {
            chains: self.chains.unwrap_or(d.chains),
            warmup: self.warmup.unwrap_or(d.warmup),
            draws: self.draws.unwrap_or(d.draws),
            seed,
            target_accept: self.target_accept.unwrap_or(d.target_accept),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            init_radius: self.init_radius.unwrap_or(d.init_radius),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Contents of `--config <json>`. Relative paths resolve against the
/// working directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub task: Option<TaskSelection>,
    /// A `trials.csv` to simulate on instead of generating a design.
    pub design: Option<PathBuf>,
    pub rounds: Option<u32>,
    pub n_baseline: Option<usize>,
    pub n_treatment: Option<usize>,
    /// A JSON file holding `HyperParams`.
    pub hyper: Option<PathBuf>,
    pub model: Option<Variant>,
    pub sampler: SamplerSettings,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

/// Fails unless `path` names an existing file.
pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} {} does not exist", path.display())))
    }
}

/// Fails unless `path` names an existing directory.
pub fn require_dir(path: &Path, what: &str) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} {} is not a directory", path.display())))
    }
}
