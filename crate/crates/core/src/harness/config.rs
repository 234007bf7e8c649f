use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ckt::{AdaptationMode, CktConfig};
use crate::engine::BackboneConfig;
use crate::error::{Error, Result};

use super::scenario::ScenarioSpec;

/// Everything needed to reproduce one experiment. Read from TOML; field names
/// are the TOML keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    /// Master seed; run `r` of every arm uses the stream `(seed, r)`.
    pub seed: u64,
    pub runs: usize,
    pub scenario: ScenarioSpec,
    pub backbones: Vec<BackboneConfig>,
    pub ckt: CktConfig,
    /// Adaptation mode of the adapted arm; `off` drops that arm.
    pub adaptation: AdaptationMode,
    /// Evaluations spent on each source when building the knowledge base.
    pub kb_budget: usize,
    pub kb_n_init: usize,
    /// Parallel runs; 0 uses all cores.
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 2024,
            runs: 10,
            scenario: ScenarioSpec::default(),
            backbones: vec![
                BackboneConfig::bo_lcb().with_budget(20, 100),
                BackboneConfig::rbf_pov().with_budget(20, 100),
            ],
            ckt: CktConfig::default(),
            adaptation: AdaptationMode::Offline,
            kb_budget: 100,
            kb_n_init: 20,
            workers: 0,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Backbone used to optimize the sources.
    pub fn kb_backbone(&self) -> BackboneConfig {
        BackboneConfig {
            name: "kb".into(),
            ..BackboneConfig::bo_lcb().with_budget(self.kb_n_init, self.kb_budget)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.backbones.is_empty() {
            return Err(Error::invalid("at least one backbone is required"));
        }
        let mut names: Vec<&str> = self.backbones.iter().map(|b| b.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("backbone names must be unique"));
        }
        for b in &self.backbones {
            b.validate()?;
        }
        self.kb_backbone().validate()?;
        self.ckt.validate()?;
        self.scenario.validate()
    }
}
