//! Pipeline configuration stored as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalParams;
use crate::fsutil::write_atomic;
use crate::junction::DetectionParams;
use crate::prior::PriorFitParams;
use crate::saliency::{SaliencyParams, Stages};
use crate::scene::SuiteParams;

/// Mixture sizes and class prior used when fitting the angle prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub building_components: usize,
    pub background_components: usize,
    pub prior_building: Option<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        let p = PriorFitParams::default();
        Self {
            building_components: p.building_components,
            background_components: p.background_components,
            prior_building: p.prior_building,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Drives EM initialization and scene generation.
    pub seed: u64,
    pub detection: DetectionParams,
    pub saliency: SaliencyParams,
    pub stages: Stages,
    pub prior: PriorConfig,
    pub eval: EvalParams,
    pub suite: SuiteParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: PriorFitParams::default().seed,
            detection: DetectionParams::default(),
            saliency: SaliencyParams::default(),
            stages: Stages::FULL,
            prior: PriorConfig::default(),
            eval: EvalParams::default(),
            suite: SuiteParams::default(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        self.saliency.validate()?;
        self.prior_params().validate()?;
        self.eval.validate()?;
        self.suite.validate()
    }

    pub fn prior_params(&self) -> PriorFitParams {
        PriorFitParams {
            building_components: self.prior.building_components,
            background_components: self.prior.background_components,
            seed: self.seed,
            prior_building: self.prior.prior_building,
        }
    }

    /// Parses and validates; keys left out keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Format(m) => Error::format(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_toml()?.as_bytes())
    }
}
