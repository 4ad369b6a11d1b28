use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HeadKind, ModelConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Classification,
    Regression,
}

fn default_lr() -> f64 {
    5e-5
}
fn default_epochs() -> usize {
    100
}
fn default_patience() -> usize {
    10
}
fn default_batch() -> usize {
    32
}
fn default_wd() -> f64 {
    0.01
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_ssr() -> f64 {
    0.1
}
fn default_group() -> usize {
    3
}

/// Optimizer, schedule and stopping settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr_init: f64,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_eps")]
    pub adam_eps: f64,
    #[serde(default = "default_ssr")]
    pub ssr_weight: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub task: Task,
    /// Train only the task head.
    #[serde(default)]
    pub freeze_backbone: bool,
    /// Coordinates per point for the grouped Euclidean regression error.
    #[serde(default = "default_group")]
    pub coord_group: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_init: default_lr(),
            max_epochs: default_epochs(),
            patience: default_patience(),
            batch_size: default_batch(),
            weight_decay: default_wd(),
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_eps: default_eps(),
            ssr_weight: default_ssr(),
            seed: 0,
            task: Task::Classification,
            freeze_backbone: false,
            coord_group: default_group(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_init > 0.0 && self.lr_init.is_finite()) {
            return Err(Error::Config(format!("lr_init must be > 0, got {}", self.lr_init)));
        }
        if self.patience == 0 || self.batch_size == 0 || self.coord_group == 0 {
            return Err(Error::Config("patience, batch_size and coord_group must be >= 1".into()));
        }
        if !(self.ssr_weight >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("ssr_weight and weight_decay must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Config("adam_eps must be > 0".into()));
        }
        Ok(())
    }

    /// Checks that the model head suits the task.
    pub fn check_model(&self, model: &ModelConfig) -> Result<()> {
        match (self.task, model.head) {
            (Task::Classification, HeadKind::Classify { .. }) | (Task::Regression, HeadKind::Regress { .. }) => Ok(()),
            (task, head) => Err(Error::Config(format!("task {task:?} does not match head {head:?}"))),
        }
    }
}

/// A model and its training settings, as stored in one config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model.validate()?;
        cfg.train.validate()?;
        cfg.train.check_model(&cfg.model)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
