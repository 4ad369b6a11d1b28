use serde::{Deserialize, Serialize};

use super::patch::PatchSpec;
use crate::error::{Error, Result};
use crate::layers::{mlp_eta, MlpConfig, MlpVariant, ReluVariant};
use crate::rate::RateParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizePreset {
    Tiny,
    Small,
    Base,
    Large,
}

impl SizePreset {
    pub const ALL: [SizePreset; 4] = [SizePreset::Tiny, SizePreset::Small, SizePreset::Base, SizePreset::Large];

    /// `(depth, token_dim, heads, subspace_dim)`.
    pub fn dims(self) -> (usize, usize, usize, usize) {
        match self {
            SizePreset::Tiny => (12, 384, 6, 64),
            SizePreset::Small => (14, 512, 8, 64),
            SizePreset::Base => (14, 640, 10, 64),
            SizePreset::Large => (19, 1024, 16, 64),
        }
    }

    /// Published parameter total this preset approximates.
    pub fn reference_count(self) -> usize {
        match self {
            SizePreset::Tiny => 7_100_000,
            SizePreset::Small => 14_600_000,
            SizePreset::Base => 23_400_000,
            SizePreset::Large => 80_300_000,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SizePreset::Tiny => "tiny",
            SizePreset::Small => "small",
            SizePreset::Base => "base",
            SizePreset::Large => "large",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadKind {
    Classify { num_classes: usize },
    Regress { out_dim: usize },
}

impl HeadKind {
    pub fn out_dim(self) -> usize {
        match self {
            HeadKind::Classify { num_classes } => num_classes,
            HeadKind::Regress { out_dim } => out_dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub depth: usize,
    pub token_dim: usize,
    pub heads: usize,
    pub subspace_dim: usize,
    pub mlp_variant: MlpVariant,
    pub relu_variant: ReluVariant,
    pub epsilon: f64,
    pub lambda: f64,
    pub kappa: f64,
    #[serde(default)]
    pub untied_output: bool,
    #[serde(default)]
    pub symmetric_threshold: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_preset: Option<SizePreset>,
    pub patch: PatchSpec,
    pub head: HeadKind,
}

impl ModelConfig {
    pub fn new(depth: usize, token_dim: usize, heads: usize, subspace_dim: usize, patch: PatchSpec, head: HeadKind) -> Self {
        Self {
            depth,
            token_dim,
            heads,
            subspace_dim,
            mlp_variant: MlpVariant::RfMlp,
            relu_variant: ReluVariant::CRelu,
            epsilon: 1.0,
            lambda: 0.1,
            kappa: 1.0,
            untied_output: false,
            symmetric_threshold: false,
            size_preset: None,
            patch,
            head,
        }
    }

    pub fn from_preset(preset: SizePreset, patch: PatchSpec, head: HeadKind) -> Self {
        let (l, d, k, p) = preset.dims();
        let mut cfg = Self::new(l, d, k, p, patch, head);
        cfg.size_preset = Some(preset);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.token_dim == 0 || self.heads == 0 || self.subspace_dim == 0 {
            return Err(Error::Config("token_dim, heads and subspace_dim must be >= 1".into()));
        }
        if self.subspace_dim > self.token_dim {
            return Err(Error::Config(format!(
                "subspace_dim {} exceeds token_dim {}",
                self.subspace_dim, self.token_dim
            )));
        }
        if !(self.kappa >= 0.0) || !(self.lambda >= 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::Config("kappa, lambda must be >= 0 and epsilon > 0".into()));
        }
        match self.head {
            HeadKind::Classify { num_classes } if num_classes < 2 => {
                return Err(Error::Config("classification needs at least 2 classes".into()));
            }
            HeadKind::Regress { out_dim } if out_dim == 0 => {
                return Err(Error::Config("regression needs out_dim >= 1".into()));
            }
            _ => {}
        }
        self.patch.validate()
    }

    /// Sequence length including the class token.
    pub fn num_tokens(&self) -> usize {
        self.patch.num_patches() + 1
    }

    pub fn rate(&self) -> Result<RateParams> {
        RateParams::new(
            self.token_dim,
            self.num_tokens(),
            self.subspace_dim,
            self.heads,
            self.epsilon,
            self.lambda,
        )
    }

    pub fn mlp_config(&self) -> Result<MlpConfig> {
        let rate = self.rate()?;
        Ok(MlpConfig {
            variant: self.mlp_variant,
            relu: self.relu_variant,
            eta: mlp_eta(rate.alpha()),
            lambda: self.lambda,
            symmetric_threshold: self.symmetric_threshold,
        })
    }

    /// Real scalars across all learnable tensors; complex entries count twice.
    pub fn parameter_count(&self) -> usize {
        let (d, k, p) = (self.token_dim, self.heads, self.subspace_dim);
        let n = self.patch.num_patches();
        let mut block = k * d * p + d * d + 2 * d;
        if self.untied_output {
            block += k * d * p;
        }
        let mut total = 2 * (d * self.patch.patch_len() + d * n + d + self.depth * block);
        if self.relu_variant == ReluVariant::ModRelu {
            total += self.depth * d;
        }
        let out = self.head.out_dim();
        total + out * d + out
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
