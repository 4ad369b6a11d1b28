//! Synthetic data: subspace token mixtures, multipath channels and their
//! preprocessing, and the dataset container.

mod channel;
mod dataset;
mod mixture;
mod multipath;
mod stft;

use serde::{Deserialize, Serialize};

pub use channel::{cfr_series, cir_to_cfr, csi_conjugate_mult, gen_cfr, gen_cir, ChannelSpec, PathSpec};
pub use dataset::{
    decode_dataset, encode_dataset, read_dataset, write_dataset, Dataset, Splits, DATASET_MAGIC, DATASET_VERSION,
};
pub use mixture::{gen_subspace_mixture, Mixture, SubspaceMixtureSpec};
pub use multipath::{gen_multipath_dataset, MultipathSpec, Representation};
pub use stft::{centered_bin, frame_count, stft_dfs, Window};

use crate::error::{Error, Result};

/// Dataset recipe read from a spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthSpec {
    Mixture(SubspaceMixtureSpec),
    Multipath(MultipathSpec),
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn generate(&self) -> Result<Dataset> {
        match self {
            SynthSpec::Mixture(s) => Ok(gen_subspace_mixture(s)?.dataset),
            SynthSpec::Multipath(s) => gen_multipath_dataset(s),
        }
    }
}
