//! End-to-end network: patching, embedding, stacked blocks and real heads.

mod checkpoint;
mod config;
mod forward;
mod params;
mod patch;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{HeadKind, ModelConfig, SizePreset};
pub use forward::{
    blocks_on, embed_on, forward_on, head_classify, head_on, head_regress, BlockTrace, ForwardTrace, Model,
};
pub use params::{BlockParams, ModelParams, Params, Slot};
pub use patch::{patchify, ComplexArray, PatchMode, PatchSpec};
