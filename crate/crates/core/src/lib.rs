//! White-box complex-valued transformer built from rate-reduction objectives.

pub mod analysis;
pub mod autodiff;
mod error;
pub mod layers;
pub mod linalg;
pub mod model;
pub mod rate;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
