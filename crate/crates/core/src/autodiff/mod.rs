//! Conjugate-Wirtinger reverse-mode differentiation.

mod fd;
mod graph;
pub(crate) mod kernels;
mod tape;

pub use fd::fd_conjugate_gradient;
pub use graph::{Eager, Graph};
pub use kernels::{cardioid, crelu, modrelu, softmax_cols, zrelu, Activation};
pub use tape::{Gradients, Tape, Var, REAL_TOL};
