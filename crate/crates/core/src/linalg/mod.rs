//! Dense complex linear algebra in double precision.

mod hermitian;
mod matrix;
mod random;

pub use hermitian::{gram_shift, hermitian_logdet, symmetrize, HermitianPD, HERMITIAN_TOL};
pub use matrix::{CMatrix, C64, ONE, ZERO};
pub use random::{
    orthonormal_columns_from, orthonormalize_columns, partitioned_bank, random_orthonormal_columns,
    random_unitary, seeded_rng,
};
