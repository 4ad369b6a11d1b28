use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{CMatrix, ZERO};
use crate::error::{Error, Result};

/// Deterministic generator used everywhere a seed is accepted.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Orthonormalizes the columns of `m` in place (modified Gram-Schmidt, two passes).
///
/// Returns `InvalidShape` if a column collapses to zero, which for Gaussian input
/// happens with probability zero.
pub fn orthonormalize_columns(m: &mut CMatrix) -> Result<()> {
    let (rows, cols) = m.shape();
    for j in 0..cols {
        for _pass in 0..2 {
            for k in 0..j {
                let mut dot = ZERO;
                for i in 0..rows {
                    dot += m[(i, k)].conj() * m[(i, j)];
                }
                for i in 0..rows {
                    let qk = m[(i, k)];
                    m[(i, j)] -= dot * qk;
                }
            }
        }
        let norm = (0..rows).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::InvalidShape(format!("column {j} is linearly dependent")));
        }
        for i in 0..rows {
            m[(i, j)] /= norm;
        }
    }
    Ok(())
}

/// `dim x p` matrix with orthonormal columns drawn from `rng`.
pub fn orthonormal_columns_from<R: Rng + ?Sized>(dim: usize, p: usize, rng: &mut R) -> Result<CMatrix> {
    if p > dim {
        return Err(Error::InvalidShape(format!(
            "cannot fit {p} orthonormal columns in dimension {dim}"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidShape("dimension must be >= 1".into()));
    }
    let mut m = CMatrix::complex_gaussian(dim, p, 1.0, rng);
    orthonormalize_columns(&mut m)?;
    Ok(m)
}

/// Seeded `dim x p` matrix with orthonormal columns (`U^H U = I_p`).
pub fn random_orthonormal_columns(dim: usize, p: usize, seed: u64) -> Result<CMatrix> {
    orthonormal_columns_from(dim, p, &mut seeded_rng(seed))
}

/// Seeded `dim x dim` unitary matrix.
pub fn random_unitary(dim: usize, seed: u64) -> Result<CMatrix> {
    random_orthonormal_columns(dim, dim, seed)
}

/// Splits the columns of a unitary into `heads` blocks of `p` columns each.
///
/// The resulting bank satisfies `sum_k U_k U_k^H = I` exactly when `heads * p == dim`.
pub fn partitioned_bank(dim: usize, heads: usize, p: usize, seed: u64) -> Result<Vec<CMatrix>> {
    if heads * p > dim {
        return Err(Error::InvalidShape(format!(
            "{heads} heads of width {p} do not fit in dimension {dim}"
        )));
    }
    let q = random_unitary(dim, seed)?;
    Ok((0..heads).map(|k| q.columns(k * p, p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_defect(q: &CMatrix) -> f64 {
        q.adjoint_matmul(q).max_abs_diff(&CMatrix::identity(q.cols()))
    }

    #[test]
    fn one_dimensional_unitary_is_a_phase() {
        let q = random_unitary(1, 3).unwrap();
        assert!((q[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unitary_is_unitary() {
        let q = random_unitary(4, 7).unwrap();
        assert!(gram_defect(&q) < 1e-10);
        assert!(q.matmul(&q.adjoint()).max_abs_diff(&CMatrix::identity(4)) < 1e-10);
    }

    #[test]
    fn orthonormal_columns_full_width_is_unitary() {
        let q = random_orthonormal_columns(5, 5, 1).unwrap();
        assert!(gram_defect(&q) < 1e-10);
        assert!(q.matmul(&q.adjoint()).max_abs_diff(&CMatrix::identity(5)) < 1e-10);
    }

    #[test]
    fn orthonormal_columns_narrow() {
        let u = random_orthonormal_columns(8, 2, 3).unwrap();
        assert_eq!(u.shape(), (8, 2));
        assert!(gram_defect(&u) < 1e-10);
    }

    #[test]
    fn too_many_columns_is_rejected() {
        assert!(matches!(
            random_orthonormal_columns(3, 4, 0),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn seeds_matter_and_repeat() {
        let a = random_orthonormal_columns(6, 2, 1).unwrap();
        let b = random_orthonormal_columns(6, 2, 2).unwrap();
        let a2 = random_orthonormal_columns(6, 2, 1).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn partitioned_bank_resolves_identity() {
        let bank = partitioned_bank(8, 4, 2, 5).unwrap();
        let mut sum = CMatrix::zeros(8, 8);
        for u in &bank {
            sum.add_assign(&u.matmul(&u.adjoint()));
        }
        assert!(sum.max_abs_diff(&CMatrix::identity(8)) < 1e-12);
    }
}
