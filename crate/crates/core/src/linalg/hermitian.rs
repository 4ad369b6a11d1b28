//! Hermitian positive-definite matrices and their Cholesky factorization.

use super::matrix::{CMatrix, C64};
use crate::error::{Error, Result};

/// Max elementwise `|M - M^H|` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// A Hermitian matrix certified positive definite by a successful Cholesky factorization.
///
/// Holds the lower factor `L` with real positive diagonal such that `M = L L^H`.
#[derive(Clone, Debug)]
pub struct HermitianPD {
    base: CMatrix,
    chol: CMatrix,
}

impl HermitianPD {
    pub fn new(base: CMatrix) -> Result<Self> {
        if !base.is_square() {
            return Err(Error::InvalidShape(format!(
                "Hermitian matrix must be square, got {}",
                base.shape_string()
            )));
        }
        if !base.is_finite() {
            return Err(Error::NonFinite("Hermitian candidate".into()));
        }
        let defect = base.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let chol = cholesky(&base)?;
        Ok(Self { base, chol })
    }

    pub fn base(&self) -> &CMatrix {
        &self.base
    }

    pub fn into_base(self) -> CMatrix {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.base.rows()
    }

    /// Lower Cholesky factor.
    pub fn factor(&self) -> &CMatrix {
        &self.chol
    }

    /// Natural log of the determinant, `2 * sum(ln L_ii)`.
    pub fn logdet(&self) -> f64 {
        (0..self.dim()).map(|i| self.chol[(i, i)].re.ln()).sum::<f64>() * 2.0
    }

    /// Solves `M X = B`.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(b.rows(), self.dim(), "solve: row mismatch");
        let y = forward_substitute(&self.chol, b);
        backward_substitute_adjoint(&self.chol, &y)
    }

    /// Solves `X M = B`, i.e. returns `B M^{-1}`.
    pub fn solve_right(&self, b: &CMatrix) -> CMatrix {
        // X M = B  <=>  M X^H = B^H  (M Hermitian)
        self.solve(&b.adjoint()).adjoint()
    }

    pub fn inverse(&self) -> CMatrix {
        self.solve(&CMatrix::identity(self.dim()))
    }
}

/// Lower Cholesky factor of a Hermitian matrix, reading only its lower triangle.
fn cholesky(m: &CMatrix) -> Result<CMatrix> {
    let n = m.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Y = B` for lower-triangular `L`.
fn forward_substitute(l: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = l.rows();
    let m = b.cols();
    let mut y = b.clone();
    for col in 0..m {
        for i in 0..n {
            let mut s = y[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * y[(k, col)];
            }
            y[(i, col)] = s / l[(i, i)];
        }
    }
    y
}

/// Solves `L^H X = Y` for lower-triangular `L`.
fn backward_substitute_adjoint(l: &CMatrix, y: &CMatrix) -> CMatrix {
    let n = l.rows();
    let m = y.cols();
    let mut x = y.clone();
    for col in 0..m {
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in (i + 1)..n {
                // (L^H)[i,k] = conj(L[k,i])
                s -= l[(k, i)].conj() * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)].conj();
        }
    }
    x
}

/// Natural log of the determinant of a certified Hermitian PD matrix.
pub fn hermitian_logdet(m: &HermitianPD) -> f64 {
    m.logdet()
}

/// `I_N + scale * Z^H Z`, certified Hermitian PD.
pub fn gram_shift(z: &CMatrix, scale: f64) -> Result<HermitianPD> {
    if !(scale >= 0.0) {
        return Err(Error::InvalidSpec(format!("gram_shift scale must be >= 0, got {scale}")));
    }
    let mut g = symmetrize(&z.adjoint_matmul(z).scale_real(scale));
    for i in 0..g.rows() {
        g[(i, i)] += 1.0;
    }
    HermitianPD::new(g)
}

/// `(M + M^H) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    let h = m.adjoint();
    m.zip_map(&h, |a, b| (a + b) * 0.5)
}
