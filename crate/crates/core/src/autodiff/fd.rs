use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Central-difference estimate of `∂f/∂Z̄ = (∂f/∂Re Z + i ∂f/∂Im Z) / 2` for real `f`.
pub fn fd_conjugate_gradient<F>(mut f: F, z: &CMatrix, h: f64) -> Result<CMatrix>
where
    F: FnMut(&CMatrix) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::NonFinite(format!("step size {h}")));
    }
    let mut probe = z.clone();
    let mut out = CMatrix::zeros(z.rows(), z.cols());
    for i in 0..z.rows() {
        for j in 0..z.cols() {
            let base = z[(i, j)];
            let mut partial = |dir: C64, probe: &mut CMatrix| -> Result<f64> {
                probe[(i, j)] = base + dir * h;
                let plus = f(probe)?;
                probe[(i, j)] = base - dir * h;
                let minus = f(probe)?;
                probe[(i, j)] = base;
                let d = (plus - minus) / (2.0 * h);
                if !d.is_finite() {
                    return Err(Error::NonFinite(format!("probe at ({i}, {j})")));
                }
                Ok(d)
            };
            let dre = partial(C64::new(1.0, 0.0), &mut probe)?;
            let dim = partial(C64::new(0.0, 1.0), &mut probe)?;
            out[(i, j)] = C64::new(0.5 * dre, 0.5 * dim);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_squared() {
        let z = CMatrix::from_vec(1, 2, vec![C64::new(1.0, -2.0), C64::new(0.5, 3.0)]).unwrap();
        let g = fd_conjugate_gradient(|m| Ok(m.frobenius_norm().powi(2)), &z, 1e-5).unwrap();
        assert!(g.max_abs_diff(&z) < 1e-8);
    }

    #[test]
    fn rejects_bad_step() {
        let z = CMatrix::zeros(1, 1);
        assert!(fd_conjugate_gradient(|_| Ok(0.0), &z, 0.0).is_err());
    }

    #[test]
    fn reports_non_finite() {
        let z = CMatrix::zeros(1, 1);
        let r = fd_conjugate_gradient(|m| Ok(1.0 / m[(0, 0)].re.abs().min(0.0)), &z, 1e-3);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
