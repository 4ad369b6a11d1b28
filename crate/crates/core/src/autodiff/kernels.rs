//! Forward kernels shared by the eager and taped backends, plus the Wirtinger
//! partials `(dy/dz, dy/dz̄)` of every elementwise map.

use serde::{Deserialize, Serialize};

use crate::linalg::{symmetrize, CMatrix, HermitianPD, C64, HERMITIAN_TOL, ZERO};

/// Bias-free complex activations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `relu(Re z) + i relu(Im z)`
    CRelu,
    /// `z` in the open first quadrant, else 0
    ZRelu,
    /// `(1 + cos(arg z)) z / 2`
    Cardioid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Elementwise {
    Abs,
    AbsSq,
    RealPart,
    /// `(Re z)^e`
    Powf(f64),
    Act(Activation),
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn crelu(z: C64) -> C64 {
    C64::new(relu(z.re), relu(z.im))
}

pub fn zrelu(z: C64) -> C64 {
    if z.re > 0.0 && z.im > 0.0 {
        z
    } else {
        ZERO
    }
}

pub fn cardioid(z: C64) -> C64 {
    let r = z.norm();
    if r == 0.0 {
        return ZERO;
    }
    z * (0.5 * (1.0 + z.re / r))
}

/// `relu(|z| + b) z / |z|`, defined as 0 at `z = 0`.
pub fn modrelu(z: C64, b: f64) -> C64 {
    let r = z.norm();
    if r == 0.0 {
        return ZERO;
    }
    z * (relu(r + b) / r)
}

impl Activation {
    pub fn apply(self, z: C64) -> C64 {
        match self {
            Activation::CRelu => crelu(z),
            Activation::ZRelu => zrelu(z),
            Activation::Cardioid => cardioid(z),
        }
    }

    /// Wirtinger partials; kinks take the zero subgradient.
    pub(crate) fn partials(self, z: C64) -> (C64, C64) {
        match self {
            Activation::CRelu => {
                let a = if z.re > 0.0 { 1.0 } else { 0.0 };
                let b = if z.im > 0.0 { 1.0 } else { 0.0 };
                (C64::new((a + b) / 2.0, 0.0), C64::new((a - b) / 2.0, 0.0))
            }
            Activation::ZRelu => {
                if z.re > 0.0 && z.im > 0.0 {
                    (C64::new(1.0, 0.0), ZERO)
                } else {
                    (ZERO, ZERO)
                }
            }
            Activation::Cardioid => {
                let r = z.norm();
                if r == 0.0 {
                    return (ZERO, ZERO);
                }
                // y = z/2 + (z^2 + z z̄) / (4r)
                let zb = z.conj();
                let num = z * z + z * zb;
                let r3 = r * r * r;
                let dz = C64::new(0.5, 0.0) + (z * 2.0 + zb) / (4.0 * r) - num * zb / (8.0 * r3);
                let dzb = z / (4.0 * r) - num * z / (8.0 * r3);
                (dz, dzb)
            }
        }
    }
}

pub(crate) fn modrelu_partials(z: C64, b: f64) -> (C64, C64, C64) {
    let r = z.norm();
    if r == 0.0 || r + b <= 0.0 {
        return (ZERO, ZERO, ZERO);
    }
    // y = z + b z / r
    let dz = C64::new(1.0 + b / (2.0 * r), 0.0);
    let dzb = -(z * z) * (b / (2.0 * r * r * r));
    let db = z / r;
    (dz, dzb, db)
}

impl Elementwise {
    pub(crate) fn apply(self, z: C64) -> C64 {
        match self {
            Elementwise::Abs => C64::new(z.norm(), 0.0),
            Elementwise::AbsSq => C64::new(z.norm_sqr(), 0.0),
            Elementwise::RealPart => C64::new(z.re, 0.0),
            Elementwise::Powf(e) => C64::new(z.re.powf(e), 0.0),
            Elementwise::Act(a) => a.apply(z),
        }
    }

    pub(crate) fn partials(self, z: C64) -> (C64, C64) {
        match self {
            Elementwise::Abs => {
                let r = z.norm();
                if r == 0.0 {
                    (ZERO, ZERO)
                } else {
                    (z.conj() / (2.0 * r), z / (2.0 * r))
                }
            }
            Elementwise::AbsSq => (z.conj(), z),
            Elementwise::RealPart => (C64::new(0.5, 0.0), C64::new(0.5, 0.0)),
            Elementwise::Powf(e) => {
                let d = C64::new(0.5 * e * z.re.powf(e - 1.0), 0.0);
                (d, d)
            }
            Elementwise::Act(a) => a.partials(z),
        }
    }
}

/// Column-wise softmax of squared moduli, stabilized by the per-column maximum.
pub fn softmax_cols(m: &CMatrix) -> CMatrix {
    let (rows, cols) = m.shape();
    let mut out = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        let max = (0..rows).map(|i| m[(i, j)].norm_sqr()).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for i in 0..rows {
            let e = (m[(i, j)].norm_sqr() - max).exp();
            out[(i, j)] = C64::new(e, 0.0);
            total += e;
        }
        for i in 0..rows {
            out[(i, j)].re /= total;
        }
    }
    out
}

pub(crate) fn scale_rows(x: &CMatrix, v: &CMatrix) -> CMatrix {
    assert_eq!(v.shape(), (x.rows(), 1), "scale_rows expects a column vector");
    CMatrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] * v[(i, 0)])
}

pub(crate) fn scale_cols(x: &CMatrix, r: &CMatrix) -> CMatrix {
    assert_eq!(r.shape(), (1, x.cols()), "scale_cols expects a row vector");
    CMatrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] * r[(0, j)])
}

pub(crate) fn add_col(x: &CMatrix, v: &CMatrix) -> CMatrix {
    assert_eq!(v.shape(), (x.rows(), 1), "add_col expects a column vector");
    CMatrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] + v[(i, 0)])
}

pub(crate) fn modrelu_matrix(x: &CMatrix, bias: &CMatrix) -> CMatrix {
    assert_eq!(bias.shape(), (x.rows(), 1), "modrelu bias must be a column vector");
    CMatrix::from_fn(x.rows(), x.cols(), |i, j| modrelu(x[(i, j)], bias[(i, 0)].re))
}

pub(crate) fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax cross-entropy on the real parts of a logit column.
pub(crate) fn cross_entropy(logits: &CMatrix, target: usize) -> f64 {
    let re: Vec<f64> = logits.as_slice().iter().map(|z| z.re).collect();
    assert!(target < re.len(), "target {target} out of range");
    logsumexp(&re) - re[target]
}

pub(crate) fn mse(out: &CMatrix, target: &[f64]) -> f64 {
    assert_eq!(out.len(), target.len(), "mse length mismatch");
    out.as_slice()
        .iter()
        .zip(target)
        .map(|(o, t)| (o.re - t).powi(2))
        .sum::<f64>()
        / target.len() as f64
}

/// `(sum_k rho_k - K * rho_min, first argmin)` on real parts.
pub(crate) fn ssr(densities: &[f64]) -> (f64, usize) {
    assert!(!densities.is_empty(), "ssr needs at least one density");
    let mut argmin = 0;
    for (k, &d) in densities.iter().enumerate() {
        if d < densities[argmin] {
            argmin = k;
        }
    }
    let min = densities[argmin];
    (densities.iter().map(|d| d - min).sum(), argmin)
}

/// Certifies a graph value for `ln det`, absorbing rounding asymmetry relative to its scale.
pub(crate) fn logdet(m: &CMatrix) -> crate::Result<HermitianPD> {
    if m.is_square() && m.is_finite() {
        let defect = m.hermitian_defect();
        if defect <= HERMITIAN_TOL * m.max_abs().max(1.0) {
            return HermitianPD::new(symmetrize(m));
        }
    }
    HermitianPD::new(m.clone())
}
