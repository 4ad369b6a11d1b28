use super::kernels::{self, Activation, Elementwise};
use crate::error::Result;
use crate::linalg::{CMatrix, C64};

/// The operation set every differentiable computation in the crate is written against.
///
/// Layers, objectives and the model are generic over `Graph`, so the same code runs
/// eagerly on plain matrices ([`Eager`]) or records onto a [`Tape`](super::Tape) for
/// conjugate-Wirtinger backpropagation. Both backends share the forward kernels, so
/// their values agree bitwise.
pub trait Graph {
    type Node: Clone;

    fn value<'a>(&'a self, node: &'a Self::Node) -> &'a CMatrix;

    /// A value that takes no gradient.
    fn constant(&mut self, value: CMatrix) -> Self::Node;

    fn add(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node;
    fn sub(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node;
    fn scale(&mut self, a: &Self::Node, c: C64) -> Self::Node;
    /// Adds `c` to every entry.
    fn offset(&mut self, a: &Self::Node, c: C64) -> Self::Node;
    fn matmul(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node;
    /// Conjugate transpose.
    fn adjoint(&mut self, a: &Self::Node) -> Self::Node;
    fn conj(&mut self, a: &Self::Node) -> Self::Node;
    fn hadamard(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node;
    /// `y[i,j] = x[i,j] * v[i]` for a column vector `v`.
    fn scale_rows(&mut self, x: &Self::Node, v: &Self::Node) -> Self::Node;
    /// `y[i,j] = x[i,j] * r[j]` for a row vector `r`.
    fn scale_cols(&mut self, x: &Self::Node, r: &Self::Node) -> Self::Node;
    /// `y[i,j] = x[i,j] + v[i]` for a column vector `v`.
    fn add_col(&mut self, x: &Self::Node, v: &Self::Node) -> Self::Node;

    fn abs(&mut self, a: &Self::Node) -> Self::Node;
    fn abs_sq(&mut self, a: &Self::Node) -> Self::Node;
    fn real_part(&mut self, a: &Self::Node) -> Self::Node;
    /// `(Re x)^e` elementwise.
    fn powf(&mut self, a: &Self::Node, e: f64) -> Self::Node;
    fn activation(&mut self, a: &Self::Node, kind: Activation) -> Self::Node;
    /// modReLU with a per-row bias (real part of the column vector `bias`).
    fn modrelu(&mut self, a: &Self::Node, bias: &Self::Node) -> Self::Node;
    /// Column-wise complex softmax (softmax of squared moduli).
    fn softmax_cols(&mut self, a: &Self::Node) -> Self::Node;

    fn columns(&mut self, a: &Self::Node, start: usize, len: usize) -> Self::Node;
    fn hstack(&mut self, parts: &[Self::Node]) -> Self::Node;
    /// Sum of all entries, as a 1x1.
    fn sum(&mut self, a: &Self::Node) -> Self::Node;
    /// `ln det` of a Hermitian positive-definite matrix, as a 1x1.
    fn logdet(&mut self, a: &Self::Node) -> Result<Self::Node>;

    fn cross_entropy(&mut self, logits: &Self::Node, target: usize) -> Self::Node;
    fn mse(&mut self, out: &Self::Node, target: &[f64]) -> Self::Node;
    /// Subspace regularizer over 1x1 density nodes.
    fn ssr(&mut self, densities: &[Self::Node]) -> Self::Node;

    /// Real part of a 1x1 node.
    fn scalar(&self, node: &Self::Node) -> f64 {
        self.value(node)[(0, 0)].re
    }
}

/// Immediate evaluation on owned matrices.
#[derive(Clone, Copy, Debug, Default)]
pub struct Eager;

impl Graph for Eager {
    type Node = CMatrix;

    fn value<'a>(&'a self, node: &'a CMatrix) -> &'a CMatrix {
        node
    }

    fn constant(&mut self, value: CMatrix) -> CMatrix {
        value
    }

    fn add(&mut self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.add(b)
    }

    fn sub(&mut self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.sub(b)
    }

    fn scale(&mut self, a: &CMatrix, c: C64) -> CMatrix {
        a.scale(c)
    }

    fn offset(&mut self, a: &CMatrix, c: C64) -> CMatrix {
        a.map(|z| z + c)
    }

    fn matmul(&mut self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.matmul(b)
    }

    fn adjoint(&mut self, a: &CMatrix) -> CMatrix {
        a.adjoint()
    }

    fn conj(&mut self, a: &CMatrix) -> CMatrix {
        a.conj()
    }

    fn hadamard(&mut self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.hadamard(b)
    }

    fn scale_rows(&mut self, x: &CMatrix, v: &CMatrix) -> CMatrix {
        kernels::scale_rows(x, v)
    }

    fn scale_cols(&mut self, x: &CMatrix, r: &CMatrix) -> CMatrix {
        kernels::scale_cols(x, r)
    }

    fn add_col(&mut self, x: &CMatrix, v: &CMatrix) -> CMatrix {
        kernels::add_col(x, v)
    }

    fn abs(&mut self, a: &CMatrix) -> CMatrix {
        a.map(|z| Elementwise::Abs.apply(z))
    }

    fn abs_sq(&mut self, a: &CMatrix) -> CMatrix {
        a.map(|z| Elementwise::AbsSq.apply(z))
    }

    fn real_part(&mut self, a: &CMatrix) -> CMatrix {
        a.map(|z| Elementwise::RealPart.apply(z))
    }

    fn powf(&mut self, a: &CMatrix, e: f64) -> CMatrix {
        a.map(|z| Elementwise::Powf(e).apply(z))
    }

    fn activation(&mut self, a: &CMatrix, kind: Activation) -> CMatrix {
        a.map(|z| kind.apply(z))
    }

    fn modrelu(&mut self, a: &CMatrix, bias: &CMatrix) -> CMatrix {
        kernels::modrelu_matrix(a, bias)
    }

    fn softmax_cols(&mut self, a: &CMatrix) -> CMatrix {
        kernels::softmax_cols(a)
    }

    fn columns(&mut self, a: &CMatrix, start: usize, len: usize) -> CMatrix {
        a.columns(start, len)
    }

    fn hstack(&mut self, parts: &[CMatrix]) -> CMatrix {
        let refs: Vec<&CMatrix> = parts.iter().collect();
        CMatrix::hstack(&refs).expect("hstack row mismatch")
    }

    fn sum(&mut self, a: &CMatrix) -> CMatrix {
        CMatrix::scalar(a.sum())
    }

    fn logdet(&mut self, a: &CMatrix) -> Result<CMatrix> {
        let hpd = kernels::logdet(a)?;
        Ok(CMatrix::scalar(C64::new(hpd.logdet(), 0.0)))
    }

    fn cross_entropy(&mut self, logits: &CMatrix, target: usize) -> CMatrix {
        CMatrix::scalar(C64::new(kernels::cross_entropy(logits, target), 0.0))
    }

    fn mse(&mut self, out: &CMatrix, target: &[f64]) -> CMatrix {
        CMatrix::scalar(C64::new(kernels::mse(out, target), 0.0))
    }

    fn ssr(&mut self, densities: &[CMatrix]) -> CMatrix {
        let vals: Vec<f64> = densities.iter().map(|d| d[(0, 0)].re).collect();
        CMatrix::scalar(C64::new(kernels::ssr(&vals).0, 0.0))
    }
}
