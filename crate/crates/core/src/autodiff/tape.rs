//! Reverse-mode tape producing conjugate-Wirtinger gradients.
//!
//! Every node carries the adjoint `G = ∂f/∂X̄` of a real objective `f`. For a
//! recorded map `Y = g(X)` the adjoint flows back as
//!
//! ```text
//! G_X = G_Y · conj(∂Y/∂X) + conj(G_Y) · ∂Y/∂X̄
//! ```
//!
//! (summed over output entries), which is the CR-calculus chain rule. Holomorphic
//! primitives only use the first term, the conjugation and real-valued primitives
//! use the second. The terminal node is seeded with `1/2`, since a real `f = Re f`
//! has `∂f/∂f̄ = 1/2`.

use super::graph::Graph;
use super::kernels::{self, Activation, Elementwise};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Imaginary residue tolerated on a terminal node.
pub const REAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, C64),
    Offset(Var),
    MatMul(Var, Var),
    Adjoint(Var),
    Conj(Var),
    Hadamard(Var, Var),
    ScaleRows(Var, Var),
    ScaleCols(Var, Var),
    AddCol(Var, Var),
    Map(Var, Elementwise),
    ModRelu(Var, Var),
    SoftmaxCols(Var),
    Columns(Var, usize),
    HStack(Vec<Var>),
    Sum(Var),
    LogDet(Var, CMatrix),
    CrossEntropy(Var, usize),
    Mse(Var, Vec<f64>),
    Ssr(Vec<Var>, usize),
}

#[derive(Clone, Debug)]
struct Node {
    value: CMatrix,
    op: Op,
}

/// Records complex matrix operations in topological order.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Conjugate gradients `∂f/∂X̄` for every node reached by a backward pass.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<CMatrix>>,
}

impl Gradients {
    /// Gradient with respect to `var`; zeros if `f` does not depend on it.
    pub fn wrt(&self, var: Var, shape: (usize, usize)) -> CMatrix {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(shape.0, shape.1))
    }

    pub fn get(&self, var: Var) -> Option<&CMatrix> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<CMatrix> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: CMatrix) -> Var {
        self.push(value, Op::Leaf)
    }

    fn push(&mut self, value: CMatrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, v: Var) -> &CMatrix {
        &self.nodes[v.0].value
    }

    /// Backpropagates from a real 1x1 terminal node.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        self.backward_scaled(output, 1.0)
    }

    /// Gradient of `weight * f`.
    pub fn backward_scaled(&self, output: Var, weight: f64) -> Result<Gradients> {
        let out = self.val(output);
        if out.shape() != (1, 1) {
            return Err(Error::shape("1x1 objective", out.shape_string()));
        }
        let im = out[(0, 0)].im;
        if im.abs() > REAL_TOL {
            return Err(Error::NonRealObjective(im));
        }
        let mut grads: Vec<Option<CMatrix>> = vec![None; output.0 + 1];
        grads[output.0] = Some(CMatrix::scalar(C64::new(0.5 * weight, 0.0)));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &CMatrix, grads: &mut [Option<CMatrix>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.scale_real(-1.0));
            }
            Op::Scale(a, c) => accumulate(grads, *a, g.scale(c.conj())),
            Op::Offset(a) => accumulate(grads, *a, g.clone()),
            Op::MatMul(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                accumulate(grads, *a, g.matmul(&bv.adjoint()));
                accumulate(grads, *b, av.adjoint_matmul(g));
            }
            Op::Adjoint(a) => accumulate(grads, *a, g.adjoint()),
            Op::Conj(a) => accumulate(grads, *a, g.conj()),
            Op::Hadamard(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                accumulate(grads, *a, g.zip_map(bv, |gy, y| gy * y.conj()));
                accumulate(grads, *b, g.zip_map(av, |gy, y| gy * y.conj()));
            }
            Op::ScaleRows(x, v) => {
                let (xv, vv) = (self.val(*x), self.val(*v));
                let gx = CMatrix::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] * vv[(i, 0)].conj());
                let gv = CMatrix::from_fn(vv.rows(), 1, |i, _| {
                    (0..g.cols()).map(|j| g[(i, j)] * xv[(i, j)].conj()).sum()
                });
                accumulate(grads, *x, gx);
                accumulate(grads, *v, gv);
            }
            Op::ScaleCols(x, r) => {
                let (xv, rv) = (self.val(*x), self.val(*r));
                let gx = CMatrix::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] * rv[(0, j)].conj());
                let gr = CMatrix::from_fn(1, rv.cols(), |_, j| {
                    (0..g.rows()).map(|i| g[(i, j)] * xv[(i, j)].conj()).sum()
                });
                accumulate(grads, *x, gx);
                accumulate(grads, *r, gr);
            }
            Op::AddCol(x, v) => {
                let gv = CMatrix::from_fn(g.rows(), 1, |i, _| (0..g.cols()).map(|j| g[(i, j)]).sum());
                accumulate(grads, *x, g.clone());
                accumulate(grads, *v, gv);
            }
            Op::Map(x, kind) => {
                let xv = self.val(*x);
                let gx = g.zip_map(xv, |gy, z| {
                    let (dz, dzb) = kind.partials(z);
                    gy * dz.conj() + gy.conj() * dzb
                });
                accumulate(grads, *x, gx);
            }
            Op::ModRelu(x, bias) => {
                let (xv, bv) = (self.val(*x), self.val(*bias));
                let mut gx = CMatrix::zeros(xv.rows(), xv.cols());
                let mut gb = CMatrix::zeros(bv.rows(), 1);
                for i in 0..xv.rows() {
                    let b = bv[(i, 0)].re;
                    let mut acc = 0.0;
                    for j in 0..xv.cols() {
                        let gy = g[(i, j)];
                        let (dz, dzb, db) = kernels::modrelu_partials(xv[(i, j)], b);
                        gx[(i, j)] = gy * dz.conj() + gy.conj() * dzb;
                        // b enters through its real part only
                        acc += (gy.conj() * db).re;
                    }
                    gb[(i, 0)] = C64::new(acc, 0.0);
                }
                accumulate(grads, *x, gx);
                accumulate(grads, *bias, gb);
            }
            Op::SoftmaxCols(x) => {
                let (xv, s) = (self.val(*x), &node.value);
                let (rows, cols) = xv.shape();
                let mut gx = CMatrix::zeros(rows, cols);
                for j in 0..cols {
                    // real gradient w.r.t. the real softmax output is 2 Re(G)
                    let t: f64 = (0..rows).map(|i| 2.0 * g[(i, j)].re * s[(i, j)].re).sum();
                    for i in 0..rows {
                        let da = s[(i, j)].re * (2.0 * g[(i, j)].re - t);
                        gx[(i, j)] = xv[(i, j)] * da;
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::Columns(x, start) => {
                let xv = self.val(*x);
                let mut gx = CMatrix::zeros(xv.rows(), xv.cols());
                for i in 0..g.rows() {
                    for j in 0..g.cols() {
                        gx[(i, start + j)] = g[(i, j)];
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::HStack(parts) => {
                let mut offset = 0;
                for p in parts {
                    let w = self.val(*p).cols();
                    accumulate(grads, *p, g.columns(offset, w));
                    offset += w;
                }
            }
            Op::Sum(x) => {
                let (r, c) = self.val(*x).shape();
                accumulate(grads, *x, CMatrix::filled(r, c, g[(0, 0)]));
            }
            Op::LogDet(x, inverse) => {
                // ∂ ln det X / ∂X = X^{-T}; holomorphic, so G_X = G · conj(X^{-T}) = G · X^{-H}
                accumulate(grads, *x, inverse.adjoint().scale(g[(0, 0)]));
            }
            Op::CrossEntropy(l, target) => {
                let lv = self.val(*l);
                let re: Vec<f64> = lv.as_slice().iter().map(|z| z.re).collect();
                let lse = kernels::logsumexp(&re);
                let w = g[(0, 0)].re;
                let gl = CMatrix::from_fn(lv.rows(), lv.cols(), |i, j| {
                    let k = i * lv.cols() + j;
                    let p = (re[k] - lse).exp();
                    let onehot = if k == *target { 1.0 } else { 0.0 };
                    C64::new(w * (p - onehot), 0.0)
                });
                accumulate(grads, *l, gl);
            }
            Op::Mse(o, target) => {
                let ov = self.val(*o);
                let w = g[(0, 0)].re;
                let n = target.len() as f64;
                let go = CMatrix::from_fn(ov.rows(), ov.cols(), |i, j| {
                    let k = i * ov.cols() + j;
                    C64::new(w * 2.0 * (ov[(i, j)].re - target[k]) / n, 0.0)
                });
                accumulate(grads, *o, go);
            }
            Op::Ssr(dens, argmin) => {
                let w = g[(0, 0)].re;
                let k = dens.len() as f64;
                for (i, d) in dens.iter().enumerate() {
                    let coef = if i == *argmin { 1.0 - k } else { 1.0 };
                    accumulate(grads, *d, CMatrix::scalar(C64::new(w * coef, 0.0)));
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<CMatrix>], var: Var, g: CMatrix) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

impl Graph for Tape {
    type Node = Var;

    fn value<'a>(&'a self, node: &'a Var) -> &'a CMatrix {
        self.val(*node)
    }

    fn constant(&mut self, value: CMatrix) -> Var {
        self.push(value, Op::Constant)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(*a).add(self.val(*b));
        self.push(v, Op::Add(*a, *b))
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(*a).sub(self.val(*b));
        self.push(v, Op::Sub(*a, *b))
    }

    fn scale(&mut self, a: &Var, c: C64) -> Var {
        let v = self.val(*a).scale(c);
        self.push(v, Op::Scale(*a, c))
    }

    fn offset(&mut self, a: &Var, c: C64) -> Var {
        let v = self.val(*a).map(|z| z + c);
        self.push(v, Op::Offset(*a))
    }

    fn matmul(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(*a).matmul(self.val(*b));
        self.push(v, Op::MatMul(*a, *b))
    }

    fn adjoint(&mut self, a: &Var) -> Var {
        let v = self.val(*a).adjoint();
        self.push(v, Op::Adjoint(*a))
    }

    fn conj(&mut self, a: &Var) -> Var {
        let v = self.val(*a).conj();
        self.push(v, Op::Conj(*a))
    }

    fn hadamard(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(*a).hadamard(self.val(*b));
        self.push(v, Op::Hadamard(*a, *b))
    }

    fn scale_rows(&mut self, x: &Var, v: &Var) -> Var {
        let out = kernels::scale_rows(self.val(*x), self.val(*v));
        self.push(out, Op::ScaleRows(*x, *v))
    }

    fn scale_cols(&mut self, x: &Var, r: &Var) -> Var {
        let out = kernels::scale_cols(self.val(*x), self.val(*r));
        self.push(out, Op::ScaleCols(*x, *r))
    }

    fn add_col(&mut self, x: &Var, v: &Var) -> Var {
        let out = kernels::add_col(self.val(*x), self.val(*v));
        self.push(out, Op::AddCol(*x, *v))
    }

    fn abs(&mut self, a: &Var) -> Var {
        self.map(a, Elementwise::Abs)
    }

    fn abs_sq(&mut self, a: &Var) -> Var {
        self.map(a, Elementwise::AbsSq)
    }

    fn real_part(&mut self, a: &Var) -> Var {
        self.map(a, Elementwise::RealPart)
    }

    fn powf(&mut self, a: &Var, e: f64) -> Var {
        self.map(a, Elementwise::Powf(e))
    }

    fn activation(&mut self, a: &Var, kind: Activation) -> Var {
        self.map(a, Elementwise::Act(kind))
    }

    fn modrelu(&mut self, a: &Var, bias: &Var) -> Var {
        let out = kernels::modrelu_matrix(self.val(*a), self.val(*bias));
        self.push(out, Op::ModRelu(*a, *bias))
    }

    fn softmax_cols(&mut self, a: &Var) -> Var {
        let out = kernels::softmax_cols(self.val(*a));
        self.push(out, Op::SoftmaxCols(*a))
    }

    fn columns(&mut self, a: &Var, start: usize, len: usize) -> Var {
        let out = self.val(*a).columns(start, len);
        self.push(out, Op::Columns(*a, start))
    }

    fn hstack(&mut self, parts: &[Var]) -> Var {
        let refs: Vec<&CMatrix> = parts.iter().map(|p| self.val(*p)).collect();
        let out = CMatrix::hstack(&refs).expect("hstack row mismatch");
        self.push(out, Op::HStack(parts.to_vec()))
    }

    fn sum(&mut self, a: &Var) -> Var {
        let out = CMatrix::scalar(self.val(*a).sum());
        self.push(out, Op::Sum(*a))
    }

    fn logdet(&mut self, a: &Var) -> Result<Var> {
        let hpd = kernels::logdet(self.val(*a))?;
        let out = CMatrix::scalar(C64::new(hpd.logdet(), 0.0));
        let inverse = hpd.inverse();
        Ok(self.push(out, Op::LogDet(*a, inverse)))
    }

    fn cross_entropy(&mut self, logits: &Var, target: usize) -> Var {
        let out = CMatrix::scalar(C64::new(kernels::cross_entropy(self.val(*logits), target), 0.0));
        self.push(out, Op::CrossEntropy(*logits, target))
    }

    fn mse(&mut self, out: &Var, target: &[f64]) -> Var {
        let v = CMatrix::scalar(C64::new(kernels::mse(self.val(*out), target), 0.0));
        self.push(v, Op::Mse(*out, target.to_vec()))
    }

    fn ssr(&mut self, densities: &[Var]) -> Var {
        let vals: Vec<f64> = densities.iter().map(|d| self.val(*d)[(0, 0)].re).collect();
        let (value, argmin) = kernels::ssr(&vals);
        self.push(
            CMatrix::scalar(C64::new(value, 0.0)),
            Op::Ssr(densities.to_vec(), argmin),
        )
    }
}

impl Tape {
    fn map(&mut self, a: &Var, kind: Elementwise) -> Var {
        let out = self.val(*a).map(|z| kind.apply(z));
        self.push(out, Op::Map(*a, kind))
    }
}
