//! Complex sparse rate reduction: coding rates, their conjugate gradients and the
//! subspace regularizer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{kernels, Graph};
use crate::error::{Error, Result};
use crate::linalg::{
    gram_shift, orthonormal_columns_from, partitioned_bank, seeded_rng, CMatrix, HermitianPD, C64,
};

/// Default modulus below which an entry counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-6;

/// Scalar coefficients of the objective. `alpha` and `beta` are derived and kept private.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    epsilon: f64,
    alpha: f64,
    beta: f64,
    lambda_sparsity: f64,
    d: usize,
    n: usize,
    p: usize,
    k: usize,
}

impl RateParams {
    pub fn new(d: usize, n: usize, p: usize, k: usize, epsilon: f64, lambda_sparsity: f64) -> Result<Self> {
        if d == 0 || n == 0 || p == 0 || k == 0 {
            return Err(Error::InvalidSpec(format!(
                "counts must be >= 1 (d={d}, N={n}, p={p}, K={k})"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidSpec(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(lambda_sparsity >= 0.0) {
            return Err(Error::InvalidSpec(format!("lambda must be >= 0, got {lambda_sparsity}")));
        }
        let scale = n as f64 * epsilon * epsilon;
        Ok(Self {
            epsilon,
            alpha: d as f64 / scale,
            beta: p as f64 / scale,
            lambda_sparsity,
            d,
            n,
            p,
            k,
        })
    }

    /// Same counts with a different token count.
    pub fn with_tokens(&self, n: usize) -> Result<Self> {
        Self::new(self.d, n, self.p, self.k, self.epsilon, self.lambda_sparsity)
    }

    /// Same counts with a different precision.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.d, self.n, self.p, self.k, epsilon, self.lambda_sparsity)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda_sparsity(&self) -> f64 {
        self.lambda_sparsity
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn check_tokens(&self, z: &CMatrix) -> Result<()> {
        z.ensure_shape(self.d, self.n)
    }
}

/// `K` bases of shape `d x p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceBank {
    bases: Vec<CMatrix>,
}

impl SubspaceBank {
    pub fn new(bases: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = bases.first() else {
            return Err(Error::InvalidShape("subspace bank needs at least one basis".into()));
        };
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidShape(format!("empty basis {}", first.shape_string())));
        }
        for u in &bases[1..] {
            u.ensure_shape(shape.0, shape.1)?;
        }
        Ok(Self { bases })
    }

    /// Independent seeded bases with orthonormal columns.
    pub fn random(d: usize, k: usize, p: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed);
        let bases = (0..k)
            .map(|_| orthonormal_columns_from(d, p, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(bases)
    }

    /// Mutually orthogonal bases cut from one seeded unitary.
    pub fn partitioned(d: usize, k: usize, p: usize, seed: u64) -> Result<Self> {
        Self::new(partitioned_bank(d, k, p, seed)?)
    }

    pub fn heads(&self) -> usize {
        self.bases.len()
    }

    pub fn dim(&self) -> usize {
        self.bases[0].rows()
    }

    pub fn width(&self) -> usize {
        self.bases[0].cols()
    }

    pub fn bases(&self) -> &[CMatrix] {
        &self.bases
    }

    pub fn bases_mut(&mut self) -> &mut [CMatrix] {
        &mut self.bases
    }

    pub fn into_bases(self) -> Vec<CMatrix> {
        self.bases
    }

    /// Largest `max|U_k^H U_k - I|` over the bank.
    pub fn orthonormality_residual(&self) -> f64 {
        let id = CMatrix::identity(self.width());
        self.bases
            .iter()
            .map(|u| u.adjoint_matmul(u).max_abs_diff(&id))
            .fold(0.0, f64::max)
    }

    fn check(&self, z: &CMatrix, params: &RateParams) -> Result<()> {
        params.check_tokens(z)?;
        if self.dim() != params.d() || self.width() != params.p() || self.heads() != params.k() {
            return Err(Error::shape(
                format!("{} bases of {}x{}", params.k(), params.d(), params.p()),
                format!("{} bases of {}x{}", self.heads(), self.dim(), self.width()),
            ));
        }
        Ok(())
    }
}

/// `1/2 ln det(I + alpha Z^H Z)`.
pub fn coding_rate(z: &CMatrix, params: &RateParams) -> Result<f64> {
    params.check_tokens(z)?;
    Ok(0.5 * gram_shift(z, params.alpha())?.logdet())
}

/// Per-head projections `U_k^H Z` with their certified shifted Grams.
fn projected_grams(z: &CMatrix, bank: &SubspaceBank, beta: f64) -> Result<Vec<(CMatrix, HermitianPD)>> {
    bank.bases()
        .par_iter()
        .map(|u| {
            let proj = u.adjoint_matmul(z);
            let gram = gram_shift(&proj, beta)?;
            Ok((proj, gram))
        })
        .collect()
}

/// `1/2 sum_k ln det(I + beta (U_k^H Z)^H (U_k^H Z))`.
pub fn constrained_rate(z: &CMatrix, bank: &SubspaceBank, params: &RateParams) -> Result<f64> {
    bank.check(z, params)?;
    let grams = projected_grams(z, bank, params.beta())?;
    Ok(0.5 * grams.iter().map(|(_, g)| g.logdet()).sum::<f64>())
}

/// Number of entries with modulus above `zero_tol`.
pub fn count_nonzero(z: &CMatrix, zero_tol: f64) -> usize {
    z.as_slice().iter().filter(|v| v.norm() > zero_tol).count()
}

/// `R - R^c - lambda * nnz(Z)`. Reporting metric only.
pub fn sparse_rate_reduction(z: &CMatrix, bank: &SubspaceBank, params: &RateParams, zero_tol: f64) -> Result<f64> {
    if !(zero_tol >= 0.0) {
        return Err(Error::InvalidSpec(format!("zero_tol must be >= 0, got {zero_tol}")));
    }
    let r = coding_rate(z, params)?;
    let rc = constrained_rate(z, bank, params)?;
    Ok(r - rc - params.lambda_sparsity() * count_nonzero(z, zero_tol) as f64)
}

/// Same as [`sparse_rate_reduction`] with the l1 norm in place of the count.
pub fn sparse_rate_reduction_l1(z: &CMatrix, bank: &SubspaceBank, params: &RateParams) -> Result<f64> {
    let r = coding_rate(z, params)?;
    let rc = constrained_rate(z, bank, params)?;
    let l1: f64 = z.as_slice().iter().map(|v| v.norm()).sum();
    Ok(r - rc - params.lambda_sparsity() * l1)
}

fn sum_heads(terms: Vec<CMatrix>, rows: usize, cols: usize) -> CMatrix {
    let mut acc = CMatrix::zeros(rows, cols);
    for t in &terms {
        acc.add_assign(t);
    }
    acc
}

/// Exact `∇_Z̄ R^c = 1/2 beta sum_k U_k U_k^H Z (I + beta G_k)^{-1}`.
pub fn exact_rc_grad(z: &CMatrix, bank: &SubspaceBank, params: &RateParams) -> Result<CMatrix> {
    bank.check(z, params)?;
    let beta = params.beta();
    let grams = projected_grams(z, bank, beta)?;
    let terms: Vec<CMatrix> = bank
        .bases()
        .par_iter()
        .zip(grams.par_iter())
        .map(|(u, (proj, gram))| u.matmul(&gram.solve_right(proj)))
        .collect();
    Ok(sum_heads(terms, z.rows(), z.cols()).scale_real(0.5 * beta))
}

/// First-order expansion `1/2 beta sum_k U_k (U_k^H Z - beta U_k^H Z G_k)`.
pub fn approx_rc_grad(z: &CMatrix, bank: &SubspaceBank, params: &RateParams) -> Result<CMatrix> {
    bank.check(z, params)?;
    let beta = params.beta();
    let terms: Vec<CMatrix> = bank
        .bases()
        .par_iter()
        .map(|u| {
            let proj = u.adjoint_matmul(z);
            let gram = proj.adjoint_matmul(&proj);
            u.matmul(&proj.sub(&proj.matmul(&gram).scale_real(beta)))
        })
        .collect();
    Ok(sum_heads(terms, z.rows(), z.cols()).scale_real(0.5 * beta))
}

/// [`approx_rc_grad`] with the Gram similarity passed through the column softmax.
pub fn softmax_rc_grad(z: &CMatrix, bank: &SubspaceBank, params: &RateParams) -> Result<CMatrix> {
    bank.check(z, params)?;
    let beta = params.beta();
    let terms: Vec<CMatrix> = bank
        .bases()
        .par_iter()
        .map(|u| {
            let proj = u.adjoint_matmul(z);
            let sim = kernels::softmax_cols(&proj.adjoint_matmul(&proj));
            u.matmul(&proj.sub(&proj.matmul(&sim).scale_real(beta)))
        })
        .collect();
    Ok(sum_heads(terms, z.rows(), z.cols()).scale_real(0.5 * beta))
}

/// `sum |z| / (rows * n)`: the mean modulus over `n` tokens of a block.
pub fn subspace_density(block: &CMatrix, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidSpec("density needs at least one token".into()));
    }
    let total: f64 = block.as_slice().iter().map(|v| v.norm()).sum();
    Ok(total / (n * block.rows().max(1)) as f64)
}

/// `sum_k (rho_k - min rho)`; zero for an empty slice.
pub fn ssr(densities: &[f64]) -> f64 {
    if densities.is_empty() {
        return 0.0;
    }
    kernels::ssr(densities).0
}

/// Taped [`coding_rate`] of a `d x N` node.
pub fn coding_rate_on<G: Graph>(g: &mut G, z: &G::Node, alpha: f64) -> Result<G::Node> {
    let n = g.value(z).cols();
    let gram = {
        let zh = g.adjoint(z);
        g.matmul(&zh, z)
    };
    let shifted = shift_identity(g, &gram, alpha, n);
    let ld = g.logdet(&shifted)?;
    Ok(g.scale(&ld, C64::new(0.5, 0.0)))
}

fn shift_identity<G: Graph>(g: &mut G, gram: &G::Node, scale: f64, n: usize) -> G::Node {
    let id = g.constant(CMatrix::identity(n));
    let scaled = g.scale(gram, C64::new(scale, 0.0));
    g.add(&id, &scaled)
}

/// Taped [`constrained_rate`] over basis nodes.
pub fn constrained_rate_on<G: Graph>(g: &mut G, z: &G::Node, bases: &[G::Node], beta: f64) -> Result<G::Node> {
    let n = g.value(z).cols();
    let mut total: Option<G::Node> = None;
    for u in bases {
        let uh = g.adjoint(u);
        let proj = g.matmul(&uh, z);
        let ph = g.adjoint(&proj);
        let gram = g.matmul(&ph, &proj);
        let shifted = shift_identity(g, &gram, beta, n);
        let ld = g.logdet(&shifted)?;
        total = Some(match total {
            Some(t) => g.add(&t, &ld),
            None => ld,
        });
    }
    let total = total.ok_or_else(|| Error::InvalidShape("no bases".into()))?;
    Ok(g.scale(&total, C64::new(0.5, 0.0)))
}

/// Taped [`subspace_density`].
pub fn subspace_density_on<G: Graph>(g: &mut G, block: &G::Node, n: usize) -> G::Node {
    let rows = g.value(block).rows().max(1);
    let m = g.abs(block);
    let s = g.sum(&m);
    g.scale(&s, C64::new(1.0 / (rows * n.max(1)) as f64, 0.0))
}
