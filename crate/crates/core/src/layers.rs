//! Unrolled operators: subspace attention, the attention step, the thresholded MLP
//! variants and complex layer normalization.
//!
//! Every operator has a generic `*_on` form over [`Graph`] used by the model and
//! trainer, and a plain form over [`CMatrix`].

use serde::{Deserialize, Serialize};

use crate::autodiff::{kernels, Activation, Eager, Graph};
use crate::error::{Error, Result};
use crate::linalg::{random_unitary, seeded_rng, CMatrix, C64};
use crate::rate::{RateParams, SubspaceBank};

/// Additive floor under the per-token power.
pub const LAYERNORM_EPS: f64 = 1e-6;

/// Column-wise softmax of squared moduli.
pub fn complex_softmax(m: &CMatrix) -> CMatrix {
    kernels::softmax_cols(m)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReluVariant {
    #[default]
    CRelu,
    ZRelu,
    ModRelu,
    Cardioid,
}

impl ReluVariant {
    pub fn name(self) -> &'static str {
        match self {
            ReluVariant::CRelu => "crelu",
            ReluVariant::ZRelu => "zrelu",
            ReluVariant::ModRelu => "modrelu",
            ReluVariant::Cardioid => "cardioid",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MlpVariant {
    #[default]
    RfMlp,
    RfIsta,
}

/// Step size of the thresholded MLP, `16 / (9 (1 + alpha))`.
pub fn mlp_eta(alpha: f64) -> f64 {
    16.0 / (9.0 * (1.0 + alpha))
}

/// Attention weights: the bank plus an optional untied output map per head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub bank: SubspaceBank,
    pub kappa: f64,
    pub beta: f64,
    pub output: Option<Vec<CMatrix>>,
}

impl AttentionParams {
    pub fn new(bank: SubspaceBank, kappa: f64, beta: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::InvalidSpec(format!("kappa must be >= 0, got {kappa}")));
        }
        Ok(Self { bank, kappa, beta, output: None })
    }
}

/// Scalar settings of the MLP stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub variant: MlpVariant,
    pub relu: ReluVariant,
    pub eta: f64,
    pub lambda: f64,
    /// Subtract the threshold from both real and imaginary parts.
    pub symmetric_threshold: bool,
}

impl MlpConfig {
    pub fn new(variant: MlpVariant, rate: &RateParams, lambda: f64) -> Self {
        Self {
            variant,
            relu: ReluVariant::CRelu,
            eta: mlp_eta(rate.alpha()),
            lambda,
            symmetric_threshold: false,
        }
    }

    fn threshold(&self) -> C64 {
        let t = self.eta * self.lambda;
        if self.symmetric_threshold {
            C64::new(t, t)
        } else {
            C64::new(t, 0.0)
        }
    }
}

/// MLP weights. `weight` is the metric tensor for RF-MLP and the dictionary for RF-ISTA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub config: MlpConfig,
    pub weight: CMatrix,
    /// Per-dimension modReLU bias (`d x 1`, real).
    pub bias: CMatrix,
}

impl MlpParams {
    /// Zero metric tensor, or a seeded unitary dictionary.
    pub fn init(config: MlpConfig, d: usize, seed: u64) -> Result<Self> {
        let weight = match config.variant {
            MlpVariant::RfMlp => CMatrix::complex_gaussian(d, d, 0.02, &mut seeded_rng(seed)),
            MlpVariant::RfIsta => random_unitary(d, seed)?,
        };
        Ok(Self { config, weight, bias: CMatrix::zeros(d, 1) })
    }

    pub fn omega(&self) -> Option<&CMatrix> {
        (self.config.variant == MlpVariant::RfMlp).then_some(&self.weight)
    }

    pub fn dictionary(&self) -> Option<&CMatrix> {
        (self.config.variant == MlpVariant::RfIsta).then_some(&self.weight)
    }
}

/// Learnable complex per-dimension scale and shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerNormParams {
    pub scale: CMatrix,
    pub shift: CMatrix,
}

impl LayerNormParams {
    pub fn identity(d: usize) -> Self {
        Self {
            scale: CMatrix::filled(d, 1, C64::new(1.0, 0.0)),
            shift: CMatrix::zeros(d, 1),
        }
    }
}

/// Attention step output with the per-head subspace attention outputs kept for diagnostics.
#[derive(Clone, Debug)]
pub struct AttentionOutput<N> {
    pub output: N,
    pub heads: Vec<N>,
}

pub fn rf_ssa_on<G: Graph>(g: &mut G, z: &G::Node, u: &G::Node) -> G::Node {
    let uh = g.adjoint(u);
    let v = g.matmul(&uh, z);
    let vh = g.adjoint(&v);
    let sim = g.matmul(&vh, &v);
    let s = g.softmax_cols(&sim);
    g.matmul(&v, &s)
}

/// `beta sum_k W_k SSA_k` with `W_k = U_k` unless untied output maps are given.
pub fn rf_mssa_on<G: Graph>(
    g: &mut G,
    z: &G::Node,
    bases: &[G::Node],
    output: Option<&[G::Node]>,
    beta: f64,
) -> AttentionOutput<G::Node> {
    assert!(!bases.is_empty(), "attention needs at least one head");
    let heads: Vec<G::Node> = bases.iter().map(|u| rf_ssa_on(g, z, u)).collect();
    let mut total: Option<G::Node> = None;
    for (k, h) in heads.iter().enumerate() {
        let w = output.map_or(&bases[k], |o| &o[k]);
        let term = g.matmul(w, h);
        total = Some(match total {
            Some(t) => g.add(&t, &term),
            None => term,
        });
    }
    let total = total.expect("non-empty heads");
    let output = g.scale(&total, C64::new(beta, 0.0));
    AttentionOutput { output, heads }
}

/// `(1 - kappa beta / 2) Z + (kappa beta / 2) RF-MSSA(Z)`.
pub fn attention_update_on<G: Graph>(
    g: &mut G,
    z: &G::Node,
    bases: &[G::Node],
    output: Option<&[G::Node]>,
    kappa: f64,
    beta: f64,
) -> AttentionOutput<G::Node> {
    let mssa = rf_mssa_on(g, z, bases, output, beta);
    let c = 0.5 * kappa * beta;
    let keep = g.scale(z, C64::new(1.0 - c, 0.0));
    let step = g.scale(&mssa.output, C64::new(c, 0.0));
    AttentionOutput { output: g.add(&keep, &step), heads: mssa.heads }
}

pub fn relu_on<G: Graph>(g: &mut G, x: &G::Node, variant: ReluVariant, bias: Option<&G::Node>) -> G::Node {
    match variant {
        ReluVariant::CRelu => g.activation(x, Activation::CRelu),
        ReluVariant::ZRelu => g.activation(x, Activation::ZRelu),
        ReluVariant::Cardioid => g.activation(x, Activation::Cardioid),
        ReluVariant::ModRelu => match bias {
            Some(b) => g.modrelu(x, b),
            None => {
                let zero = g.constant(CMatrix::zeros(g.value(x).rows(), 1));
                g.modrelu(x, &zero)
            }
        },
    }
}

/// Linear stage of either MLP variant, before the threshold.
fn mlp_linear_on<G: Graph>(g: &mut G, z: &G::Node, weight: &G::Node, config: &MlpConfig) -> G::Node {
    let eta = C64::new(config.eta, 0.0);
    let step = match config.variant {
        MlpVariant::RfMlp => g.matmul(weight, z),
        MlpVariant::RfIsta => {
            let dz = g.matmul(weight, z);
            let resid = g.sub(z, &dz);
            let dh = g.adjoint(weight);
            g.matmul(&dh, &resid)
        }
    };
    let step = g.scale(&step, eta);
    g.add(z, &step)
}

/// `relu(Z + eta Omega Z - eta lambda)` or `relu(Z + eta D^H (Z - D Z) - eta lambda)`.
pub fn mlp_on<G: Graph>(
    g: &mut G,
    z: &G::Node,
    weight: &G::Node,
    bias: Option<&G::Node>,
    config: &MlpConfig,
) -> G::Node {
    let lin = mlp_linear_on(g, z, weight, config);
    let shifted = g.offset(&lin, -config.threshold());
    relu_on(g, &shifted, config.relu, bias)
}

/// Per-token centering and power normalization, then an optional affine map.
pub fn layernorm_on<G: Graph>(g: &mut G, z: &G::Node, affine: Option<(&G::Node, &G::Node)>) -> G::Node {
    let d = g.value(z).rows();
    let avg = g.constant(CMatrix::filled(1, d, C64::new(1.0 / d as f64, 0.0)));
    let ones = g.constant(CMatrix::filled(d, 1, C64::new(1.0, 0.0)));
    let mean = g.matmul(&avg, z);
    let spread = g.matmul(&ones, &mean);
    let centered = g.sub(z, &spread);
    let sq = g.abs_sq(&centered);
    let power = g.matmul(&avg, &sq);
    let floored = g.offset(&power, C64::new(LAYERNORM_EPS, 0.0));
    let inv = g.powf(&floored, -0.5);
    let normed = g.scale_cols(&centered, &inv);
    match affine {
        Some((scale, shift)) => {
            let scaled = g.scale_rows(&normed, scale);
            g.add_col(&scaled, shift)
        }
        None => normed,
    }
}

pub fn rf_ssa(z: &CMatrix, u: &CMatrix) -> CMatrix {
    rf_ssa_on(&mut Eager, z, u)
}

fn check_attention(z: &CMatrix, params: &AttentionParams) -> Result<()> {
    if z.rows() != params.bank.dim() {
        return Err(Error::shape(
            format!("{} rows", params.bank.dim()),
            z.shape_string(),
        ));
    }
    if let Some(out) = &params.output {
        if out.len() != params.bank.heads() {
            return Err(Error::LengthMismatch { left: out.len(), right: params.bank.heads() });
        }
    }
    Ok(())
}

pub fn rf_mssa(z: &CMatrix, params: &AttentionParams) -> Result<CMatrix> {
    check_attention(z, params)?;
    Ok(rf_mssa_on(&mut Eager, z, params.bank.bases(), params.output.as_deref(), params.beta).output)
}

pub fn attention_update(z: &CMatrix, params: &AttentionParams) -> Result<CMatrix> {
    check_attention(z, params)?;
    let out = attention_update_on(
        &mut Eager,
        z,
        params.bank.bases(),
        params.output.as_deref(),
        params.kappa,
        params.beta,
    );
    Ok(out.output)
}

fn mlp_checked(z: &CMatrix, params: &MlpParams, variant: MlpVariant) -> Result<CMatrix> {
    if params.config.variant != variant {
        return Err(Error::InvalidSpec(format!(
            "expected {variant:?} parameters, got {:?}",
            params.config.variant
        )));
    }
    z.ensure_shape(params.weight.cols(), z.cols())?;
    Ok(mlp_on(&mut Eager, z, &params.weight, Some(&params.bias), &params.config))
}

pub fn rf_mlp(z: &CMatrix, params: &MlpParams) -> Result<CMatrix> {
    mlp_checked(z, params, MlpVariant::RfMlp)
}

pub fn rf_ista(z: &CMatrix, params: &MlpParams) -> Result<CMatrix> {
    mlp_checked(z, params, MlpVariant::RfIsta)
}

/// Normalization without the affine step.
pub fn complex_layernorm(z: &CMatrix) -> CMatrix {
    layernorm_on(&mut Eager, z, None)
}

pub fn complex_layernorm_affine(z: &CMatrix, params: &LayerNormParams) -> CMatrix {
    layernorm_on(&mut Eager, z, Some((&params.scale, &params.shift)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{crelu, fd_conjugate_gradient, Tape};
    use crate::rate::softmax_rc_grad;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        CMatrix::complex_gaussian(rows, cols, 1.0, &mut seeded_rng(seed))
    }

    fn mlp(variant: MlpVariant, d: usize, lambda: f64, weight: CMatrix) -> MlpParams {
        let rate = RateParams::new(d, 4, 1, 1, 1.0, 0.0).unwrap();
        MlpParams {
            config: MlpConfig::new(variant, &rate, lambda),
            weight,
            bias: CMatrix::zeros(d, 1),
        }
    }

    #[test]
    fn softmax_examples() {
        let s = complex_softmax(&CMatrix::column_vector(vec![c(1.0, 0.0), c(0.0, 1.0)]));
        assert!((s[(0, 0)].re - 0.5).abs() < 1e-15 && (s[(1, 0)].re - 0.5).abs() < 1e-15);
        let s = complex_softmax(&CMatrix::zeros(3, 1));
        for i in 0..3 {
            assert!((s[(i, 0)].re - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_token_attention_is_projection() {
        let z = random(4, 1, 1);
        let u = random(4, 2, 2);
        assert!(rf_ssa(&z, &u).max_abs_diff(&u.adjoint_matmul(&z)) < 1e-15);
    }

    #[test]
    fn identical_tokens_give_identical_outputs() {
        let col = random(4, 1, 3);
        let z = CMatrix::hstack(&[&col, &col]).unwrap();
        let out = rf_ssa(&z, &random(4, 2, 4));
        assert!(out.column(0).max_abs_diff(&out.column(1)) < 1e-15);
    }

    #[test]
    fn kappa_zero_is_identity() {
        let bank = SubspaceBank::random(4, 2, 2, 1).unwrap();
        let params = AttentionParams::new(bank, 0.0, 0.5).unwrap();
        let z = random(4, 3, 5);
        assert_eq!(attention_update(&z, &params).unwrap(), z);
        assert_eq!(attention_update(&CMatrix::zeros(4, 3), &params).unwrap(), CMatrix::zeros(4, 3));
    }

    #[test]
    fn update_is_softmax_gradient_step() {
        let rate = RateParams::new(8, 16, 2, 4, 1.0, 0.1).unwrap();
        let bank = SubspaceBank::partitioned(8, 4, 2, 6).unwrap();
        let z = random(8, 16, 7);
        let params = AttentionParams::new(bank.clone(), 1.0, rate.beta()).unwrap();
        let lhs = attention_update(&z, &params).unwrap();
        let rhs = z.sub(&softmax_rc_grad(&z, &bank, &rate).unwrap().scale_real(params.kappa));
        assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn untied_output_defaults_to_bank() {
        let bank = SubspaceBank::random(6, 2, 3, 8).unwrap();
        let mut params = AttentionParams::new(bank.clone(), 1.0, 0.3).unwrap();
        let z = random(6, 4, 9);
        let tied = rf_mssa(&z, &params).unwrap();
        params.output = Some(bank.bases().to_vec());
        assert_eq!(rf_mssa(&z, &params).unwrap(), tied);
        params.output = Some(vec![bank.bases()[0].clone()]);
        assert!(rf_mssa(&z, &params).is_err());
    }

    #[test]
    fn activation_examples() {
        use crate::autodiff::{cardioid, modrelu, zrelu};
        assert_eq!(crelu(c(-1.0, 2.0)), c(0.0, 2.0));
        assert_eq!(crelu(c(3.0, -4.0)), c(3.0, 0.0));
        assert_eq!(zrelu(c(1.0, 2.0)), c(1.0, 2.0));
        assert_eq!(zrelu(c(-1.0, 2.0)), c(0.0, 0.0));
        assert_eq!(cardioid(c(1.0, 0.0)), c(1.0, 0.0));
        assert_eq!(cardioid(c(-1.0, 0.0)), c(0.0, 0.0));
        assert!((cardioid(c(0.0, 1.0)) - c(0.0, 0.5)).norm() < 1e-16);
        assert_eq!(cardioid(c(0.0, 0.0)), c(0.0, 0.0));
        assert_eq!(modrelu(c(1.0, 0.0), -0.5), c(0.5, 0.0));
        assert_eq!(modrelu(c(0.0, 0.0), 1.0), c(0.0, 0.0));
    }

    #[test]
    fn mlp_with_zero_weight_is_relu() {
        let z = random(3, 4, 10);
        let out = rf_mlp(&z, &mlp(MlpVariant::RfMlp, 3, 0.0, CMatrix::zeros(3, 3))).unwrap();
        assert_eq!(out, z.map(crelu));
    }

    #[test]
    fn mlp_threshold_shifts_real_part() {
        let z = CMatrix::from_real(2, 2, &[3.0, 4.0, 5.0, 6.0]).unwrap();
        let p = mlp(MlpVariant::RfMlp, 2, 0.5, CMatrix::zeros(2, 2));
        let shift = p.config.eta * 0.5;
        let out = rf_mlp(&z, &p).unwrap();
        assert!(out.max_abs_diff(&z.map(|v| v - shift)) < 1e-15);
    }

    #[test]
    fn ista_with_identity_dictionary_is_relu() {
        let z = random(3, 4, 11);
        let out = rf_ista(&z, &mlp(MlpVariant::RfIsta, 3, 0.0, CMatrix::identity(3))).unwrap();
        assert_eq!(out, z.map(crelu));
        let d = random_unitary(3, 2).unwrap();
        let zero = rf_ista(&CMatrix::zeros(3, 4), &mlp(MlpVariant::RfIsta, 3, 0.0, d)).unwrap();
        assert_eq!(zero, CMatrix::zeros(3, 4));
    }

    #[test]
    fn mlp_variant_mismatch_is_rejected() {
        let p = mlp(MlpVariant::RfIsta, 3, 0.0, CMatrix::identity(3));
        assert!(rf_mlp(&random(3, 2, 1), &p).is_err());
    }

    #[test]
    fn layernorm_examples() {
        let constant = CMatrix::filled(3, 1, c(2.0, -1.0));
        assert!(complex_layernorm(&constant).max_abs() < 1e-12);
        let pm = CMatrix::from_real(2, 1, &[1.0, -1.0]).unwrap();
        assert!(complex_layernorm(&pm).max_abs_diff(&pm) < 1e-6);
    }

    #[test]
    fn layernorm_affine_applies_scale_and_shift() {
        let z = random(4, 3, 12);
        let mut p = LayerNormParams::identity(4);
        assert_eq!(complex_layernorm_affine(&z, &p), complex_layernorm(&z));
        p.scale = CMatrix::filled(4, 1, c(0.0, 2.0));
        p.shift = CMatrix::filled(4, 1, c(1.0, 0.0));
        let expect = complex_layernorm(&z).map(|v| v * c(0.0, 2.0) + c(1.0, 0.0));
        assert!(complex_layernorm_affine(&z, &p).max_abs_diff(&expect) < 1e-14);
    }

    fn fd_check(z: &CMatrix, build: impl Fn(&mut Tape, crate::autodiff::Var) -> crate::autodiff::Var) {
        let mut t = Tape::new();
        let v = t.leaf(z.clone());
        let out = build(&mut t, v);
        let sq = t.abs_sq(&out);
        let f = t.sum(&sq);
        let ad = t.backward(f).unwrap().wrt(v, z.shape());
        let fd = fd_conjugate_gradient(
            |m| {
                let mut t = Tape::new();
                let v = t.leaf(m.clone());
                let out = build(&mut t, v);
                Ok(t.value(&out).frobenius_norm().powi(2))
            },
            z,
            1e-5,
        )
        .unwrap();
        let err = ad.max_rel_diff(&fd, 1e-3);
        assert!(err < 1e-4, "relative error {err:.3e}");
    }

    #[test]
    fn layer_backward_matches_finite_differences() {
        let z = random(6, 4, 13).scale_real(0.7);
        let bank = SubspaceBank::random(6, 3, 2, 14).unwrap();
        fd_check(&z, |t, v| {
            let bases: Vec<_> = bank.bases().iter().map(|u| t.constant(u.clone())).collect();
            attention_update_on(t, &v, &bases, None, 1.0, 0.4).output
        });
        fd_check(&z, |t, v| layernorm_on(t, &v, None));
        let w = random(6, 6, 15).scale_real(0.3);
        for variant in [MlpVariant::RfMlp, MlpVariant::RfIsta] {
            let mut cfg = MlpConfig::new(variant, &RateParams::new(6, 4, 2, 3, 1.0, 0.0).unwrap(), 0.1);
            for relu in [ReluVariant::CRelu, ReluVariant::ModRelu, ReluVariant::Cardioid] {
                cfg.relu = relu;
                fd_check(&z, |t, v| {
                    let wn = t.constant(w.clone());
                    let b = t.constant(CMatrix::filled(6, 1, c(-0.05, 0.0)));
                    mlp_on(t, &v, &wn, Some(&b), &cfg)
                });
            }
        }
    }
}
