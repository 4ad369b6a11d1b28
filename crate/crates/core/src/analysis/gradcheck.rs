use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::autodiff::{fd_conjugate_gradient, Graph, Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{
    attention_update, attention_update_on, complex_softmax, layernorm_on, mlp_on, rf_mssa_on, rf_ssa_on, AttentionParams,
    MlpConfig, MlpVariant, ReluVariant,
};
use crate::linalg::{random_unitary, seeded_rng, CMatrix};
use crate::rate::{
    approx_rc_grad, constrained_rate, constrained_rate_on, exact_rc_grad, softmax_rc_grad, RateParams, SubspaceBank,
};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
pub const RC_GRAD_TOL: f64 = 1e-5;
pub const LAYER_GRAD_TOL: f64 = 1e-4;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const SOFTMAX_TOL: f64 = 1e-12;
/// Required shrinkage of the approximation error when `beta` drops tenfold.
pub const APPROX_ORDER_RATIO: f64 = 1.0 / 50.0;

/// Problem size `d, N, K, p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GradcheckSize {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub p: usize,
}

impl Default for GradcheckSize {
    fn default() -> Self {
        Self { d: 8, n: 16, k: 4, p: 2 }
    }
}

impl FromStr for GradcheckSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidSpec(format!("size '{s}': {e}")))?;
        let [d, n, k, p] = parts[..] else {
            return Err(Error::InvalidSpec(format!("size '{s}' needs four values d,N,K,p")));
        };
        let size = Self { d, n, k, p };
        size.validate()?;
        Ok(size)
    }
}

impl fmt::Display for GradcheckSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.d, self.n, self.k, self.p)
    }
}

impl GradcheckSize {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 || self.k == 0 || self.p == 0 || self.p > self.d {
            return Err(Error::InvalidSpec(format!("size {self} needs positive entries with p <= d")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Not applicable at this size; does not count as a failure.
    pub skipped: bool,
}

impl CheckResult {
    fn new(name: &str, max_error: f64, threshold: f64) -> Self {
        Self { name: name.into(), max_error, threshold, passed: max_error <= threshold, skipped: false }
    }

    fn skipped(name: &str, threshold: f64) -> Self {
        Self { name: name.into(), max_error: 0.0, threshold, passed: true, skipped: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub size: GradcheckSize,
    pub checks: Vec<CheckResult>,
}

impl GradcheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn rel_error(got: &CMatrix, reference: &CMatrix) -> f64 {
    got.max_rel_diff(reference, 1e-12)
}

/// Relative error of the exact gradient of `R^c` against central differences.
pub fn rc_grad_fd_error(z: &CMatrix, bank: &SubspaceBank, params: &RateParams) -> Result<f64> {
    let exact = exact_rc_grad(z, bank, params)?;
    let fd = fd_conjugate_gradient(|m| constrained_rate(m, bank, params), z, FD_STEP)?;
    Ok(rel_error(&exact, &fd))
}

/// `(error at beta / 10) / (error at beta)` of the first-order approximation.
pub fn approx_order_ratio(z: &CMatrix, bank: &SubspaceBank, params: &RateParams) -> Result<f64> {
    let err = |p: &RateParams| -> Result<f64> { Ok(rel_error(&approx_rc_grad(z, bank, p)?, &exact_rc_grad(z, bank, p)?)) };
    let coarse = err(params)?;
    let fine = err(&params.with_epsilon(params.epsilon() * 10f64.sqrt())?)?;
    Ok(fine / coarse)
}

/// Max modulus gap between the attention step and `Z - kappa * softmax_rc_grad`.
pub fn white_box_gap(z: &CMatrix, bank: &SubspaceBank, params: &RateParams, kappa: f64) -> Result<f64> {
    let layer = attention_update(z, &AttentionParams::new(bank.clone(), kappa, params.beta())?)?;
    let step = z.sub(&softmax_rc_grad(z, bank, params)?.scale_real(kappa));
    Ok(layer.max_abs_diff(&step))
}

/// Tape gradient of `sum |out|^2` against central differences, for a map of one input.
pub fn layer_fd_error<F>(z: &CMatrix, build: F) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Var,
{
    let mut t = Tape::new();
    let v = t.leaf(z.clone());
    let out = build(&mut t, v);
    let sq = t.abs_sq(&out);
    let f = t.sum(&sq);
    let ad = t.backward(f)?.wrt(v, z.shape());
    let fd = fd_conjugate_gradient(
        |m| {
            let mut t = Tape::new();
            let v = t.leaf(m.clone());
            let out = build(&mut t, v);
            Ok(t.value(&out).frobenius_norm().powi(2))
        },
        z,
        FD_STEP,
    )?;
    Ok(rel_error(&ad, &fd))
}

/// The oracle suite on one seeded instance.
pub fn run_gradcheck(seed: u64, size: GradcheckSize) -> Result<GradcheckReport> {
    size.validate()?;
    let GradcheckSize { d, n, k, p } = size;
    let mut rng = seeded_rng(seed);
    let z = CMatrix::complex_gaussian(d, n, 1.0, &mut rng);
    let params = RateParams::new(d, n, p, k, 1.0, 0.1)?;
    let bank = SubspaceBank::random(d, k, p, seed.wrapping_add(1))?;
    let mut checks = Vec::new();

    checks.push(CheckResult::new("exact_rc_grad_vs_fd", rc_grad_fd_error(&z, &bank, &params)?, RC_GRAD_TOL));

    let mut tape = Tape::new();
    let zv = tape.leaf(z.clone());
    let uv: Vec<Var> = bank.bases().iter().map(|u| tape.constant(u.clone())).collect();
    let rc = constrained_rate_on(&mut tape, &zv, &uv, params.beta())?;
    let taped = tape.backward(rc)?.wrt(zv, z.shape());
    checks.push(CheckResult::new(
        "tape_rc_grad_vs_exact",
        rel_error(&taped, &exact_rc_grad(&z, &bank, &params)?),
        RC_GRAD_TOL,
    ));

    checks.push(CheckResult::new(
        "approx_rc_grad_order",
        approx_order_ratio(&z, &bank, &params)?,
        APPROX_ORDER_RATIO,
    ));

    if k * p == d {
        let part = SubspaceBank::partitioned(d, k, p, seed.wrapping_add(2))?;
        checks.push(CheckResult::new("white_box_identity", white_box_gap(&z, &part, &params, 1.0)?, IDENTITY_TOL));
    } else {
        checks.push(CheckResult::skipped("white_box_identity", IDENTITY_TOL));
    }

    let sim = z.adjoint_matmul(&z);
    let s = complex_softmax(&sim);
    let col_err = (0..s.cols())
        .map(|j| (s.column(j).sum().re - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(CheckResult::new("softmax_columns_sum_to_one", col_err, SOFTMAX_TOL));

    let u0 = bank.bases()[0].clone();
    checks.push(CheckResult::new(
        "rf_ssa_backward",
        layer_fd_error(&z, |t, v| {
            let u = t.constant(u0.clone());
            rf_ssa_on(t, &v, &u)
        })?,
        LAYER_GRAD_TOL,
    ));
    checks.push(CheckResult::new(
        "rf_ssa_backward_wrt_basis",
        layer_fd_error(&u0, |t, u| {
            let zc = t.constant(z.clone());
            rf_ssa_on(t, &zc, &u)
        })?,
        LAYER_GRAD_TOL,
    ));
    let beta = params.beta();
    checks.push(CheckResult::new(
        "rf_mssa_backward",
        layer_fd_error(&z, |t, v| {
            let us: Vec<Var> = bank.bases().iter().map(|u| t.constant(u.clone())).collect();
            rf_mssa_on(t, &v, &us, None, beta).output
        })?,
        LAYER_GRAD_TOL,
    ));
    checks.push(CheckResult::new(
        "attention_update_backward",
        layer_fd_error(&z, |t, v| {
            let us: Vec<Var> = bank.bases().iter().map(|u| t.constant(u.clone())).collect();
            attention_update_on(t, &v, &us, None, 1.0, beta).output
        })?,
        LAYER_GRAD_TOL,
    ));

    let omega = CMatrix::complex_gaussian(d, d, 0.3, &mut rng);
    let dict = random_unitary(d, seed.wrapping_add(3))?;
    let bias = CMatrix::real_gaussian(d, 1, 0.1, &mut rng);
    for (variant, weight, label) in [(MlpVariant::RfMlp, &omega, "rf_mlp"), (MlpVariant::RfIsta, &dict, "rf_ista")] {
        for relu in [ReluVariant::CRelu, ReluVariant::ZRelu, ReluVariant::ModRelu, ReluVariant::Cardioid] {
            let cfg = MlpConfig { relu, ..MlpConfig::new(variant, &params, 0.1) };
            let err = layer_fd_error(&z, |t, v| {
                let w = t.constant(weight.clone());
                let b = t.constant(bias.clone());
                mlp_on(t, &v, &w, Some(&b), &cfg)
            })?;
            checks.push(CheckResult::new(&format!("{label}_{}_backward", relu.name()), err, LAYER_GRAD_TOL));
        }
    }

    let scale = CMatrix::complex_gaussian(d, 1, 1.0, &mut rng);
    let shift = CMatrix::complex_gaussian(d, 1, 1.0, &mut rng);
    checks.push(CheckResult::new(
        "layernorm_backward",
        layer_fd_error(&z, |t, v| {
            let a = t.constant(scale.clone());
            let b = t.constant(shift.clone());
            layernorm_on(t, &v, Some((&a, &b)))
        })?,
        LAYER_GRAD_TOL,
    ));

    Ok(GradcheckReport { seed, size, checks })
}
