use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::model::ModelParams;

/// Optimizer and stopping state.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub step: u64,
    /// First moments of the real-view gradient, `(re, im)` packed as complex.
    pub m: ModelParams,
    /// Componentwise second moments, `(re^2, im^2)` packed as complex.
    pub v: ModelParams,
    pub best_metric: Option<f64>,
    pub epochs_since_improvement: usize,
    pub rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(params: &ModelParams, seed: u64) -> Self {
        let zeros = params.map(|m| CMatrix::zeros(m.rows(), m.cols()));
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
            best_metric: None,
            epochs_since_improvement: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// `lr_init * (1 + cos(pi * step / total)) / 2`.
pub fn cosine_lr(step: u64, total_steps: u64, config: &TrainConfig) -> f64 {
    if total_steps == 0 {
        return config.lr_init;
    }
    let t = step.min(total_steps) as f64 / total_steps as f64;
    config.lr_init * 0.5 * (1.0 + (PI * t).cos())
}

/// Moment buffers and constraints for one tensor.
pub struct AdamSlot<'a> {
    pub param: &'a mut CMatrix,
    pub grad: &'a CMatrix,
    pub m: &'a mut CMatrix,
    pub v: &'a mut CMatrix,
    /// Imaginary part pinned to zero.
    pub real: bool,
}

/// AdamW on the `(re, im)` pair of one tensor given its conjugate gradient.
///
/// `step` is the 1-based count used for bias correction.
pub fn adamw_update(slot: AdamSlot<'_>, step: u64, lr: f64, config: &TrainConfig) -> Result<()> {
    let shape = slot.param.shape();
    for other in [slot.grad.shape(), slot.m.shape(), slot.v.shape()] {
        if other != shape {
            return Err(Error::shape(slot.param.shape_string(), format!("{}x{}", other.0, other.1)));
        }
    }
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    let decay = 1.0 - lr * config.weight_decay;
    let params = slot.param.as_mut_slice();
    let grads = slot.grad.as_slice();
    let ms = slot.m.as_mut_slice();
    let vs = slot.v.as_mut_slice();
    for i in 0..params.len() {
        // real-view gradient of f(x + iy) is 2 * conj-Wirtinger
        let g = grads[i] * 2.0;
        let g = if slot.real { C64::new(g.re, 0.0) } else { g };
        let m = C64::new(b1 * ms[i].re + (1.0 - b1) * g.re, b1 * ms[i].im + (1.0 - b1) * g.im);
        let v = C64::new(
            b2 * vs[i].re + (1.0 - b2) * g.re * g.re,
            b2 * vs[i].im + (1.0 - b2) * g.im * g.im,
        );
        ms[i] = m;
        vs[i] = v;
        let upd = |m: f64, v: f64| (m / c1) / ((v / c2).sqrt() + config.adam_eps);
        let p = params[i] * decay;
        params[i] = C64::new(p.re - lr * upd(m.re, v.re), p.im - lr * upd(m.im, v.im));
        if slot.real {
            params[i].im = 0.0;
        }
    }
    Ok(())
}

/// One AdamW step over every trainable tensor; advances `state.step`.
pub fn complex_adamw_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut TrainState,
    config: &TrainConfig,
    lr: f64,
    trainable: &[bool],
) -> Result<()> {
    let real = params.real_mask();
    let grads = grads.iter();
    let mut ps = params.iter_mut();
    let mut ms = state.m.iter_mut();
    let mut vs = state.v.iter_mut();
    if [grads.len(), ms.len(), vs.len(), trainable.len()].iter().any(|&n| n != ps.len()) {
        return Err(Error::shape(format!("{} tensors", ps.len()), format!("{} gradients", grads.len())));
    }
    state.step += 1;
    for i in 0..ps.len() {
        if !trainable[i] {
            continue;
        }
        let slot = AdamSlot {
            param: &mut *ps[i],
            grad: grads[i],
            m: &mut *ms[i],
            v: &mut *vs[i],
            real: real[i],
        };
        adamw_update(slot, state.step, lr, config)?;
    }
    Ok(())
}
