use rayon::prelude::*;

use super::config::{Task, TrainConfig};
use crate::autodiff::{Graph, Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::model::{forward_on, Model, ModelConfig, ModelParams, Params};
use crate::rate::{ssr, subspace_density_on};

/// Supervision for one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target<'a> {
    Class(usize),
    Values(&'a [f64]),
}

impl<'a> Target<'a> {
    pub fn from_sample(task: Task, label: i32, values: &'a [f64]) -> Result<Self> {
        match task {
            Task::Classification => usize::try_from(label)
                .map(Target::Class)
                .map_err(|_| Error::shape("nonnegative label", label.to_string())),
            Task::Regression => Ok(Target::Values(values)),
        }
    }
}

/// Cross-entropy or mean squared error of one head output.
pub fn task_loss_on<G: Graph>(g: &mut G, output: &G::Node, target: Target<'_>) -> Result<G::Node> {
    let out = g.value(output).len();
    match target {
        Target::Class(c) if c < out => Ok(g.cross_entropy(output, c)),
        Target::Class(c) => Err(Error::shape(format!("label < {out}"), c.to_string())),
        Target::Values(v) if v.len() == out => Ok(g.mse(output, v)),
        Target::Values(v) => Err(Error::shape(format!("{out} targets"), v.len().to_string())),
    }
}

/// Per-head densities of one sample's final-block attention outputs.
pub fn head_densities_on<G: Graph>(g: &mut G, heads: &[G::Node]) -> Vec<G::Node> {
    heads
        .iter()
        .map(|h| {
            let n = g.value(h).cols();
            subspace_density_on(g, h, n)
        })
        .collect()
}

/// Batch objective: mean task loss plus `ssr_weight * ssr` of batch-mean densities.
///
/// `heads[i]` are sample `i`'s final-block per-head outputs.
pub fn loss_on<G: Graph>(
    g: &mut G,
    outputs: &[G::Node],
    targets: &[Target<'_>],
    heads: &[Vec<G::Node>],
    ssr_weight: f64,
) -> Result<G::Node> {
    if outputs.is_empty() || outputs.len() != targets.len() || outputs.len() != heads.len() {
        return Err(Error::LengthMismatch { left: outputs.len(), right: targets.len() });
    }
    let inv = C64::new(1.0 / outputs.len() as f64, 0.0);
    let mut total: Option<G::Node> = None;
    for (o, t) in outputs.iter().zip(targets) {
        let l = task_loss_on(g, o, *t)?;
        total = Some(match total {
            Some(acc) => g.add(&acc, &l),
            None => l,
        });
    }
    let task = g.scale(&total.expect("nonempty"), inv);
    let k = heads[0].len();
    if ssr_weight == 0.0 || k == 0 {
        return Ok(task);
    }
    let per_sample: Vec<Vec<G::Node>> = heads.iter().map(|h| head_densities_on(g, h)).collect();
    let mut means = Vec::with_capacity(k);
    for j in 0..k {
        let mut acc = per_sample[0][j].clone();
        for s in &per_sample[1..] {
            acc = g.add(&acc, &s[j]);
        }
        means.push(g.scale(&acc, inv));
    }
    let reg = g.ssr(&means);
    let reg = g.scale(&reg, C64::new(ssr_weight, 0.0));
    Ok(g.add(&task, &reg))
}

/// Loss parts and conjugate gradients of one batch.
#[derive(Clone, Debug)]
pub struct BatchGradients {
    /// `task_loss + ssr_weight * ssr`.
    pub loss: f64,
    pub task_loss: f64,
    pub ssr: f64,
    /// Batch-mean density per head.
    pub densities: Vec<f64>,
    pub grads: ModelParams,
}

struct SampleTape {
    tape: Tape,
    leaves: Params<Var>,
    task: Var,
    densities: Vec<Var>,
}

fn record_sample(
    config: &ModelConfig,
    params: &ModelParams,
    patches: &CMatrix,
    target: Target<'_>,
    with_ssr: bool,
) -> Result<SampleTape> {
    let mut tape = Tape::new();
    let leaves = params.map(|m| tape.leaf(m.clone()));
    let trace = forward_on(&mut tape, config, &leaves, patches, false)?;
    let task = task_loss_on(&mut tape, &trace.head, target)?;
    let densities = if with_ssr { head_densities_on(&mut tape, &trace.last_heads) } else { Vec::new() };
    Ok(SampleTape { tape, leaves, task, densities })
}

fn leaf_gradients(params: &ModelParams, leaves: &Params<Var>, grads: &Gradients) -> ModelParams {
    let vars = leaves.iter();
    let mut i = 0;
    params.map(|m| {
        let g = grads.wrt(*vars[i], m.shape());
        i += 1;
        g
    })
}

fn add_params(acc: &mut ModelParams, other: &ModelParams) {
    for (a, b) in acc.iter_mut().into_iter().zip(other.iter()) {
        a.add_assign(b);
    }
}

/// Batch loss and gradients with one tape per sample, run in parallel and
/// reduced in sample order.
///
/// The regularizer couples samples only through the batch argmin of the
/// densities, so each tape backpropagates its own linear share of the term.
pub fn batch_gradients(
    model: &Model,
    patches: &[&CMatrix],
    targets: &[Target<'_>],
    config: &TrainConfig,
) -> Result<BatchGradients> {
    if patches.is_empty() || patches.len() != targets.len() {
        return Err(Error::LengthMismatch { left: patches.len(), right: targets.len() });
    }
    let with_ssr = config.ssr_weight > 0.0 && model.config.depth > 0;
    let b = patches.len() as f64;
    let tapes: Vec<SampleTape> = patches
        .par_iter()
        .zip(targets.par_iter())
        .map(|(p, t)| record_sample(&model.config, &model.params, p, *t, with_ssr))
        .collect::<Result<_>>()?;

    let task_loss = tapes.iter().map(|s| s.tape.scalar(&s.task)).sum::<f64>() / b;
    let k = tapes[0].densities.len();
    let densities: Vec<f64> = (0..k)
        .map(|j| tapes.iter().map(|s| s.tape.scalar(&s.densities[j])).sum::<f64>() / b)
        .collect();
    let reg = ssr(&densities);
    let coefs: Vec<f64> = if k > 0 {
        let argmin = (0..k).fold(0, |m, j| if densities[j] < densities[m] { j } else { m });
        (0..k)
            .map(|j| config.ssr_weight / b * if j == argmin { 1.0 - k as f64 } else { 1.0 })
            .collect()
    } else {
        Vec::new()
    };

    let per_sample: Vec<ModelParams> = tapes
        .into_par_iter()
        .map(|mut s| {
            let mut obj = s.tape.scale(&s.task, C64::new(1.0 / b, 0.0));
            for (d, &c) in s.densities.iter().zip(&coefs) {
                let term = s.tape.scale(d, C64::new(c, 0.0));
                obj = s.tape.add(&obj, &term);
            }
            let grads = s.tape.backward(obj)?;
            Ok(leaf_gradients(&model.params, &s.leaves, &grads))
        })
        .collect::<Result<_>>()?;
    let mut grads = per_sample[0].clone();
    for g in &per_sample[1..] {
        add_params(&mut grads, g);
    }
    let loss = task_loss + config.ssr_weight * reg;
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite(format!("batch loss {loss}")));
    }
    Ok(BatchGradients { loss, task_loss, ssr: reg, densities, grads })
}
