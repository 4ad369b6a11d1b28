use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Task, TrainConfig};
use super::loss::{task_loss_on, Target};
use crate::autodiff::Eager;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rate::{sparse_rate_reduction, SubspaceBank, DEFAULT_ZERO_TOL};
use crate::synth::Dataset;

/// Evaluation summary; fields not meaningful for the task are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    /// Mean task loss.
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub mse: Option<f64>,
    /// Mean Euclidean error over coordinate groups.
    pub mpjpe: Option<f64>,
    pub mae: Option<f64>,
    /// Mean sparse rate reduction of the final features.
    pub srr_diag: Option<f64>,
}

impl Metrics {
    /// The early-stopping quantity: accuracy or MSE.
    pub fn val_metric(&self) -> f64 {
        self.accuracy.or(self.mse).unwrap_or(f64::NAN)
    }
}

/// Index of the largest value; first on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(logits: &[Vec<f64>], labels: &[i32]) -> f64 {
    if logits.is_empty() {
        return 0.0;
    }
    let hits = logits
        .iter()
        .zip(labels)
        .filter(|(l, &y)| argmax(l) as i64 == y as i64)
        .count();
    hits as f64 / logits.len() as f64
}

/// Mean over samples and groups of the Euclidean distance between `group`-sized chunks.
pub fn mpjpe(preds: &[Vec<f64>], targets: &[Vec<f64>], group: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, t) in preds.iter().zip(targets) {
        for (a, b) in p.chunks(group).zip(t.chunks(group)) {
            total += a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

pub fn mae(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let (sum, n) = preds
        .iter()
        .zip(targets)
        .flat_map(|(p, t)| p.iter().zip(t))
        .fold((0.0, 0usize), |(s, n), (a, b)| (s + (a - b).abs(), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn mse(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let (sum, n) = preds
        .iter()
        .zip(targets)
        .flat_map(|(p, t)| p.iter().zip(t))
        .fold((0.0, 0usize), |(s, n), (a, b)| (s + (a - b).powi(2), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

struct SampleEval {
    output: Vec<f64>,
    loss: f64,
    srr: Option<f64>,
}

fn eval_sample(model: &Model, bank: Option<&SubspaceBank>, x: &crate::model::ComplexArray, target: Target<'_>) -> Result<SampleEval> {
    let trace = model.forward(x, false)?;
    let loss = task_loss_on(&mut Eager, &trace.head, target)?[(0, 0)].re;
    let srr = match bank {
        Some(bank) => {
            let rate = model.config.rate()?.with_tokens(trace.features.cols())?;
            Some(sparse_rate_reduction(&trace.features, bank, &rate, DEFAULT_ZERO_TOL)?)
        }
        None => None,
    };
    let output = trace.head.as_slice().iter().map(|z| z.re).collect();
    Ok(SampleEval { output, loss, srr })
}

/// Task metrics of `model` on `data`, computed in parallel and reduced in order.
pub fn evaluate(model: &Model, data: &Dataset, config: &TrainConfig) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    let bank = match model.params.blocks.last() {
        Some(b) => Some(SubspaceBank::new(b.bases.clone())?),
        None => None,
    };
    let evals: Vec<SampleEval> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let target = Target::from_sample(config.task, data.labels[i], &data.targets[i])?;
            eval_sample(model, bank.as_ref(), &data.samples[i], target)
        })
        .collect::<Result<_>>()?;
    let n = evals.len() as f64;
    let outputs: Vec<Vec<f64>> = evals.iter().map(|e| e.output.clone()).collect();
    let mut m = Metrics {
        samples: evals.len(),
        loss: evals.iter().map(|e| e.loss).sum::<f64>() / n,
        srr_diag: bank.as_ref().map(|_| evals.iter().map(|e| e.srr.unwrap_or(0.0)).sum::<f64>() / n),
        ..Metrics::default()
    };
    match config.task {
        Task::Classification => m.accuracy = Some(accuracy(&outputs, &data.labels)),
        Task::Regression => {
            m.mse = Some(mse(&outputs, &data.targets));
            m.mpjpe = Some(mpjpe(&outputs, &data.targets, config.coord_group));
            m.mae = Some(mae(&outputs, &data.targets));
        }
    }
    Ok(m)
}
