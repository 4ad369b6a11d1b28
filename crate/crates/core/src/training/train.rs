use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Task, TrainConfig};
use super::loss::{batch_gradients, Target};
use super::metrics::{evaluate, Metrics};
use super::optim::{complex_adamw_step, cosine_lr, TrainState};
use crate::error::{read_file, write_file, Error, Result};
use crate::linalg::CMatrix;
use crate::model::Model;
use crate::synth::Dataset;

/// One history line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_metric: f64,
    /// Learning rate at the first step of the epoch.
    pub lr: f64,
    /// Mean batch regularizer value over the epoch.
    pub ssr: f64,
    pub srr_diag: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
    pub best_metric: f64,
    pub stopped_early: bool,
    pub state: TrainState,
}

/// Tensors the optimizer updates.
pub fn trainable_mask(model: &Model, config: &TrainConfig) -> Vec<bool> {
    model
        .params
        .names()
        .iter()
        .map(|n| !config.freeze_backbone || n.starts_with("head_"))
        .collect()
}

fn improves(task: Task, metric: f64, best: Option<f64>) -> bool {
    match best {
        None => metric.is_finite(),
        Some(b) => match task {
            Task::Classification => metric > b,
            Task::Regression => metric < b,
        },
    }
}

/// Minibatch AdamW with cosine decay, per-epoch validation and early stopping.
pub fn train(mut model: Model, train_set: &Dataset, val_set: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    config.check_model(&model.config)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config("train and validation sets must be nonempty".into()));
    }
    let patches: Vec<CMatrix> = train_set
        .samples
        .par_iter()
        .map(|x| model.patches(x))
        .collect::<Result<_>>()?;
    let targets: Vec<Target> = (0..train_set.len())
        .map(|i| Target::from_sample(config.task, train_set.labels[i], &train_set.targets[i]))
        .collect::<Result<_>>()?;
    let trainable = trainable_mask(&model, config);
    let batches_per_epoch = train_set.len().div_ceil(config.batch_size);
    let total_steps = (batches_per_epoch * config.max_epochs) as u64;

    let mut state = TrainState::new(&model.params, config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best_params = model.params.clone();
    let mut best_epoch = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut state.rng);
        let epoch_lr = cosine_lr(state.step, total_steps, config);
        let (mut loss_sum, mut ssr_sum) = (0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let xs: Vec<&CMatrix> = chunk.iter().map(|&i| &patches[i]).collect();
            let ts: Vec<Target> = chunk.iter().map(|&i| targets[i]).collect();
            let batch = batch_gradients(&model, &xs, &ts, config)?;
            let lr = cosine_lr(state.step, total_steps, config);
            complex_adamw_step(&mut model.params, &batch.grads, &mut state, config, lr, &trainable)?;
            loss_sum += batch.loss;
            ssr_sum += batch.ssr;
        }
        let val: Metrics = evaluate(&model, val_set, config)?;
        let metric = val.val_metric();
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches_per_epoch as f64,
            val_loss: val.loss,
            val_metric: metric,
            lr: epoch_lr,
            ssr: ssr_sum / batches_per_epoch as f64,
            srr_diag: val.srr_diag,
        });
        if improves(config.task, metric, state.best_metric) {
            state.best_metric = Some(metric);
            state.epochs_since_improvement = 0;
            best_params = model.params.clone();
            best_epoch = epoch;
        } else {
            state.epochs_since_improvement += 1;
            if state.epochs_since_improvement >= config.patience {
                stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    model.params = best_params;
    Ok(TrainOutcome {
        model,
        best_metric: state.best_metric.unwrap_or(f64::NAN),
        history,
        best_epoch,
        stopped_early,
        state,
    })
}

/// History as JSON lines.
pub fn history_to_jsonl(history: &[EpochRecord]) -> Result<String> {
    let mut out = String::new();
    for r in history {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_history(history: &[EpochRecord], path: &Path) -> Result<()> {
    write_file(path, history_to_jsonl(history)?.as_bytes())
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    String::from_utf8(read_file(path)?)
        .map_err(|e| Error::Format(e.to_string()))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Format(e.to_string())))
        .collect()
}
