//! Optimization of model parameters from conjugate gradients, with validation
//! driven stopping and evaluation metrics.

mod config;
mod loss;
mod metrics;
mod optim;
mod train;

pub use config::{RunConfig, Task, TrainConfig};
pub use loss::{batch_gradients, head_densities_on, loss_on, task_loss_on, BatchGradients, Target};
pub use metrics::{accuracy, argmax, evaluate, mae, mpjpe, mse, Metrics};
pub use optim::{adamw_update, complex_adamw_step, cosine_lr, AdamSlot, TrainState};
pub use train::{history_to_jsonl, read_history, train, trainable_mask, write_history, EpochRecord, TrainOutcome};
