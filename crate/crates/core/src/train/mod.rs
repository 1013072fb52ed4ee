//! Objective, metrics, optimizer, gradient checking and the training loop.

mod adam;
mod gradcheck;
mod loss;
mod metrics;
mod trainer;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use gradcheck::{grad_check, random_params, rel_error, GradCheckReport, FD_STEP, REL_FLOOR};
pub use loss::{bce_l2_loss, binary_entropy, log_loss, logit_grads, PRED_CLAMP};
pub use metrics::{auc, MetricsReport};
pub use trainer::{evaluate, loss_and_grads, train, train_with, TrainConfig, TrainOutcome};
