//! Optimizers, training steps, the staged schedule, checkpoints and evaluation.

pub mod checkpoint;
pub mod config;
pub mod early_stop;
pub mod eval;
pub mod optim;
pub mod steps;
pub mod trainer;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{OptimizerSpec, Stage, TrainConfig};
pub use early_stop::EarlyStopping;
pub use eval::{
    evaluate, evaluate_entries, hidden_diagnostic, lambda_sweep, teacher_forced_accuracy, DiagMode, Evaluation,
    HiddenDiagnostic, SweepRow, SWEEP_HEADER,
};
pub use optim::Optimizer;
pub use steps::{
    joint_grads, joint_step, scst_grads, scst_step, sequence_log_prob, xe_grads, xe_step, RewardStats, ScstContext,
    ScstOutcome, StepStats, XeItem,
};
pub use trainer::{train, write_epoch_csv, EpochLog, Phase, PhaseSummary, TrainOutcome, Trainer, EPOCH_LOG_HEADER};
