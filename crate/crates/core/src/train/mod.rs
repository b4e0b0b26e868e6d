//! Training and evaluation: VDE, Adam with gradient clipping and a plateau
//! schedule, the epoch loop, pretrain-then-finetune and cross-corpus reports.

mod config;
mod data;
mod eval;
mod metrics;
mod optim;
mod trainer;

pub use config::TrainConfig;
pub use data::{load_examples, to_model_rate, Example, ExampleSet, LabelSource, MODEL_RATE};
pub use eval::{evaluate_cross_corpus, train_set_name, EvalOptions, EvalReport, EvalRow, Method, UtteranceDecision};
pub use metrics::vde;
pub use optim::{adam_step, clip_gradients, AdamParams, AdamState, ClipMode, PlateauScheduler};
pub use trainer::{
    mean_loss, pretrain_then_finetune, train, EpochRecord, FinetuneOutcome, Split, TrainData, TrainHistory, TrainOutcome,
};
