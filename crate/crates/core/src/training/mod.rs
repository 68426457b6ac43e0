//! Optimization, cross-validation and scoring.

mod loss;
mod metrics;
mod optim;
mod pipeline;
mod split;
mod trainer;

pub use loss::{cross_entropy, cross_entropy_grad, flood_sign, flooded_loss, softmax};
pub use metrics::{argmax, Metrics};
pub use optim::{adam_step, AdamState, ADAM_EPS, BETA1, BETA2};
pub use pipeline::{
    build_adjacency, check_model_fit, fit_split, prepare, run_cv, CvReport, FittedGraph,
    FoldResult, MeanMetrics, MiSource, PipelineConfig, Prepared,
};
pub use split::{kfold_split, Fold};
pub use trainer::{
    evaluate, param_digest, predict, train_fold, train_fold_with, EpochRecord, History, Labeled,
    TrainConfig, TrainOutcome, DIGEST_EVERY,
};
