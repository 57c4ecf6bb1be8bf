//! Classifiers over joined feature blocks, with splitting and evaluation.

mod features;
mod metrics;
mod network;
mod split;

pub use features::{join_features, FeatureBlock, FeatureMatrix, JoinReport};
pub use metrics::{evaluate, roc_auc, Metrics};
pub use network::{
    predict, train_logistic, train_mlp, Activation, Layer, ModelParams, OutputKind, TrainParams, Trained,
    DEFAULT_HIDDEN,
};
pub use split::{is_train, split, stable_hash, SplitSpec};
