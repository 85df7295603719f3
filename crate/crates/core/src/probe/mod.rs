//! Linear softmax probes over frozen features, their metrics, and a
//! finite-difference check of the training gradient.

mod adam;
mod features;
mod metrics;
mod model;

pub(crate) use adam::Adam;
pub(crate) use model::{argmax, check_labels, read_rows, softmax, write_rows, ModelHeader};

pub use features::{assemble_features, AuxSource, FeatureMatrix, FeatureSpec, Features};
pub use metrics::{compute_metrics, InstanceRecord, Metrics};
pub use model::{
    gradient_check, gradient_check_with, train, EpochRecord, GradCheckOptions, Prediction, ProbeModel,
    TrainConfig, TrainOutcome,
};

use thiserror::Error;

use crate::embedders::EmbedError;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("no embedding for tweet {0:?}")]
    MissingTweetEmbedding(String),
    #[error("training split has fewer than two distinct labels")]
    DegenerateLabels,
    #[error("loss became non-finite in epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
