//! Prefix datasets, the frequency predictor and its evaluation.
//!
//! The predictor is an n-gram table over encoded prefix states with backoff
//! to shorter contexts: categorical targets keep label counts per context,
//! numeric targets keep exact count/sum/sum-of-squares. Any backend that can
//! train on a [`Dataset`] and answer [`Prediction`]s fits the same pipeline.

mod dataset;
mod encoding;
mod evaluate;
mod model;

use thiserror::Error;

use crate::views::ViewError;

pub use dataset::{generate_dataset, Dataset, DatasetOptions, Provenance, Row};
pub use encoding::{encode, EncodedState, EncoderConfig, Token};
pub use evaluate::{categorical_scores, evaluate, numeric_scores, LabelMetrics, Metrics, Scores};
pub use model::{
    predict, train, FrequencyModel, NumericStats, Prediction, Tables, TrainConfig, TrainedModel, MODEL_FORMAT,
    MODEL_VERSION,
};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("no trace is left after applying the view")]
    EmptyAfterView,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("prefix has no event in the model view")]
    PrefixEmptyInView,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("target {0:?} does not fit the task's target type")]
    TargetMismatch(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("model schema version {found} is not supported (expected {expected})")]
    ModelVersionMismatch { expected: u32, found: String },
    #[error("model was trained for {model}, not {requested}")]
    ModelTaskMismatch { model: String, requested: String },
    #[error(transparent)]
    View(#[from] ViewError),
}

impl PredictError {
    pub fn name(&self) -> &'static str {
        match self {
            PredictError::EmptyAfterView => "EmptyAfterView",
            PredictError::EmptyDataset => "EmptyDataset",
            PredictError::PrefixEmptyInView => "PrefixEmptyInView",
            PredictError::InvalidConfig(_) => "InvalidConfig",
            PredictError::TargetMismatch(_) => "TargetMismatch",
            PredictError::ModelFormat(_) => "ModelFormat",
            PredictError::ModelVersionMismatch { .. } => "ModelVersionMismatch",
            PredictError::ModelTaskMismatch { .. } => "ModelTaskMismatch",
            PredictError::View(e) => e.name(),
        }
    }
}
