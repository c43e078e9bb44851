//! Predictive monitoring for collaborative processes: collaboration event
//! logs, participant views, prefix prediction tasks, frequency predictors and
//! a seeded collaboration simulator.

pub mod cli;
pub mod event_model;
pub mod ingest;
pub mod merge;
pub mod predict;
pub mod scalar;
pub mod simulate;
pub mod tasks;
pub mod views;

use thiserror::Error;

pub use scalar::Scalar;

pub type Prediction64 = predict::Prediction<f64>;
pub type Prediction32 = predict::Prediction<f32>;
pub type Metrics64 = predict::Metrics<f64>;
pub type Metrics32 = predict::Metrics<f32>;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] event_model::ValidationError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Merge(#[from] merge::MergeError),
    #[error(transparent)]
    View(#[from] views::ViewError),
    #[error(transparent)]
    Task(#[from] tasks::TaskError),
    #[error(transparent)]
    Predict(#[from] predict::PredictError),
    #[error(transparent)]
    Model(#[from] simulate::ModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable error name, e.g. `UnknownParticipant`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Validation(e) => e.root().name(),
            Error::Ingest(e) => e.name(),
            Error::Merge(e) => e.name(),
            Error::View(e) => e.name(),
            Error::Task(e) => e.name(),
            Error::Predict(e) => e.name(),
            Error::Model(e) => e.name(),
            Error::Io(_) => "Io",
        }
    }
}
