//! Reading and writing collaboration logs.
//!
//! Two formats are supported: an XES subset carrying the collaboration
//! attributes (`participant`, `elemType`, `fromParticipant`, `toParticipant`,
//! optional `msgName`) and a flat CSV form described by a [`ColumnMapping`].
//! Writers are byte-deterministic and both formats round-trip every valid log.

mod csv;
mod xes;

use std::fmt;

use thiserror::Error;

use crate::event_model::{Direction, ElemType, ValidationError};

pub use self::csv::{parse_csv, write_csv, ColumnMapping};
pub use self::xes::{parse_xes, write_xes};

/// Where in the input a parse failure happened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Trace { trace: usize },
    Event { trace: usize, event: usize },
    Row { row: u64 },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Trace { trace } => write!(f, "trace #{trace}"),
            Location::Event { trace, event } => write!(f, "trace #{trace}, event #{event}"),
            Location::Row { row } => write!(f, "row {row}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed XML at byte {position}: {message}")]
    MalformedXml { position: u64, message: String },
    #[error("{at}: missing concept:name")]
    MissingConceptName { at: Location },
    #[error("{at}: missing time:timestamp")]
    MissingTimestamp { at: Location },
    #[error("{at}: cannot parse timestamp {value:?}")]
    UnparseableTimestamp { at: Location, value: String },
    #[error("{at}: event carries both fromParticipant and toParticipant")]
    BothFromAndTo { at: Location },
    #[error("missing column {name:?}")]
    MissingColumn { name: String },
    #[error("CSV error: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid log: {0}")]
    Validation(#[from] ValidationError),
}

impl IngestError {
    pub fn name(&self) -> &'static str {
        match self {
            IngestError::MalformedXml { .. } => "MalformedXml",
            IngestError::MissingConceptName { .. } => "MissingConceptName",
            IngestError::MissingTimestamp { .. } => "MissingTimestamp",
            IngestError::UnparseableTimestamp { .. } => "UnparseableTimestamp",
            IngestError::BothFromAndTo { .. } => "BothFromAndTo",
            IngestError::MissingColumn { .. } => "MissingColumn",
            IngestError::Csv(_) => "CsvError",
            IngestError::Io(_) => "IoError",
            IngestError::Validation(e) => e.name(),
        }
    }
}

/// `elemType` value "message" (any case) is a message; anything else is a user task.
pub(crate) fn elem_type_from_str(s: Option<&str>) -> ElemType {
    match s {
        Some(v) if v.trim().eq_ignore_ascii_case("message") => ElemType::Message,
        _ => ElemType::User,
    }
}

pub(crate) fn elem_type_str(t: ElemType) -> &'static str {
    match t {
        ElemType::User => "user",
        ElemType::Message => "message",
    }
}

/// Direction and counterpart from the `fromParticipant`/`toParticipant` pair.
pub(crate) fn direction_from(
    from: Option<String>,
    to: Option<String>,
    at: impl FnOnce() -> Location,
) -> Result<(Direction, Option<String>), IngestError> {
    match (from, to) {
        (Some(_), Some(_)) => Err(IngestError::BothFromAndTo { at: at() }),
        (Some(f), None) => Ok((Direction::Receive, Some(f))),
        (None, Some(t)) => Ok((Direction::Send, Some(t))),
        (None, None) => Ok((Direction::None, None)),
    }
}
