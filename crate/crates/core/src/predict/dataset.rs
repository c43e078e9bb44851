use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::encoding::{encode, EncodedState, EncoderConfig};
use super::PredictError;
use crate::event_model::EventLog;
use crate::ingest::write_xes;
use crate::tasks::{label, outcome_witnessed, PredictionTask, Target};
use crate::views::apply_view_counted;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetOptions {
    /// Drop outcome rows whose outcome is already visible in the prefix.
    pub drop_witnessed_outcomes: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub task: PredictionTask,
    pub encoder: EncoderConfig,
    pub options: DatasetOptions,
    /// SHA-256 of the XES serialization of the log after the task view.
    pub source_hash: String,
    pub dropped_traces: usize,
    pub undefined_excluded: usize,
    pub witnessed_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub case_id: String,
    /// Prefix length in the task view.
    pub k: usize,
    pub state: EncodedState,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub provenance: Provenance,
    pub rows: Vec<Row>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub(crate) fn log_hash(log: &EventLog) -> String {
    hex::encode(Sha256::digest(write_xes(log)))
}

/// One row per (trace, k) of the log in the task view, in trace order then
/// by `k`. Rows with an undefined target are skipped and counted.
pub fn generate_dataset(
    log: &EventLog,
    task: &PredictionTask,
    encoder: &EncoderConfig,
    options: &DatasetOptions,
) -> Result<Dataset, PredictError> {
    let viewed = apply_view_counted(log, &task.view)?;
    if viewed.log.is_empty() {
        return Err(PredictError::EmptyAfterView);
    }
    let mut rows = Vec::new();
    let mut undefined_excluded = 0;
    let mut witnessed_excluded = 0;
    for trace in viewed.log.traces() {
        for k in 1..=trace.len() {
            let target = label(task, trace, k);
            if target.is_undefined() {
                undefined_excluded += 1;
                continue;
            }
            if options.drop_witnessed_outcomes && outcome_witnessed(task, trace, k) {
                witnessed_excluded += 1;
                continue;
            }
            rows.push(Row {
                case_id: trace.case_id.clone(),
                k,
                state: encode(&trace.events[..k], encoder),
                target,
            });
        }
    }
    Ok(Dataset {
        provenance: Provenance {
            task: task.clone(),
            encoder: *encoder,
            options: *options,
            source_hash: log_hash(&viewed.log),
            dropped_traces: viewed.dropped_traces,
            undefined_excluded,
            witnessed_excluded,
        },
        rows,
    })
}
