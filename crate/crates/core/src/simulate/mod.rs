//! Seeded discrete-event simulation of collaboration models.
//!
//! Randomness comes from ChaCha8 seeded with the configured seed. Stream 0
//! drives case arrivals and stream `i + 1` drives case `i`, so a case's events
//! do not depend on how many cases are generated. This scheme is identified as
//! [`RNG_SCHEME`].

mod dsl;
mod engine;
mod model;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use dsl::{parse_delay, parse_model};
pub use model::{Branch, CollabModel, Delay, ParticipantProcess, Step};

use crate::event_model::{EventLog, Timestamp, Trace};
use crate::merge::merge_sequences;
use engine::{run_case, RandomOracle};

pub const RNG_SCHEME: &str = "chacha8-stream-v1";

pub const BUILTIN_MODELS: [&str; 2] = ["buyer_reseller", "healthcare"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("bad delay {0:?}: expected fixed(x), uniform(a, b) or exp(mean)")]
    BadDelay(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("participant {0} is declared twice")]
    DuplicateParticipant(String),
    #[error("{referenced_by} references unknown participant {name}")]
    UnknownParticipant { name: String, referenced_by: String },
    #[error("{from} sends {message:?} to {to}, which never receives it")]
    UnmatchedSend { from: String, to: String, message: String },
    #[error("{to} receives {message:?} from {from} more than once")]
    AmbiguousReceive { from: String, to: String, message: String },
    #[error("{to} receives {message:?} from {from}, which never sends it")]
    UnmatchedReceive { to: String, from: String, message: String },
    #[error("{participant}: XOR probabilities sum to {sum}")]
    ProbabilitySum { participant: String, sum: f64 },
    #[error("deadlock with choices {choices:?}: {}", blocked.join("; "))]
    ModelDeadlock { choices: Vec<usize>, blocked: Vec<String> },
    #[error("unknown model {0:?} (builtin: buyer_reseller, healthcare)")]
    UnknownModel(String),
}

impl ModelError {
    pub fn name(&self) -> &'static str {
        match self {
            ModelError::Parse { .. } => "ModelParse",
            ModelError::BadDelay(_) => "BadDelay",
            ModelError::Invalid(_) => "InvalidModel",
            ModelError::DuplicateParticipant(_) => "DuplicateParticipant",
            ModelError::UnknownParticipant { .. } => "UnknownParticipant",
            ModelError::UnmatchedSend { .. } => "UnmatchedSend",
            ModelError::AmbiguousReceive { .. } => "AmbiguousReceive",
            ModelError::UnmatchedReceive { .. } => "UnmatchedReceive",
            ModelError::ProbabilitySum { .. } => "ProbabilitySum",
            ModelError::ModelDeadlock { .. } => "ModelDeadlock",
            ModelError::UnknownModel(_) => "UnknownModel",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_cases: usize,
    pub seed: u64,
    /// Time between consecutive case starts.
    pub inter_arrival: Delay,
    pub start: Timestamp,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_cases: 100,
            seed: 0,
            inter_arrival: Delay::Exponential { mean: 3_600_000.0 },
            start: Timestamp::parse_rfc3339("2024-01-01T00:00:00Z").expect("valid literal"),
        }
    }
}

impl SimConfig {
    pub fn new(n_cases: usize, seed: u64) -> Self {
        SimConfig {
            n_cases,
            seed,
            ..SimConfig::default()
        }
    }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates `cfg.n_cases` cases named `case_1`, `case_2`, ... in start order.
pub fn simulate(model: &CollabModel, cfg: &SimConfig) -> EventLog {
    let mut arrivals = stream(cfg.seed, 0);
    let mut start = cfg.start.millis();
    let mut traces = Vec::with_capacity(cfg.n_cases);
    for i in 0..cfg.n_cases {
        if i > 0 {
            start += cfg.inter_arrival.sample(&mut arrivals);
        }
        let case_id = format!("case_{}", i + 1);
        let mut oracle = RandomOracle(stream(cfg.seed, i as u64 + 1));
        let sequences = run_case(model, &case_id, start, &mut oracle)
            .unwrap_or_else(|blocked| panic!("model passed the deadlock check but blocked: {blocked:?}"));
        traces.push(Trace::new(case_id, merge_sequences(sequences)));
    }
    EventLog::new(traces)
}

/// Source text of a builtin model.
pub fn builtin_source(name: &str) -> Result<&'static str, ModelError> {
    match name {
        "buyer_reseller" => Ok(include_str!("../../models/buyer_reseller.collab")),
        "healthcare" => Ok(include_str!("../../models/healthcare.collab")),
        _ => Err(ModelError::UnknownModel(name.to_string())),
    }
}

pub fn builtin_model(name: &str) -> Result<CollabModel, ModelError> {
    parse_model(builtin_source(name)?)
}
