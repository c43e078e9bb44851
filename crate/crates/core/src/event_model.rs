//! Collaborative events, traces, logs and prefixes.
//!
//! An [`Event`] carries the collaboration attributes that distinguish a
//! collaboration log from an orchestration log: the enacting `participant`,
//! the element type (user task or message) and, for messages, the direction
//! and the counterpart participant (`fromParticipant` for receptions,
//! `toParticipant` for sends).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Key under which a distinct message name is kept in [`Event::extra`].
pub const MSG_NAME_KEY: &str = "msgName";

/// Attribute keys with a dedicated [`Event`] field; they may not appear in `extra`.
pub const RESERVED_KEYS: [&str; 6] = [
    "concept:name",
    "time:timestamp",
    "participant",
    "elemType",
    "fromParticipant",
    "toParticipant",
];

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    /// Truncates sub-millisecond precision.
    pub fn from_datetime<Tz: TimeZone>(dt: &DateTime<Tz>) -> Self {
        Timestamp(dt.timestamp_millis())
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp_millis(self.0).unwrap_or(DateTime::<Utc>::MIN_UTC)
    }

    /// Parses any RFC 3339 / ISO-8601 timestamp with offset.
    pub fn parse_rfc3339(s: &str) -> Option<Self> {
        DateTime::parse_from_rfc3339(s.trim())
            .ok()
            .map(|dt| Timestamp::from_datetime(&dt))
    }

    /// ISO-8601 with milliseconds and an explicit `+00:00` offset.
    pub fn to_rfc3339(self) -> String {
        self.to_datetime().to_rfc3339_opts(SecondsFormat::Millis, false)
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Timestamp(self.0 + ms)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElemType {
    User,
    Message,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Send,
    Receive,
    None,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Send => "send",
            Direction::Receive => "receive",
            Direction::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub case_id: String,
    pub activity: String,
    pub timestamp: Timestamp,
    pub participant: String,
    pub elem_type: ElemType,
    pub direction: Direction,
    pub counterpart: Option<String>,
    pub extra: BTreeMap<String, String>,
}

impl Event {
    pub fn user(
        case_id: impl Into<String>,
        activity: impl Into<String>,
        timestamp: Timestamp,
        participant: impl Into<String>,
    ) -> Self {
        Event {
            case_id: case_id.into(),
            activity: activity.into(),
            timestamp,
            participant: participant.into(),
            elem_type: ElemType::User,
            direction: Direction::None,
            counterpart: None,
            extra: BTreeMap::new(),
        }
    }

    /// A message sent by `participant` to `to`.
    pub fn send(
        case_id: impl Into<String>,
        label: impl Into<String>,
        timestamp: Timestamp,
        participant: impl Into<String>,
        to: impl Into<String>,
    ) -> Self {
        Event {
            elem_type: ElemType::Message,
            direction: Direction::Send,
            counterpart: Some(to.into()),
            ..Event::user(case_id, label, timestamp, participant)
        }
    }

    /// A message received by `participant` from `from`.
    pub fn receive(
        case_id: impl Into<String>,
        label: impl Into<String>,
        timestamp: Timestamp,
        participant: impl Into<String>,
        from: impl Into<String>,
    ) -> Self {
        Event {
            elem_type: ElemType::Message,
            direction: Direction::Receive,
            counterpart: Some(from.into()),
            ..Event::user(case_id, label, timestamp, participant)
        }
    }

    pub fn with_extra(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.extra.insert(key.into(), value.into());
        self
    }

    pub fn is_message(&self) -> bool {
        self.elem_type == ElemType::Message
    }

    /// The message label: a non-empty `msgName` attribute if present, the activity otherwise.
    pub fn message_label(&self) -> &str {
        match self.extra.get(MSG_NAME_KEY) {
            Some(name) if !name.is_empty() => name,
            _ => &self.activity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("user event carries a counterpart ({counterpart})")]
    UserEventWithCounterpart { counterpart: String },
    #[error("user event has message direction {direction:?}")]
    UserEventWithDirection { direction: Direction },
    #[error("message event has no counterpart")]
    MessageEventMissingCounterpart,
    #[error("message event has no send/receive direction")]
    MessageEventMissingDirection,
    #[error("participant {participant} sends a message to itself")]
    SelfMessage { participant: String },
    #[error("field `{field}` is empty")]
    EmptyField { field: &'static str },
    #[error("extra attribute `{key}` shadows a reserved attribute")]
    ReservedExtraKey { key: String },
    #[error("trace {case_id} has no events")]
    EmptyTrace { case_id: String },
    #[error("event {position} of trace {trace_case_id} belongs to case {event_case_id}")]
    ForeignEvent {
        trace_case_id: String,
        event_case_id: String,
        position: usize,
    },
    #[error("timestamps of trace {case_id} decrease at position {position}")]
    NonMonotoneTimestamps { case_id: String, position: usize },
    #[error("case id {case_id} appears in more than one trace")]
    DuplicateCaseId { case_id: String },
    #[error("log alphabets do not match the events")]
    InconsistentAlphabets,
    #[error("trace {case_id}, event {position}: {source}")]
    InEvent {
        case_id: String,
        position: usize,
        #[source]
        source: Box<ValidationError>,
    },
}

impl ValidationError {
    pub fn name(&self) -> &'static str {
        match self {
            ValidationError::UserEventWithCounterpart { .. } => "UserEventWithCounterpart",
            ValidationError::UserEventWithDirection { .. } => "UserEventWithDirection",
            ValidationError::MessageEventMissingCounterpart => "MessageEventMissingCounterpart",
            ValidationError::MessageEventMissingDirection => "MessageEventMissingDirection",
            ValidationError::SelfMessage { .. } => "SelfMessage",
            ValidationError::EmptyField { .. } => "EmptyField",
            ValidationError::ReservedExtraKey { .. } => "ReservedExtraKey",
            ValidationError::EmptyTrace { .. } => "EmptyTrace",
            ValidationError::ForeignEvent { .. } => "ForeignEvent",
            ValidationError::NonMonotoneTimestamps { .. } => "NonMonotoneTimestamps",
            ValidationError::DuplicateCaseId { .. } => "DuplicateCaseId",
            ValidationError::InconsistentAlphabets => "InconsistentAlphabets",
            ValidationError::InEvent { source, .. } => source.name(),
        }
    }

    /// The underlying error with trace/event location stripped.
    pub fn root(&self) -> &ValidationError {
        match self {
            ValidationError::InEvent { source, .. } => source.root(),
            other => other,
        }
    }
}

pub fn validate_event(e: &Event) -> Result<(), ValidationError> {
    for (field, value) in [
        ("case_id", &e.case_id),
        ("activity", &e.activity),
        ("participant", &e.participant),
    ] {
        if value.is_empty() {
            return Err(ValidationError::EmptyField { field });
        }
    }
    match e.elem_type {
        ElemType::User => {
            if let Some(c) = &e.counterpart {
                return Err(ValidationError::UserEventWithCounterpart { counterpart: c.clone() });
            }
            if e.direction != Direction::None {
                return Err(ValidationError::UserEventWithDirection { direction: e.direction });
            }
        }
        ElemType::Message => {
            match &e.counterpart {
                None => return Err(ValidationError::MessageEventMissingCounterpart),
                Some(c) if c.is_empty() => return Err(ValidationError::EmptyField { field: "counterpart" }),
                Some(c) if *c == e.participant => return Err(ValidationError::SelfMessage { participant: c.clone() }),
                Some(_) => {}
            }
            if e.direction == Direction::None {
                return Err(ValidationError::MessageEventMissingDirection);
            }
        }
    }
    if let Some(key) = e.extra.keys().find(|k| RESERVED_KEYS.contains(&k.as_str())) {
        return Err(ValidationError::ReservedExtraKey { key: key.clone() });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(case_id: impl Into<String>, events: Vec<Event>) -> Self {
        Trace {
            case_id: case_id.into(),
            events,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// The first `k` events; `None` unless `1 <= k <= len`.
    pub fn prefix(&self, k: usize) -> Option<Prefix<'_>> {
        Prefix::new(self, k)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.events.is_empty() {
            return Err(ValidationError::EmptyTrace {
                case_id: self.case_id.clone(),
            });
        }
        let mut prev: Option<Timestamp> = None;
        for (position, e) in self.events.iter().enumerate() {
            validate_event(e).map_err(|source| ValidationError::InEvent {
                case_id: self.case_id.clone(),
                position,
                source: Box::new(source),
            })?;
            if e.case_id != self.case_id {
                return Err(ValidationError::ForeignEvent {
                    trace_case_id: self.case_id.clone(),
                    event_case_id: e.case_id.clone(),
                    position,
                });
            }
            if prev.is_some_and(|p| e.timestamp < p) {
                return Err(ValidationError::NonMonotoneTimestamps {
                    case_id: self.case_id.clone(),
                    position,
                });
            }
            prev = Some(e.timestamp);
        }
        Ok(())
    }
}

/// The first `k` events of a trace.
#[derive(Debug, Clone, Copy)]
pub struct Prefix<'a> {
    trace: &'a Trace,
    k: usize,
}

impl<'a> Prefix<'a> {
    pub fn new(trace: &'a Trace, k: usize) -> Option<Self> {
        (1..=trace.len()).contains(&k).then_some(Prefix { trace, k })
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn case_id(&self) -> &'a str {
        &self.trace.case_id
    }

    pub fn trace(&self) -> &'a Trace {
        self.trace
    }

    pub fn events(&self) -> &'a [Event] {
        &self.trace.events[..self.k]
    }

    pub fn last(&self) -> &'a Event {
        &self.trace.events[self.k - 1]
    }

    /// Prefix of a prefix; `None` unless `1 <= j <= k`.
    pub fn prefix(&self, j: usize) -> Option<Prefix<'a>> {
        (1..=self.k).contains(&j).then_some(Prefix {
            trace: self.trace,
            k: j,
        })
    }

    pub fn to_trace(&self) -> Trace {
        Trace::new(self.trace.case_id.clone(), self.events().to_vec())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alphabets {
    pub participants: BTreeSet<String>,
    pub activities: BTreeSet<String>,
    pub message_labels: BTreeSet<String>,
}

impl Alphabets {
    fn of(traces: &[Trace]) -> Self {
        let mut a = Alphabets::default();
        for e in traces.iter().flat_map(|t| &t.events) {
            if !a.participants.contains(&e.participant) {
                a.participants.insert(e.participant.clone());
            }
            if !a.activities.contains(&e.activity) {
                a.activities.insert(e.activity.clone());
            }
            if e.is_message() && !a.message_labels.contains(e.message_label()) {
                a.message_labels.insert(e.message_label().to_string());
            }
        }
        a
    }
}

/// A set of collaborative cases. Alphabets are derived from the traces on construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    traces: Vec<Trace>,
    alphabets: Alphabets,
}

impl EventLog {
    pub fn new(traces: Vec<Trace>) -> Self {
        let alphabets = Alphabets::of(&traces);
        EventLog { traces, alphabets }
    }

    pub fn empty() -> Self {
        EventLog::default()
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn into_traces(self) -> Vec<Trace> {
        self.traces
    }

    pub fn participants(&self) -> &BTreeSet<String> {
        &self.alphabets.participants
    }

    pub fn activities(&self) -> &BTreeSet<String> {
        &self.alphabets.activities
    }

    pub fn message_labels(&self) -> &BTreeSet<String> {
        &self.alphabets.message_labels
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.traces.iter().flat_map(|t| &t.events)
    }

    pub fn trace(&self, case_id: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.case_id == case_id)
    }
}

pub fn validate_log(log: &EventLog) -> Result<(), ValidationError> {
    let mut seen = HashSet::new();
    for t in log.traces() {
        if !seen.insert(t.case_id.as_str()) {
            return Err(ValidationError::DuplicateCaseId {
                case_id: t.case_id.clone(),
            });
        }
        t.validate()?;
    }
    if Alphabets::of(log.traces()) != log.alphabets {
        return Err(ValidationError::InconsistentAlphabets);
    }
    Ok(())
}
