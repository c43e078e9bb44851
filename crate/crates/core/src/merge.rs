//! Building a collaboration log from participant logs, and splitting it back.
//!
//! Events of one case are merged by timestamp. Events from the same
//! participant in the same input keep their relative order; among the heads
//! of the per-participant sequences, equal timestamps are broken by
//! message sends before receives before user tasks, then by participant
//! name, then by input order. Traces are ordered by case id using natural
//! ordering, so `case_2` sorts before `case_10`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use thiserror::Error;

use crate::event_model::{validate_log, Direction, ElemType, Event, EventLog, Trace, ValidationError};

#[derive(Debug, Error)]
pub enum MergeError {
    #[error(
        "case {case_id}: participant {participant} has an identical event ({activity}) in inputs {first} and {second}"
    )]
    ConflictingEvent {
        case_id: String,
        participant: String,
        activity: String,
        first: usize,
        second: usize,
    },
    #[error("input log {index} is invalid: {source}")]
    InvalidInput {
        index: usize,
        #[source]
        source: ValidationError,
    },
    #[error("merged log is invalid: {0}")]
    Validation(#[from] ValidationError),
}

impl MergeError {
    pub fn name(&self) -> &'static str {
        match self {
            MergeError::ConflictingEvent { .. } => "ConflictingEvent",
            MergeError::InvalidInput { source, .. } => source.name(),
            MergeError::Validation(e) => e.name(),
        }
    }
}

/// Tie rank for equal timestamps: sends, then receives, then user tasks.
fn kind_rank(e: &Event) -> u8 {
    match (e.elem_type, e.direction) {
        (ElemType::Message, Direction::Send) => 0,
        (ElemType::Message, Direction::Receive) => 1,
        _ => 2,
    }
}

/// Natural ordering of identifiers: digit runs compare numerically.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for ((da, xa), (db, xb)) in ca.iter().zip(&cb) {
        let ord = if *da && *db {
            let (ta, tb) = (xa.trim_start_matches('0'), xb.trim_start_matches('0'));
            ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb))
        } else {
            xa.cmp(xb)
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

/// Merges ordered event sequences of one case. Each sequence must be
/// timestamp-ordered; its internal order is preserved.
pub(crate) fn merge_sequences(sequences: Vec<Vec<Event>>) -> Vec<Event> {
    let total = sequences.iter().map(Vec::len).sum();
    let mut iters: Vec<std::vec::IntoIter<Event>> = Vec::with_capacity(sequences.len());
    let mut heap = BinaryHeap::new();
    let mut heads: Vec<Option<Event>> = Vec::with_capacity(sequences.len());
    for (i, seq) in sequences.into_iter().enumerate() {
        let mut it = seq.into_iter();
        let head = it.next();
        if let Some(e) = &head {
            heap.push(Reverse((e.timestamp, kind_rank(e), e.participant.clone(), i)));
        }
        heads.push(head);
        iters.push(it);
    }
    let mut out = Vec::with_capacity(total);
    while let Some(Reverse((_, _, _, i))) = heap.pop() {
        let e = heads[i].take().expect("heap entry has a head");
        let next = iters[i].next();
        if let Some(n) = &next {
            heap.push(Reverse((n.timestamp, kind_rank(n), n.participant.clone(), i)));
        }
        heads[i] = next;
        out.push(e);
    }
    out
}

/// Events of one participant in one input: (input index, participant, events).
type Sequence<'a> = (usize, &'a str, Vec<Event>);

/// Merges participant logs into one collaboration log, correlating traces by
/// equal case id.
pub fn merge_logs(parts: &[EventLog]) -> Result<EventLog, MergeError> {
    for (index, part) in parts.iter().enumerate() {
        validate_log(part).map_err(|source| MergeError::InvalidInput { index, source })?;
    }
    let mut cases: HashMap<&str, Vec<Sequence<'_>>> = HashMap::new();
    for (input, part) in parts.iter().enumerate() {
        for trace in part.traces() {
            let seqs = cases.entry(trace.case_id.as_str()).or_default();
            let mut by_participant: BTreeMap<&str, Vec<Event>> = BTreeMap::new();
            for e in &trace.events {
                by_participant
                    .entry(e.participant.as_str())
                    .or_default()
                    .push(e.clone());
            }
            for (participant, events) in by_participant {
                if let Some((first, _, other)) = seqs.iter().find(|(i, p, _)| *i != input && *p == participant) {
                    if let Some(dup) = events.iter().find(|e| other.contains(e)) {
                        return Err(MergeError::ConflictingEvent {
                            case_id: trace.case_id.clone(),
                            participant: participant.to_string(),
                            activity: dup.activity.clone(),
                            first: *first,
                            second: input,
                        });
                    }
                }
                seqs.push((input, participant, events));
            }
        }
    }
    let mut case_ids: Vec<&str> = cases.keys().copied().collect();
    case_ids.sort_by(|a, b| natural_cmp(a, b));
    let traces = case_ids
        .into_iter()
        .map(|case_id| {
            let seqs = cases.remove(case_id).unwrap_or_default();
            let events = merge_sequences(seqs.into_iter().map(|(_, _, ev)| ev).collect());
            Trace::new(case_id, events)
        })
        .collect();
    let merged = EventLog::new(traces);
    validate_log(&merged)?;
    Ok(merged)
}

/// One log per participant, holding exactly that participant's events in
/// their original order. Cases without events of a participant are omitted
/// from its log.
pub fn split_log(collab: &EventLog) -> BTreeMap<String, EventLog> {
    let mut split: BTreeMap<String, Vec<Trace>> = BTreeMap::new();
    for trace in collab.traces() {
        let mut per: BTreeMap<&str, Vec<Event>> = BTreeMap::new();
        for e in &trace.events {
            per.entry(e.participant.as_str()).or_default().push(e.clone());
        }
        for (p, events) in per {
            split
                .entry(p.to_string())
                .or_default()
                .push(Trace::new(trace.case_id.clone(), events));
        }
    }
    split
        .into_iter()
        .map(|(p, traces)| (p, EventLog::new(traces)))
        .collect()
}

/// Puts a log into merge order (one merge pass over itself).
pub fn normalize(log: &EventLog) -> Result<EventLog, MergeError> {
    merge_logs(std::slice::from_ref(log))
}
