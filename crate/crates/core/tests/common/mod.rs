//! Shared helpers for integration tests: fixture models and naive oracles
//! written independently of the library's labelers and predictor.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use collab_ppm::event_model::{Direction, ElemType, Event, EventLog, Trace};
use collab_ppm::simulate::{parse_model, CollabModel};
use collab_ppm::tasks::{PredictionTask, Target, TaskKind};
use collab_ppm::views::{Content, DirectionFilter, Scope, ViewSpec};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture_model(name: &str) -> CollabModel {
    let path = manifest_dir().join("tests/fixtures").join(format!("{name}.collab"));
    parse_model(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

/// Event filter of a view, written out from the definitions.
pub fn naive_in_view(view: &ViewSpec, e: &Event) -> bool {
    if let Scope::Participant(p) = &view.scope {
        if &e.participant != p {
            return false;
        }
    }
    if view.content == Content::MessagesOnly && e.elem_type != ElemType::Message {
        return false;
    }
    match view.direction {
        DirectionFilter::Any => true,
        DirectionFilter::SendOnly => e.direction == Direction::Send,
        DirectionFilter::ReceiveOnly => e.direction == Direction::Receive,
    }
}

pub fn naive_view_trace(view: &ViewSpec, trace: &Trace) -> Vec<Event> {
    let mut out = Vec::new();
    for e in &trace.events {
        if naive_in_view(view, e) {
            out.push(e.clone());
        }
    }
    out
}

fn dir_ok(d: DirectionFilter, e: &Event) -> bool {
    if e.elem_type != ElemType::Message {
        return false;
    }
    match d {
        DirectionFilter::Any => true,
        DirectionFilter::SendOnly => e.direction == Direction::Send,
        DirectionFilter::ReceiveOnly => e.direction == Direction::Receive,
    }
}

fn msg_label(e: &Event) -> String {
    match e.extra.get("msgName") {
        Some(m) if !m.is_empty() => m.clone(),
        _ => e.activity.clone(),
    }
}

fn ms(a: &Event, b: &Event) -> u64 {
    (b.timestamp.0 - a.timestamp.0).max(0) as u64
}

/// Ground truth by index scans over the viewed events; `k` is 1-based.
pub fn oracle_label(kind: &TaskKind, ev: &[Event], k: usize) -> Target {
    let n = ev.len();
    let cur = &ev[k - 1];
    let mut next_matching = None;
    let mut i = k;
    let dir = kind.message_direction().unwrap_or_default();
    while i < n {
        if dir_ok(dir, &ev[i]) {
            next_matching = Some(i);
            break;
        }
        i += 1;
    }
    match kind {
        TaskKind::ParticipantWillAppear { participant } => {
            let mut seen = false;
            for e in ev {
                seen = seen || &e.participant == participant;
            }
            Target::Boolean(seen)
        }
        TaskKind::MessageWillOccur { label, direction } => {
            let mut seen = false;
            for e in ev {
                seen = seen || (dir_ok(*direction, e) && &msg_label(e) == label);
            }
            Target::Boolean(seen)
        }
        TaskKind::RemainingMessages => {
            let mut c = 0;
            for e in &ev[k..] {
                if e.elem_type == ElemType::Message {
                    c += 1;
                }
            }
            Target::Count(c)
        }
        TaskKind::TotalMessages => Target::Count(ev.iter().filter(|e| e.elem_type == ElemType::Message).count() as u64),
        TaskKind::RemainingTime => Target::Duration(ms(cur, &ev[n - 1])),
        TaskKind::TotalDuration => Target::Duration(ms(&ev[0], &ev[n - 1])),
        TaskKind::TimeToNextMessage { .. } => match next_matching {
            Some(j) => Target::Duration(ms(cur, &ev[j])),
            None => Target::Undefined,
        },
        TaskKind::NextActivity => {
            if k < n {
                Target::Label(ev[k].activity.clone())
            } else {
                Target::Undefined
            }
        }
        TaskKind::NextParticipant => {
            if k < n {
                Target::Label(ev[k].participant.clone())
            } else {
                Target::Undefined
            }
        }
        TaskKind::NextMessageLabel { .. } => match next_matching {
            Some(j) => Target::Label(msg_label(&ev[j])),
            None => Target::Undefined,
        },
        TaskKind::NextMessageCounterpart { .. } => match next_matching.and_then(|j| ev[j].counterpart.clone()) {
            Some(c) => Target::Label(c),
            None => Target::Undefined,
        },
    }
}

/// Every prediction kind, instantiated for every participant, direction
/// and message label of `log`.
pub fn all_tasks(log: &EventLog) -> Vec<PredictionTask> {
    let participants: Vec<String> = log.participants().iter().cloned().collect();
    let labels: Vec<String> = log.message_labels().iter().cloned().collect();
    let dirs = [
        DirectionFilter::Any,
        DirectionFilter::SendOnly,
        DirectionFilter::ReceiveOnly,
    ];
    let mut views = vec![ViewSpec::process()];
    views.extend(participants.iter().map(ViewSpec::participant));
    let mut tasks = Vec::new();
    for view in &views {
        let messages = view.clone().messages_only();
        for p in &participants {
            tasks.push(PredictionTask::new(
                TaskKind::ParticipantWillAppear { participant: p.clone() },
                view.clone(),
            ));
        }
        for d in dirs {
            for l in &labels {
                tasks.push(PredictionTask::new(
                    TaskKind::MessageWillOccur {
                        label: l.clone(),
                        direction: d,
                    },
                    view.clone(),
                ));
            }
            tasks.push(PredictionTask::new(
                TaskKind::TimeToNextMessage { direction: d },
                view.clone(),
            ));
            tasks.push(PredictionTask::new(
                TaskKind::NextMessageLabel { direction: d },
                messages.clone(),
            ));
            tasks.push(PredictionTask::new(
                TaskKind::NextMessageCounterpart { direction: d },
                messages.clone(),
            ));
        }
        for kind in [
            TaskKind::RemainingMessages,
            TaskKind::TotalMessages,
            TaskKind::RemainingTime,
            TaskKind::TotalDuration,
            TaskKind::NextActivity,
            TaskKind::NextParticipant,
        ] {
            tasks.push(PredictionTask::new(kind, view.clone()));
        }
    }
    tasks
}

/// Last `order` activities, `None`-padded on the left.
pub fn naive_window(events: &[Event], order: usize) -> Vec<Option<String>> {
    let mut w = vec![None; order];
    let start = events.len().saturating_sub(order);
    let tail: Vec<Option<String>> = events[start..].iter().map(|e| Some(e.activity.clone())).collect();
    let pad = order - tail.len();
    w.truncate(pad);
    w.extend(tail);
    w
}

/// Training rows of a task by direct enumeration: (window, target).
pub fn naive_rows(log: &EventLog, task: &PredictionTask, order: usize) -> Vec<(Vec<Option<String>>, Target)> {
    let mut rows = Vec::new();
    for t in log.traces() {
        let ev = naive_view_trace(&task.view, t);
        for k in 1..=ev.len() {
            let target = oracle_label(&task.kind, &ev, k);
            if target != Target::Undefined {
                rows.push((naive_window(&ev[..k], order), target));
            }
        }
    }
    rows
}

/// Rows whose window shares the longest available suffix with `w`.
fn matching<'a>(rows: &'a [(Vec<Option<String>>, Target)], w: &[Option<String>]) -> Vec<&'a Target> {
    let order = w.len();
    for j in (1..=order).rev() {
        let hits: Vec<&Target> = rows
            .iter()
            .filter(|(rw, _)| rw[order - j..] == w[order - j..])
            .map(|(_, t)| t)
            .collect();
        if !hits.is_empty() {
            return hits;
        }
    }
    rows.iter().map(|(_, t)| t).collect()
}

/// Most frequent class among the matching rows, ties to the smallest label.
pub fn brute_mode(rows: &[(Vec<Option<String>>, Target)], w: &[Option<String>]) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in matching(rows, w) {
        let key = match t {
            Target::Boolean(b) => b.to_string(),
            Target::Label(l) => l.clone(),
            other => panic!("not categorical: {other:?}"),
        };
        *counts.entry(key).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap();
    counts.into_iter().find(|(_, c)| *c == best).unwrap().0
}

pub fn brute_mean(rows: &[(Vec<Option<String>>, Target)], w: &[Option<String>]) -> f64 {
    let hits = matching(rows, w);
    let sum: f64 = hits
        .iter()
        .map(|t| match t {
            Target::Count(n) | Target::Duration(n) => *n as f64,
            other => panic!("not numeric: {other:?}"),
        })
        .sum();
    sum / hits.len() as f64
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Truncates every trace to its first `n_events` events in total.
pub fn log_with_events(log: &EventLog, n_events: usize) -> EventLog {
    let mut left = n_events;
    let mut traces = Vec::new();
    for t in log.traces() {
        if left == 0 {
            break;
        }
        let take = t.events.len().min(left);
        left -= take;
        traces.push(Trace::new(t.case_id.clone(), t.events[..take].to_vec()));
    }
    EventLog::new(traces)
}
