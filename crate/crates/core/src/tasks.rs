//! Prediction tasks for collaborative processes and their labeling functions.
//!
//! Every task pairs a target ([`TaskKind`]) with the [`ViewSpec`] its traces
//! are read through. A labeler takes a complete trace already in the task
//! view and a prefix length `k` and returns the ground-truth [`Target`].
//!
//! | Category  | Prediction                                          | CLI task id                      |
//! |-----------|-----------------------------------------------------|----------------------------------|
//! | outcome   | participant will take part in the case              | `participant-appears`            |
//! | outcome   | a message will be sent / received                   | `message-occurs[-send/-receive]` |
//! | numeric   | remaining / total messages of a participant         | `remaining-messages-participant`, `total-messages-participant` |
//! | numeric   | remaining / total messages in the process           | `remaining-messages-process`, `total-messages-process` |
//! | numeric   | participant remaining time / duration               | `remaining-time-participant`, `total-duration-participant` |
//! | numeric   | process remaining time / duration                   | `remaining-time-process`, `total-duration-process` |
//! | numeric   | time until the next message to send / receive       | `time-to-next-message[-send/-receive]` |
//! | next      | next event in a participant                         | `next-activity-participant`      |
//! | next      | next event in the process                           | `next-activity-process`          |
//! | next      | next participant to act                             | `next-participant`               |
//! | next      | next participant to send / receive a message        | `next-message-counterpart[-send/-receive]` |
//! | next      | next message in the process                         | `next-message-process[-send/-receive]` |
//! | next      | next message in a participant                       | `next-message-participant[-send/-receive]` |

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_model::{Event, Trace};
use crate::views::{Content, DirectionFilter, Scope, ViewSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Outcome,
    Numeric,
    NextEvent,
}

/// Whether the target is a label (classification) or a number (regression).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetType {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TaskKind {
    ParticipantWillAppear { participant: String },
    MessageWillOccur { label: String, direction: DirectionFilter },
    RemainingMessages,
    TotalMessages,
    RemainingTime,
    TotalDuration,
    TimeToNextMessage { direction: DirectionFilter },
    NextActivity,
    NextParticipant,
    NextMessageLabel { direction: DirectionFilter },
    NextMessageCounterpart { direction: DirectionFilter },
}

impl TaskKind {
    pub fn family(&self) -> Family {
        use TaskKind::*;
        match self {
            ParticipantWillAppear { .. } | MessageWillOccur { .. } => Family::Outcome,
            RemainingMessages | TotalMessages | RemainingTime | TotalDuration | TimeToNextMessage { .. } => {
                Family::Numeric
            }
            NextActivity | NextParticipant | NextMessageLabel { .. } | NextMessageCounterpart { .. } => {
                Family::NextEvent
            }
        }
    }

    pub fn target_type(&self) -> TargetType {
        match self.family() {
            Family::Numeric => TargetType::Numeric,
            Family::Outcome | Family::NextEvent => TargetType::Categorical,
        }
    }

    /// Stable identifier without scope or direction suffix.
    pub fn base_name(&self) -> &'static str {
        use TaskKind::*;
        match self {
            ParticipantWillAppear { .. } => "participant-appears",
            MessageWillOccur { .. } => "message-occurs",
            RemainingMessages => "remaining-messages",
            TotalMessages => "total-messages",
            RemainingTime => "remaining-time",
            TotalDuration => "total-duration",
            TimeToNextMessage { .. } => "time-to-next-message",
            NextActivity => "next-activity",
            NextParticipant => "next-participant",
            NextMessageLabel { .. } => "next-message",
            NextMessageCounterpart { .. } => "next-message-counterpart",
        }
    }

    /// Target direction of kinds that look for a sent or received message.
    pub fn message_direction(&self) -> Option<DirectionFilter> {
        use TaskKind::*;
        match self {
            MessageWillOccur { direction, .. }
            | TimeToNextMessage { direction }
            | NextMessageLabel { direction }
            | NextMessageCounterpart { direction } => Some(*direction),
            _ => None,
        }
    }

    fn with_direction(self, d: DirectionFilter) -> Self {
        use TaskKind::*;
        match self {
            MessageWillOccur { label, .. } => MessageWillOccur { label, direction: d },
            TimeToNextMessage { .. } => TimeToNextMessage { direction: d },
            NextMessageLabel { .. } => NextMessageLabel { direction: d },
            NextMessageCounterpart { .. } => NextMessageCounterpart { direction: d },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PredictionTask {
    pub kind: TaskKind,
    pub view: ViewSpec,
}

impl PredictionTask {
    pub fn new(kind: TaskKind, view: ViewSpec) -> Self {
        PredictionTask { kind, view }
    }

    pub fn family(&self) -> Family {
        self.kind.family()
    }

    pub fn target_type(&self) -> TargetType {
        self.kind.target_type()
    }

    /// Full identifier including scope and direction, e.g. `next-message-participant-send`.
    pub fn name(&self) -> String {
        let mut name = self.kind.base_name().to_string();
        if matches!(
            self.kind,
            TaskKind::NextActivity
                | TaskKind::NextMessageLabel { .. }
                | TaskKind::RemainingMessages
                | TaskKind::TotalMessages
                | TaskKind::RemainingTime
                | TaskKind::TotalDuration
        ) {
            name.push_str(match self.view.scope {
                Scope::Process => "-process",
                Scope::Participant(_) => "-participant",
            });
        }
        match self.kind.message_direction() {
            Some(DirectionFilter::SendOnly) => name.push_str("-send"),
            Some(DirectionFilter::ReceiveOnly) => name.push_str("-receive"),
            _ => {}
        }
        name
    }
}

impl fmt::Display for PredictionTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.name(), self.view)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("task {0} needs a target value (participant or message label)")]
    MissingTarget(String),
    #[error("participant scope needs a participant name")]
    MissingParticipant,
    #[error("conflicting {what} in task id and flags")]
    Conflict { what: &'static str },
}

impl TaskError {
    pub fn name(&self) -> &'static str {
        match self {
            TaskError::UnknownTask(_) => "UnknownTask",
            TaskError::MissingTarget(_) => "MissingTarget",
            TaskError::MissingParticipant => "MissingParticipant",
            TaskError::Conflict { .. } => "TaskConflict",
        }
    }
}

/// Task selection as given on the command line: an identifier that may carry
/// `-process`/`-participant` and `-send`/`-receive` suffixes, plus flags.
#[derive(Debug, Clone, Default)]
pub struct TaskRequest {
    pub id: String,
    /// `Some(true)` for participant scope, `Some(false)` for process scope.
    pub participant_scope: Option<bool>,
    pub participant: Option<String>,
    pub direction: Option<DirectionFilter>,
    pub content: Option<Content>,
    /// Participant or message label for outcome tasks.
    pub target: Option<String>,
}

impl TaskRequest {
    pub fn resolve(&self) -> Result<PredictionTask, TaskError> {
        let mut rest = self.id.as_str();
        let mut direction = None;
        let mut scope = None;
        loop {
            if let Some(s) = rest.strip_suffix("-send") {
                set_once(&mut direction, DirectionFilter::SendOnly, "direction")?;
                rest = s;
            } else if let Some(s) = rest.strip_suffix("-receive") {
                set_once(&mut direction, DirectionFilter::ReceiveOnly, "direction")?;
                rest = s;
            } else if let Some(s) = rest.strip_suffix("-process") {
                set_once(&mut scope, false, "scope")?;
                rest = s;
            } else if let Some(s) = rest
                .strip_suffix("-participant")
                .filter(|s| !s.is_empty() && *s != "next")
            {
                set_once(&mut scope, true, "scope")?;
                rest = s;
            } else {
                break;
            }
        }
        let direction = merge_flag(direction, self.direction, "direction")?;
        let scope = merge_flag(scope, self.participant_scope, "scope")?;
        let target = || {
            self.target
                .clone()
                .ok_or_else(|| TaskError::MissingTarget(self.id.clone()))
        };
        let any = DirectionFilter::Any;
        let kind = match rest {
            "participant-appears" => TaskKind::ParticipantWillAppear { participant: target()? },
            "message-occurs" => TaskKind::MessageWillOccur {
                label: target()?,
                direction: any,
            },
            "remaining-messages" => TaskKind::RemainingMessages,
            "total-messages" => TaskKind::TotalMessages,
            "remaining-time" => TaskKind::RemainingTime,
            "total-duration" | "duration" => TaskKind::TotalDuration,
            "time-to-next-message" => TaskKind::TimeToNextMessage { direction: any },
            "next-activity" | "next-event" => TaskKind::NextActivity,
            "next-participant" => TaskKind::NextParticipant,
            "next-message" => TaskKind::NextMessageLabel { direction: any },
            "next-message-counterpart" => TaskKind::NextMessageCounterpart { direction: any },
            _ => return Err(TaskError::UnknownTask(self.id.clone())),
        };
        let message_kind = kind.message_direction().is_some();
        let participant_scope = scope.unwrap_or(self.participant.is_some());
        let view_scope = if participant_scope {
            Scope::Participant(self.participant.clone().ok_or(TaskError::MissingParticipant)?)
        } else {
            Scope::Process
        };
        let default_content = if message_kind && !matches!(kind, TaskKind::MessageWillOccur { .. }) {
            Content::MessagesOnly
        } else {
            Content::AllEvents
        };
        let mut view = ViewSpec {
            scope: view_scope,
            content: self.content.unwrap_or(default_content),
            direction: any,
        };
        let kind = match direction {
            Some(d) if message_kind => kind.with_direction(d),
            Some(d) => {
                view.direction = d;
                kind
            }
            None => kind,
        };
        Ok(PredictionTask::new(kind, view))
    }
}

fn set_once<T: PartialEq>(slot: &mut Option<T>, value: T, what: &'static str) -> Result<(), TaskError> {
    match slot {
        Some(v) if *v != value => Err(TaskError::Conflict { what }),
        _ => {
            *slot = Some(value);
            Ok(())
        }
    }
}

fn merge_flag<T: PartialEq>(from_id: Option<T>, flag: Option<T>, what: &'static str) -> Result<Option<T>, TaskError> {
    match (from_id, flag) {
        (Some(a), Some(b)) if a != b => Err(TaskError::Conflict { what }),
        (a, b) => Ok(a.or(b)),
    }
}

/// Ground truth for one (trace, prefix length) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Boolean(bool),
    Count(u64),
    /// Milliseconds.
    Duration(u64),
    Label(String),
    Undefined,
}

impl Target {
    pub fn is_undefined(&self) -> bool {
        matches!(self, Target::Undefined)
    }

    /// Class name of a categorical target.
    pub fn category(&self) -> Option<String> {
        match self {
            Target::Boolean(b) => Some(b.to_string()),
            Target::Label(l) => Some(l.clone()),
            _ => None,
        }
    }

    pub fn numeric(&self) -> Option<u64> {
        match self {
            Target::Count(n) | Target::Duration(n) => Some(*n),
            _ => None,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Boolean(b) => write!(f, "{b}"),
            Target::Count(n) | Target::Duration(n) => write!(f, "{n}"),
            Target::Label(l) => f.write_str(l),
            Target::Undefined => Ok(()),
        }
    }
}

fn check_k(trace: &Trace, k: usize) {
    assert!(
        (1..=trace.len()).contains(&k),
        "prefix length {k} outside 1..={}",
        trace.len()
    );
}

fn elapsed(from: &Event, to: &Event) -> u64 {
    u64::try_from(to.timestamp.millis() - from.timestamp.millis()).unwrap_or(0)
}

fn first_after(trace: &Trace, k: usize, pred: impl Fn(&Event) -> bool) -> Option<&Event> {
    check_k(trace, k);
    trace.events[k..].iter().find(|e| pred(e))
}

/// Whether `participant` enacts any event of the full trace. Constant in `k`.
pub fn label_outcome_participant(participant: &str, trace: &Trace, k: usize) -> Target {
    check_k(trace, k);
    Target::Boolean(trace.events.iter().any(|e| e.participant == participant))
}

/// Whether a message labelled `label` in direction `direction` occurs anywhere in the trace.
pub fn label_outcome_message(label: &str, direction: DirectionFilter, trace: &Trace, k: usize) -> Target {
    check_k(trace, k);
    Target::Boolean(
        trace
            .events
            .iter()
            .any(|e| direction.accepts_message(e) && e.message_label() == label),
    )
}

pub fn label_remaining_messages(trace: &Trace, k: usize) -> Target {
    check_k(trace, k);
    Target::Count(trace.events[k..].iter().filter(|e| e.is_message()).count() as u64)
}

pub fn label_total_messages(trace: &Trace) -> Target {
    Target::Count(trace.events.iter().filter(|e| e.is_message()).count() as u64)
}

/// Time from the k-th event to the last event of the trace (in view).
pub fn label_remaining_time(trace: &Trace, k: usize) -> Target {
    check_k(trace, k);
    let last = trace.events.last().expect("non-empty trace");
    Target::Duration(elapsed(&trace.events[k - 1], last))
}

pub fn label_total_duration(trace: &Trace) -> Target {
    match (trace.events.first(), trace.events.last()) {
        (Some(a), Some(b)) => Target::Duration(elapsed(a, b)),
        _ => Target::Duration(0),
    }
}

pub fn label_time_to_next_message(direction: DirectionFilter, trace: &Trace, k: usize) -> Target {
    match first_after(trace, k, |e| direction.accepts_message(e)) {
        Some(e) => Target::Duration(elapsed(&trace.events[k - 1], e)),
        None => Target::Undefined,
    }
}

pub fn label_next_activity(trace: &Trace, k: usize) -> Target {
    first_after(trace, k, |_| true).map_or(Target::Undefined, |e| Target::Label(e.activity.clone()))
}

pub fn label_next_participant(trace: &Trace, k: usize) -> Target {
    first_after(trace, k, |_| true).map_or(Target::Undefined, |e| Target::Label(e.participant.clone()))
}

pub fn label_next_message(direction: DirectionFilter, trace: &Trace, k: usize) -> Target {
    first_after(trace, k, |e| direction.accepts_message(e))
        .map_or(Target::Undefined, |e| Target::Label(e.message_label().to_string()))
}

pub fn label_next_message_counterpart(direction: DirectionFilter, trace: &Trace, k: usize) -> Target {
    first_after(trace, k, |e| direction.accepts_message(e))
        .and_then(|e| e.counterpart.clone())
        .map_or(Target::Undefined, Target::Label)
}

/// Dispatches to the labeler of `task.kind`. `trace` must already be in `task.view`.
pub fn label(task: &PredictionTask, trace: &Trace, k: usize) -> Target {
    use TaskKind::*;
    match &task.kind {
        ParticipantWillAppear { participant } => label_outcome_participant(participant, trace, k),
        MessageWillOccur { label, direction } => label_outcome_message(label, *direction, trace, k),
        RemainingMessages => label_remaining_messages(trace, k),
        TotalMessages => {
            check_k(trace, k);
            label_total_messages(trace)
        }
        RemainingTime => label_remaining_time(trace, k),
        TotalDuration => {
            check_k(trace, k);
            label_total_duration(trace)
        }
        TimeToNextMessage { direction } => label_time_to_next_message(*direction, trace, k),
        NextActivity => label_next_activity(trace, k),
        NextParticipant => label_next_participant(trace, k),
        NextMessageLabel { direction } => label_next_message(*direction, trace, k),
        NextMessageCounterpart { direction } => label_next_message_counterpart(*direction, trace, k),
    }
}

/// For outcome tasks: whether the outcome is already visible in the first `k` events.
pub fn outcome_witnessed(task: &PredictionTask, trace: &Trace, k: usize) -> bool {
    let prefix = &trace.events[..k.min(trace.len())];
    match &task.kind {
        TaskKind::ParticipantWillAppear { participant } => prefix.iter().any(|e| e.participant == *participant),
        TaskKind::MessageWillOccur { label, direction } => prefix
            .iter()
            .any(|e| direction.accepts_message(e) && e.message_label() == label),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::Timestamp;

    fn ts(s: i64) -> Timestamp {
        Timestamp(s * 1000)
    }

    /// [user, send m, recv m, user]
    fn small() -> Trace {
        Trace::new(
            "c",
            vec![
                Event::user("c", "a", ts(0), "A"),
                Event::send("c", "m", ts(5), "A", "B"),
                Event::receive("c", "m", ts(7), "B", "A"),
                Event::user("c", "b", ts(25), "B"),
            ],
        )
    }

    #[test]
    fn remaining_messages_examples() {
        let t = small();
        assert_eq!(label_remaining_messages(&t, 1), Target::Count(2));
        assert_eq!(label_remaining_messages(&t, 4), Target::Count(0));
        let only_users = Trace::new("c", vec![Event::user("c", "a", ts(0), "A")]);
        assert_eq!(label_total_messages(&only_users), Target::Count(0));
    }

    #[test]
    fn remaining_time_examples() {
        let t = Trace::new(
            "c",
            vec![
                Event::user("c", "a", ts(0), "A"),
                Event::user("c", "b", ts(10), "A"),
                Event::user("c", "c", ts(25), "A"),
            ],
        );
        assert_eq!(label_remaining_time(&t, 1), Target::Duration(25_000));
        assert_eq!(label_remaining_time(&t, 3), Target::Duration(0));
        assert_eq!(label_total_duration(&t), Target::Duration(25_000));
    }

    #[test]
    fn time_to_next_message() {
        let t = small();
        assert_eq!(
            label_time_to_next_message(DirectionFilter::Any, &t, 1),
            Target::Duration(5_000)
        );
        assert_eq!(
            label_time_to_next_message(DirectionFilter::Any, &t, 3),
            Target::Undefined
        );
        // the receive at position 3 is skipped
        let t2 = Trace::new(
            "c",
            vec![
                Event::user("c", "a", ts(0), "A"),
                Event::receive("c", "r", ts(2), "A", "B"),
                Event::send("c", "s", ts(9), "A", "B"),
            ],
        );
        assert_eq!(
            label_time_to_next_message(DirectionFilter::SendOnly, &t2, 1),
            Target::Duration(9_000)
        );
        assert_eq!(
            label_time_to_next_message(DirectionFilter::ReceiveOnly, &t2, 1),
            Target::Duration(2_000)
        );
    }

    #[test]
    fn next_event_family() {
        let t = small();
        assert_eq!(label_next_activity(&t, 1), Target::Label("m".into()));
        assert_eq!(label_next_participant(&t, 2), Target::Label("B".into()));
        assert_eq!(label_next_activity(&t, 4), Target::Undefined);
        assert_eq!(
            label_next_message(DirectionFilter::ReceiveOnly, &t, 1),
            Target::Label("m".into())
        );
        assert_eq!(
            label_next_message_counterpart(DirectionFilter::SendOnly, &t, 1),
            Target::Label("B".into())
        );
        assert_eq!(
            label_next_message_counterpart(DirectionFilter::SendOnly, &t, 2),
            Target::Undefined
        );
    }

    #[test]
    fn outcomes_use_full_trace() {
        let t = small();
        for k in 1..=4 {
            assert_eq!(label_outcome_participant("B", &t, k), Target::Boolean(true));
            assert_eq!(label_outcome_participant("Z", &t, k), Target::Boolean(false));
            assert_eq!(
                label_outcome_message("m", DirectionFilter::SendOnly, &t, k),
                Target::Boolean(true)
            );
            assert_eq!(
                label_outcome_message("zz", DirectionFilter::Any, &t, k),
                Target::Boolean(false)
            );
        }
        let task = PredictionTask::new(
            TaskKind::ParticipantWillAppear {
                participant: "B".into(),
            },
            ViewSpec::process(),
        );
        assert!(!outcome_witnessed(&task, &t, 2));
        assert!(outcome_witnessed(&task, &t, 3));
    }

    #[test]
    #[should_panic]
    fn k_out_of_range_panics() {
        label_next_activity(&small(), 0);
    }

    fn req(id: &str) -> TaskRequest {
        TaskRequest {
            id: id.into(),
            ..Default::default()
        }
    }

    #[test]
    fn resolve_task_ids() {
        let t = TaskRequest {
            participant: Some("Laboratory".into()),
            ..req("next-message-send")
        }
        .resolve()
        .unwrap();
        assert_eq!(
            t.kind,
            TaskKind::NextMessageLabel {
                direction: DirectionFilter::SendOnly
            }
        );
        assert_eq!(t.view, ViewSpec::participant("Laboratory").messages_only());
        assert_eq!(t.name(), "next-message-participant-send");

        let t = req("remaining-time-process").resolve().unwrap();
        assert_eq!(
            (t.kind.clone(), t.view.clone()),
            (TaskKind::RemainingTime, ViewSpec::process())
        );
        assert_eq!(t.family(), Family::Numeric);

        let t = TaskRequest {
            participant: Some("Buyer".into()),
            ..req("next-activity-participant")
        }
        .resolve()
        .unwrap();
        assert_eq!(t.view, ViewSpec::participant("Buyer"));

        assert_eq!(
            req("next-participant").resolve().unwrap().kind,
            TaskKind::NextParticipant
        );
        assert_eq!(
            req("next-message-counterpart-receive").resolve().unwrap().name(),
            "next-message-counterpart-receive"
        );
        assert_eq!(req("bogus").resolve().unwrap_err().name(), "UnknownTask");
        assert_eq!(
            req("participant-appears").resolve().unwrap_err().name(),
            "MissingTarget"
        );
        assert_eq!(
            req("next-activity-participant").resolve().unwrap_err().name(),
            "MissingParticipant"
        );
        let conflict = TaskRequest {
            direction: Some(DirectionFilter::ReceiveOnly),
            ..req("next-message-send")
        };
        assert_eq!(conflict.resolve().unwrap_err().name(), "TaskConflict");
    }

    #[test]
    fn names_round_trip_through_resolve() {
        let kinds = [
            TaskKind::RemainingMessages,
            TaskKind::TotalMessages,
            TaskKind::RemainingTime,
            TaskKind::TotalDuration,
            TaskKind::NextActivity,
            TaskKind::NextParticipant,
            TaskKind::TimeToNextMessage {
                direction: DirectionFilter::SendOnly,
            },
            TaskKind::NextMessageLabel {
                direction: DirectionFilter::ReceiveOnly,
            },
            TaskKind::NextMessageCounterpart {
                direction: DirectionFilter::Any,
            },
        ];
        for kind in kinds {
            let t = PredictionTask::new(kind.clone(), ViewSpec::process());
            let back = req(&t.name()).resolve().unwrap();
            assert_eq!(back.kind, kind, "{}", t.name());
        }
    }
}
