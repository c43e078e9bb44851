//! Log views: the whole process, one participant, messages only, and
//! direction-filtered message streams.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_model::{Direction, Event, EventLog, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Process,
    Participant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Content {
    AllEvents,
    MessagesOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionFilter {
    #[default]
    Any,
    SendOnly,
    ReceiveOnly,
}

impl DirectionFilter {
    /// Whether an event passes. Only message events have a direction, so
    /// `SendOnly` and `ReceiveOnly` reject user tasks.
    pub fn accepts(self, e: &Event) -> bool {
        match self {
            DirectionFilter::Any => true,
            DirectionFilter::SendOnly => e.direction == Direction::Send,
            DirectionFilter::ReceiveOnly => e.direction == Direction::Receive,
        }
    }

    /// Message event in the accepted direction.
    pub fn accepts_message(self, e: &Event) -> bool {
        e.is_message() && self.accepts(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViewSpec {
    pub scope: Scope,
    pub content: Content,
    pub direction: DirectionFilter,
}

impl Default for ViewSpec {
    fn default() -> Self {
        ViewSpec::process()
    }
}

impl ViewSpec {
    /// All events of the process.
    pub fn process() -> Self {
        ViewSpec {
            scope: Scope::Process,
            content: Content::AllEvents,
            direction: DirectionFilter::Any,
        }
    }

    /// All events of one participant.
    pub fn participant(name: impl Into<String>) -> Self {
        ViewSpec {
            scope: Scope::Participant(name.into()),
            ..ViewSpec::process()
        }
    }

    pub fn messages_only(mut self) -> Self {
        self.content = Content::MessagesOnly;
        self
    }

    pub fn with_direction(mut self, direction: DirectionFilter) -> Self {
        self.direction = direction;
        self
    }

    pub fn is_identity(&self) -> bool {
        *self == ViewSpec::process()
    }

    pub fn accepts(&self, e: &Event) -> bool {
        let in_scope = match &self.scope {
            Scope::Process => true,
            Scope::Participant(p) => e.participant == *p,
        };
        let content_ok = match self.content {
            Content::AllEvents => true,
            Content::MessagesOnly => e.is_message(),
        };
        in_scope && content_ok && self.direction.accepts(e)
    }

    /// Filters one trace; `None` if nothing remains.
    pub fn filter_trace(&self, trace: &Trace) -> Option<Trace> {
        let events: Vec<Event> = trace.events.iter().filter(|e| self.accepts(e)).cloned().collect();
        (!events.is_empty()).then(|| Trace::new(trace.case_id.clone(), events))
    }
}

impl fmt::Display for ViewSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.scope {
            Scope::Process => f.write_str("process")?,
            Scope::Participant(p) => write!(f, "participant={p}")?,
        }
        if self.content == Content::MessagesOnly {
            f.write_str(",messages")?;
        }
        match self.direction {
            DirectionFilter::Any => Ok(()),
            DirectionFilter::SendOnly => f.write_str(",send"),
            DirectionFilter::ReceiveOnly => f.write_str(",receive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViewError {
    #[error("unknown participant {0:?}")]
    UnknownParticipant(String),
}

impl ViewError {
    pub fn name(&self) -> &'static str {
        "UnknownParticipant"
    }
}

/// A filtered log and the number of traces that became empty and were dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Viewed {
    pub log: EventLog,
    pub dropped_traces: usize,
}

pub fn apply_view_counted(log: &EventLog, view: &ViewSpec) -> Result<Viewed, ViewError> {
    if let Scope::Participant(p) = &view.scope {
        if !log.participants().contains(p) {
            return Err(ViewError::UnknownParticipant(p.clone()));
        }
    }
    let mut dropped_traces = 0;
    let traces = log
        .traces()
        .iter()
        .filter_map(|t| {
            let kept = view.filter_trace(t);
            dropped_traces += usize::from(kept.is_none());
            kept
        })
        .collect();
    Ok(Viewed {
        log: EventLog::new(traces),
        dropped_traces,
    })
}

pub fn apply_view(log: &EventLog, view: &ViewSpec) -> Result<EventLog, ViewError> {
    apply_view_counted(log, view).map(|v| v.log)
}
