use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{direction_from, elem_type_from_str, elem_type_str, IngestError, Location};
use crate::event_model::{validate_log, Direction, Event, EventLog, Timestamp, Trace};

const ATTRIBUTE_TAGS: [&[u8]; 7] = [b"string", b"date", b"int", b"float", b"boolean", b"id", b"list"];

struct RawAttr {
    key: String,
    value: String,
}

#[derive(Default)]
struct TraceBuilder {
    case_id: Option<String>,
    events: Vec<Vec<RawAttr>>,
}

fn xml_error(reader: &Reader<&[u8]>, message: impl ToString) -> IngestError {
    IngestError::MalformedXml {
        position: reader.buffer_position(),
        message: message.to_string(),
    }
}

fn key_value(reader: &Reader<&[u8]>, e: &BytesStart<'_>) -> Result<Option<RawAttr>, IngestError> {
    let mut key = None;
    let mut value = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| xml_error(reader, err))?;
        let v = attr
            .unescape_value()
            .map_err(|err| xml_error(reader, err))?
            .into_owned();
        match attr.key.as_ref() {
            b"key" => key = Some(v),
            b"value" => value = Some(v),
            _ => {}
        }
    }
    Ok(key.map(|key| RawAttr {
        key,
        value: value.unwrap_or_default(),
    }))
}

/// Parses an XES document carrying the collaboration attributes.
///
/// Only event-level attributes are interpreted; typed attributes other than
/// the reserved ones are kept as strings in `Event::extra`. Nested attributes
/// are skipped.
pub fn parse_xes(document: &[u8]) -> Result<EventLog, IngestError> {
    let mut reader = Reader::from_reader(document);
    let mut buf = Vec::new();
    // element names from the root down to the current element
    let mut stack: Vec<Vec<u8>> = Vec::new();
    let mut traces: Vec<TraceBuilder> = Vec::new();
    let mut current: Option<TraceBuilder> = None;
    let mut saw_root = false;

    loop {
        let ev = reader
            .read_event_into(&mut buf)
            .map_err(|err| xml_error(&reader, err))?;
        let (start, is_empty) = match &ev {
            XmlEvent::Start(s) => (Some(s.clone().into_owned()), false),
            XmlEvent::Empty(s) => (Some(s.clone().into_owned()), true),
            XmlEvent::End(_) => {
                let name = stack.pop().ok_or_else(|| xml_error(&reader, "unbalanced end tag"))?;
                if name == b"trace" && stack.len() == 1 {
                    traces.push(current.take().unwrap_or_default());
                }
                buf.clear();
                continue;
            }
            XmlEvent::Eof => break,
            _ => {
                buf.clear();
                continue;
            }
        };
        let start = start.expect("start or empty element");
        let name = start.local_name().as_ref().to_vec();
        let depth = stack.len();
        if depth == 0 {
            saw_root = true;
        }
        let parent = stack.last().map(Vec::as_slice);
        match (name.as_slice(), parent, depth) {
            (b"trace", Some(b"log"), 1) => {
                current = Some(TraceBuilder::default());
            }
            (b"event", Some(b"trace"), 2) => {
                if let Some(t) = current.as_mut() {
                    t.events.push(Vec::new());
                }
            }
            (tag, Some(b"trace"), 2) if ATTRIBUTE_TAGS.contains(&tag) => {
                if let (Some(t), Some(kv)) = (current.as_mut(), key_value(&reader, &start)?) {
                    if kv.key == "concept:name" {
                        t.case_id = Some(kv.value);
                    }
                }
            }
            (tag, Some(b"event"), 3) if ATTRIBUTE_TAGS.contains(&tag) => {
                if let Some(kv) = key_value(&reader, &start)? {
                    if let Some(ev) = current.as_mut().and_then(|t| t.events.last_mut()) {
                        ev.push(kv);
                    }
                }
            }
            _ => {}
        }
        if is_empty {
            if name == b"trace" && depth == 1 {
                traces.push(current.take().unwrap_or_default());
            }
        } else {
            stack.push(name);
        }
        buf.clear();
    }
    if !stack.is_empty() {
        return Err(xml_error(&reader, "unexpected end of document"));
    }
    if !saw_root {
        return Err(xml_error(&reader, "no root element"));
    }

    let mut out = Vec::with_capacity(traces.len());
    for (ti, tb) in traces.into_iter().enumerate() {
        let case_id = tb.case_id.ok_or(IngestError::MissingConceptName {
            at: Location::Trace { trace: ti },
        })?;
        let mut events = Vec::with_capacity(tb.events.len());
        for (ei, attrs) in tb.events.into_iter().enumerate() {
            events.push(build_event(&case_id, attrs, ti, ei)?);
        }
        out.push(Trace::new(case_id, events));
    }
    let log = EventLog::new(out);
    validate_log(&log)?;
    Ok(log)
}

fn build_event(case_id: &str, attrs: Vec<RawAttr>, trace: usize, event: usize) -> Result<Event, IngestError> {
    let at = || Location::Event { trace, event };
    let mut activity = None;
    let mut timestamp = None;
    let mut participant = None;
    let mut elem_type = None;
    let mut from = None;
    let mut to = None;
    let mut extra = BTreeMap::new();
    for RawAttr { key, value } in attrs {
        match key.as_str() {
            "concept:name" => activity = Some(value),
            "time:timestamp" => timestamp = Some(value),
            "participant" => participant = Some(value),
            "elemType" => elem_type = Some(value),
            "fromParticipant" => from = Some(value),
            "toParticipant" => to = Some(value),
            _ => {
                extra.insert(key, value);
            }
        }
    }
    let activity = activity.ok_or_else(|| IngestError::MissingConceptName { at: at() })?;
    let raw_ts = timestamp.ok_or_else(|| IngestError::MissingTimestamp { at: at() })?;
    let timestamp = Timestamp::parse_rfc3339(&raw_ts).ok_or_else(|| IngestError::UnparseableTimestamp {
        at: at(),
        value: raw_ts.clone(),
    })?;
    let (direction, counterpart) = direction_from(from, to, at)?;
    Ok(Event {
        case_id: case_id.to_string(),
        activity,
        timestamp,
        participant: participant.unwrap_or_default(),
        elem_type: elem_type_from_str(elem_type.as_deref()),
        direction,
        counterpart,
        extra,
    })
}

fn push_attr(out: &mut String, indent: &str, tag: &str, key: &str, value: &str) {
    let _ = writeln!(
        out,
        "{indent}<{tag} key=\"{}\" value=\"{}\"/>",
        escape(key),
        escape(value)
    );
}

/// Writes the log as XES. Output is byte-deterministic.
pub fn write_xes(log: &EventLog) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<log xes.version=\"1.0\" xes.features=\"\">\n");
    out.push_str(
        "  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\"/>\n",
    );
    out.push_str("  <extension name=\"Time\" prefix=\"time\" uri=\"http://www.xes-standard.org/time.xesext\"/>\n");
    for trace in log.traces() {
        out.push_str("  <trace>\n");
        push_attr(&mut out, "    ", "string", "concept:name", &trace.case_id);
        for e in &trace.events {
            out.push_str("    <event>\n");
            let ind = "      ";
            push_attr(&mut out, ind, "string", "concept:name", &e.activity);
            push_attr(&mut out, ind, "date", "time:timestamp", &e.timestamp.to_rfc3339());
            push_attr(&mut out, ind, "string", "participant", &e.participant);
            push_attr(&mut out, ind, "string", "elemType", elem_type_str(e.elem_type));
            match (e.direction, &e.counterpart) {
                (Direction::Receive, Some(c)) => push_attr(&mut out, ind, "string", "fromParticipant", c),
                (Direction::Send, Some(c)) => push_attr(&mut out, ind, "string", "toParticipant", c),
                _ => {}
            }
            for (k, v) in &e.extra {
                push_attr(&mut out, ind, "string", k, v);
            }
            out.push_str("    </event>\n");
        }
        out.push_str("  </trace>\n");
    }
    out.push_str("</log>\n");
    out.into_bytes()
}
