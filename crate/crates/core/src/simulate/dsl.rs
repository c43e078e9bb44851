//! Text format for collaboration models.
//!
//! ```text
//! # comment
//! collaboration buyer_reseller
//!
//! participant Buyer
//!   task "place order" delay uniform(5m, 30m)
//!   send "m1" to Reseller latency fixed(2s)
//!   and
//!     branch
//!       receive "m2" from Reseller
//!     branch
//!       receive "m3" from Reseller
//!   end
//!   xor
//!     branch 0.7
//!       task "pay by card"
//!     branch 0.3
//!       task "pay by transfer"
//!   end
//! end
//! ```
//!
//! Steps:
//!
//! * `task "activity" [delay D]`
//! * `send "message" to P [as "activity"] [delay D] [latency D]`
//! * `receive "message" from P [as "activity"] [delay D]`
//! * `xor` with `branch PROBABILITY` blocks, closed by `end`
//! * `and` with `branch` blocks, closed by `end`
//!
//! A delay `D` is `fixed(x)`, `uniform(a, b)` or `exp(mean)`; durations take an
//! optional unit `ms` (default), `s`, `m`, `h` or `d`. Unspecified delays are
//! `fixed(1s)` and latencies `fixed(0)`. A message step without `as` records
//! the message name as its activity.

use super::model::{Branch, CollabModel, Delay, ParticipantProcess, Step};
use super::ModelError;

struct Line {
    number: usize,
    tokens: Vec<String>,
}

fn tokenize(text: &str, number: usize) -> Result<Vec<String>, ModelError> {
    let err = |message: &str| ModelError::Parse {
        line: number,
        message: message.to_string(),
    };
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '#' {
            break;
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some('\\') => s.extend(chars.next()),
                    Some(c) => s.push(c),
                    None => return Err(err("unterminated string")),
                }
            }
            tokens.push(s);
        } else {
            // a word; a parenthesized group belongs to the word
            let mut s = String::new();
            let mut depth = 0usize;
            while let Some(&c) = chars.peek() {
                if depth == 0 && (c.is_whitespace() || c == '#' || c == '"') {
                    break;
                }
                match c {
                    '(' => depth += 1,
                    ')' if depth == 0 => return Err(err("unbalanced ')'")),
                    ')' => depth -= 1,
                    _ => {}
                }
                if !c.is_whitespace() {
                    s.push(c);
                }
                chars.next();
            }
            if depth > 0 {
                return Err(err("unbalanced '('"));
            }
            tokens.push(s);
        }
    }
    Ok(tokens)
}

fn parse_duration(s: &str) -> Option<f64> {
    let split = s.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let value: f64 = num.parse().ok()?;
    let scale = match unit {
        "" | "ms" => 1.0,
        "s" => 1_000.0,
        "m" => 60_000.0,
        "h" => 3_600_000.0,
        "d" => 86_400_000.0,
        _ => return None,
    };
    let ms = value * scale;
    (ms.is_finite() && ms >= 0.0).then_some(ms)
}

/// Parses `fixed(x)`, `uniform(a,b)` or `exp(mean)`.
pub fn parse_delay(s: &str) -> Option<Delay> {
    let (kind, rest) = s.split_once('(')?;
    let args: Vec<f64> = rest
        .strip_suffix(')')?
        .split(',')
        .map(parse_duration)
        .collect::<Option<_>>()?;
    let whole = |x: f64| x.round() as u64;
    match (kind, args.as_slice()) {
        ("fixed", [x]) => Some(Delay::Fixed(whole(*x))),
        ("uniform", [a, b]) if a <= b => Some(Delay::Uniform(whole(*a), whole(*b))),
        ("exp", [mean]) => Some(Delay::Exponential { mean: *mean }),
        _ => None,
    }
}

struct Parser {
    lines: Vec<Line>,
    pos: usize,
}

impl Parser {
    fn err(&self, message: impl Into<String>) -> ModelError {
        let line = self.lines.get(self.pos).or(self.lines.last()).map_or(0, |l| l.number);
        ModelError::Parse {
            line,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&str> {
        self.lines.get(self.pos).map(|l| l.tokens[0].as_str())
    }

    fn tokens(&self) -> &[String] {
        &self.lines[self.pos].tokens
    }

    fn expect_end(&mut self, what: &str) -> Result<(), ModelError> {
        if self.peek() != Some("end") {
            return Err(self.err(format!("expected 'end' closing {what}")));
        }
        if self.tokens().len() > 1 {
            return Err(self.err("unexpected tokens after 'end'"));
        }
        self.pos += 1;
        Ok(())
    }

    /// Steps up to (not including) the next `branch` or `end`.
    fn steps(&mut self) -> Result<Vec<Step>, ModelError> {
        let mut steps = Vec::new();
        while let Some(head) = self.peek() {
            match head {
                "end" | "branch" => break,
                "xor" => steps.push(self.xor()?),
                "and" => steps.push(self.and()?),
                _ => {
                    steps.push(self.atomic()?);
                    self.pos += 1;
                }
            }
        }
        Ok(steps)
    }

    fn xor(&mut self) -> Result<Step, ModelError> {
        self.pos += 1;
        let mut branches = Vec::new();
        while self.peek() == Some("branch") {
            let probability = match self.tokens() {
                [_, p] => p
                    .parse::<f64>()
                    .map_err(|_| self.err(format!("bad probability {p:?}")))?,
                _ => return Err(self.err("expected 'branch PROBABILITY'")),
            };
            self.pos += 1;
            branches.push(Branch {
                probability,
                steps: self.steps()?,
            });
        }
        self.expect_end("xor")?;
        Ok(Step::Xor(branches))
    }

    fn and(&mut self) -> Result<Step, ModelError> {
        self.pos += 1;
        let mut branches = Vec::new();
        while self.peek() == Some("branch") {
            if self.tokens().len() != 1 {
                return Err(self.err("parallel branches take no probability"));
            }
            self.pos += 1;
            branches.push(self.steps()?);
        }
        self.expect_end("and")?;
        Ok(Step::And(branches))
    }

    fn atomic(&self) -> Result<Step, ModelError> {
        let t = self.tokens();
        let keyword = t[0].as_str();
        let (name, counterpart, mut rest) = match keyword {
            "task" => match t.get(1) {
                Some(a) => (a.clone(), None, &t[2..]),
                None => return Err(self.err("expected 'task \"activity\"'")),
            },
            "send" | "receive" => {
                let link = if keyword == "send" { "to" } else { "from" };
                match t.get(1..4) {
                    Some([m, l, p]) if l == link => (m.clone(), Some(p.clone()), &t[4..]),
                    _ => return Err(self.err(format!("expected '{keyword} \"message\" {link} PARTICIPANT'"))),
                }
            }
            other => return Err(self.err(format!("unknown statement {other:?}"))),
        };
        let mut activity = None;
        let mut delay = None;
        let mut latency = None;
        while let [key, value, tail @ ..] = rest {
            let slot_delay = |slot: &mut Option<Delay>| -> Result<(), ModelError> {
                if slot.is_some() {
                    return Err(self.err(format!("duplicate '{key}'")));
                }
                *slot = Some(parse_delay(value).ok_or_else(|| ModelError::BadDelay(value.clone()))?);
                Ok(())
            };
            match key.as_str() {
                "as" if keyword != "task" && activity.is_none() => activity = Some(value.clone()),
                "delay" => slot_delay(&mut delay)?,
                "latency" if keyword == "send" => slot_delay(&mut latency)?,
                _ => return Err(self.err(format!("unexpected {key:?}"))),
            }
            rest = tail;
        }
        if let [extra] = rest {
            return Err(self.err(format!("dangling {extra:?}")));
        }
        let delay = delay.unwrap_or_default();
        Ok(match (keyword, counterpart) {
            ("task", _) => Step::Task { activity: name, delay },
            ("send", Some(to)) => Step::Send {
                activity: activity.unwrap_or_else(|| name.clone()),
                message: name,
                to,
                delay,
                latency: latency.unwrap_or(Delay::Fixed(0)),
            },
            (_, Some(from)) => Step::Receive {
                activity: activity.unwrap_or_else(|| name.clone()),
                message: name,
                from,
                delay,
            },
            _ => unreachable!(),
        })
    }
}

/// Parses and validates a model.
pub fn parse_model(text: &str) -> Result<CollabModel, ModelError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let tokens = tokenize(raw, i + 1)?;
        if !tokens.is_empty() {
            lines.push(Line { number: i + 1, tokens });
        }
    }
    let mut p = Parser { lines, pos: 0 };
    let name = match p.lines.first().map(|l| l.tokens.as_slice()) {
        Some([kw, name]) if kw == "collaboration" => name.clone(),
        _ => return Err(p.err("expected 'collaboration NAME'")),
    };
    p.pos = 1;
    let mut participants = Vec::new();
    while p.pos < p.lines.len() {
        let pname = match p.tokens() {
            [kw, name] if kw == "participant" => name.clone(),
            _ => return Err(p.err("expected 'participant NAME'")),
        };
        p.pos += 1;
        let steps = p.steps()?;
        p.expect_end("participant")?;
        participants.push(ParticipantProcess { name: pname, steps });
    }
    CollabModel::new(name, participants)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delays() {
        assert_eq!(parse_delay("fixed(5s)"), Some(Delay::Fixed(5_000)));
        assert_eq!(parse_delay("uniform(1m,2h)"), Some(Delay::Uniform(60_000, 7_200_000)));
        assert_eq!(parse_delay("exp(250)"), Some(Delay::Exponential { mean: 250.0 }));
        assert_eq!(parse_delay("fixed(0.5s)"), Some(Delay::Fixed(500)));
        assert_eq!(parse_delay("uniform(2,1)"), None);
        assert_eq!(parse_delay("fixed(3y)"), None);
        assert_eq!(parse_delay("normal(1)"), None);
    }

    #[test]
    fn tokens() {
        let t = tokenize(r#"send "blood sample" to Laboratory delay uniform(1s, 2s) # x"#, 1).unwrap();
        assert_eq!(
            t,
            ["send", "blood sample", "to", "Laboratory", "delay", "uniform(1s,2s)"]
        );
        assert!(tokenize(r#"task "open"#, 1).is_err());
    }

    const PING: &str = r#"
collaboration ping
participant A
  send "ping" to B as "Send ping" latency fixed(10)
  receive "pong" from B
end
participant B
  receive "ping" from A delay fixed(0)
  xor
    branch 0.25
      task "think"
    branch 0.75
  end
  send "pong" to A
end
"#;

    #[test]
    fn parses_small_model() {
        let m = parse_model(PING).unwrap();
        assert_eq!(m.name(), "ping");
        let a = &m.participants()[0];
        assert_eq!(
            a.steps[0],
            Step::Send {
                message: "ping".into(),
                to: "B".into(),
                activity: "Send ping".into(),
                delay: Delay::Fixed(1_000),
                latency: Delay::Fixed(10),
            }
        );
        let Step::Receive { activity, .. } = &a.steps[1] else {
            panic!()
        };
        assert_eq!(activity, "pong");
        let Step::Xor(branches) = &m.participants()[1].steps[1] else {
            panic!()
        };
        assert_eq!(branches.len(), 2);
        assert!(branches[1].steps.is_empty());
    }

    #[test]
    fn reports_line_numbers() {
        let text = "collaboration x\nparticipant A\n  jump\nend\n";
        match parse_model(text) {
            Err(ModelError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "collaboration x\nparticipant A\n  task \"t\" delay fixed(?)\nend\n";
        assert!(matches!(parse_model(text), Err(ModelError::BadDelay(_))));
    }

    #[test]
    fn missing_end() {
        let text = "collaboration x\nparticipant A\n  task \"t\"\n";
        assert!(matches!(parse_model(text), Err(ModelError::Parse { .. })));
    }

    #[test]
    fn deadlock_is_found() {
        let text = r#"
collaboration stuck
participant A
  xor
    branch 0.5
      receive "x" from B
    branch 0.5
  end
  send "y" to B
end
participant B
  receive "y" from A
  send "x" to A
end
"#;
        match parse_model(text) {
            Err(ModelError::ModelDeadlock { choices, blocked }) => {
                assert_eq!(choices, vec![0]);
                assert_eq!(blocked.len(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unmatched_send() {
        let text = "collaboration x\nparticipant A\n  send \"m\" to B\nend\nparticipant B\nend\n";
        assert!(matches!(parse_model(text), Err(ModelError::UnmatchedSend { .. })));
    }
}
