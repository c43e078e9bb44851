//! Prefix encoding: the last `n` activities of the prefix, left-padded with a
//! start symbol, optionally followed by the last participant and direction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::event_model::{Direction, Event};

/// One position of an encoded state. Serialized with a namespace prefix so
/// the start symbol can never collide with a real label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Token {
    Start,
    Activity(String),
    Participant(String),
    Direction(Direction),
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for Token {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        if s == "^" {
            return Ok(Token::Start);
        }
        let (ns, value) = s.split_once(':').ok_or_else(|| format!("bad token {s:?}"))?;
        match ns {
            "a" => Ok(Token::Activity(value.to_string())),
            "p" => Ok(Token::Participant(value.to_string())),
            "d" => match value {
                "send" => Ok(Token::Direction(Direction::Send)),
                "receive" => Ok(Token::Direction(Direction::Receive)),
                "none" => Ok(Token::Direction(Direction::None)),
                _ => Err(format!("bad direction token {s:?}")),
            },
            _ => Err(format!("bad token namespace {s:?}")),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Start => f.write_str("^"),
            Token::Activity(a) => write!(f, "a:{a}"),
            Token::Participant(p) => write!(f, "p:{p}"),
            Token::Direction(d) => write!(f, "d:{}", d.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Number of trailing activities kept.
    pub order: usize,
    pub with_participant: bool,
    pub with_direction: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            order: 3,
            with_participant: false,
            with_direction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedState {
    pub window: Vec<Token>,
    pub attrs: Vec<Token>,
}

impl EncodedState {
    /// Context used at backoff level `j`: the last `j` window tokens plus the
    /// attributes. Level 0 is the empty context.
    pub fn context(&self, j: usize) -> Vec<Token> {
        if j == 0 {
            return Vec::new();
        }
        let j = j.min(self.window.len());
        let mut ctx = self.window[self.window.len() - j..].to_vec();
        ctx.extend(self.attrs.iter().cloned());
        ctx
    }
}

impl fmt::Display for EncodedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<String> = self.window.iter().chain(&self.attrs).map(Token::to_string).collect();
        f.write_str(&tokens.join(" "))
    }
}

/// Encodes a non-empty event sequence (a prefix already in the task view).
pub fn encode(events: &[Event], cfg: &EncoderConfig) -> EncodedState {
    let n = cfg.order;
    let tail = &events[events.len().saturating_sub(n)..];
    let mut window = vec![Token::Start; n - tail.len()];
    window.extend(tail.iter().map(|e| Token::Activity(e.activity.clone())));
    let mut attrs = Vec::new();
    if let Some(last) = events.last() {
        if cfg.with_participant {
            attrs.push(Token::Participant(last.participant.clone()));
        }
        if cfg.with_direction {
            attrs.push(Token::Direction(last.direction));
        }
    }
    EncodedState { window, attrs }
}
