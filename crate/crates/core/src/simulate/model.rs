use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::engine::{run_case, ScriptOracle};
use super::ModelError;

const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Delay distribution in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delay {
    Fixed(u64),
    /// Inclusive integer range.
    Uniform(u64, u64),
    /// Exponential with the given mean (rate = 1 / mean).
    Exponential {
        mean: f64,
    },
}

impl Default for Delay {
    fn default() -> Self {
        Delay::Fixed(1_000)
    }
}

impl Delay {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match *self {
            Delay::Fixed(ms) => ms as i64,
            Delay::Uniform(a, b) => rng.random_range(a..=b) as i64,
            Delay::Exponential { mean } if mean <= 0.0 => 0,
            Delay::Exponential { mean } => {
                let exp = Exp::new(1.0 / mean).expect("positive rate");
                exp.sample(rng).round() as i64
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        match *self {
            Delay::Uniform(a, b) if a > b => Err(format!("uniform({a}, {b}) has an empty range")),
            Delay::Exponential { mean } if !mean.is_finite() || mean < 0.0 => {
                Err(format!("exp({mean}) needs a finite non-negative mean"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Fixed(ms) => write!(f, "fixed({ms})"),
            Delay::Uniform(a, b) => write!(f, "uniform({a}, {b})"),
            Delay::Exponential { mean } => write!(f, "exp({mean})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub probability: f64,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Task {
        activity: String,
        delay: Delay,
    },
    Send {
        message: String,
        to: String,
        activity: String,
        delay: Delay,
        /// Channel delay until the message is available to the receiver.
        latency: Delay,
    },
    Receive {
        message: String,
        from: String,
        activity: String,
        delay: Delay,
    },
    /// Exclusive choice, one branch taken with its probability.
    Xor(Vec<Branch>),
    /// Parallel split; all branches run and join at the end of the block.
    And(Vec<Vec<Step>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProcess {
    pub name: String,
    pub steps: Vec<Step>,
}

/// A validated collaboration: one block-structured process per participant,
/// synchronized by messages.
#[derive(Debug, Clone, PartialEq)]
pub struct CollabModel {
    name: String,
    participants: Vec<ParticipantProcess>,
}

fn walk<'a>(steps: &'a [Step], f: &mut impl FnMut(&'a Step)) {
    for s in steps {
        f(s);
        match s {
            Step::Xor(branches) => branches.iter().for_each(|b| walk(&b.steps, f)),
            Step::And(branches) => branches.iter().for_each(|b| walk(b, f)),
            _ => {}
        }
    }
}

impl CollabModel {
    /// Validates the structure and checks every combination of XOR choices
    /// for deadlocks.
    pub fn new(name: impl Into<String>, participants: Vec<ParticipantProcess>) -> Result<Self, ModelError> {
        let model = CollabModel {
            name: name.into(),
            participants,
        };
        model.check_structure()?;
        model.check_deadlock_free()?;
        Ok(model)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn participants(&self) -> &[ParticipantProcess] {
        &self.participants
    }

    pub fn participant_names(&self) -> impl Iterator<Item = &str> {
        self.participants.iter().map(|p| p.name.as_str())
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.participants.iter().position(|p| p.name == name)
    }

    fn check_structure(&self) -> Result<(), ModelError> {
        let mut names = HashSet::new();
        for p in &self.participants {
            if p.name.is_empty() {
                return Err(ModelError::Invalid("empty participant name".into()));
            }
            if !names.insert(p.name.as_str()) {
                return Err(ModelError::DuplicateParticipant(p.name.clone()));
            }
        }
        for p in &self.participants {
            let mut err = None;
            walk(&p.steps, &mut |s| {
                if err.is_some() {
                    return;
                }
                err = self.check_step(p, s).err();
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        Ok(())
    }

    fn check_step(&self, p: &ParticipantProcess, s: &Step) -> Result<(), ModelError> {
        let bad_delay = |d: &Delay| d.validate().map_err(ModelError::Invalid);
        match s {
            Step::Task { activity, delay } => {
                if activity.is_empty() {
                    return Err(ModelError::Invalid(format!("{}: task without a name", p.name)));
                }
                bad_delay(delay)
            }
            Step::Send {
                message,
                to,
                activity,
                delay,
                latency,
            } => {
                self.check_counterpart(p, to)?;
                if message.is_empty() || activity.is_empty() {
                    return Err(ModelError::Invalid(format!("{}: unnamed send", p.name)));
                }
                bad_delay(delay)?;
                bad_delay(latency)?;
                let receiver = &self.participants[self.index_of(to).expect("checked")];
                let mut matches = 0;
                walk(&receiver.steps, &mut |r| {
                    if let Step::Receive { message: m, from, .. } = r {
                        if m == message && *from == p.name {
                            matches += 1;
                        }
                    }
                });
                match matches {
                    1 => Ok(()),
                    0 => Err(ModelError::UnmatchedSend {
                        from: p.name.clone(),
                        to: to.clone(),
                        message: message.clone(),
                    }),
                    _ => Err(ModelError::AmbiguousReceive {
                        from: p.name.clone(),
                        to: to.clone(),
                        message: message.clone(),
                    }),
                }
            }
            Step::Receive {
                message,
                from,
                activity,
                delay,
            } => {
                self.check_counterpart(p, from)?;
                if message.is_empty() || activity.is_empty() {
                    return Err(ModelError::Invalid(format!("{}: unnamed receive", p.name)));
                }
                bad_delay(delay)?;
                let sender = &self.participants[self.index_of(from).expect("checked")];
                let mut found = false;
                walk(&sender.steps, &mut |r| {
                    if let Step::Send { message: m, to, .. } = r {
                        found |= m == message && *to == p.name;
                    }
                });
                if found {
                    Ok(())
                } else {
                    Err(ModelError::UnmatchedReceive {
                        to: p.name.clone(),
                        from: from.clone(),
                        message: message.clone(),
                    })
                }
            }
            Step::Xor(branches) => {
                if branches.is_empty() {
                    return Err(ModelError::Invalid(format!("{}: XOR without branches", p.name)));
                }
                if branches.iter().any(|b| !(0.0..=1.0).contains(&b.probability)) {
                    return Err(ModelError::Invalid(format!(
                        "{}: branch probability outside [0, 1]",
                        p.name
                    )));
                }
                let sum: f64 = branches.iter().map(|b| b.probability).sum();
                if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                    return Err(ModelError::ProbabilitySum {
                        participant: p.name.clone(),
                        sum,
                    });
                }
                Ok(())
            }
            Step::And(branches) => {
                if branches.is_empty() {
                    return Err(ModelError::Invalid(format!("{}: AND without branches", p.name)));
                }
                Ok(())
            }
        }
    }

    fn check_counterpart(&self, p: &ParticipantProcess, other: &str) -> Result<(), ModelError> {
        if other == p.name {
            return Err(ModelError::Invalid(format!("{}: message to itself", p.name)));
        }
        if self.index_of(other).is_none() {
            return Err(ModelError::UnknownParticipant {
                name: other.to_string(),
                referenced_by: p.name.clone(),
            });
        }
        Ok(())
    }

    /// Runs every combination of XOR outcomes with zero delays. Message
    /// receipt does not depend on timing, so completion of these runs decides
    /// deadlock freedom for all timings.
    fn check_deadlock_free(&self) -> Result<(), ModelError> {
        let mut script: Vec<usize> = Vec::new();
        loop {
            let mut oracle = ScriptOracle::new(script.clone());
            if let Err(blocked) = run_case(self, "check", 0, &mut oracle) {
                return Err(ModelError::ModelDeadlock {
                    choices: oracle.trail.iter().map(|(c, _)| *c).collect(),
                    blocked,
                });
            }
            // odometer over the recorded choice points
            let mut trail = oracle.trail;
            loop {
                match trail.pop() {
                    None => return Ok(()),
                    Some((c, n)) if c + 1 < n => {
                        script = trail.iter().map(|(c, _)| *c).collect();
                        script.push(c + 1);
                        break;
                    }
                    Some(_) => {}
                }
            }
        }
    }
}
