use std::collections::BTreeSet;
use std::fmt;

use super::dataset::{generate_dataset, DatasetOptions};
use super::model::{Prediction, TrainedModel};
use super::PredictError;
use crate::event_model::EventLog;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMetrics<S> {
    pub label: String,
    pub precision: S,
    pub recall: S,
    pub f1: S,
    /// Rows whose true target is this label.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scores<S> {
    Categorical {
        accuracy: S,
        macro_f1: S,
        per_label: Vec<LabelMetrics<S>>,
    },
    Numeric {
        mae: S,
        rmse: S,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics<S> {
    pub task: String,
    /// Rows scored.
    pub support: usize,
    pub undefined_excluded: usize,
    pub empty_prefix_excluded: usize,
    pub dropped_traces: usize,
    pub scores: Scores<S>,
}

fn f1<S: Scalar>(p: S, r: S) -> S {
    if p + r == S::zero() {
        S::zero()
    } else {
        (S::one() + S::one()) * p * r / (p + r)
    }
}

fn safe_ratio<S: Scalar>(num: usize, den: usize) -> S {
    if den == 0 {
        S::zero()
    } else {
        S::ratio(num as u128, den as u128)
    }
}

/// Categorical scores from (truth, prediction) pairs. Labels are the union
/// of true and predicted labels; undefined precision or recall counts as 0.
pub fn categorical_scores<S: Scalar>(pairs: &[(String, String)]) -> Scores<S> {
    let labels: BTreeSet<&str> = pairs.iter().flat_map(|(t, p)| [t.as_str(), p.as_str()]).collect();
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    let per_label: Vec<LabelMetrics<S>> = labels
        .into_iter()
        .map(|l| {
            let tp = pairs.iter().filter(|(t, p)| t == l && p == l).count();
            let predicted = pairs.iter().filter(|(_, p)| p == l).count();
            let support = pairs.iter().filter(|(t, _)| t == l).count();
            let precision = safe_ratio(tp, predicted);
            let recall = safe_ratio(tp, support);
            LabelMetrics {
                label: l.to_string(),
                precision,
                recall,
                f1: f1(precision, recall),
                support,
            }
        })
        .collect();
    let macro_f1 = if per_label.is_empty() {
        S::zero()
    } else {
        per_label.iter().fold(S::zero(), |acc, m| acc + m.f1) / S::from_count(per_label.len() as u128)
    };
    Scores::Categorical {
        accuracy: safe_ratio(correct, pairs.len()),
        macro_f1,
        per_label,
    }
}

pub fn numeric_scores<S: Scalar>(pairs: &[(S, S)]) -> Scores<S> {
    if pairs.is_empty() {
        return Scores::Numeric {
            mae: S::zero(),
            rmse: S::zero(),
        };
    }
    let n = S::from_count(pairs.len() as u128);
    let abs = pairs.iter().fold(S::zero(), |acc, (t, p)| acc + (*t - *p).abs());
    let sq = pairs.iter().fold(S::zero(), |acc, (t, p)| acc + (*t - *p) * (*t - *p));
    Scores::Numeric {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
    }
}

/// Scores the model on every (prefix, target) pair of `test_log` in the model view.
pub fn evaluate<S: Scalar>(model: &TrainedModel, test_log: &EventLog) -> Result<Metrics<S>, PredictError> {
    let task = model.task();
    let dataset = generate_dataset(test_log, &task, &model.model.encoder, &DatasetOptions::default())?;
    let predictions: Vec<Prediction<S>> = dataset.rows.iter().map(|r| model.predict_state(&r.state)).collect();
    let scores = match model.model.target_type() {
        crate::tasks::TargetType::Categorical => {
            let pairs: Vec<(String, String)> = dataset
                .rows
                .iter()
                .zip(&predictions)
                .map(|(r, p)| {
                    (
                        r.target.category().unwrap_or_default(),
                        p.label().unwrap_or_default().to_string(),
                    )
                })
                .collect();
            categorical_scores(&pairs)
        }
        crate::tasks::TargetType::Numeric => {
            let pairs: Vec<(S, S)> = dataset
                .rows
                .iter()
                .zip(&predictions)
                .map(|(r, p)| {
                    (
                        S::from_count(u128::from(r.target.numeric().unwrap_or(0))),
                        p.estimate().unwrap_or_else(S::zero),
                    )
                })
                .collect();
            numeric_scores(&pairs)
        }
    };
    Ok(Metrics {
        task: task.name(),
        support: dataset.len(),
        undefined_excluded: dataset.provenance.undefined_excluded,
        // prefixes of traces in the view are never empty
        empty_prefix_excluded: 0,
        dropped_traces: dataset.provenance.dropped_traces,
        scores,
    })
}

impl<S: Scalar> Metrics<S> {
    pub fn accuracy(&self) -> Option<S> {
        match &self.scores {
            Scores::Categorical { accuracy, .. } => Some(*accuracy),
            Scores::Numeric { .. } => None,
        }
    }

    pub fn mae(&self) -> Option<S> {
        match &self.scores {
            Scores::Numeric { mae, .. } => Some(*mae),
            Scores::Categorical { .. } => None,
        }
    }

    /// `metric,label,value,support` rows.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<[String; 4]> = Vec::new();
        let n = self.support.to_string();
        match &self.scores {
            Scores::Categorical {
                accuracy,
                macro_f1,
                per_label,
            } => {
                rows.push(["accuracy".into(), String::new(), accuracy.to_string(), n.clone()]);
                rows.push(["macro_f1".into(), String::new(), macro_f1.to_string(), n.clone()]);
                for m in per_label {
                    let s = m.support.to_string();
                    rows.push(["precision".into(), m.label.clone(), m.precision.to_string(), s.clone()]);
                    rows.push(["recall".into(), m.label.clone(), m.recall.to_string(), s.clone()]);
                    rows.push(["f1".into(), m.label.clone(), m.f1.to_string(), s]);
                }
            }
            Scores::Numeric { mae, rmse } => {
                rows.push(["mae".into(), String::new(), mae.to_string(), n.clone()]);
                rows.push(["rmse".into(), String::new(), rmse.to_string(), n.clone()]);
            }
        }
        for (name, v) in [
            ("excluded_undefined", self.undefined_excluded),
            ("excluded_empty_prefix", self.empty_prefix_excluded),
            ("dropped_traces", self.dropped_traces),
        ] {
            rows.push([name.into(), String::new(), v.to_string(), n.clone()]);
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["metric", "label", "value", "support"])
            .expect("in-memory");
        for r in rows {
            w.write_record(&r).expect("in-memory");
        }
        String::from_utf8(w.into_inner().expect("in-memory")).expect("utf-8")
    }
}

impl<S: Scalar> fmt::Display for Metrics<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "task     {}", self.task)?;
        writeln!(f, "support  {}", self.support)?;
        match &self.scores {
            Scores::Categorical {
                accuracy,
                macro_f1,
                per_label,
            } => {
                writeln!(f, "accuracy {accuracy:.4}")?;
                writeln!(f, "macro-F1 {macro_f1:.4}")?;
                let width = per_label.iter().map(|m| m.label.len()).max().unwrap_or(5).max(5);
                writeln!(f, "  {:<width$}  precision  recall  f1      support", "label")?;
                for m in per_label {
                    writeln!(
                        f,
                        "  {:<width$}  {:<9.4}  {:<6.4}  {:<6.4}  {}",
                        m.label, m.precision, m.recall, m.f1, m.support
                    )?;
                }
            }
            Scores::Numeric { mae, rmse } => {
                writeln!(f, "MAE      {mae:.4}")?;
                writeln!(f, "RMSE     {rmse:.4}")?;
            }
        }
        for (reason, n) in [
            ("undefined target", self.undefined_excluded),
            ("empty prefix in view", self.empty_prefix_excluded),
            ("traces dropped by view", self.dropped_traces),
        ] {
            writeln!(f, "excluded ({reason}) {n}")?;
        }
        Ok(())
    }
}
