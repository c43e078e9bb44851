use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::encoding::{encode, EncodedState, EncoderConfig, Token};
use super::PredictError;
use crate::event_model::{Event, Prefix};
use crate::scalar::Scalar;
use crate::tasks::{PredictionTask, TargetType, TaskKind};
use crate::views::ViewSpec;

pub const MODEL_FORMAT: &str = "collab-ppm/frequency-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Longest context used, at most the encoder window.
    pub order: usize,
    /// Observations a context needs before it is trusted; lower levels are used otherwise.
    pub min_count: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { order: 3, min_count: 1 }
    }
}

/// Count, sum and sum of squares of integer targets. Exact, so training is
/// independent of row order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumericStats {
    pub count: u64,
    #[serde(with = "decimal")]
    pub sum: u128,
    #[serde(with = "decimal")]
    pub sum_sq: u128,
}

/// `u128` as a decimal string; JSON numbers are not exact at this width.
mod decimal {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

impl NumericStats {
    fn add(&mut self, v: u64) {
        self.count += 1;
        self.sum += u128::from(v);
        self.sum_sq += u128::from(v) * u128::from(v);
    }

    pub fn mean<S: Scalar>(&self) -> S {
        S::ratio(self.sum, u128::from(self.count))
    }
}

type Context = Vec<Token>;

/// Serializes a map with non-string keys as a sequence of pairs.
mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K: Serialize, V: Serialize, S: Serializer>(
        map: &[BTreeMap<K, V>],
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let levels: Vec<Vec<(&K, &V)>> = map.iter().map(|m| m.iter().collect()).collect();
        levels.serialize(s)
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<Vec<BTreeMap<K, V>>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        let levels: Vec<Vec<(K, V)>> = Vec::deserialize(d)?;
        Ok(levels.into_iter().map(|l| l.into_iter().collect()).collect())
    }
}

/// Backoff tables, indexed by context length `0..=order`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Tables {
    Categorical {
        #[serde(with = "pairs")]
        levels: Vec<BTreeMap<Context, BTreeMap<String, u64>>>,
    },
    Numeric {
        #[serde(with = "pairs")]
        levels: Vec<BTreeMap<Context, NumericStats>>,
    },
}

/// The learned part of a model: what was trained and the frequency tables.
/// The view the model is applied through lives in [`TrainedModel`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyModel {
    pub kind: TaskKind,
    pub encoder: EncoderConfig,
    pub config: TrainConfig,
    pub source_hash: String,
    pub rows: u64,
    pub tables: Tables,
}

impl FrequencyModel {
    /// Canonical serialization of the learned model.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("model serializes")
    }

    pub fn target_type(&self) -> TargetType {
        match self.tables {
            Tables::Categorical { .. } => TargetType::Categorical,
            Tables::Numeric { .. } => TargetType::Numeric,
        }
    }
}

/// A model file: format tag, schema version, the task view and the learned model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub version: u32,
    pub view: ViewSpec,
    pub model: FrequencyModel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction<S> {
    Label {
        label: String,
        confidence: S,
        /// Normalized counts, sorted by label.
        distribution: Vec<(String, S)>,
        /// Context length the prediction was taken from.
        level: usize,
    },
    Value {
        estimate: S,
        level: usize,
    },
}

impl<S: Scalar> Prediction<S> {
    pub fn level(&self) -> usize {
        match self {
            Prediction::Label { level, .. } | Prediction::Value { level, .. } => *level,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Prediction::Label { label, .. } => Some(label),
            Prediction::Value { .. } => None,
        }
    }

    pub fn estimate(&self) -> Option<S> {
        match self {
            Prediction::Value { estimate, .. } => Some(*estimate),
            Prediction::Label { .. } => None,
        }
    }
}

/// Most frequent label; ties go to the lexicographically smallest label.
pub(crate) fn mode(counts: &BTreeMap<String, u64>) -> Option<(&String, u64)> {
    counts
        .iter()
        .fold(None, |best: Option<(&String, u64)>, (l, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((l, c)),
        })
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainedModel, PredictError> {
    if dataset.is_empty() {
        return Err(PredictError::EmptyDataset);
    }
    let encoder = dataset.provenance.encoder;
    if config.order > encoder.order {
        return Err(PredictError::InvalidConfig(format!(
            "order {} exceeds the encoder window {}",
            config.order, encoder.order
        )));
    }
    if config.min_count == 0 {
        return Err(PredictError::InvalidConfig("min_count must be at least 1".into()));
    }
    let task = &dataset.provenance.task;
    let levels = config.order + 1;
    let tables = match task.target_type() {
        TargetType::Categorical => {
            let mut levels = vec![BTreeMap::<Context, BTreeMap<String, u64>>::new(); levels];
            for row in &dataset.rows {
                let label = row
                    .target
                    .category()
                    .ok_or_else(|| PredictError::TargetMismatch(row.target.to_string()))?;
                for (j, table) in levels.iter_mut().enumerate() {
                    *table
                        .entry(row.state.context(j))
                        .or_default()
                        .entry(label.clone())
                        .or_insert(0) += 1;
                }
            }
            Tables::Categorical { levels }
        }
        TargetType::Numeric => {
            let mut levels = vec![BTreeMap::<Context, NumericStats>::new(); levels];
            for row in &dataset.rows {
                let v = row
                    .target
                    .numeric()
                    .ok_or_else(|| PredictError::TargetMismatch(format!("{:?}", row.target)))?;
                for (j, table) in levels.iter_mut().enumerate() {
                    table.entry(row.state.context(j)).or_default().add(v);
                }
            }
            Tables::Numeric { levels }
        }
    };
    Ok(TrainedModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        view: task.view.clone(),
        model: FrequencyModel {
            kind: task.kind.clone(),
            encoder,
            config: *config,
            source_hash: dataset.provenance.source_hash.clone(),
            rows: dataset.len() as u64,
            tables,
        },
    })
}

impl TrainedModel {
    pub fn task(&self) -> PredictionTask {
        PredictionTask::new(self.model.kind.clone(), self.view.clone())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    /// Loads a model file, refusing other formats and schema versions.
    pub fn from_json(text: &str) -> Result<Self, PredictError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PredictError::ModelFormat(e.to_string()))?;
        let format = value.get("format").and_then(|v| v.as_str());
        if format != Some(MODEL_FORMAT) {
            return Err(PredictError::ModelFormat(format!(
                "expected format {MODEL_FORMAT:?}, found {format:?}"
            )));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(u64::from(MODEL_VERSION)) {
            return Err(PredictError::ModelVersionMismatch {
                expected: MODEL_VERSION,
                found: version.map_or_else(|| "none".into(), |v| v.to_string()),
            });
        }
        serde_json::from_value(value).map_err(|e| PredictError::ModelFormat(e.to_string()))
    }

    /// Prediction for an already-encoded state.
    pub fn predict_state<S: Scalar>(&self, state: &EncodedState) -> Prediction<S> {
        let order = self.model.config.order;
        let min = self.model.config.min_count;
        match &self.model.tables {
            Tables::Categorical { levels } => {
                let (level, counts) = (1..=order)
                    .rev()
                    .find_map(|j| {
                        levels[j]
                            .get(&state.context(j))
                            .filter(|c| c.values().sum::<u64>() >= min)
                            .map(|c| (j, c))
                    })
                    .unwrap_or_else(|| (0, &levels[0][&Vec::new()]));
                let total: u64 = counts.values().sum();
                let (label, top) = mode(counts).expect("non-empty counts");
                Prediction::Label {
                    label: label.clone(),
                    confidence: S::ratio(u128::from(top), u128::from(total)),
                    distribution: counts
                        .iter()
                        .map(|(l, c)| (l.clone(), S::ratio(u128::from(*c), u128::from(total))))
                        .collect(),
                    level,
                }
            }
            Tables::Numeric { levels } => {
                let (level, stats) = (1..=order)
                    .rev()
                    .find_map(|j| {
                        levels[j]
                            .get(&state.context(j))
                            .filter(|s| s.count >= min)
                            .map(|s| (j, s))
                    })
                    .unwrap_or_else(|| (0, &levels[0][&Vec::new()]));
                Prediction::Value {
                    estimate: stats.mean(),
                    level,
                }
            }
        }
    }

    /// Applies the model view to a running case and predicts its target.
    pub fn predict_events<S: Scalar>(&self, events: &[Event]) -> Result<Prediction<S>, PredictError> {
        let in_view: Vec<Event> = events.iter().filter(|e| self.view.accepts(e)).cloned().collect();
        if in_view.is_empty() {
            return Err(PredictError::PrefixEmptyInView);
        }
        Ok(self.predict_state(&encode(&in_view, &self.model.encoder)))
    }
}

/// Predicts the target of a running case from its prefix.
pub fn predict<S: Scalar>(model: &TrainedModel, prefix: &Prefix<'_>) -> Result<Prediction<S>, PredictError> {
    model.predict_events(prefix.events())
}
