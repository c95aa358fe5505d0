//! Sentiment labels, evaluation metrics, the hashed-feature baseline and the
//! external adapter protocol.

pub mod adapter;
pub mod annotated;
pub mod baseline;
pub mod metrics;
pub mod sampling;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::textprep::CleanedDocument;
use crate::{Error, Result};

pub use adapter::{AdapterAddress, AdapterOptions};
pub use annotated::{AnnotatedItem, AnnotatedSet};
pub use baseline::{train_baseline, BaselineConfig, BaselineModel};
pub use metrics::{evaluate, f1, MetricsReport, Scheme};

/// Ternary annotation: 0 negative, 1 neutral, 2 positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SentimentLabel {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 3] = [Self::Negative, Self::Neutral, Self::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Negative => "negative",
            Self::Neutral => "neutral",
            Self::Positive => "positive",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for SentimentLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for SentimentLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Self::from_index(v as usize)
            .ok_or_else(|| serde::de::Error::custom(format!("label {v} is not 0, 1 or 2")))
    }
}

/// Negative vs. non-negative view of the ternary scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLabel {
    Negative,
    NonNegative,
}

impl BinaryLabel {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Negative => "negative",
            Self::NonNegative => "non_negative",
        }
    }
}

/// Neutral and positive collapse into non-negative.
pub fn merge_to_binary(label: SentimentLabel) -> BinaryLabel {
    match label {
        SentimentLabel::Negative => BinaryLabel::Negative,
        SentimentLabel::Neutral | SentimentLabel::Positive => BinaryLabel::NonNegative,
    }
}

/// Index of the largest score; ties go to the lower index.
pub fn argmax(scores: &[f64; 3]) -> SentimentLabel {
    let mut best = 0;
    for i in 1..3 {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    SentimentLabel::ALL[best]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub post_id: String,
    /// Probabilities for negative, neutral, positive.
    pub scores: [f64; 3],
    pub label: SentimentLabel,
}

impl Prediction {
    /// Normalize non-negative scores onto the simplex and take the argmax.
    pub fn from_scores(post_id: impl Into<String>, raw: [f64; 3]) -> Result<Self> {
        if raw.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Contract(format!("scores {raw:?} must be finite and non-negative")));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Contract(format!("scores {raw:?} sum to zero")));
        }
        let scores = raw.map(|s| s / sum);
        Ok(Self {
            post_id: post_id.into(),
            label: argmax(&scores),
            scores,
        })
    }

    pub fn binary(&self) -> BinaryLabel {
        merge_to_binary(self.label)
    }

    /// Gap between the two highest scores.
    pub fn margin(&self) -> f64 {
        let mut s = self.scores;
        s.sort_by(|a, b| b.total_cmp(a));
        s[0] - s[1]
    }
}

pub enum Backend<'a> {
    Baseline(&'a BaselineModel),
    External {
        address: &'a AdapterAddress,
        options: &'a AdapterOptions,
    },
}

/// One prediction per document, sorted by post id.
pub fn classify_corpus(backend: &Backend<'_>, docs: &[CleanedDocument], exec: Execution) -> Result<Vec<Prediction>> {
    let mut preds = match backend {
        Backend::Baseline(model) => exec::map(exec, docs, |d| model.predict(d)),
        Backend::External { address, options } => {
            let requests: Vec<(String, String)> =
                docs.iter().map(|d| (d.post_id.clone(), d.text())).collect();
            adapter::classify_external(address, options, &requests)?
        }
    };
    preds.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    Ok(preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn merge_examples() {
        assert_eq!(merge_to_binary(SentimentLabel::Neutral), BinaryLabel::NonNegative);
        assert_eq!(merge_to_binary(SentimentLabel::Positive), BinaryLabel::NonNegative);
        assert_eq!(merge_to_binary(SentimentLabel::Negative), BinaryLabel::Negative);
    }

    #[test]
    fn argmax_and_tie_rule() {
        let p = Prediction::from_scores("a", [0.1, 0.2, 0.7]).unwrap();
        assert_eq!(p.label, SentimentLabel::Positive);
        let p = Prediction::from_scores("a", [0.4, 0.4, 0.2]).unwrap();
        assert_eq!(p.label, SentimentLabel::Negative);
        let p = Prediction::from_scores("a", [0.2, 0.4, 0.4]).unwrap();
        assert_eq!(p.label, SentimentLabel::Neutral);
        assert!((p.margin() - 0.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_scores_are_rejected() {
        assert!(Prediction::from_scores("a", [0.0, 0.0, 0.0]).is_err());
        assert!(Prediction::from_scores("a", [-0.1, 0.6, 0.5]).is_err());
        assert!(Prediction::from_scores("a", [f64::NAN, 0.6, 0.5]).is_err());
    }

    #[test]
    fn label_serializes_as_integer() {
        assert_eq!(serde_json::to_string(&SentimentLabel::Positive).unwrap(), "2");
        assert!(serde_json::from_str::<SentimentLabel>("3").is_err());
    }

    proptest! {
        #[test]
        fn scores_on_simplex_and_scale_invariant(a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.001f64..10.0, k in 0.01f64..1e6) {
            let p = Prediction::from_scores("x", [a, b, c]).unwrap();
            prop_assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let q = Prediction::from_scores("x", [a * k, b * k, c * k]).unwrap();
            prop_assert_eq!(p.label, q.label);
            prop_assert_eq!(p.label, argmax(&[a, b, c]));
        }
    }
}
