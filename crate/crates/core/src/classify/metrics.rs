//! Precision, recall and F1 from a confusion matrix.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{merge_to_binary, Prediction, SentimentLabel};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Ternary,
    Binary,
}

impl Scheme {
    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            Scheme::Ternary => &["negative", "neutral", "positive"],
            Scheme::Binary => &["negative", "non_negative"],
        }
    }

    pub fn class_of(self, label: SentimentLabel) -> usize {
        match self {
            Scheme::Ternary => label.index(),
            Scheme::Binary => merge_to_binary(label).index(),
        }
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> Result<f64> {
    for (name, v) in [("precision", precision), ("recall", recall)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Contract(format!("{name} {v} is outside [0, 1]")));
        }
    }
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * (precision * recall) / (precision + recall))
}

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_indices(n_classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut counts = vec![vec![0u64; n_classes]; n_classes];
        for (truth, pred) in pairs {
            counts[truth][pred] += 1;
        }
        Self {
            classes: (0..n_classes).map(|i| i.to_string()).collect(),
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.counts.len())
            .filter(|&t| t != class)
            .map(|t| self.counts[t][class])
            .sum()
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.counts.len())
            .filter(|&p| p != class)
            .map(|p| self.counts[class][p])
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scheme: Scheme,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_confusion(scheme: Scheme, mut confusion: ConfusionMatrix) -> Self {
        let names = scheme.class_names();
        confusion.classes = names.iter().map(|s| s.to_string()).collect();
        let per_class: Vec<ClassMetrics> = (0..names.len())
            .map(|c| {
                let tp = confusion.true_positives(c);
                let precision = ratio(tp, tp + confusion.false_positives(c));
                let recall = ratio(tp, tp + confusion.false_negatives(c));
                ClassMetrics {
                    class: names[c].to_string(),
                    precision,
                    recall,
                    f1: f1(precision, recall).expect("ratios lie in [0, 1]"),
                    support: confusion.counts[c].iter().sum(),
                }
            })
            .collect();
        let k = per_class.len() as f64;
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k;
        let correct: u64 = (0..names.len()).map(|c| confusion.true_positives(c)).sum();
        Self {
            scheme,
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            accuracy: ratio(correct, confusion.total()),
            per_class,
            confusion,
        }
    }

    pub fn class(&self, name: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|m| m.class == name)
    }
}

/// Evaluate predictions against gold labels sharing the same id set.
pub fn evaluate(predictions: &[Prediction], gold: &[(String, SentimentLabel)], scheme: Scheme) -> Result<MetricsReport> {
    let gold_by_id: HashMap<&str, SentimentLabel> =
        gold.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    if gold_by_id.len() != gold.len() {
        return Err(Error::Input("gold labels contain repeated ids".into()));
    }
    if predictions.len() != gold.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    let mut pairs = Vec::with_capacity(predictions.len());
    for p in predictions {
        let truth = gold_by_id
            .get(p.post_id.as_str())
            .ok_or_else(|| Error::Input(format!("prediction {:?} has no gold label", p.post_id)))?;
        if !seen.insert(p.post_id.as_str()) {
            return Err(Error::Input(format!("prediction {:?} appears twice", p.post_id)));
        }
        pairs.push((scheme.class_of(*truth), scheme.class_of(p.label)));
    }
    let confusion = ConfusionMatrix::from_indices(scheme.class_names().len(), pairs);
    Ok(MetricsReport::from_confusion(scheme, confusion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use SentimentLabel::*;

    fn pred(id: &str, label: SentimentLabel) -> Prediction {
        let mut s = [0.1; 3];
        s[label.index()] = 0.8;
        Prediction::from_scores(id, s).unwrap()
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(1.0, 1.0).unwrap(), 1.0);
        assert!((f1(0.8, 1.0).unwrap() - 16.0 / 18.0).abs() < 1e-15);
        assert_eq!(f1(0.0, 0.0).unwrap(), 0.0);
        assert!(f1(1.2, 0.5).is_err());
        assert!(f1(0.5, -0.1).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let gold: Vec<(String, SentimentLabel)> = [Negative, Neutral, Positive, Neutral]
            .iter()
            .enumerate()
            .map(|(i, l)| (i.to_string(), *l))
            .collect();
        let preds: Vec<Prediction> = gold.iter().map(|(id, l)| pred(id, *l)).collect();
        for scheme in [Scheme::Ternary, Scheme::Binary] {
            let r = evaluate(&preds, &gold, scheme).unwrap();
            assert_eq!(r.macro_f1, 1.0);
            assert!(r.per_class.iter().all(|m| m.precision == 1.0 && m.recall == 1.0));
            let c = &r.confusion.counts;
            for (i, row) in c.iter().enumerate() {
                for (j, &n) in row.iter().enumerate() {
                    if i != j {
                        assert_eq!(n, 0);
                    }
                }
            }
        }
    }

    /// Ten items worked by hand.
    ///
    /// gold:  N N N N Z Z Z P P P   (N negative, Z neutral, P positive)
    /// pred:  N N N Z Z Z N P Z Z
    ///
    /// negative: tp 3 fp 1 fn 1 -> p 3/4 r 3/4 f1 3/4
    /// neutral:  tp 2 fp 3 fn 1 -> p 2/5 r 2/3 f1 1/2
    /// positive: tp 1 fp 0 fn 2 -> p 1   r 1/3 f1 1/2
    #[test]
    fn hand_worked_ten_items() {
        let g = [Negative, Negative, Negative, Negative, Neutral, Neutral, Neutral, Positive, Positive, Positive];
        let p = [Negative, Negative, Negative, Neutral, Neutral, Neutral, Negative, Positive, Neutral, Neutral];
        let gold: Vec<_> = g.iter().enumerate().map(|(i, l)| (i.to_string(), *l)).collect();
        let preds: Vec<_> = p.iter().enumerate().map(|(i, l)| pred(&i.to_string(), *l)).collect();
        let r = evaluate(&preds, &gold, Scheme::Ternary).unwrap();
        let neg = r.class("negative").unwrap();
        assert!((neg.precision - 0.75).abs() < 1e-15 && (neg.recall - 0.75).abs() < 1e-15);
        assert!((neg.f1 - 0.75).abs() < 1e-15);
        let neu = r.class("neutral").unwrap();
        assert!((neu.precision - 0.4).abs() < 1e-15);
        assert!((neu.f1 - 0.5).abs() < 1e-15);
        let pos = r.class("positive").unwrap();
        assert_eq!(pos.precision, 1.0);
        assert!((pos.f1 - 0.5).abs() < 1e-15);
        assert!((r.macro_f1 - (0.75 + 0.5 + 0.5) / 3.0).abs() < 1e-15);
        assert_eq!(r.confusion.total(), 10);

        // Binary: negative tp 3 fp 1 fn 1; non-negative tp 5 fp 1 fn 1.
        let b = evaluate(&preds, &gold, Scheme::Binary).unwrap();
        assert!((b.class("negative").unwrap().f1 - 0.75).abs() < 1e-15);
        assert!((b.class("non_negative").unwrap().f1 - 5.0 / 6.0).abs() < 1e-15);
    }

    /// Imbalanced fixture where the negative class is easiest.
    ///
    /// 40 negative: 28 -> neg, 12 -> neutral
    /// 70 neutral:  12 -> neg, 50 -> neutral, 8 -> positive
    /// 20 positive: 16 -> neutral, 4 -> positive
    ///
    /// negative: p 28/40 r 28/40 f1 0.7
    /// neutral:  p 50/78 r 50/70 f1 100/148
    /// positive: p 4/12  r 4/20  f1 8/32
    #[test]
    fn imbalanced_fixture_negative_f1_point_seven() {
        let mut gold = Vec::new();
        let mut preds = Vec::new();
        let mut push = |t: SentimentLabel, p: SentimentLabel, n: usize| {
            for _ in 0..n {
                let id = format!("{}", gold.len());
                preds.push(pred(&id, p));
                gold.push((id, t));
            }
        };
        push(Negative, Negative, 28);
        push(Negative, Neutral, 12);
        push(Neutral, Negative, 12);
        push(Neutral, Neutral, 50);
        push(Neutral, Positive, 8);
        push(Positive, Neutral, 16);
        push(Positive, Positive, 4);
        let r = evaluate(&preds, &gold, Scheme::Ternary).unwrap();
        assert!((r.class("negative").unwrap().f1 - 0.7).abs() < 1e-12);
        let expected_macro = (0.7 + 100.0 / 148.0 + 8.0 / 32.0) / 3.0;
        assert!((r.macro_f1 - expected_macro).abs() < 1e-12);
        assert!((r.macro_f1 - 0.54).abs() < 0.01);
    }

    #[test]
    fn id_mismatch_is_fatal() {
        let gold = vec![("a".to_string(), Negative)];
        assert!(evaluate(&[pred("b", Negative)], &gold, Scheme::Ternary).is_err());
        assert!(evaluate(&[], &gold, Scheme::Ternary).is_err());
    }

    #[test]
    fn merge_commutes_with_evaluation() {
        let g = [Negative, Neutral, Positive, Positive, Neutral, Negative];
        let p = [Neutral, Positive, Positive, Negative, Neutral, Negative];
        let gold: Vec<_> = g.iter().enumerate().map(|(i, l)| (i.to_string(), *l)).collect();
        let preds: Vec<_> = p.iter().enumerate().map(|(i, l)| pred(&i.to_string(), *l)).collect();
        let inside = evaluate(&preds, &gold, Scheme::Binary).unwrap();
        let merged_pairs = g
            .iter()
            .zip(&p)
            .map(|(t, q)| (merge_to_binary(*t).index(), merge_to_binary(*q).index()));
        let outside = MetricsReport::from_confusion(Scheme::Binary, ConfusionMatrix::from_indices(2, merged_pairs));
        assert_eq!(inside, outside);
    }
}
