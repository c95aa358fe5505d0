//! Annotated training data and the `id,text,label` interchange file.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SentimentLabel;
use crate::textprep::{clean, CleanConfig, Cleaned, CleanedDocument};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedRow {
    pub id: String,
    pub text: String,
    pub label: SentimentLabel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedItem {
    pub doc: CleanedDocument,
    pub label: SentimentLabel,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotatedSet {
    pub items: Vec<AnnotatedItem>,
}

impl AnnotatedSet {
    pub fn new(items: Vec<AnnotatedItem>) -> Self {
        Self { items }
    }

    /// Clean every row; rows that clean down to residue are skipped and
    /// their ids returned.
    pub fn from_rows(rows: &[AnnotatedRow], cfg: &CleanConfig) -> (Self, Vec<String>) {
        let mut items = Vec::new();
        let mut skipped = Vec::new();
        for row in rows {
            match clean(&row.id, &row.text, cfg) {
                Cleaned::Kept(doc) => items.push(AnnotatedItem { doc, label: row.label }),
                Cleaned::Dropped { post_id, .. } => skipped.push(post_id),
            }
        }
        (Self { items }, skipped)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items per class, indexed by label.
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for it in &self.items {
            c[it.label.index()] += 1;
        }
        c
    }

    pub fn gold(&self) -> Vec<(String, SentimentLabel)> {
        self.items
            .iter()
            .map(|it| (it.doc.post_id.clone(), it.label))
            .collect()
    }

    /// Per-class shuffle with a fixed seed; `round(train_fraction * n_c)`
    /// items of each class go to the training half.
    pub fn stratified_split(&self, train_fraction: f64, seed: u64) -> (AnnotatedSet, AnnotatedSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for label in SentimentLabel::ALL {
            let mut class: Vec<&AnnotatedItem> =
                self.items.iter().filter(|it| it.label == label).collect();
            class.sort_by(|a, b| a.doc.post_id.cmp(&b.doc.post_id));
            class.shuffle(&mut rng);
            let n_train = (train_fraction * class.len() as f64).round() as usize;
            let (a, b) = class.split_at(n_train.min(class.len()));
            train.extend(a.iter().map(|it| (*it).clone()));
            test.extend(b.iter().map(|it| (*it).clone()));
        }
        (AnnotatedSet::new(train), AnnotatedSet::new(test))
    }
}

/// Read `id,text,label` rows (header required). A label outside {0, 1, 2}
/// is an error naming the row.
pub fn read_rows<R: Read>(reader: R) -> Result<Vec<AnnotatedRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<AnnotatedRow>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Input(format!("annotated row {}: {e}", i + 2))))
        .collect()
}

pub fn read_rows_file(path: &Path) -> Result<Vec<AnnotatedRow>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows(f)
}

pub fn write_rows<W: Write>(writer: W, rows: &[AnnotatedRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Input(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Input(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_rows_and_rejects_bad_labels() {
        let csv = "id,text,label\na,\"turbiner, nei takk\",0\nb,fint vær,1\n";
        let rows = read_rows(csv.as_bytes()).unwrap();
        assert_eq!(rows[0].text, "turbiner, nei takk");
        assert_eq!(rows[1].label, SentimentLabel::Neutral);
        let bad = "id,text,label\na,x,0\nb,y,3\n";
        let err = read_rows(bad.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
    }

    #[test]
    fn stratified_split_is_deterministic_and_balanced() {
        let items: Vec<AnnotatedItem> = (0..50)
            .map(|i| AnnotatedItem {
                doc: CleanedDocument {
                    post_id: format!("{i:03}"),
                    tokens: vec!["ord".into()],
                    raw_length: 3,
                    clean_length: 3,
                },
                label: SentimentLabel::ALL[i % 3],
            })
            .collect();
        let set = AnnotatedSet::new(items);
        let (tr, te) = set.stratified_split(0.8, 7);
        assert_eq!(tr.len() + te.len(), 50);
        // Classes of 17, 17 and 16 items: round(13.6) = 14, round(12.8) = 13.
        assert_eq!(tr.counts(), [14, 14, 13]);
        assert_eq!(te.counts(), [3, 3, 3]);
        let (tr2, _) = set.stratified_split(0.8, 7);
        assert_eq!(tr, tr2);
    }
}
