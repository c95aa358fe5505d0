//! Post text cleaning: URLs, mentions, emoji, stop words and query
//! keywords are removed, and posts with fewer than five characters left are
//! dropped.

use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use icu_properties::{props::ExtendedPictographic, CodePointSetData, CodePointSetDataBorrowed};
use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use unicode_segmentation::UnicodeSegmentation;

use crate::exec::{self, Execution};
use crate::{Error, Result};

/// Posts with fewer content characters than this are dropped.
pub const MIN_CLEAN_CHARS: usize = 5;

/// Query keywords, which occur in every collected post.
pub const DEFAULT_KEYWORDS: &[&str] = &[
    "havvind",
    "vindkraft",
    "vindmølle",
    "vindmøller",
    "vindmøllene",
    "vindturbiner",
    "vindenergi",
];

static URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?xi)
        (?: \b(?:https?|ftp)://\S+ )
      | (?: \bwww\.\S+ )
      | (?: \b(?:[a-z0-9-]+\.)+(?:com|no|org|net|io|co|info|eu|se|dk|uk|de|ly|gl|me|tv|be|fm|to|gov|edu)\b(?:/\S*)? )
        ",
    )
    .unwrap()
});

static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());

static PICTOGRAPHIC: LazyLock<CodePointSetDataBorrowed<'static>> =
    LazyLock::new(CodePointSetData::new::<ExtendedPictographic>);

/// Extended_Pictographic, variation selectors and the joiners and modifiers
/// that only occur inside emoji sequences.
pub fn is_emoji_char(c: char) -> bool {
    matches!(c,
        '\u{FE00}'..='\u{FE0F}'      // variation selectors
        | '\u{200D}'                 // zero width joiner
        | '\u{20E3}'                 // combining keycap
        | '\u{1F3FB}'..='\u{1F3FF}'  // skin tone modifiers
        | '\u{1F1E6}'..='\u{1F1FF}'  // regional indicators
        | '\u{E0020}'..='\u{E007F}') // tag characters
        || PICTOGRAPHIC.contains(c)
}

/// Normalized form used for stop word and keyword comparison.
pub fn normalize_term(term: &str) -> String {
    term.trim().nfc().collect::<String>().to_lowercase()
}

/// Stop word and keyword sets.
#[derive(Clone, Debug, Default)]
pub struct CleanConfig {
    pub stopwords: HashSet<String>,
    pub keywords: HashSet<String>,
}

impl CleanConfig {
    pub fn new<S: AsRef<str>>(stopwords: impl IntoIterator<Item = S>, keywords: impl IntoIterator<Item = S>) -> Self {
        let norm = |it: &mut dyn Iterator<Item = S>| {
            it.map(|s| normalize_term(s.as_ref()))
                .filter(|s| !s.is_empty())
                .collect::<HashSet<_>>()
        };
        Self {
            stopwords: norm(&mut stopwords.into_iter()),
            keywords: norm(&mut keywords.into_iter()),
        }
    }

    pub fn from_files(stopwords: &Path, keywords: Option<&Path>) -> Result<Self> {
        let stop = read_term_file(stopwords)?;
        let keys = match keywords {
            Some(p) => read_term_file(p)?,
            None => DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
        };
        Ok(Self::new(stop, keys))
    }

    fn is_removed(&self, token: &str) -> bool {
        self.stopwords.contains(token) || self.keywords.contains(token)
    }
}

/// One term per line; blank lines and lines starting with `#` are ignored.
pub fn read_term_file(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanedDocument {
    pub post_id: String,
    pub tokens: Vec<String>,
    pub raw_length: usize,
    /// Characters across tokens plus one separator between neighbours.
    pub clean_length: usize,
}

impl CleanedDocument {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Characters across tokens, separators excluded.
    pub fn content_chars(&self) -> usize {
        self.tokens.iter().map(|t| t.chars().count()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cleaned {
    Kept(CleanedDocument),
    Dropped { post_id: String, tokens: Vec<String> },
}

impl Cleaned {
    pub fn kept(self) -> Option<CleanedDocument> {
        match self {
            Cleaned::Kept(d) => Some(d),
            Cleaned::Dropped { .. } => None,
        }
    }

    pub fn tokens(&self) -> &[String] {
        match self {
            Cleaned::Kept(d) => &d.tokens,
            Cleaned::Dropped { tokens, .. } => tokens,
        }
    }
}

/// Tokens left after removing noise, stop words and keywords.
pub fn clean_tokens(text: &str, cfg: &CleanConfig) -> Vec<String> {
    let text: String = text.nfc().collect();
    let text = URL.replace_all(&text, " ");
    let text = MENTION.replace_all(&text, " ");
    let text: String = text
        .chars()
        .map(|c| if is_emoji_char(c) { ' ' } else { c })
        .collect::<String>()
        .to_lowercase();
    text.unicode_words()
        .filter(|w| !cfg.is_removed(w))
        .map(String::from)
        .collect()
}

pub fn clean(post_id: &str, text: &str, cfg: &CleanConfig) -> Cleaned {
    let tokens = clean_tokens(text, cfg);
    let content: usize = tokens.iter().map(|t| t.chars().count()).sum();
    if content < MIN_CLEAN_CHARS {
        return Cleaned::Dropped {
            post_id: post_id.to_string(),
            tokens,
        };
    }
    let clean_length = content + tokens.len().saturating_sub(1);
    Cleaned::Kept(CleanedDocument {
        post_id: post_id.to_string(),
        raw_length: text.chars().count(),
        clean_length,
        tokens,
    })
}

/// Clean `(post_id, text)` pairs, preserving order.
pub fn clean_all<'a>(
    items: &[(&'a str, &'a str)],
    cfg: &CleanConfig,
    exec: Execution,
) -> Vec<Cleaned> {
    exec::map(exec, items, |(id, text)| clean(id, text, cfg))
}
