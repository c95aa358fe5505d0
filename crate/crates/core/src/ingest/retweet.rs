//! Detection and repair of retweets truncated at the legacy 140 character
//! limit.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;

use super::record::{PostKind, PostRecord};

/// Minimum shared prefix, in characters, between a truncated body and its
/// original.
pub const MIN_MATCH_PREFIX: usize = 20;

const ELLIPSIS: char = '\u{2026}';

static STANDARD_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^RT @([A-Za-z0-9_]{1,15}):[ \t]*").unwrap());
static LEGACY_MARKER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^RT ?: ?@([A-Za-z0-9_]{1,15})(?-u:\b):?[ \t]*").unwrap()
});

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarkerForm {
    /// `RT @handle: text`
    Standard,
    /// `RT : @handle text`
    Legacy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetweetMarker<'a> {
    pub handle: &'a str,
    pub form: MarkerForm,
    /// Byte offset where the retweeted body starts.
    pub body_start: usize,
}

impl<'a> RetweetMarker<'a> {
    pub fn prefix<'t>(&self, text: &'t str) -> &'t str {
        &text[..self.body_start]
    }
}

/// Parse a leading retweet marker, if any.
pub fn parse_marker(text: &str) -> Option<RetweetMarker<'_>> {
    let (caps, form) = match STANDARD_MARKER.captures(text) {
        Some(c) => (c, MarkerForm::Standard),
        None => (LEGACY_MARKER.captures(text)?, MarkerForm::Legacy),
    };
    let handle = caps.get(1)?.as_str();
    Some(RetweetMarker {
        handle,
        form,
        body_start: caps.get(0)?.end(),
    })
}

fn strip_truncation_suffix(text: &str) -> Option<&str> {
    let t = text.trim_end();
    t.strip_suffix("...")
        .or_else(|| t.strip_suffix(ELLIPSIS))
}

/// True iff `text` is a retweet marker followed by a body cut off with
/// `...` or U+2026.
pub fn is_truncated_text(text: &str) -> bool {
    parse_marker(text).is_some() && strip_truncation_suffix(text).is_some()
}

pub fn detect_truncated_retweet(record: &PostRecord) -> bool {
    is_truncated_text(&record.text)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RepairStats {
    pub truncated: usize,
    pub repaired: usize,
    pub dropped: usize,
    /// Repairs where two originals shared the longest matching prefix.
    pub ambiguous: usize,
    pub standard_markers: usize,
    pub legacy_markers: usize,
}

#[derive(Clone, Debug)]
pub struct RepairOutcome {
    /// Retained records, in input order.
    pub records: Vec<PostRecord>,
    /// Ids of truncated retweets whose original is not in the corpus.
    pub dropped_ids: Vec<String>,
    pub stats: RepairStats,
}

fn common_prefix_chars(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

/// Restore truncated retweets from originals present in the corpus.
///
/// A truncated retweet of `@handle` is matched against the non-retweet posts
/// of `handle` by the longest common prefix of the visible body (at least
/// [`MIN_MATCH_PREFIX`] characters). Ties go to the earliest original, then
/// the smallest id. The repaired text keeps the marker as written followed by
/// the original's full text; the retweeting author is unchanged. Retweets
/// with no original are dropped. Quote posts are never treated as retweets.
pub fn repair_retweets(corpus: Vec<PostRecord>) -> RepairOutcome {
    let mut originals: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, rec) in corpus.iter().enumerate() {
        if rec.kind != PostKind::Retweet && parse_marker(&rec.text).is_none() {
            originals
                .entry(rec.author_handle.to_ascii_lowercase())
                .or_default()
                .push(i);
        }
    }

    let mut stats = RepairStats::default();
    let mut replacements: Vec<(usize, String)> = Vec::new();
    let mut drop = vec![false; corpus.len()];

    for (i, rec) in corpus.iter().enumerate() {
        if rec.kind == PostKind::Quote || !is_truncated_text(&rec.text) {
            continue;
        }
        let marker = parse_marker(&rec.text).expect("truncated text has a marker");
        stats.truncated += 1;
        match marker.form {
            MarkerForm::Standard => stats.standard_markers += 1,
            MarkerForm::Legacy => stats.legacy_markers += 1,
        }
        let body = &rec.text[marker.body_start..];
        let visible = strip_truncation_suffix(body).unwrap_or(body).trim_end();
        let candidates = originals
            .get(&marker.handle.to_ascii_lowercase())
            .map(Vec::as_slice)
            .unwrap_or_default();

        // Already restored: the body is some original's full text.
        if candidates.iter().any(|&j| corpus[j].text == body) {
            continue;
        }

        let mut best: Option<(usize, usize)> = None; // (prefix, index)
        let mut tied = false;
        for &j in candidates {
            let cand = &corpus[j];
            let prefix = common_prefix_chars(visible, &cand.text);
            if prefix < MIN_MATCH_PREFIX {
                continue;
            }
            match best {
                None => best = Some((prefix, j)),
                Some((bp, bj)) => {
                    if prefix > bp {
                        best = Some((prefix, j));
                        tied = false;
                    } else if prefix == bp {
                        tied = true;
                        if corpus[j].sort_key() < corpus[bj].sort_key() {
                            best = Some((prefix, j));
                        }
                    }
                }
            }
        }

        match best {
            Some((_, j)) => {
                if tied {
                    stats.ambiguous += 1;
                    log::info!(
                        "retweet {} matches several originals of @{}; using {}",
                        rec.id,
                        marker.handle,
                        corpus[j].id
                    );
                }
                let text = format!("{}{}", marker.prefix(&rec.text), corpus[j].text);
                replacements.push((i, text));
                stats.repaired += 1;
            }
            None => {
                drop[i] = true;
                stats.dropped += 1;
            }
        }
    }

    let mut corpus = corpus;
    for (i, text) in replacements {
        corpus[i].text = text;
    }
    let mut dropped_ids = Vec::new();
    let records = corpus
        .into_iter()
        .zip(drop)
        .filter_map(|(rec, d)| {
            if d {
                dropped_ids.push(rec.id);
                None
            } else {
                Some(rec)
            }
        })
        .collect();

    RepairOutcome {
        records,
        dropped_ids,
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::rfc3339_secs;

    fn post(id: &str, handle: &str, ts: &str, text: &str, kind: PostKind) -> PostRecord {
        PostRecord {
            id: id.into(),
            author_id: format!("id_{handle}"),
            author_handle: handle.into(),
            created_at: rfc3339_secs::parse(ts).unwrap(),
            text: text.into(),
            like_count: 0,
            retweet_count: 0,
            post_geo: None,
            user_location: Some("Oslo".into()),
            kind,
        }
    }

    const ORIGINAL: &str = "Vindkraftverkene på Frøya ødelegger et unikt kystlandskap og fuglelivet, \
                            og gevinsten for klimaet er langt mindre enn lovet av utbyggerne";

    #[test]
    fn detects_truncation_suffixes() {
        assert!(is_truncated_text("RT @user1: great point about\u{2026}"));
        assert!(is_truncated_text("RT @user1: great point about..."));
        assert!(is_truncated_text("RT : @user1 great point about..."));
        assert!(!is_truncated_text("RT @user1: complete short retweet."));
        assert!(!is_truncated_text("I disagree with @user1..."));
        // handle longer than 15 characters
        assert!(!is_truncated_text("RT @abcdefghijklmnopq: text\u{2026}"));
    }

    #[test]
    fn marker_forms() {
        let m = parse_marker("RT @user1: hei").unwrap();
        assert_eq!((m.handle, m.form), ("user1", MarkerForm::Standard));
        assert_eq!(&"RT @user1: hei"[m.body_start..], "hei");
        let m = parse_marker("RT : @user_2 hei").unwrap();
        assert_eq!((m.handle, m.form), ("user_2", MarkerForm::Legacy));
        assert_eq!(&"RT : @user_2 hei"[m.body_start..], "hei");
        assert!(parse_marker("RTfoo @x: y").is_none());
    }

    #[test]
    fn repairs_when_original_present() {
        let truncated: String = ORIGINAL.chars().take(100).collect::<String>() + "\u{2026}";
        let corpus = vec![
            post("1", "orig", "2019-01-01T00:00:00Z", ORIGINAL, PostKind::Original),
            post(
                "2",
                "fan",
                "2019-01-02T00:00:00Z",
                &format!("RT @orig: {truncated}"),
                PostKind::Retweet,
            ),
        ];
        let out = repair_retweets(corpus);
        assert_eq!(out.stats.repaired, 1);
        assert_eq!(out.stats.dropped, 0);
        assert_eq!(out.records[1].text, format!("RT @orig: {ORIGINAL}"));
        assert_eq!(out.records[1].author_handle, "fan");
    }

    #[test]
    fn drops_orphans() {
        let corpus = vec![post(
            "2",
            "fan",
            "2019-01-02T00:00:00Z",
            "RT @ghost: this original was never collected in the archive\u{2026}",
            PostKind::Retweet,
        )];
        let out = repair_retweets(corpus);
        assert!(out.records.is_empty());
        assert_eq!(out.dropped_ids, vec!["2".to_string()]);
    }

    #[test]
    fn quotes_are_left_alone() {
        let corpus = vec![post(
            "3",
            "fan",
            "2019-01-02T00:00:00Z",
            "RT @ghost: quoting with commentary that got cut\u{2026}",
            PostKind::Quote,
        )];
        let out = repair_retweets(corpus.clone());
        assert_eq!(out.records, corpus);
    }

    #[test]
    fn tie_goes_to_earliest_original() {
        let late = format!("{ORIGINAL} (oppdatert)");
        let early = format!("{ORIGINAL} (første)");
        let truncated: String = ORIGINAL.chars().take(60).collect::<String>() + "...";
        let corpus = vec![
            post("a", "orig", "2019-03-01T00:00:00Z", &late, PostKind::Original),
            post("b", "orig", "2019-02-01T00:00:00Z", &early, PostKind::Original),
            post(
                "c",
                "fan",
                "2019-04-01T00:00:00Z",
                &format!("RT @orig: {truncated}"),
                PostKind::Retweet,
            ),
        ];
        let out = repair_retweets(corpus);
        assert_eq!(out.stats.ambiguous, 1);
        assert_eq!(out.records[2].text, format!("RT @orig: {early}"));
    }

    #[test]
    fn no_retweets_is_identity_and_repair_is_idempotent() {
        let corpus = vec![
            post("1", "a", "2019-01-01T00:00:00Z", "hei", PostKind::Original),
            post("2", "b", "2019-01-01T00:00:00Z", "hallo…", PostKind::Original),
        ];
        let once = repair_retweets(corpus.clone());
        assert_eq!(once.records, corpus);

        let ends_with_ellipsis = format!("{ORIGINAL}\u{2026}");
        let truncated: String = ORIGINAL.chars().take(50).collect::<String>() + "\u{2026}";
        let corpus = vec![
            post("1", "orig", "2019-01-01T00:00:00Z", &ends_with_ellipsis, PostKind::Original),
            post("9", "orig", "2020-01-01T00:00:00Z", &format!("{ends_with_ellipsis} mer"), PostKind::Original),
            post("2", "fan", "2019-01-02T00:00:00Z", &format!("RT @orig: {truncated}"), PostKind::Retweet),
        ];
        let once = repair_retweets(corpus).records;
        let twice = repair_retweets(once.clone()).records;
        assert_eq!(once, twice);
    }
}
