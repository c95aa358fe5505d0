//! Seeded synthetic corpora for tests, benchmarks and the demo data set.
//!
//! Nothing here is a model of real posting behaviour. The generators only
//! exercise the code paths: geodata in both fields, illegible and missing
//! locations, truncated and orphaned retweets, residue-only posts and
//! class-specific vocabulary for the baseline classifier.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, Datelike, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::annotated::{write_rows, AnnotatedRow};
use crate::classify::SentimentLabel;
use crate::geocode::{default_regions, Gazetteer, RegionCode};
use crate::ingest::record::{PostKind, PostRecord};
use crate::textprep::DEFAULT_KEYWORDS;
use crate::{Error, Result};

/// `(place, NUTS3 code, population)` for the demo gazetteer.
pub const DEMO_PLACES: &[(&str, &str, u64)] = &[
    ("Oslo", "NO081", 709_000),
    ("Drammen", "NO082", 102_000),
    ("Fredrikstad", "NO082", 84_000),
    ("Lillestrøm", "NO082", 91_000),
    ("Asker", "NO082", 96_000),
    ("Bergen", "NO0A2", 289_000),
    ("Os", "NO0A2", 21_000),
    ("Voss", "NO0A2", 16_000),
    ("Stavanger", "NO0A1", 146_000),
    ("Sandnes", "NO0A1", 81_000),
    ("Haugesund", "NO0A1", 37_000),
    ("Trondheim", "NO060", 212_000),
    ("Steinkjer", "NO060", 24_000),
    ("Bodø", "NO071", 53_000),
    ("Narvik", "NO071", 22_000),
    ("Tromsø", "NO074", 78_000),
    ("Alta", "NO074", 21_000),
    ("Hammerfest", "NO074", 11_000),
    ("Skien", "NO091", 55_000),
    ("Tønsberg", "NO091", 58_000),
    ("Larvik", "NO091", 48_000),
    ("Kristiansand", "NO092", 116_000),
    ("Arendal", "NO092", 45_000),
    ("Ålesund", "NO0A3", 67_000),
    ("Molde", "NO0A3", 32_000),
    ("Hamar", "NO020", 32_000),
    ("Lillehammer", "NO020", 28_000),
    ("Gjøvik", "NO020", 31_000),
];

pub const DEMO_STOPWORDS: &[&str] = &[
    "rt", "amp", "og", "i", "jeg", "det", "at", "en", "et", "den", "til", "er", "som", "på", "de",
    "med", "han", "av", "ikke", "der", "så", "var", "meg", "seg", "men", "har", "om", "vi", "min",
    "ha", "hadde", "hun", "nå", "over", "da", "ved", "fra", "du", "ut", "sin", "dem", "oss", "opp",
    "man", "kan", "hvor", "eller", "hva", "skal", "her", "alle", "vil", "bli", "ble", "når", "være",
    "noen", "noe", "dette", "disse", "for", "mot", "å", "også", "bare", "enn", "fordi", "før",
];

pub const NEGATIVE_TERMS: &[&str] = &[
    "støy", "ødelegger", "protest", "naturinngrep", "stygg", "fugledød", "sløsing", "skandale",
    "motstand", "forurensning", "tapt", "ulovlig", "raserer", "sint", "feilslått",
];
pub const NEUTRAL_TERMS: &[&str] = &[
    "rapport", "møte", "høring", "konsesjon", "megawatt", "søknad", "kommunestyret", "plan",
    "prosjekt", "nyhet", "utredning", "tall", "produksjon", "anlegg", "behandling",
];
pub const POSITIVE_TERMS: &[&str] = &[
    "fantastisk", "grønn", "fremtid", "løsning", "bra", "arbeidsplasser", "utslippsfritt", "heia",
    "glad", "suksess", "investering", "rent", "stolt", "muligheter", "vekst",
];
const FILLER: &[&str] = &[
    "dag", "nye", "kommunen", "folk", "tror", "saken", "området", "igjen", "mange", "landet",
    "regjeringen", "fjellet", "kysten", "strøm", "pris", "vinter", "sommer", "uke", "politikk",
    "debatt", "naboer", "fylket", "energi", "turbiner", "havet",
];

/// Posts per year 2008–2022, used as year weights so synthetic corpora
/// grow over time the way the collected archive did.
pub const YEAR_WEIGHTS: &[(i32, u32)] = &[
    (2008, 16), (2009, 411), (2010, 682), (2011, 931), (2012, 2163), (2013, 1910), (2014, 2129),
    (2015, 2497), (2016, 2560), (2017, 2542), (2018, 4442), (2019, 15783), (2020, 13288),
    (2021, 9512), (2022, 9961),
];

pub fn demo_gazetteer() -> Gazetteer {
    let places = DEMO_PLACES
        .iter()
        .map(|&(p, c, n)| (p.to_string(), RegionCode::new(c), n))
        .collect();
    Gazetteer::new(places, default_regions()).expect("demo gazetteer is valid")
}

fn terms(label: SentimentLabel) -> &'static [&'static str] {
    match label {
        SentimentLabel::Negative => NEGATIVE_TERMS,
        SentimentLabel::Neutral => NEUTRAL_TERMS,
        SentimentLabel::Positive => POSITIVE_TERMS,
    }
}

/// Draw a label with Negative / Neutral / Positive weights.
fn draw_label(rng: &mut ChaCha8Rng, weights: [u32; 3]) -> SentimentLabel {
    let total: u32 = weights.iter().sum();
    let mut x = rng.random_range(0..total);
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return SentimentLabel::from_index(i).expect("index < 3");
        }
        x -= w;
    }
    SentimentLabel::Positive
}

/// Text carrying `label`'s vocabulary. With probability `noise` one of the
/// signature words comes from another class.
pub fn labeled_text(rng: &mut ChaCha8Rng, label: SentimentLabel, noise: f64) -> String {
    let mut words: Vec<&str> = Vec::new();
    let own = terms(label);
    for _ in 0..3 {
        words.push(own.choose(rng).expect("non-empty"));
    }
    if rng.random_bool(noise) {
        let other = SentimentLabel::from_index((label.index() + rng.random_range(1..3)) % 3).expect("index < 3");
        words[0] = terms(other).choose(rng).expect("non-empty");
    }
    for _ in 0..rng.random_range(3..7) {
        words.push(FILLER.choose(rng).expect("non-empty"));
    }
    for _ in 0..rng.random_range(1..4) {
        words.push(DEMO_STOPWORDS[2..].choose(rng).expect("non-empty"));
    }
    words.push(DEFAULT_KEYWORDS.choose(rng).expect("non-empty"));
    words.shuffle(rng);
    let mut text = words.join(" ");
    if let Some(first) = text.get(..1) {
        let upper = first.to_uppercase();
        text.replace_range(..1, &upper);
    }
    text
}

/// Annotated rows with class proportions `weights` (Negative, Neutral,
/// Positive).
pub fn labeled_rows(n: usize, weights: [u32; 3], noise: f64, seed: u64) -> Vec<AnnotatedRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = draw_label(&mut rng, weights);
            AnnotatedRow {
                id: format!("a{i:06}"),
                text: labeled_text(&mut rng, label, noise),
                label,
            }
        })
        .collect()
}

/// Label proportions of the manually annotated set (negative, neutral,
/// positive).
pub const ANNOTATION_WEIGHTS: [u32; 3] = [1784, 3149, 967];

fn random_timestamp(rng: &mut ChaCha8Rng, year: i32) -> DateTime<Utc> {
    let start = Utc.with_ymd_and_hms(year, 1, 1, 0, 0, 0).unwrap().timestamp();
    let end = Utc.with_ymd_and_hms(year + 1, 1, 1, 0, 0, 0).unwrap().timestamp();
    Utc.timestamp_opt(rng.random_range(start..end), 0).unwrap()
}

fn weighted_year(rng: &mut ChaCha8Rng) -> i32 {
    let total: u32 = YEAR_WEIGHTS.iter().map(|&(_, w)| w).sum();
    let mut x = rng.random_range(0..total);
    for &(year, w) in YEAR_WEIGHTS {
        if x < w {
            return year;
        }
        x -= w;
    }
    YEAR_WEIGHTS[YEAR_WEIGHTS.len() - 1].0
}

#[derive(Clone, Debug)]
pub struct CorpusSpec {
    pub records: usize,
    pub authors: usize,
    pub seed: u64,
    pub share_no_geodata: f64,
    pub share_illegible: f64,
    pub share_retweet: f64,
    /// Of retweets: share cut off with an ellipsis.
    pub share_truncated: f64,
    /// Of truncated retweets: share whose original is not in the corpus.
    pub share_orphan: f64,
    /// Posts made of links, mentions and emoji only.
    pub share_residue: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            records: 1_000,
            authors: 150,
            seed: 7,
            share_no_geodata: 0.26,
            share_illegible: 0.25,
            share_retweet: 0.3,
            share_truncated: 0.4,
            share_orphan: 0.2,
            share_residue: 0.03,
        }
    }
}

struct Author {
    id: String,
    handle: String,
    location: Option<String>,
    uses_post_geo: bool,
}

fn make_authors(rng: &mut ChaCha8Rng, spec: &CorpusSpec) -> Vec<Author> {
    (0..spec.authors.max(2))
        .map(|i| {
            let roll: f64 = rng.random();
            let location = if roll < spec.share_no_geodata {
                None
            } else if roll < spec.share_no_geodata + spec.share_illegible {
                Some(["Verden", "hjemme", "Jorda 🌍", "der vinden blåser", "Norge"][i % 5].to_string())
            } else {
                let (place, _, _) = DEMO_PLACES.choose(rng).expect("non-empty");
                Some(match i % 3 {
                    0 => place.to_string(),
                    1 => format!("{place}, Norge"),
                    _ => format!("bor i {place}"),
                })
            };
            Author {
                id: format!("{}", 10_000 + i),
                handle: format!("bruker_{i}"),
                uses_post_geo: location.is_some() && rng.random_bool(0.1),
                location,
            }
        })
        .collect()
}

fn truncate_retweet(prefix: &str, body: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = body.chars().collect();
    let keep = if chars.len() > 30 {
        rng.random_range(24..chars.len().clamp(25, 120))
    } else {
        chars.len().saturating_sub(1).max(1)
    };
    let cut: String = chars[..keep].iter().collect();
    let ellipsis = if rng.random_bool(0.5) { "…" } else { "..." };
    format!("{prefix}{}{ellipsis}", cut.trim_end())
}

/// A synthetic archive following `spec`, in no particular order.
///
/// Ids are unique. Originals carry a serial number in their text so every
/// truncated retweet matches exactly one original.
pub fn corpus(spec: &CorpusSpec) -> Vec<PostRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let authors = make_authors(&mut rng, spec);
    let mut out: Vec<PostRecord> = Vec::with_capacity(spec.records);
    let mut originals: Vec<usize> = Vec::new();

    for i in 0..spec.records {
        let a = &authors[rng.random_range(0..authors.len())];
        let year = weighted_year(&mut rng);
        let created_at = random_timestamp(&mut rng, year);
        let mut record = PostRecord {
            id: format!("{}", 1_000_000 + i),
            author_id: a.id.clone(),
            author_handle: a.handle.clone(),
            created_at,
            text: String::new(),
            like_count: rng.random_range(0..50),
            retweet_count: rng.random_range(0..10),
            post_geo: None,
            user_location: a.location.clone(),
            kind: PostKind::Original,
        };
        if a.uses_post_geo {
            record.post_geo = a.location.clone();
        }

        let is_retweet = !originals.is_empty() && rng.random_bool(spec.share_retweet);
        if is_retweet {
            let source = &out[originals[rng.random_range(0..originals.len())]];
            let truncated = rng.random_bool(spec.share_truncated);
            let orphan = truncated && rng.random_bool(spec.share_orphan);
            let handle = if orphan {
                format!("borte_{}", rng.random_range(0..1000))
            } else {
                source.author_handle.clone()
            };
            let prefix = format!("RT @{handle}: ");
            record.kind = PostKind::Retweet;
            record.text = if truncated {
                truncate_retweet(&prefix, &source.text, &mut rng)
            } else {
                format!("{prefix}{}", source.text)
            };
        } else if rng.random_bool(spec.share_residue) {
            record.text = format!("@{} https://t.co/x{i} 🌬️", authors[i % authors.len()].handle);
        } else if rng.random_bool(0.05) && !originals.is_empty() {
            let source = &out[originals[rng.random_range(0..originals.len())]];
            record.kind = PostKind::Quote;
            let label = draw_label(&mut rng, ANNOTATION_WEIGHTS);
            record.text = format!(
                "{} https://twitter.com/{}/status/{}",
                labeled_text(&mut rng, label, 0.1),
                source.author_handle,
                source.id
            );
        } else {
            let label = draw_label(&mut rng, ANNOTATION_WEIGHTS);
            record.text = format!("Innlegg {i}: {}", labeled_text(&mut rng, label, 0.1));
            originals.push(out.len());
        }
        out.push(record);
    }
    out
}

/// Corpus plus the expected repair outcome for every retweet.
#[derive(Clone, Debug)]
pub struct RetweetTruth {
    pub records: Vec<PostRecord>,
    /// Retweet id → repaired text, or `None` when it must be dropped.
    pub expected: BTreeMap<String, Option<String>>,
}

/// Originals from a few authors, retweeted in full, truncated with a
/// resolvable original, or truncated with no original in the corpus.
pub fn retweet_ground_truth(originals: usize, seed: u64) -> RetweetTruth {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut expected = BTreeMap::new();
    let handle_of = |a: usize| format!("kilde_{a}");
    let mut sources: Vec<(String, String)> = Vec::new();

    for i in 0..originals {
        let a = i % 13;
        let label = draw_label(&mut rng, [1, 1, 1]);
        let text = format!("Melding nummer {i} fra meg: {}", labeled_text(&mut rng, label, 0.0));
        records.push(PostRecord {
            id: format!("o{i:06}"),
            author_id: format!("{}", 500 + a),
            author_handle: handle_of(a),
            created_at: random_timestamp(&mut rng, 2012),
            text: text.clone(),
            like_count: 0,
            retweet_count: 0,
            post_geo: None,
            user_location: Some("Oslo".into()),
            kind: PostKind::Original,
        });
        sources.push((handle_of(a), text));
    }

    for j in 0..originals * 2 {
        let (handle, text) = sources[rng.random_range(0..sources.len())].clone();
        let roll: f64 = rng.random();
        let legacy = rng.random_bool(0.2);
        let (handle, want_drop) = if roll < 0.15 {
            (format!("ukjent_{j}"), true)
        } else {
            (handle, false)
        };
        let prefix = if legacy {
            format!("RT : @{handle} ")
        } else {
            format!("RT @{handle}: ")
        };
        let id = format!("r{j:06}");
        let (body, want) = if roll < 0.15 {
            (truncate_retweet(&prefix, &text, &mut rng), None)
        } else if roll < 0.6 {
            (truncate_retweet(&prefix, &text, &mut rng), Some(format!("{prefix}{text}")))
        } else {
            let full = format!("{prefix}{text}");
            (full.clone(), Some(full))
        };
        debug_assert!(want.is_none() == want_drop);
        records.push(PostRecord {
            id: id.clone(),
            author_id: format!("{}", 900 + j % 31),
            author_handle: format!("deler_{}", j % 31),
            created_at: random_timestamp(&mut rng, 2013),
            text: body,
            like_count: 0,
            retweet_count: 0,
            post_geo: None,
            user_location: None,
            kind: PostKind::Retweet,
        });
        expected.insert(id, want);
    }
    records.shuffle(&mut rng);
    RetweetTruth { records, expected }
}

/// A corpus whose yearly tweet, new-user and active-user counts are exactly
/// `rows` of `(year, tweets, new_users, active_users)`.
pub fn corpus_from_yearly_counts(rows: &[(i32, u64, u64, u64)], seed: u64) -> Result<Vec<PostRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: Vec<String> = Vec::new();
    let mut out = Vec::new();
    let mut next_author = 0u64;
    for &(year, tweets, new, active) in rows {
        if new > active || active > tweets || active - new > seen.len() as u64 {
            return Err(Error::Input(format!(
                "year {year}: cannot realise {tweets} tweets by {active} users ({new} new) with {} earlier users",
                seen.len()
            )));
        }
        let mut users: Vec<String> = seen
            .sample(&mut rng, (active - new) as usize)
            .cloned()
            .collect();
        for _ in 0..new {
            let id = format!("{}", 100_000 + next_author);
            next_author += 1;
            seen.push(id.clone());
            users.push(id);
        }
        for t in 0..tweets {
            let author = if (t as usize) < users.len() {
                users[t as usize].clone()
            } else {
                users[rng.random_range(0..users.len())].clone()
            };
            let created_at = random_timestamp(&mut rng, year);
            debug_assert_eq!(created_at.year(), year);
            out.push(PostRecord {
                id: format!("{year}{t:07}"),
                author_handle: format!("u{author}"),
                author_id: author,
                created_at,
                text: "vindkraft".into(),
                like_count: 0,
                retweet_count: 0,
                post_geo: None,
                user_location: Some("Oslo".into()),
                kind: PostKind::Original,
            });
        }
    }
    Ok(out)
}

/// Write the demo data set and a ready-to-run `config.toml` into `dir`.
pub fn write_demo_dataset(dir: &Path, records: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(path, e))
    };

    let spec = CorpusSpec {
        records,
        authors: (records / 6).max(20),
        seed,
        ..CorpusSpec::default()
    };
    let mut posts = corpus(&spec);
    posts.sort_by(|a, b| a.id.cmp(&b.id));
    let mut body = String::new();
    for p in &posts {
        body.push_str(&serde_json::to_string(p).map_err(|e| Error::Input(e.to_string()))?);
        body.push('\n');
    }
    write("corpus.jsonl", &body)?;

    let mut gaz = String::from("place_name,nuts3_code,population\n");
    for (p, c, n) in DEMO_PLACES {
        writeln!(gaz, "{p},{c},{n}").unwrap();
    }
    write("gazetteer.csv", &gaz)?;

    let mut regions = String::from("nuts3_code,display_name,population\n");
    for r in default_regions() {
        let pop = r.population.map(|p| p.to_string()).unwrap_or_default();
        writeln!(regions, "{},{},{pop}", r.nuts3_code.as_str(), r.display_name).unwrap();
    }
    write("regions.csv", &regions)?;

    write("stopwords_no.txt", &format!("# Norwegian function words\n{}\n", DEMO_STOPWORDS.join("\n")))?;
    write("keywords.txt", &format!("# collection query terms\n{}\n", DEFAULT_KEYWORDS.join("\n")))?;

    let rows = labeled_rows((records / 2).max(60), ANNOTATION_WEIGHTS, 0.1, seed ^ 0xa11);
    let mut annotated = Vec::new();
    write_rows(&mut annotated, &rows)?;
    write("annotated.csv", &String::from_utf8(annotated).expect("csv output is UTF-8"))?;

    let mut survey = String::from("region,year,share_negative,source\n");
    for (region, base) in [("ALL", 0.20), ("NO081", 0.14), ("NO0A2", 0.24), ("NO074", 0.27)] {
        for (k, year) in [2020, 2021, 2022].into_iter().enumerate() {
            writeln!(survey, "{region},{year},{:.2},demo survey", base + 0.02 * k as f64).unwrap();
        }
    }
    write("survey.csv", &survey)?;

    write("config.toml", DEMO_CONFIG)?;
    Ok(())
}

pub const DEMO_CONFIG: &str = r#"[input]
corpus = "corpus.jsonl"
gazetteer = "gazetteer.csv"
regions = "regions.csv"
stopwords = "stopwords_no.txt"
keywords = "keywords.txt"
annotated = "annotated.csv"
survey = "survey.csv"

[run]
dir = "run"
seed = 20221231
from = "2008-01-01"
to = "2022-12-31"

[classifier]
backend = "baseline"
train_fraction = 0.8

[network]
resolution = 1.0
min_community_size = 5

[sample]
k = 25
mode = "margin"
"#;
