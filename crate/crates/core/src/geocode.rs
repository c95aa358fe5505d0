//! Region resolution from post geodata and gazetteer matching of free-text
//! user locations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::exec::{self, Execution};
use crate::ingest::PostRecord;
use crate::{Error, Result};

/// NUTS3 region code, e.g. `NO081`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionCode(pub String);

impl RegionCode {
    pub fn new(code: impl Into<String>) -> Self {
        RegionCode(code.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RegionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionInfo {
    pub nuts3_code: RegionCode,
    pub display_name: String,
    pub population: Option<u64>,
}

/// The 11 Norwegian counties after the 2020 regional reform.
pub fn default_regions() -> Vec<RegionInfo> {
    [
        ("NO020", "Innlandet"),
        ("NO060", "Trøndelag"),
        ("NO071", "Nordland"),
        ("NO074", "Troms og Finnmark"),
        ("NO081", "Oslo"),
        ("NO082", "Viken"),
        ("NO091", "Vestfold og Telemark"),
        ("NO092", "Agder"),
        ("NO0A1", "Rogaland"),
        ("NO0A2", "Vestland"),
        ("NO0A3", "Møre og Romsdal"),
    ]
    .into_iter()
    .map(|(code, name)| RegionInfo {
        nuts3_code: RegionCode::new(code),
        display_name: name.to_string(),
        population: None,
    })
    .collect()
}

/// Case-fold, NFC-normalize, trim surrounding punctuation and whitespace
/// and collapse internal whitespace.
pub fn normalize_place(raw: &str) -> String {
    let folded: String = raw.nfc().collect::<String>().to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

fn place_tokens(normalized: &str) -> Vec<&str> {
    normalized
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub place_name: String,
    pub region: RegionCode,
    pub population: u64,
    tokens: Vec<String>,
    chars: usize,
}

#[derive(Clone, Debug)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    region_names: BTreeMap<RegionCode, String>,
    regions: Vec<RegionInfo>,
    by_name: HashMap<String, usize>,
    by_first_token: HashMap<String, Vec<usize>>,
}

#[derive(Debug, Deserialize)]
struct GazetteerRow {
    place_name: String,
    nuts3_code: String,
    population: u64,
}

#[derive(Debug, Deserialize)]
struct RegionRow {
    nuts3_code: String,
    display_name: String,
    population: Option<u64>,
}

impl Gazetteer {
    pub fn new(places: Vec<(String, RegionCode, u64)>, regions: Vec<RegionInfo>) -> Result<Self> {
        let region_names: BTreeMap<RegionCode, String> = regions
            .iter()
            .map(|r| (r.nuts3_code.clone(), r.display_name.clone()))
            .collect();
        let mut entries = Vec::with_capacity(places.len());
        let mut by_name = HashMap::new();
        let mut by_first_token: HashMap<String, Vec<usize>> = HashMap::new();
        for (raw, region, population) in places {
            let place_name = normalize_place(&raw);
            let tokens: Vec<String> = place_tokens(&place_name).into_iter().map(String::from).collect();
            if tokens.is_empty() {
                return Err(Error::Input(format!("gazetteer place {raw:?} is empty after normalization")));
            }
            if !region_names.contains_key(&region) {
                return Err(Error::Input(format!(
                    "gazetteer place {raw:?} has unknown region {region}"
                )));
            }
            let idx = entries.len();
            if by_name.insert(place_name.clone(), idx).is_some() {
                return Err(Error::Input(format!("duplicate gazetteer place {place_name:?}")));
            }
            by_first_token.entry(tokens[0].clone()).or_default().push(idx);
            entries.push(GazetteerEntry {
                chars: place_name.chars().count(),
                place_name,
                region,
                population,
                tokens,
            });
        }
        Ok(Self {
            entries,
            region_names,
            regions,
            by_name,
            by_first_token,
        })
    }

    /// Load a gazetteer (`place_name,nuts3_code,population`) and an optional
    /// regions file (`nuts3_code,display_name,population`). Without a
    /// regions file the 11 default counties are used.
    pub fn from_files(gazetteer: &Path, regions: Option<&Path>) -> Result<Self> {
        let open = |p: &Path| std::fs::File::open(p).map_err(|e| Error::io(p, e));
        let regions = match regions {
            Some(p) => read_regions(open(p)?)?,
            None => default_regions(),
        };
        Self::from_reader(open(gazetteer)?, regions)
    }

    pub fn from_reader<R: Read>(reader: R, regions: Vec<RegionInfo>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut places = Vec::new();
        for (i, row) in rdr.deserialize::<GazetteerRow>().enumerate() {
            let row = row.map_err(|e| Error::Input(format!("gazetteer row {}: {e}", i + 2)))?;
            places.push((row.place_name, RegionCode(row.nuts3_code), row.population));
        }
        Self::new(places, regions)
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn regions(&self) -> &[RegionInfo] {
        &self.regions
    }

    pub fn region_name(&self, code: &RegionCode) -> Option<&str> {
        self.region_names.get(code).map(String::as_str)
    }

    pub fn is_known_region(&self, code: &RegionCode) -> bool {
        self.region_names.contains_key(code)
    }

    /// Best whole-token match inside `text`: longest name, then largest
    /// population, then lexicographically smallest name.
    pub fn best_match(&self, text: &str) -> Option<&GazetteerEntry> {
        let normalized = normalize_place(text);
        if let Some(&i) = self.by_name.get(&normalized) {
            return Some(&self.entries[i]);
        }
        let tokens = place_tokens(&normalized);
        let mut best: Option<&GazetteerEntry> = None;
        for start in 0..tokens.len() {
            let Some(cands) = self.by_first_token.get(tokens[start]) else {
                continue;
            };
            for &i in cands {
                let e = &self.entries[i];
                let end = start + e.tokens.len();
                if end > tokens.len() || !e.tokens.iter().zip(&tokens[start..end]).all(|(a, b)| a == b) {
                    continue;
                }
                best = match best {
                    Some(b) if !better(e, b) => Some(b),
                    _ => Some(e),
                };
            }
        }
        best
    }
}

fn better(a: &GazetteerEntry, b: &GazetteerEntry) -> bool {
    (a.chars, a.population, std::cmp::Reverse(&a.place_name))
        > (b.chars, b.population, std::cmp::Reverse(&b.place_name))
}

pub fn read_regions<R: Read>(reader: R) -> Result<Vec<RegionInfo>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<RegionRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::Input(format!("regions row {}: {e}", i + 2)))?;
            Ok(RegionInfo {
                nuts3_code: RegionCode(row.nuts3_code),
                display_name: row.display_name,
                population: row.population,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeoSource {
    PostGeo,
    UserLocation,
    Unresolved,
}

/// Outcome of locating one post. `region` is present iff `source` is not
/// [`GeoSource::Unresolved`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoResolution {
    pub region: Option<RegionCode>,
    pub source: GeoSource,
    pub matched_name: Option<String>,
}

impl GeoResolution {
    pub fn unresolved() -> Self {
        Self {
            region: None,
            source: GeoSource::Unresolved,
            matched_name: None,
        }
    }
}

/// Post geodata first, then the user location field.
pub fn resolve(record: &PostRecord, gaz: &Gazetteer) -> GeoResolution {
    let attempts = [
        (record.post_geo.as_deref(), GeoSource::PostGeo),
        (record.user_location.as_deref(), GeoSource::UserLocation),
    ];
    for (field, source) in attempts {
        if let Some(entry) = field.and_then(|text| gaz.best_match(text)) {
            return GeoResolution {
                region: Some(entry.region.clone()),
                source,
                matched_name: Some(entry.place_name.clone()),
            };
        }
    }
    GeoResolution::unresolved()
}

/// A post that survived geocoding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedPost {
    #[serde(flatten)]
    pub record: PostRecord,
    pub region: RegionCode,
    pub geo_source: GeoSource,
    pub matched_name: String,
}

#[derive(Clone, Debug, Default)]
pub struct GeocodeOutput {
    pub retained: Vec<ResolvedPost>,
    /// Ids without any geodata.
    pub no_geodata: Vec<String>,
    /// Ids whose geodata names no known place.
    pub illegible: Vec<String>,
}

/// Resolve every record, splitting the corpus into retained posts and the
/// two exclusion classes. Input order is preserved.
pub fn geocode_corpus(records: Vec<PostRecord>, gaz: &Gazetteer, exec: Execution) -> GeocodeOutput {
    let resolutions = exec::map(exec, &records, |r| resolve(r, gaz));
    let mut out = GeocodeOutput::default();
    for (record, res) in records.into_iter().zip(resolutions) {
        match res.region {
            Some(region) => out.retained.push(ResolvedPost {
                record,
                region,
                geo_source: res.source,
                matched_name: res.matched_name.unwrap_or_default(),
            }),
            None if record.has_geodata() => out.illegible.push(record.id),
            None => out.no_geodata.push(record.id),
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RegionCount {
    pub posts: u64,
    pub users: u64,
    pub share_of_posts: f64,
    pub population: Option<u64>,
}

/// Posts and distinct authors per region.
pub fn regional_counts(posts: &[ResolvedPost], gaz: &Gazetteer) -> Result<BTreeMap<RegionCode, RegionCount>> {
    let mut posts_by: BTreeMap<RegionCode, u64> = BTreeMap::new();
    let mut users_by: BTreeMap<RegionCode, BTreeSet<&str>> = BTreeMap::new();
    for p in posts {
        if !gaz.is_known_region(&p.region) {
            return Err(Error::Input(format!(
                "post {} carries unknown region {}",
                p.record.id, p.region
            )));
        }
        *posts_by.entry(p.region.clone()).or_default() += 1;
        users_by
            .entry(p.region.clone())
            .or_default()
            .insert(p.record.author_id.as_str());
    }
    let total = posts.len() as f64;
    let population: HashMap<&RegionCode, u64> = gaz
        .regions()
        .iter()
        .filter_map(|r| r.population.map(|p| (&r.nuts3_code, p)))
        .collect();
    Ok(posts_by
        .into_iter()
        .map(|(region, n)| {
            let count = RegionCount {
                posts: n,
                users: users_by[&region].len() as u64,
                share_of_posts: n as f64 / total,
                population: population.get(&region).copied(),
            };
            (region, count)
        })
        .collect())
}
