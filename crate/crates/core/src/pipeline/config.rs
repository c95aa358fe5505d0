//! TOML run configuration.
//!
//! Relative paths are resolved against the directory holding the config
//! file, so a data directory can be moved as a unit.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::classify::adapter::{AdapterAddress, AdapterOptions};
use crate::classify::baseline::BaselineConfig;
use crate::ingest::TimeWindow;
use crate::netstats::{DEFAULT_MIN_COMMUNITY_SIZE, DEFAULT_RESOLUTION};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub input: InputConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub corpus: PathBuf,
    pub gazetteer: PathBuf,
    pub regions: Option<PathBuf>,
    pub stopwords: PathBuf,
    pub keywords: Option<PathBuf>,
    pub annotated: Option<PathBuf>,
    pub survey: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dir: PathBuf,
    pub seed: u64,
    /// First day of the collection window, inclusive.
    #[serde(deserialize_with = "date_field")]
    pub from: Option<NaiveDate>,
    /// Last day of the collection window, inclusive.
    #[serde(deserialize_with = "date_field")]
    pub to: Option<NaiveDate>,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("run"),
            seed: 0,
            from: None,
            to: None,
            parallel: true,
        }
    }
}

/// Accept both TOML dates (`from = 2008-01-01`) and strings.
fn date_field<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<NaiveDate>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Toml(toml::value::Datetime),
        Text(String),
    }
    let Some(raw) = Option::<Raw>::deserialize(d)? else {
        return Ok(None);
    };
    let text = match raw {
        Raw::Toml(dt) => dt.to_string(),
        Raw::Text(s) => s,
    };
    NaiveDate::parse_from_str(&text, "%Y-%m-%d")
        .map(Some)
        .map_err(|e| serde::de::Error::custom(format!("date {text:?}: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Baseline,
    External,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(BackendKind::Baseline),
            "external" => Ok(BackendKind::External),
            _ => Err(Error::Config(format!("backend must be `baseline` or `external`, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub backend: BackendKind,
    /// `cmd:program args…` or `tcp://host:port`.
    pub adapter: Option<String>,
    pub train_fraction: f64,
    pub hash_bits: u32,
    pub l2: f64,
    pub max_iter: usize,
    pub batch_size: usize,
    pub timeout_secs: u64,
    pub pool: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let b = BaselineConfig::default();
        let a = AdapterOptions::default();
        Self {
            backend: BackendKind::Baseline,
            adapter: None,
            train_fraction: 0.8,
            hash_bits: b.hash_bits,
            l2: b.l2,
            max_iter: b.max_iter,
            batch_size: a.batch_size,
            timeout_secs: a.timeout.as_secs(),
            pool: a.pool,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub resolution: f64,
    pub min_community_size: usize,
    /// Visit nodes in a seeded random order instead of author id order.
    pub shuffle: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            min_community_size: DEFAULT_MIN_COMMUNITY_SIZE,
            shuffle: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// Least certain predictions first.
    Margin,
    Random,
}

impl FromStr for SampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "margin" => Ok(SampleMode::Margin),
            "random" => Ok(SampleMode::Random),
            _ => Err(Error::Config(format!("sample mode must be `margin` or `random`, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub k: usize,
    pub mode: SampleMode,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            k: 50,
            mode: SampleMode::Margin,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub run_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    pub adapter: Option<String>,
    pub resolution: Option<f64>,
    pub parallel: Option<bool>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    /// Parse config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: Config =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(d) = &o.run_dir {
            // A command-line path is relative to the working directory.
            self.run.dir = std::path::absolute(d).map_err(|e| Error::io(d, e))?;
        }
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(b) = o.backend {
            self.classifier.backend = b;
        }
        if let Some(a) = &o.adapter {
            self.classifier.adapter = Some(a.clone());
        }
        if let Some(r) = o.resolution {
            self.network.resolution = r;
        }
        if let Some(p) = o.parallel {
            self.run.parallel = p;
        }
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        if let (Some(f), Some(t)) = (self.run.from, self.run.to) {
            if f > t {
                return Err(Error::Config(format!("run.from {f} is after run.to {t}")));
            }
        }
        let c = &self.classifier;
        if !(c.train_fraction > 0.0 && c.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "classifier.train_fraction must be in (0, 1), got {}",
                c.train_fraction
            )));
        }
        if !(1..=28).contains(&c.hash_bits) {
            return Err(Error::Config(format!("classifier.hash_bits {} outside 1..=28", c.hash_bits)));
        }
        if c.backend == BackendKind::External {
            self.adapter_address()?;
        }
        if !(self.network.resolution.is_finite() && self.network.resolution > 0.0) {
            return Err(Error::Config(format!(
                "network.resolution must be positive, got {}",
                self.network.resolution
            )));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn run_dir(&self) -> PathBuf {
        self.resolve(&self.run.dir)
    }

    pub fn window(&self) -> TimeWindow {
        TimeWindow {
            from: self.run.from.map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc()),
            to: self.run.to.map(|d| d.and_hms_opt(23, 59, 59).unwrap().and_utc()),
        }
    }

    /// End of the collection window, if bounded.
    pub fn collection_end(&self) -> Option<DateTime<Utc>> {
        self.window().to
    }

    pub fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            hash_bits: self.classifier.hash_bits,
            l2: self.classifier.l2,
            max_iter: self.classifier.max_iter,
            seed: self.run.seed,
            ..BaselineConfig::default()
        }
    }

    pub fn adapter_address(&self) -> Result<AdapterAddress> {
        self.classifier
            .adapter
            .as_deref()
            .ok_or_else(|| Error::Config("backend `external` needs classifier.adapter".into()))?
            .parse()
    }

    pub fn adapter_options(&self) -> AdapterOptions {
        AdapterOptions {
            batch_size: self.classifier.batch_size.max(1),
            timeout: Duration::from_secs(self.classifier.timeout_secs.max(1)),
            pool: self.classifier.pool.max(1),
        }
    }

    /// Canonical JSON of the settings that can change outputs. The run
    /// directory and execution mode are left out.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.run.dir = PathBuf::new();
        c.run.parallel = true;
        serde_json::to_string(&c).expect("config serializes")
    }

    /// `(name, path)` of every configured input file.
    pub fn inputs(&self) -> Vec<(&'static str, PathBuf)> {
        let i = &self.input;
        let mut out = vec![
            ("corpus", self.resolve(&i.corpus)),
            ("gazetteer", self.resolve(&i.gazetteer)),
            ("stopwords", self.resolve(&i.stopwords)),
        ];
        let optional = [
            ("regions", &i.regions),
            ("keywords", &i.keywords),
            ("annotated", &i.annotated),
            ("survey", &i.survey),
        ];
        for (name, p) in optional {
            if let Some(p) = p {
                out.push((name, self.resolve(p)));
            }
        }
        out
    }
}
