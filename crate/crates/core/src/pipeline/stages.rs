//! Pipeline stages. Each stage reads earlier artifacts from the run
//! directory, writes its own, and records their digests in the manifest.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{BackendKind, Config, SampleMode};
use super::manifest::{sha256_file, sha256_hex, write_atomic, InputDigest, Manifest, StageRecord, Timing};
use crate::analytics::series::{long_format, normalized_regional_trends, series_by_region, Granularity};
use crate::analytics::survey::{read_survey, survey_delta};
use crate::analytics::users::{user_frequency_distribution, yearly_user_stats};
use crate::analytics::{round2, ClassifiedPost, ALL_REGIONS};
use crate::classify::annotated::{read_rows_file, write_rows, AnnotatedRow, AnnotatedSet};
use crate::classify::baseline::{train_baseline, BaselineModel};
use crate::classify::metrics::{evaluate, Scheme};
use crate::classify::sampling::{lowest_margin, random_sample};
use crate::classify::{classify_corpus, Backend, BinaryLabel, Prediction};
use crate::exec::Execution;
use crate::geocode::{geocode_corpus, read_regions, regional_counts, Gazetteer, RegionCode, ResolvedPost};
use crate::ingest::ledger::{Exclusion, FiltrationLedger};
use crate::ingest::record::PostRecord;
use crate::ingest::{ingest, read_corpus};
use crate::netstats::{associate, build_network_from, detect_communities, write_graphml, NetworkPost};
use crate::textprep::{clean_all, CleanConfig, Cleaned, CleanedDocument};
use crate::{Error, Result};

pub const POSTS: &str = "posts.jsonl";
pub const QUARANTINE: &str = "quarantine.jsonl";
pub const RESOLVED: &str = "resolved.jsonl";
pub const GEO_EXCLUDED: &str = "geo_excluded.csv";
pub const REGIONAL_COUNTS: &str = "regional_counts.csv";
pub const CLEANED: &str = "cleaned.jsonl";
pub const LEDGER: &str = "ledger.json";
pub const TRAIN_SPLIT: &str = "train_split.csv";
pub const TEST_SPLIT: &str = "test_split.csv";
pub const MODEL: &str = "model.json";
pub const TRAIN_METRICS: &str = "train_metrics.json";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const ANNOTATION_SAMPLE: &str = "annotation_sample.csv";
pub const YEARLY_USERS: &str = "yearly_user_stats.csv";
pub const USER_FREQUENCY: &str = "user_frequency.csv";
pub const SENTIMENT_YEARLY: &str = "sentiment_yearly.csv";
pub const SENTIMENT_MONTHLY: &str = "sentiment_monthly.csv";
pub const SENTIMENT_LONG: &str = "sentiment_long.csv";
pub const NORMALIZED_TRENDS: &str = "normalized_trends.csv";
pub const SURVEY_DELTA: &str = "survey_delta.csv";
pub const SURVEY_COVERAGE: &str = "survey_coverage.csv";
pub const GRAPH: &str = "network.graphml";
pub const COMMUNITIES: &str = "communities.csv";
pub const ASSOCIATION: &str = "association.csv";
pub const ASSOCIATION_SUMMARY: &str = "association_summary.csv";
pub const REPORT: &str = "report.md";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Geocode,
    Clean,
    Train,
    Classify,
    AnnotateSample,
    Aggregate,
    Network,
    Report,
}

impl Stage {
    /// Order used by a full run.
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Geocode,
        Stage::Clean,
        Stage::Train,
        Stage::Classify,
        Stage::AnnotateSample,
        Stage::Aggregate,
        Stage::Network,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Geocode => "geocode",
            Stage::Clean => "clean",
            Stage::Train => "train",
            Stage::Classify => "classify",
            Stage::AnnotateSample => "annotate-sample",
            Stage::Aggregate => "aggregate",
            Stage::Network => "network",
            Stage::Report => "report",
        }
    }

    /// Bumped whenever a stage's output format or semantics change.
    pub fn version(self) -> u32 {
        1
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// What a stage hands back to be recorded.
#[derive(Default)]
struct Produced {
    files: Vec<&'static str>,
    counts: BTreeMap<String, u64>,
    ledger: Option<FiltrationLedger>,
}

impl Produced {
    fn count(&mut self, key: &str, n: impl TryInto<u64>) {
        self.counts.insert(key.to_string(), n.try_into().unwrap_or(u64::MAX));
    }
}

pub struct Pipeline {
    cfg: Config,
    run_dir: PathBuf,
    exec: Execution,
}

impl Pipeline {
    pub fn new(cfg: Config) -> Self {
        let run_dir = cfg.run_dir();
        let exec = if cfg.run.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        };
        Self { cfg, run_dir, exec }
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    fn path(&self, artifact: &str) -> PathBuf {
        self.run_dir.join(artifact)
    }

    /// Run every stage in order. The train stage is skipped for an external
    /// backend without annotated data.
    pub fn run_all(&self) -> Result<()> {
        for stage in Stage::ALL {
            if stage == Stage::Train
                && self.cfg.classifier.backend == BackendKind::External
                && self.cfg.input.annotated.is_none()
            {
                log::info!("skipping train: external backend and no annotated data");
                continue;
            }
            self.run(stage)?;
        }
        Ok(())
    }

    fn prerequisites(&self, stage: Stage) -> Vec<(&'static str, Stage)> {
        match stage {
            Stage::Ingest | Stage::Train => vec![],
            Stage::Geocode => vec![(POSTS, Stage::Ingest)],
            Stage::Clean => vec![(RESOLVED, Stage::Geocode)],
            Stage::Classify => {
                let mut v = vec![(CLEANED, Stage::Clean)];
                if self.cfg.classifier.backend == BackendKind::Baseline {
                    v.push((MODEL, Stage::Train));
                }
                v
            }
            Stage::AnnotateSample | Stage::Aggregate => {
                vec![(RESOLVED, Stage::Geocode), (PREDICTIONS, Stage::Classify)]
            }
            Stage::Network => vec![(POSTS, Stage::Ingest), (RESOLVED, Stage::Geocode)],
            Stage::Report => vec![(YEARLY_USERS, Stage::Aggregate)],
        }
    }

    fn check_order(&self, stage: Stage) -> Result<()> {
        for (artifact, producer) in self.prerequisites(stage) {
            if !self.path(artifact).exists() {
                return Err(order_error(stage, producer));
            }
        }
        Ok(())
    }

    /// Run one stage and update the manifest.
    pub fn run(&self, stage: Stage) -> Result<StageRecord> {
        self.check_order(stage)?;
        std::fs::create_dir_all(&self.run_dir).map_err(|e| Error::io(&self.run_dir, e))?;
        let mut manifest = Manifest::load(&self.run_dir)?.unwrap_or_default();
        let config_sha = sha256_hex(self.cfg.canonical_json().as_bytes());
        if !manifest.config_sha256.is_empty() && manifest.config_sha256 != config_sha {
            log::warn!("configuration changed since the last stage in {}", self.run_dir.display());
        }
        manifest.tool_version = env!("CARGO_PKG_VERSION").to_string();
        manifest.config_sha256 = config_sha;
        manifest.seed = self.cfg.run.seed;
        for (name, path) in self.cfg.inputs() {
            if path.exists() {
                let file = path
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default();
                manifest.inputs.insert(
                    name.to_string(),
                    InputDigest {
                        file,
                        sha256: sha256_file(&path)?,
                    },
                );
            }
        }

        let started_at = Utc::now();
        log::info!("stage {stage}: start");
        let produced = match stage {
            Stage::Ingest => self.ingest()?,
            Stage::Geocode => self.geocode(&manifest)?,
            Stage::Clean => self.clean(&manifest)?,
            Stage::Train => self.train()?,
            Stage::Classify => self.classify()?,
            Stage::AnnotateSample => self.annotate_sample()?,
            Stage::Aggregate => self.aggregate()?,
            Stage::Network => self.network()?,
            Stage::Report => self.report(&manifest)?,
        };

        let mut outputs = BTreeMap::new();
        for f in &produced.files {
            outputs.insert(f.to_string(), sha256_file(&self.path(f))?);
        }
        let record = StageRecord {
            version: stage.version(),
            outputs,
            counts: produced.counts,
            ledger: produced.ledger,
        };
        manifest.stages.insert(stage.name().to_string(), record.clone());
        manifest.timings.insert(
            stage.name().to_string(),
            Timing {
                started_at,
                finished_at: Utc::now(),
            },
        );
        manifest.save(&self.run_dir)?;
        log::info!("stage {stage}: done");
        Ok(record)
    }

    fn upstream_ledger(&self, manifest: &Manifest, stage: Stage, from: Stage) -> Result<FiltrationLedger> {
        manifest
            .stages
            .get(from.name())
            .and_then(|r| r.ledger.clone())
            .ok_or_else(|| order_error(stage, from))
    }

    fn gazetteer(&self) -> Result<Gazetteer> {
        let i = &self.cfg.input;
        let regions = i.regions.as_ref().map(|p| self.cfg.resolve(p));
        Gazetteer::from_files(&self.cfg.resolve(&i.gazetteer), regions.as_deref())
    }

    fn clean_config(&self) -> Result<CleanConfig> {
        let i = &self.cfg.input;
        let keywords = i.keywords.as_ref().map(|p| self.cfg.resolve(p));
        CleanConfig::from_files(&self.cfg.resolve(&i.stopwords), keywords.as_deref())
    }

    fn ingest(&self) -> Result<Produced> {
        let corpus = read_corpus(&self.cfg.resolve(&self.cfg.input.corpus), self.exec)?;
        let mut p = Produced::default();
        p.count("malformed_lines", corpus.errors.len());
        p.count("duplicate_ids", corpus.duplicates.len());

        let mut quarantine: Vec<QuarantineEntry> = Vec::new();
        for (e, reason) in corpus
            .errors
            .iter()
            .map(|e| (e, "malformed"))
            .chain(corpus.duplicates.iter().map(|e| (e, "duplicate id")))
        {
            quarantine.push(QuarantineEntry {
                line: Some(e.line),
                id: None,
                reason: reason.to_string(),
                detail: e.message.clone(),
                raw: Some(e.raw.clone()),
            });
        }

        let out = ingest(corpus.records, &self.cfg.window())?;
        for id in &out.dropped_ids {
            quarantine.push(QuarantineEntry {
                line: None,
                id: Some(id.clone()),
                reason: "unresolvable retweet".into(),
                detail: "truncated retweet without its original in the corpus".into(),
                raw: None,
            });
        }
        write_jsonl(&self.path(POSTS), &out.records)?;
        write_jsonl(&self.path(QUARANTINE), &quarantine)?;

        p.count("outside_window", out.outside_window);
        p.count("records", out.records.len());
        p.count("truncated_retweets", out.repair.truncated);
        p.count("repaired_retweets", out.repair.repaired);
        p.count("dropped_retweets", out.repair.dropped);
        p.count("ambiguous_matches", out.repair.ambiguous);
        p.files = vec![POSTS, QUARANTINE];
        p.ledger = Some(out.ledger);
        Ok(p)
    }

    fn geocode(&self, manifest: &Manifest) -> Result<Produced> {
        let mut ledger = self.upstream_ledger(manifest, Stage::Geocode, Stage::Ingest)?;
        let gaz = self.gazetteer()?;
        let records: Vec<PostRecord> = read_jsonl(&self.path(POSTS))?;
        let input = records.len() as u64;
        let geo = geocode_corpus(records, &gaz, self.exec);
        ledger.record_stage(
            "geocode",
            input,
            &[
                (Exclusion::NoGeodata, geo.no_geodata.len() as u64),
                (Exclusion::IllegibleGeodata, geo.illegible.len() as u64),
            ],
        )?;

        write_jsonl(&self.path(RESOLVED), &geo.retained)?;
        let excluded: Vec<GeoExcludedRow> = geo
            .no_geodata
            .iter()
            .map(|id| GeoExcludedRow { id, reason: "no geodata" })
            .chain(geo.illegible.iter().map(|id| GeoExcludedRow {
                id,
                reason: "illegible geodata",
            }))
            .collect();
        write_csv(&self.path(GEO_EXCLUDED), &excluded)?;

        let counts = regional_counts(&geo.retained, &gaz)?;
        let rows: Vec<RegionalCountRow> = counts
            .iter()
            .map(|(code, c)| RegionalCountRow {
                region: code.as_str(),
                name: gaz.region_name(code).unwrap_or(""),
                posts: c.posts,
                users: c.users,
                share_of_posts: c.share_of_posts,
                population: c.population,
            })
            .collect();
        write_csv(&self.path(REGIONAL_COUNTS), &rows)?;

        let mut p = Produced::default();
        p.count("retained", geo.retained.len());
        p.count("no_geodata", geo.no_geodata.len());
        p.count("illegible_geodata", geo.illegible.len());
        p.files = vec![RESOLVED, GEO_EXCLUDED, REGIONAL_COUNTS];
        p.ledger = Some(ledger);
        Ok(p)
    }

    fn clean(&self, manifest: &Manifest) -> Result<Produced> {
        let mut ledger = self.upstream_ledger(manifest, Stage::Clean, Stage::Geocode)?;
        let cfg = self.clean_config()?;
        let resolved: Vec<ResolvedPost> = read_jsonl(&self.path(RESOLVED))?;
        let pairs: Vec<(&str, &str)> = resolved
            .iter()
            .map(|r| (r.record.id.as_str(), r.record.text.as_str()))
            .collect();
        let cleaned = clean_all(&pairs, &cfg, self.exec);
        let kept: Vec<CleanedDocument> = cleaned.into_iter().filter_map(Cleaned::kept).collect();
        let dropped = (resolved.len() - kept.len()) as u64;
        ledger.record_stage(
            "clean",
            resolved.len() as u64,
            &[(Exclusion::TooShortAfterClean, dropped)],
        )?;
        write_jsonl(&self.path(CLEANED), &kept)?;
        write_json(&self.path(LEDGER), &ledger)?;

        let mut p = Produced::default();
        p.count("kept", kept.len());
        p.count("too_short", dropped);
        p.files = vec![CLEANED, LEDGER];
        p.ledger = Some(ledger);
        Ok(p)
    }

    fn train(&self) -> Result<Produced> {
        let path = self
            .cfg
            .input
            .annotated
            .as_ref()
            .map(|p| self.cfg.resolve(p))
            .ok_or_else(|| Error::Config("train needs input.annotated".into()))?;
        let rows = read_rows_file(&path)?;
        let (set, skipped) = AnnotatedSet::from_rows(&rows, &self.clean_config()?);
        let (train, test) = set.stratified_split(self.cfg.classifier.train_fraction, self.cfg.run.seed);
        if test.is_empty() {
            return Err(Error::Input("annotated set too small for a held-out split".into()));
        }

        let by_id: HashMap<&str, &AnnotatedRow> = rows.iter().map(|r| (r.id.as_str(), r)).collect();
        let split_rows = |s: &AnnotatedSet| -> Vec<AnnotatedRow> {
            let mut v: Vec<AnnotatedRow> = s.items.iter().map(|it| by_id[it.doc.post_id.as_str()].clone()).collect();
            v.sort_by(|a, b| a.id.cmp(&b.id));
            v
        };
        write_rows_file(&self.path(TRAIN_SPLIT), &split_rows(&train))?;
        write_rows_file(&self.path(TEST_SPLIT), &split_rows(&test))?;

        let docs: Vec<CleanedDocument> = test.items.iter().map(|it| it.doc.clone()).collect();
        let mut p = Produced::default();
        let predictions = match self.cfg.classifier.backend {
            BackendKind::Baseline => {
                let model = train_baseline(&train, &self.cfg.baseline())?;
                write_atomic(&self.path(MODEL), model.to_json().as_bytes())?;
                p.files.push(MODEL);
                p.count("training_iterations", model.summary.iterations);
                classify_corpus(&Backend::Baseline(&model), &docs, self.exec)?
            }
            BackendKind::External => {
                let address = self.cfg.adapter_address()?;
                let options = self.cfg.adapter_options();
                let backend = Backend::External {
                    address: &address,
                    options: &options,
                };
                classify_corpus(&backend, &docs, self.exec)?
            }
        };
        let gold = test.gold();
        let metrics = TrainMetrics {
            backend: self.cfg.classifier.backend,
            annotated: set.counts(),
            skipped_rows: skipped.len(),
            train_size: train.len(),
            test_size: test.len(),
            ternary: evaluate(&predictions, &gold, Scheme::Ternary)?,
            binary: evaluate(&predictions, &gold, Scheme::Binary)?,
        };
        write_json(&self.path(TRAIN_METRICS), &metrics)?;

        p.files.extend([TRAIN_SPLIT, TEST_SPLIT, TRAIN_METRICS]);
        p.count("train", train.len());
        p.count("test", test.len());
        p.count("skipped_rows", skipped.len());
        Ok(p)
    }

    fn classify(&self) -> Result<Produced> {
        let docs: Vec<CleanedDocument> = read_jsonl(&self.path(CLEANED))?;
        let predictions = match self.cfg.classifier.backend {
            BackendKind::Baseline => {
                let model = BaselineModel::load(&self.path(MODEL))?;
                classify_corpus(&Backend::Baseline(&model), &docs, self.exec)?
            }
            BackendKind::External => {
                let address = self.cfg.adapter_address()?;
                let options = self.cfg.adapter_options();
                let backend = Backend::External {
                    address: &address,
                    options: &options,
                };
                classify_corpus(&backend, &docs, self.exec)?
            }
        };
        let rows: Vec<PredictionRow> = predictions
            .into_iter()
            .map(|prediction| PredictionRow {
                binary: prediction.binary(),
                prediction,
            })
            .collect();
        write_jsonl(&self.path(PREDICTIONS), &rows)?;

        let mut p = Produced::default();
        p.count("predictions", rows.len());
        p.count(
            "negative",
            rows.iter().filter(|r| r.binary == BinaryLabel::Negative).count(),
        );
        p.files = vec![PREDICTIONS];
        Ok(p)
    }

    fn read_predictions(&self) -> Result<Vec<Prediction>> {
        let rows: Vec<PredictionRow> = read_jsonl(&self.path(PREDICTIONS))?;
        Ok(rows.into_iter().map(|r| r.prediction).collect())
    }

    fn annotate_sample(&self) -> Result<Produced> {
        let predictions = self.read_predictions()?;
        let resolved: Vec<ResolvedPost> = read_jsonl(&self.path(RESOLVED))?;
        let text: HashMap<&str, &str> = resolved
            .iter()
            .map(|r| (r.record.id.as_str(), r.record.text.as_str()))
            .collect();
        let k = self.cfg.sample.k;
        let picked = match self.cfg.sample.mode {
            SampleMode::Margin => lowest_margin(&predictions, k),
            SampleMode::Random => random_sample(&predictions, k, self.cfg.run.seed),
        };
        let rows: Vec<SampleRow> = picked
            .iter()
            .map(|p| SampleRow {
                id: &p.post_id,
                text: text.get(p.post_id.as_str()).copied().unwrap_or(""),
                predicted: p.label.name(),
                margin: p.margin(),
                label: "",
            })
            .collect();
        write_csv(&self.path(ANNOTATION_SAMPLE), &rows)?;
        let mut p = Produced::default();
        p.count("sampled", rows.len());
        p.files = vec![ANNOTATION_SAMPLE];
        Ok(p)
    }

    fn aggregate(&self) -> Result<Produced> {
        let predictions = self.read_predictions()?;
        let resolved: Vec<ResolvedPost> = read_jsonl(&self.path(RESOLVED))?;
        let label: HashMap<&str, BinaryLabel> = predictions
            .iter()
            .map(|p| (p.post_id.as_str(), p.binary()))
            .collect();
        let posts: Vec<ClassifiedPost> = resolved
            .iter()
            .filter_map(|r| {
                label.get(r.record.id.as_str()).map(|&label| ClassifiedPost {
                    post_id: r.record.id.clone(),
                    author_id: r.record.author_id.clone(),
                    created_at: r.record.created_at,
                    region: r.region.clone(),
                    label,
                })
            })
            .collect();
        if posts.len() != predictions.len() {
            return Err(Error::Contract(format!(
                "{} predictions but only {} match geocoded posts",
                predictions.len(),
                posts.len()
            )));
        }
        let mut p = Produced::default();
        p.count("posts", posts.len());

        let yearly_users = yearly_user_stats(&posts, self.cfg.collection_end(), self.exec);
        write_csv(&self.path(YEARLY_USERS), &yearly_users)?;

        let freq: Vec<FrequencyRow> = user_frequency_distribution(&posts, self.exec)
            .into_iter()
            .map(|(posts_per_user, users)| FrequencyRow { posts_per_user, users })
            .collect();
        write_csv(&self.path(USER_FREQUENCY), &freq)?;

        let regions: Vec<RegionCode> = self.gazetteer()?.regions().iter().map(|r| r.nuts3_code.clone()).collect();
        let yearly = series_by_region(&posts, Granularity::Year, &regions, self.exec);
        let monthly = series_by_region(&posts, Granularity::Month, &regions, self.exec);
        write_csv(&self.path(SENTIMENT_YEARLY), &yearly)?;
        write_csv(&self.path(SENTIMENT_MONTHLY), &monthly)?;
        let mut long = long_format(&yearly);
        long.extend(long_format(&monthly));
        write_csv(&self.path(SENTIMENT_LONG), &long)?;

        let per_region: Vec<_> = yearly.iter().filter(|s| s.region != ALL_REGIONS).cloned().collect();
        if !posts.is_empty() {
            write_csv(&self.path(NORMALIZED_TRENDS), &normalized_regional_trends(&per_region)?)?;
            p.files.push(NORMALIZED_TRENDS);
        }

        if let Some(path) = &self.cfg.input.survey {
            let path = self.cfg.resolve(path);
            let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            let survey = read_survey(BufReader::new(file))?;
            let (matched, gaps) = survey_delta(&yearly, &survey);
            write_csv(&self.path(SURVEY_DELTA), &matched)?;
            write_csv(&self.path(SURVEY_COVERAGE), &gaps)?;
            p.count("survey_matched", matched.len());
            p.count("survey_gaps", gaps.len());
            p.files.extend([SURVEY_DELTA, SURVEY_COVERAGE]);
        }

        p.files.extend([YEARLY_USERS, USER_FREQUENCY, SENTIMENT_YEARLY, SENTIMENT_MONTHLY, SENTIMENT_LONG]);
        p.files.sort_unstable();
        Ok(p)
    }

    fn network(&self) -> Result<Produced> {
        let records: Vec<PostRecord> = read_jsonl(&self.path(POSTS))?;
        let resolved: Vec<ResolvedPost> = read_jsonl(&self.path(RESOLVED))?;
        let region: HashMap<&str, &RegionCode> = resolved
            .iter()
            .map(|r| (r.record.id.as_str(), &r.region))
            .collect();
        let posts: Vec<NetworkPost<'_>> = records
            .iter()
            .map(|record| NetworkPost {
                record,
                region: region.get(record.id.as_str()).copied(),
            })
            .collect();
        let net = build_network_from(&posts, self.exec);
        let seed = self.cfg.network.shuffle.then_some(self.cfg.run.seed);

        let mut summary = AssociationSummary {
            status: "ok".into(),
            nodes: net.node_count(),
            edges: net.edge_count(),
            ..AssociationSummary::default()
        };
        let mut cells: Vec<AssociationCell> = Vec::new();
        let partition = match detect_communities(&net, self.cfg.network.resolution, seed) {
            Ok(p) => Some(p),
            Err(Error::NoEdges) => {
                log::warn!("interaction network has no edges; skipping community detection");
                summary.status = "no edges".into();
                None
            }
            Err(e) => return Err(e),
        };

        let mut communities: Vec<CommunityRow> = Vec::new();
        if let Some(part) = &partition {
            summary.communities = part.community_count;
            summary.modularity = Some(part.modularity);
            for (node, &c) in net.nodes.iter().zip(&part.assignment) {
                communities.push(CommunityRow {
                    author_id: &node.author_id,
                    handle: &node.handle,
                    region: node.region.as_ref().map_or("", RegionCode::as_str),
                    community: c,
                });
            }
            match associate(&net, part, self.cfg.network.min_community_size) {
                Ok(a) => {
                    cells = a
                        .cells()
                        .map(|(r, c, count)| AssociationCell {
                            region: r.as_str().to_string(),
                            community: c.to_string(),
                            count,
                        })
                        .collect();
                    summary.chi_square = Some(a.chi_square);
                    summary.df = Some(a.degrees_of_freedom);
                    summary.n = Some(a.n);
                    summary.p_value = Some(a.p_value);
                    summary.cramers_v = Some(a.cramers_v);
                }
                Err(Error::DegenerateTable(msg)) => {
                    log::warn!("association test skipped: {msg}");
                    summary.status = format!("degenerate table: {msg}");
                }
                Err(e) => return Err(e),
            }
        }

        let mut graph = Vec::new();
        write_graphml(&net, partition.as_ref(), &mut graph).map_err(|e| Error::io(self.path(GRAPH), e))?;
        write_atomic(&self.path(GRAPH), &graph)?;
        write_csv(&self.path(COMMUNITIES), &communities)?;
        write_csv(&self.path(ASSOCIATION), &cells)?;
        write_csv(&self.path(ASSOCIATION_SUMMARY), std::slice::from_ref(&summary))?;

        let mut p = Produced::default();
        p.count("nodes", net.node_count());
        p.count("edges", net.edge_count());
        p.count("communities", summary.communities);
        p.files = vec![ASSOCIATION, ASSOCIATION_SUMMARY, COMMUNITIES, GRAPH];
        Ok(p)
    }

    fn report(&self, manifest: &Manifest) -> Result<Produced> {
        let mut out = String::from("# Run report\n\n");
        writeln!(out, "Configuration sha256 `{}`, seed {}.\n", manifest.config_sha256, manifest.seed).unwrap();

        if let Some(l) = &manifest.ledger {
            out.push_str("## Filtration\n\n| step | records |\n|---|---:|\n");
            for (name, n) in [
                ("collected", l.total_in),
                ("excluded: unresolvable truncated retweet", l.excluded_unresolvable_retweet),
                ("excluded: no geodata", l.excluded_no_geodata),
                ("excluded: illegible geodata", l.excluded_illegible_geodata),
                ("excluded: too short after cleaning", l.excluded_too_short_after_clean),
                ("retained", l.retained),
            ] {
                writeln!(out, "| {name} | {n} |").unwrap();
            }
            out.push('\n');
        }

        let yearly: Vec<YearlyRow> = read_csv(&self.path(YEARLY_USERS))?;
        out.push_str("## Posts and users per year\n\n");
        out.push_str("| year | posts | new users | active users | share new | posts per user |\n");
        out.push_str("|---|---:|---:|---:|---:|---:|\n");
        for y in &yearly {
            let mark = if y.partial_year { " (partial)" } else { "" };
            writeln!(
                out,
                "| {}{mark} | {} | {} | {} | {:.2} | {:.2} |",
                y.year,
                y.tweet_count,
                y.new_users,
                y.active_users,
                round2(y.share_new),
                round2(y.tweets_per_user)
            )
            .unwrap();
        }
        out.push('\n');

        if self.path(TRAIN_METRICS).exists() {
            let m: TrainMetrics = read_json(&self.path(TRAIN_METRICS))?;
            out.push_str("## Classifier, held-out split\n\n");
            writeln!(
                out,
                "Annotated: {} negative, {} neutral, {} positive; {} train, {} test.\n",
                m.annotated[0], m.annotated[1], m.annotated[2], m.train_size, m.test_size
            )
            .unwrap();
            out.push_str("| scheme | macro precision | macro recall | macro F1 | accuracy |\n|---|---:|---:|---:|---:|\n");
            for (name, r) in [("ternary", &m.ternary), ("binary", &m.binary)] {
                writeln!(
                    out,
                    "| {name} | {:.3} | {:.3} | {:.3} | {:.3} |",
                    r.macro_precision, r.macro_recall, r.macro_f1, r.accuracy
                )
                .unwrap();
            }
            out.push('\n');
        }

        if self.path(ASSOCIATION_SUMMARY).exists() {
            let rows: Vec<AssociationSummary> = read_csv(&self.path(ASSOCIATION_SUMMARY))?;
            if let Some(s) = rows.first() {
                out.push_str("## Interaction network\n\n");
                writeln!(out, "{} users, {} directed edges, {} communities.", s.nodes, s.edges, s.communities).unwrap();
                if let Some(q) = s.modularity {
                    writeln!(out, "Modularity {q:.4}.").unwrap();
                }
                match (s.chi_square, s.df, s.n, s.p_value, s.cramers_v) {
                    (Some(x), Some(df), Some(n), Some(p), Some(v)) => {
                        writeln!(out, "Region × community: χ²({df}, N = {n}) = {x:.2}, p = {p:.3e}, V = {v:.3}.").unwrap();
                    }
                    _ => writeln!(out, "Association test not run: {}.", s.status).unwrap(),
                }
                out.push('\n');
            }
        }

        write_atomic(&self.path(REPORT), out.as_bytes())?;
        Ok(Produced {
            files: vec![REPORT],
            ..Produced::default()
        })
    }
}

fn order_error(stage: Stage, required: Stage) -> Error {
    Error::StageOrder {
        stage: stage.name().to_string(),
        required: required.name().to_string(),
    }
}

#[derive(Serialize, Deserialize)]
struct QuarantineEntry {
    line: Option<usize>,
    id: Option<String>,
    reason: String,
    detail: String,
    raw: Option<String>,
}

#[derive(Serialize)]
struct GeoExcludedRow<'a> {
    id: &'a str,
    reason: &'static str,
}

#[derive(Serialize)]
struct RegionalCountRow<'a> {
    region: &'a str,
    name: &'a str,
    posts: u64,
    users: u64,
    share_of_posts: f64,
    population: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct TrainMetrics {
    backend: BackendKind,
    /// Cleaned annotated rows per class: negative, neutral, positive.
    annotated: [usize; 3],
    skipped_rows: usize,
    train_size: usize,
    test_size: usize,
    ternary: crate::classify::metrics::MetricsReport,
    binary: crate::classify::metrics::MetricsReport,
}

#[derive(Serialize, Deserialize)]
struct PredictionRow {
    #[serde(flatten)]
    prediction: Prediction,
    binary: BinaryLabel,
}

#[derive(Serialize)]
struct SampleRow<'a> {
    id: &'a str,
    text: &'a str,
    predicted: &'static str,
    margin: f64,
    /// Left empty for the annotator.
    label: &'static str,
}

#[derive(Serialize)]
struct FrequencyRow {
    posts_per_user: u64,
    users: u64,
}

#[derive(Serialize)]
struct CommunityRow<'a> {
    author_id: &'a str,
    handle: &'a str,
    region: &'a str,
    community: usize,
}

#[derive(Serialize)]
struct AssociationCell {
    region: String,
    community: String,
    count: u64,
}

#[derive(Default, Serialize, Deserialize)]
struct AssociationSummary {
    status: String,
    nodes: usize,
    edges: usize,
    communities: usize,
    modularity: Option<f64>,
    chi_square: Option<f64>,
    df: Option<usize>,
    n: Option<u64>,
    p_value: Option<f64>,
    cramers_v: Option<f64>,
}

#[derive(Deserialize)]
struct YearlyRow {
    year: i32,
    tweet_count: u64,
    new_users: u64,
    active_users: u64,
    share_new: f64,
    tweets_per_user: f64,
    partial_year: bool,
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).expect("artifact serializes");
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Input(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    write_atomic(path, &bytes)
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Input(format!("{}: {e}", path.display()))))
        .collect()
}

fn write_rows_file(path: &Path, rows: &[AnnotatedRow]) -> Result<()> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    write_atomic(path, &buf)
}

/// Regions listed in a regions file, or the default county list.
pub fn region_list(path: Option<&Path>) -> Result<Vec<RegionCode>> {
    let regions = match path {
        Some(p) => {
            let f = std::fs::File::open(p).map_err(|e| Error::io(p, e))?;
            read_regions(f)?
        }
        None => crate::geocode::default_regions(),
    };
    Ok(regions.into_iter().map(|r| r.nuts3_code).collect())
}
