//! Turn an archive of geotaggable microblog posts into spatio-temporal
//! sentiment statistics.
//!
//! The pipeline runs in stages, each of which can also be used on its own:
//!
//! - [`ingest`]: read line-delimited post records, repair truncated
//!   retweets and keep a filtration ledger.
//! - [`geocode`]: resolve posts to NUTS3 regions from post geodata or a
//!   gazetteer match on the free-text user location.
//! - [`textprep`]: strip URLs, mentions, emoji, stop words and query
//!   keywords, and drop residue-only posts.
//! - [`classify`]: label scheme, metrics, a deterministic hashed-feature
//!   baseline and a client for external model adapters.
//! - [`analytics`]: yearly user statistics, sentiment share series,
//!   normalized regional trends and survey comparisons.
//! - [`netstats`]: interaction network, Louvain communities and the
//!   chi-square / Cramér's V association between regions and communities.
//! - [`pipeline`]: configuration, run directory artifacts and the manifest.
//!
//! Per-record work runs on rayon when the `parallel` feature is on (the
//! default); every parallel path produces output identical to the
//! sequential one.

#![forbid(unsafe_code)]

pub mod analytics;
pub mod classify;
pub mod error;
pub mod exec;
pub mod geocode;
pub mod ingest;
pub mod netstats;
pub mod pipeline;
pub mod synth;
pub mod textprep;

pub use error::{Error, Result};
pub use exec::Execution;
