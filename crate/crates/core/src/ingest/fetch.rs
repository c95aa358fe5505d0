//! Optional search client for a v2-style recent/full-archive search
//! endpoint. The HTTP call itself needs the `fetch` feature; request
//! construction and response mapping are always available.

use std::collections::HashMap;

use serde::Deserialize;
use url::Url;

use super::record::{rfc3339_secs, PostKind, PostRecord};
use super::retweet::parse_marker;
use crate::{Error, Result};

/// Query matching the wind-power keyword set in Norwegian.
pub const DEFAULT_QUERY: &str =
    "(havvind OR vindkraft OR vindmølle OR vindmøller OR vindmøllene OR vindturbiner OR vindenergi) lang:no";

#[derive(Clone, Debug)]
pub struct FetchConfig {
    pub base_url: String,
    pub bearer_token: String,
    pub query: String,
    pub start_time: Option<String>,
    pub end_time: Option<String>,
    pub max_results: u32,
}

impl FetchConfig {
    pub fn new(base_url: impl Into<String>, bearer_token: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            bearer_token: bearer_token.into(),
            query: DEFAULT_QUERY.to_string(),
            start_time: None,
            end_time: None,
            max_results: 100,
        }
    }

    pub fn request_url(&self, next_token: Option<&str>) -> Result<Url> {
        let mut url = Url::parse(&self.base_url)
            .map_err(|e| Error::Config(format!("fetch base url {:?}: {e}", self.base_url)))?;
        {
            let mut q = url.query_pairs_mut();
            q.append_pair("query", &self.query);
            q.append_pair("max_results", &self.max_results.to_string());
            q.append_pair(
                "tweet.fields",
                "author_id,created_at,public_metrics,geo,referenced_tweets",
            );
            q.append_pair("expansions", "author_id,geo.place_id");
            q.append_pair("user.fields", "username,location");
            q.append_pair("place.fields", "full_name");
            if let Some(t) = &self.start_time {
                q.append_pair("start_time", t);
            }
            if let Some(t) = &self.end_time {
                q.append_pair("end_time", t);
            }
            if let Some(t) = next_token {
                q.append_pair("next_token", t);
            }
        }
        Ok(url)
    }

    pub fn authorization_header(&self) -> String {
        format!("Bearer {}", self.bearer_token)
    }
}

#[derive(Debug, Deserialize)]
pub struct SearchPage {
    #[serde(default)]
    data: Vec<ApiPost>,
    #[serde(default)]
    includes: Includes,
    #[serde(default)]
    meta: Meta,
}

#[derive(Debug, Default, Deserialize)]
struct Includes {
    #[serde(default)]
    users: Vec<ApiUser>,
    #[serde(default)]
    places: Vec<ApiPlace>,
}

#[derive(Debug, Default, Deserialize)]
struct Meta {
    next_token: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ApiPost {
    id: String,
    author_id: String,
    created_at: String,
    text: String,
    #[serde(default)]
    public_metrics: Metrics,
    geo: Option<ApiGeo>,
    #[serde(default)]
    referenced_tweets: Vec<Reference>,
}

#[derive(Debug, Default, Deserialize)]
struct Metrics {
    #[serde(default)]
    like_count: u64,
    #[serde(default)]
    retweet_count: u64,
}

#[derive(Debug, Deserialize)]
struct ApiGeo {
    place_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Reference {
    #[serde(rename = "type")]
    kind: String,
}

#[derive(Debug, Deserialize)]
struct ApiUser {
    id: String,
    username: String,
    location: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ApiPlace {
    id: String,
    full_name: String,
}

impl SearchPage {
    pub fn next_token(&self) -> Option<&str> {
        self.meta.next_token.as_deref()
    }

    /// Map the page onto [`PostRecord`]s. Posts whose author is missing from
    /// the expansions are an error.
    pub fn into_records(self) -> Result<Vec<PostRecord>> {
        let users: HashMap<&str, &ApiUser> =
            self.includes.users.iter().map(|u| (u.id.as_str(), u)).collect();
        let places: HashMap<&str, &str> = self
            .includes
            .places
            .iter()
            .map(|p| (p.id.as_str(), p.full_name.as_str()))
            .collect();

        self.data
            .iter()
            .map(|p| {
                let user = users.get(p.author_id.as_str()).ok_or_else(|| {
                    Error::Input(format!("post {} has no expanded author {}", p.id, p.author_id))
                })?;
                let kind = if p.referenced_tweets.iter().any(|r| r.kind == "quoted") {
                    PostKind::Quote
                } else if p.referenced_tweets.iter().any(|r| r.kind == "retweeted")
                    && parse_marker(&p.text).is_some()
                {
                    PostKind::Retweet
                } else {
                    PostKind::Original
                };
                let post_geo = p
                    .geo
                    .as_ref()
                    .and_then(|g| g.place_id.as_deref())
                    .and_then(|id| places.get(id))
                    .map(|s| s.to_string());
                Ok(PostRecord {
                    id: p.id.clone(),
                    author_id: p.author_id.clone(),
                    author_handle: user.username.clone(),
                    created_at: rfc3339_secs::parse(&p.created_at).map_err(Error::Input)?,
                    text: p.text.clone(),
                    like_count: p.public_metrics.like_count,
                    retweet_count: p.public_metrics.retweet_count,
                    post_geo,
                    user_location: user.location.clone(),
                    kind,
                })
            })
            .collect()
    }
}

pub fn parse_page(body: &str) -> Result<SearchPage> {
    serde_json::from_str(body).map_err(|e| Error::Input(format!("search response: {e}")))
}

/// Fetch every page of results for the configured query.
#[cfg(feature = "fetch")]
pub fn fetch_all(cfg: &FetchConfig, max_pages: usize) -> Result<Vec<PostRecord>> {
    let agent = ureq::Agent::new_with_defaults();
    let mut out = Vec::new();
    let mut token: Option<String> = None;
    for _ in 0..max_pages {
        let url = cfg.request_url(token.as_deref())?;
        let body = agent
            .get(url.as_str())
            .header("Authorization", &cfg.authorization_header())
            .call()
            .map_err(|e| Error::Input(format!("GET {url}: {e}")))?
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Input(format!("GET {url}: {e}")))?;
        let page = parse_page(&body)?;
        token = page.next_token().map(str::to_string);
        out.extend(page.into_records()?);
        if token.is_none() {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_url_carries_encoded_query() {
        let cfg = FetchConfig::new("https://api.example.test/2/tweets/search/all", "tok");
        let url = cfg.request_url(Some("abc")).unwrap();
        let pairs: HashMap<_, _> = url.query_pairs().into_owned().collect();
        assert_eq!(pairs["query"], DEFAULT_QUERY);
        assert_eq!(pairs["next_token"], "abc");
        assert_eq!(cfg.authorization_header(), "Bearer tok");
        assert!(url.as_str().contains("vindm%C3%B8lle"));
    }

    #[test]
    fn maps_page_onto_records() {
        let body = r#"{
          "data": [
            {"id":"10","author_id":"u1","created_at":"2020-06-01T12:00:00.000Z","text":"Vindkraft er flott",
             "public_metrics":{"like_count":4,"retweet_count":1},"geo":{"place_id":"p1"}},
            {"id":"11","author_id":"u2","created_at":"2020-06-02T12:00:00.000Z","text":"RT @one: Vindkraft er flott",
             "referenced_tweets":[{"type":"retweeted","id":"10"}]},
            {"id":"12","author_id":"u2","created_at":"2020-06-03T12:00:00.000Z","text":"Helt enig",
             "referenced_tweets":[{"type":"quoted","id":"10"}]}
          ],
          "includes": {
            "users": [{"id":"u1","username":"one","location":"Bergen"},{"id":"u2","username":"two"}],
            "places": [{"id":"p1","full_name":"Bergen, Norge"}]
          },
          "meta": {"next_token":"n2"}
        }"#;
        let page = parse_page(body).unwrap();
        assert_eq!(page.next_token(), Some("n2"));
        let recs = page.into_records().unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].post_geo.as_deref(), Some("Bergen, Norge"));
        assert_eq!(recs[0].like_count, 4);
        assert_eq!(recs[1].kind, PostKind::Retweet);
        assert_eq!(recs[2].kind, PostKind::Quote);
        assert_eq!(recs[2].author_handle, "two");
        assert!(recs.iter().all(|r| r.validate().is_ok()));
    }

    #[test]
    fn missing_author_expansion_is_an_error() {
        let body = r#"{"data":[{"id":"1","author_id":"x","created_at":"2020-01-01T00:00:00Z","text":"t"}]}"#;
        assert!(parse_page(body).unwrap().into_records().is_err());
    }
}
