use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{DateTime, Datelike, Utc};
use serde::Serialize;

use super::PostMeta;
use crate::exec::{self, Execution};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct YearlyUserStats {
    pub year: i32,
    pub tweet_count: u64,
    pub new_users: u64,
    pub active_users: u64,
    pub share_new: f64,
    pub tweets_per_user: f64,
    /// The collection window ends before this year does.
    pub partial_year: bool,
}

impl YearlyUserStats {
    /// Derive the ratio columns from the raw counts. `active_users` must be
    /// positive.
    pub fn from_counts(year: i32, tweet_count: u64, new_users: u64, active_users: u64) -> Self {
        assert!(active_users > 0, "a year in the table has at least one active user");
        assert!(new_users <= active_users);
        Self {
            year,
            tweet_count,
            new_users,
            active_users,
            share_new: new_users as f64 / active_users as f64,
            tweets_per_user: tweet_count as f64 / active_users as f64,
            partial_year: false,
        }
    }
}

#[derive(Default)]
struct YearAcc<'a> {
    tweets: BTreeMap<i32, u64>,
    authors: HashMap<i32, HashSet<&'a str>>,
    first_year: HashMap<&'a str, i32>,
}

impl<'a> YearAcc<'a> {
    fn add(mut self, author: &'a str, year: i32) -> Self {
        *self.tweets.entry(year).or_default() += 1;
        self.authors.entry(year).or_default().insert(author);
        self.first_year
            .entry(author)
            .and_modify(|y| *y = (*y).min(year))
            .or_insert(year);
        self
    }

    fn merge(mut self, other: Self) -> Self {
        for (y, n) in other.tweets {
            *self.tweets.entry(y).or_default() += n;
        }
        for (y, set) in other.authors {
            self.authors.entry(y).or_default().extend(set);
        }
        for (a, y) in other.first_year {
            self.first_year
                .entry(a)
                .and_modify(|v| *v = (*v).min(y))
                .or_insert(y);
        }
        self
    }
}

/// Per-year post counts, active and first-seen authors, for every year with
/// posts. `window_end` marks the last year as partial when it ends before
/// 31 December; without it the latest post is used.
pub fn yearly_user_stats<P: PostMeta + Sync>(
    posts: &[P],
    window_end: Option<DateTime<Utc>>,
    exec: Execution,
) -> Vec<YearlyUserStats> {
    let acc = exec::fold_merge(
        exec,
        posts,
        YearAcc::default,
        |acc, p| acc.add(p.author_id(), p.created_at().year()),
        YearAcc::merge,
    );
    let mut new_by_year: HashMap<i32, u64> = HashMap::new();
    for y in acc.first_year.values() {
        *new_by_year.entry(*y).or_default() += 1;
    }
    let end = window_end.or_else(|| posts.iter().map(|p| p.created_at()).max());
    acc.tweets
        .iter()
        .map(|(&year, &tweets)| {
            let mut row = YearlyUserStats::from_counts(
                year,
                tweets,
                new_by_year.get(&year).copied().unwrap_or(0),
                acc.authors[&year].len() as u64,
            );
            row.partial_year = end.is_some_and(|e| e.year() == year && (e.month(), e.day()) != (12, 31));
            row
        })
        .collect()
}

/// Number of authors per posts-per-author count.
pub fn user_frequency_distribution<P: PostMeta + Sync>(posts: &[P], exec: Execution) -> BTreeMap<u64, u64> {
    let per_author = exec::fold_merge(
        exec,
        posts,
        HashMap::<&str, u64>::new,
        |mut m, p| {
            *m.entry(p.author_id()).or_default() += 1;
            m
        },
        |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        },
    );
    let mut hist = BTreeMap::new();
    for n in per_author.into_values() {
        *hist.entry(n).or_default() += 1;
    }
    hist
}
