//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sentiscope::analytics::round2;
use sentiscope::analytics::users::{yearly_user_stats, YearlyUserStats};
use sentiscope::classify::annotated::AnnotatedSet;
use sentiscope::classify::{classify_corpus, evaluate, f1, train_baseline, Backend, BaselineConfig, Prediction, Scheme, SentimentLabel};
use sentiscope::geocode::geocode_corpus;
use sentiscope::ingest::ledger::{Exclusion, FiltrationLedger};
use sentiscope::ingest::retweet::repair_retweets;
use sentiscope::ingest::{ingest, TimeWindow};
use sentiscope::netstats::{chi_square_independence, cramers_v, detect_communities, UserNetwork};
use sentiscope::pipeline::{Config, Manifest, Overrides, Pipeline};
use sentiscope::synth::{self, CorpusSpec};
use sentiscope::textprep::{clean_all, CleanConfig, Cleaned, CleanedDocument};
use sentiscope::Execution;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

/// year, tweets, new users, active users, reference share new, reference
/// tweets per user.
const YEARLY_REFERENCE: [(i32, u64, u64, u64, f64, f64); 15] = [
    (2008, 16, 9, 9, 1.00, 1.78),
    (2009, 411, 213, 218, 0.98, 1.89),
    (2010, 682, 285, 349, 0.82, 1.95),
    (2011, 931, 328, 455, 0.72, 2.05),
    (2012, 2163, 654, 872, 0.75, 2.48),
    (2013, 1910, 538, 852, 0.63, 2.24),
    (2014, 2129, 449, 800, 0.56, 2.66),
    (2015, 2497, 431, 850, 0.51, 2.94),
    (2016, 2560, 299, 716, 0.42, 3.58),
    (2017, 2542, 318, 740, 0.43, 3.44),
    (2018, 4442, 413, 895, 0.46, 4.96),
    (2019, 15783, 1214, 2250, 0.54, 7.01),
    (2020, 13288, 792, 1985, 0.40, 6.69),
    (2021, 9512, 714, 1944, 0.37, 4.89),
    (2022, 9961, 630, 1868, 0.34, 5.33),
];

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn yearly_reference() -> Check {
    let start = Instant::now();
    let check_row = |s: &YearlyUserStats, share: f64, tpu: f64| {
        ensure(
            (round2(s.share_new) - share).abs() <= 0.005 && (round2(s.tweets_per_user) - tpu).abs() <= 0.005,
            || format!("{}: got {:.2} / {:.2}, want {share:.2} / {tpu:.2}", s.year, s.share_new, s.tweets_per_user),
        )
    };
    for &(year, tweets, new, active, share, tpu) in &YEARLY_REFERENCE {
        check_row(&YearlyUserStats::from_counts(year, tweets, new, active), share, tpu)?;
    }
    let direct = start.elapsed();

    // The same counts realised as a corpus and aggregated from posts.
    let raw: Vec<_> = YEARLY_REFERENCE.iter().map(|r| (r.0, r.1, r.2, r.3)).collect();
    let corpus = synth::corpus_from_yearly_counts(&raw, 2022).map_err(|e| e.to_string())?;
    let rows = yearly_user_stats(&corpus, None, Execution::Parallel);
    ensure(rows.len() == YEARLY_REFERENCE.len(), || format!("{} yearly rows", rows.len()))?;
    for (s, &(year, tweets, new, active, share, tpu)) in rows.iter().zip(&YEARLY_REFERENCE) {
        ensure(
            (s.year, s.tweet_count, s.new_users, s.active_users) == (year, tweets, new, active),
            || format!("{year}: counts {:?}", (s.tweet_count, s.new_users, s.active_users)),
        )?;
        check_row(s, share, tpu)?;
    }
    ensure(direct < Duration::from_secs(1), || format!("took {direct:?}"))?;
    Ok(format!("15 years within 0.005, {} posts re-aggregated", corpus.len()))
}

fn cramers() -> Check {
    let v = cramers_v(6092.78, 60450, 11, 6).map_err(|e| e.to_string())?;
    ensure((v - 0.142).abs() <= 0.001, || format!("V = {v}"))?;
    Ok(format!("V = {v:.5}"))
}

fn metrics_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let n = rng.random_range(1..=200);
        let mut gold = Vec::with_capacity(n);
        let mut preds = Vec::with_capacity(n);
        for i in 0..n {
            let g = SentimentLabel::ALL[rng.random_range(0..3)];
            let p = SentimentLabel::ALL[rng.random_range(0..3)];
            let mut raw = [0.1, 0.1, 0.1];
            raw[p.index()] = 0.8;
            let id = format!("d{i}");
            preds.push(Prediction::from_scores(id.clone(), raw).map_err(|e| e.to_string())?);
            gold.push((id, g));
        }
        for scheme in [Scheme::Ternary, Scheme::Binary] {
            let report = evaluate(&preds, &gold, scheme).map_err(|e| e.to_string())?;
            let k = scheme.class_names().len();
            let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
            for c in 0..k {
                let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
                for (p, (_, g)) in preds.iter().zip(&gold) {
                    let (pc, gc) = (scheme.class_of(p.label), scheme.class_of(*g));
                    match (pc == c, gc == c) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fneg += 1,
                        _ => {}
                    }
                }
                let pr = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
                let rc = if tp + fneg == 0 { 0.0 } else { tp as f64 / (tp + fneg) as f64 };
                let f = if pr + rc == 0.0 { 0.0 } else { 2.0 * pr * rc / (pr + rc) };
                let m = &report.per_class[c];
                let conf = &report.confusion;
                ensure(
                    conf.true_positives(c) == tp && conf.false_positives(c) == fp && conf.false_negatives(c) == fneg,
                    || format!("case {case} {scheme:?} class {c}: counts differ"),
                )?;
                ensure(
                    (m.precision - pr).abs() <= 1e-12 && (m.recall - rc).abs() <= 1e-12 && (m.f1 - f).abs() <= 1e-12,
                    || format!("case {case} {scheme:?} class {c}: metrics differ"),
                )?;
                sp += pr;
                sr += rc;
                sf += f;
            }
            let k = k as f64;
            ensure(
                (report.macro_precision - sp / k).abs() <= 1e-12
                    && (report.macro_recall - sr / k).abs() <= 1e-12
                    && (report.macro_f1 - sf / k).abs() <= 1e-12,
                || format!("case {case} {scheme:?}: macro averages differ"),
            )?;
        }
    }
    Ok("1000 cases, ternary and binary".into())
}

fn f1_grid() -> Check {
    ensure(matches!(f1(0.0, 0.0), Ok(v) if v == 0.0), || "f1(0, 0) is not 0".into())?;
    for i in 0..10 {
        for j in 0..10 {
            let (p, r) = (i as f64 / 9.0, j as f64 / 9.0);
            let want = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            let got = f1(p, r).map_err(|e| e.to_string())?;
            ensure((got - want).abs() <= 1e-12, || format!("f1({p}, {r}) = {got}, want {want}"))?;
        }
    }
    Ok("100 grid points".into())
}

/// Ingest, geocode and clean in memory, keeping the ledger as the pipeline
/// does.
fn filter(records: Vec<sentiscope::ingest::record::PostRecord>) -> std::result::Result<(FiltrationLedger, Vec<CleanedDocument>), String> {
    let gaz = synth::demo_gazetteer();
    let cfg = CleanConfig::new(synth::DEMO_STOPWORDS.iter().copied(), ["hytte"]);
    let out = ingest(records, &TimeWindow::default()).map_err(|e| e.to_string())?;
    let mut ledger = out.ledger;
    let n = out.records.len() as u64;
    let geo = geocode_corpus(out.records, &gaz, Execution::Parallel);
    ledger
        .record_stage(
            "geocode",
            n,
            &[
                (Exclusion::NoGeodata, geo.no_geodata.len() as u64),
                (Exclusion::IllegibleGeodata, geo.illegible.len() as u64),
            ],
        )
        .map_err(|e| e.to_string())?;
    let pairs: Vec<(&str, &str)> = geo.retained.iter().map(|r| (r.record.id.as_str(), r.record.text.as_str())).collect();
    let kept: Vec<CleanedDocument> = clean_all(&pairs, &cfg, Execution::Parallel)
        .into_iter()
        .filter_map(Cleaned::kept)
        .collect();
    ledger
        .record_stage(
            "clean",
            pairs.len() as u64,
            &[(Exclusion::TooShortAfterClean, (pairs.len() - kept.len()) as u64)],
        )
        .map_err(|e| e.to_string())?;
    Ok((ledger, kept))
}

fn filtration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut total = 0;
    for case in 0..100u64 {
        let records = if case == 0 { 0 } else { rng.random_range(0..=10_000) };
        let spec = CorpusSpec {
            records,
            authors: (records / 7).max(2),
            seed: case,
            share_no_geodata: rng.random_range(0.0..0.4),
            share_illegible: rng.random_range(0.0..0.4),
            share_retweet: rng.random_range(0.0..0.5),
            share_truncated: rng.random_range(0.0..0.8),
            share_orphan: rng.random_range(0.0..0.5),
            share_residue: rng.random_range(0.0..0.1),
        };
        let mut corpus = synth::corpus(&spec);
        total += corpus.len();
        let (ledger, kept) = filter(corpus.clone())?;
        ensure(ledger.is_conserved(), || format!("corpus {case}: ledger not conserved: {ledger:?}"))?;
        ensure(ledger.total_in == corpus.len() as u64 && ledger.retained == kept.len() as u64, || {
            format!("corpus {case}: ledger totals disagree with outputs")
        })?;
        corpus.shuffle(&mut rng);
        let (ledger2, kept2) = filter(corpus)?;
        ensure(ledger == ledger2 && kept == kept2, || format!("corpus {case}: permutation changed the output"))?;
    }
    Ok(format!("100 corpora, {total} records"))
}

fn retweets() -> Check {
    let truth = synth::retweet_ground_truth(400, 11);
    let out = repair_retweets(truth.records.clone());
    let mut restored = 0;
    let mut dropped = 0;
    for (id, want) in &truth.expected {
        let got = out.records.iter().find(|r| &r.id == id).map(|r| &r.text);
        match want {
            Some(text) => {
                ensure(got == Some(text), || format!("{id}: got {got:?}, want {text:?}"))?;
                restored += 1;
            }
            None => {
                ensure(got.is_none() && out.dropped_ids.contains(id), || format!("{id} should be dropped"))?;
                dropped += 1;
            }
        }
    }
    let again = repair_retweets(out.records.clone());
    ensure(again.records == out.records && again.dropped_ids.is_empty(), || "repair is not idempotent".into())?;
    Ok(format!("{restored} restored, {dropped} dropped, idempotent"))
}

fn brute_modularity(net: &UserNetwork, assignment: &[usize], gamma: f64) -> f64 {
    let n = net.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for (u, v, w) in net.undirected() {
        a[u][v] += w;
        a[v][u] += w;
    }
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if assignment[i] == assignment[j] {
                q += a[i][j] - gamma * k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i:02}")).collect()
}

fn communities() -> Check {
    for k in 5..=10 {
        let names = ids(2 * k);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut edges = Vec::new();
        for off in [0, k] {
            for i in 0..k {
                for j in i + 1..k {
                    edges.push((off + i, off + j, 1));
                }
            }
        }
        edges.push((k - 1, k, 1));
        let net = UserNetwork::from_edges(&refs, &edges);
        for seed in [None, Some(1), Some(2)] {
            let p = detect_communities(&net, 1.0, seed).map_err(|e| e.to_string())?;
            ensure(p.community_count == 2, || format!("k = {k}: {} communities", p.community_count))?;
            ensure(
                p.assignment[..k].iter().all(|&c| c == p.assignment[0])
                    && p.assignment[k..].iter().all(|&c| c == p.assignment[k]),
                || format!("k = {k}: cliques split"),
            )?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut graphs = 0;
    while graphs < 200 {
        let n = rng.random_range(2..=15);
        let names = ids(n);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let density = rng.random_range(0.1..0.7);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(density) {
                    edges.push((i, j, rng.random_range(1..5)));
                }
            }
        }
        if edges.is_empty() {
            continue;
        }
        let net = UserNetwork::from_edges(&refs, &edges);
        let gamma = [0.5, 1.0, 1.5][graphs % 3];
        let p = detect_communities(&net, gamma, Some(graphs as u64)).map_err(|e| e.to_string())?;
        let q = brute_modularity(&net, &p.assignment, gamma);
        ensure((p.modularity - q).abs() <= 1e-9, || format!("graph {graphs}: reported {} vs {q}", p.modularity))?;
        graphs += 1;
    }
    Ok("k = 5..10 give 2 communities; 200 random graphs within 1e-9".into())
}

/// Upper regularized gamma Q(a, x) from the lower series, summed in f64
/// until terms vanish.
fn reference_sf(x: f64, df: usize) -> f64 {
    let a = df as f64 / 2.0;
    let x = x / 2.0;
    if x <= 0.0 {
        return 1.0;
    }
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = 1.0;
    while term > sum * 1e-18 {
        term *= x / (a + n);
        sum += term;
        n += 1.0;
    }
    let lower = (a * x.ln() - x - statrs::function::gamma::ln_gamma(a)).exp() * sum;
    (1.0 - lower).max(0.0)
}

fn chi_square() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tables = 0;
    let mut worst_p: f64 = 0.0;
    while tables < 500 {
        let r = rng.random_range(2..=6);
        let c = rng.random_range(2..=6);
        let t: Vec<Vec<u64>> = (0..r).map(|_| (0..c).map(|_| rng.random_range(0..60)).collect()).collect();
        let rows: Vec<f64> = t.iter().map(|row| row.iter().sum::<u64>() as f64).collect();
        let cols: Vec<f64> = (0..c).map(|j| t.iter().map(|row| row[j]).sum::<u64>() as f64).collect();
        if rows.contains(&0.0) || cols.contains(&0.0) {
            continue;
        }
        let n: f64 = rows.iter().sum();
        let mut want = 0.0;
        for i in 0..r {
            for j in 0..c {
                let e = rows[i] * cols[j] / n;
                want += (t[i][j] as f64 - e).powi(2) / e;
            }
        }
        let got = chi_square_independence(&t).map_err(|e| e.to_string())?;
        ensure((got.statistic - want).abs() <= 1e-9 * want.abs().max(1e-300), || {
            format!("table {tables}: {} vs {want}", got.statistic)
        })?;
        ensure(got.df == (r - 1) * (c - 1), || format!("table {tables}: df {}", got.df))?;
        let p_ref = reference_sf(got.statistic, got.df);
        worst_p = worst_p.max((got.p_value - p_ref).abs());
        tables += 1;
    }
    for df in 1..=60 {
        for x in [0.01, 0.5, 1.0, 3.0, 10.0, 30.0, 60.0, 100.0, 150.0] {
            let got = sentiscope::netstats::chi_square_sf(x, df as f64);
            worst_p = worst_p.max((got - reference_sf(x, df)).abs());
        }
    }
    ensure(worst_p <= 1e-6, || format!("p-value error {worst_p:e}"))?;
    Ok(format!("500 tables; p-value max error {worst_p:.1e} for df <= 60"))
}

fn baseline() -> Check {
    let rows = synth::labeled_rows(1500, [1, 1, 1], 0.1, 42);
    let cfg = CleanConfig::new(synth::DEMO_STOPWORDS.iter().copied(), std::iter::empty::<&str>());
    let (set, _) = AnnotatedSet::from_rows(&rows, &cfg);
    let (train, test) = set.stratified_split(0.8, 42);
    ensure(train.len() + test.len() == set.len(), || "split lost items".into())?;
    let model = train_baseline(&train, &BaselineConfig::default()).map_err(|e| e.to_string())?;
    let docs: Vec<CleanedDocument> = test.items.iter().map(|it| it.doc.clone()).collect();
    let preds = classify_corpus(&Backend::Baseline(&model), &docs, Execution::Parallel).map_err(|e| e.to_string())?;
    let report = evaluate(&preds, &test.gold(), Scheme::Ternary).map_err(|e| e.to_string())?;
    ensure(report.macro_f1 >= 0.9, || format!("macro F1 {:.3}", report.macro_f1))?;
    Ok(format!("{} train / {} test, macro F1 {:.3}", train.len(), test.len(), report.macro_f1))
}

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo")
}

fn run_demo(run_dir: &Path) -> std::result::Result<Manifest, String> {
    let mut cfg = Config::load(&demo_dir().join("config.toml")).map_err(|e| e.to_string())?;
    cfg.apply(&Overrides {
        run_dir: Some(run_dir.to_path_buf()),
        ..Overrides::default()
    })
    .map_err(|e| e.to_string())?;
    Pipeline::new(cfg).run_all().map_err(|e| e.to_string())?;
    Manifest::load(run_dir)
        .map_err(|e| e.to_string())?
        .ok_or_else(|| "no manifest".to_string())
}

fn end_to_end() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let start = Instant::now();
    let ma = run_demo(&a)?;
    let elapsed = start.elapsed();
    let mb = run_demo(&b)?;
    ensure(ma.without_timings() == mb.without_timings(), || "manifests differ".into())?;

    let mut files: Vec<_> = std::fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name()).map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    files.sort();
    let mut compared = 0;
    for f in &files {
        if f == "manifest.json" {
            continue;
        }
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        ensure(matches!((&x, &y), (Ok(x), Ok(y)) if x == y), || format!("{f:?} differs"))?;
        compared += 1;
    }
    ensure(elapsed < Duration::from_secs(30), || format!("run took {elapsed:?}"))?;
    Ok(format!("{compared} artifacts identical, one run {:.1} s", elapsed.as_secs_f64()))
}

fn main() {
    let checks: [Criterion; 10] = [
        ("yearly_user_derivations", yearly_reference),
        ("cramers_v", cramers),
        ("metrics_oracle", metrics_oracle),
        ("f1_grid", f1_grid),
        ("filtration_conservation", filtration),
        ("retweet_repair", retweets),
        ("community_detection", communities),
        ("chi_square_oracle", chi_square),
        ("baseline_macro_f1", baseline),
        ("end_to_end_determinism", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.2} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({secs:.2} s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
