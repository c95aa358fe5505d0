use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sentiscope::analytics::yearly_user_stats;
use sentiscope::geocode::geocode_corpus;
use sentiscope::ingest::parse_corpus;
use sentiscope::synth::{self, CorpusSpec};
use sentiscope::textprep::{clean_all, CleanConfig};
use sentiscope::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn stages(c: &mut Criterion) {
    let corpus = synth::corpus(&CorpusSpec {
        records: 20_000,
        authors: 2_000,
        ..CorpusSpec::default()
    });
    let jsonl: String = corpus
        .iter()
        .map(|r| serde_json::to_string(r).unwrap() + "\n")
        .collect();
    let gaz = synth::demo_gazetteer();
    let cfg = CleanConfig::new(synth::DEMO_STOPWORDS.iter().copied(), ["hytte"]);
    let pairs: Vec<(&str, &str)> = corpus.iter().map(|r| (r.id.as_str(), r.text.as_str())).collect();

    let mut g = c.benchmark_group("pipeline");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("parse", name), &exec, |b, &e| {
            b.iter(|| parse_corpus(black_box(&jsonl), e))
        });
        g.bench_with_input(BenchmarkId::new("geocode", name), &exec, |b, &e| {
            b.iter(|| geocode_corpus(black_box(corpus.clone()), &gaz, e))
        });
        g.bench_with_input(BenchmarkId::new("clean", name), &exec, |b, &e| {
            b.iter(|| clean_all(black_box(&pairs), &cfg, e))
        });
        g.bench_with_input(BenchmarkId::new("yearly_users", name), &exec, |b, &e| {
            b.iter(|| yearly_user_stats(black_box(&corpus), None, e))
        });
    }
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
