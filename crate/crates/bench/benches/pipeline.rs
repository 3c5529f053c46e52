use std::hint::black_box;

use arcdex::cluster::{cluster_all, matrix_mode_linkage, reference_matrix_as_printed};
use arcdex::pipeline::analyze_book;
use arcdex::spsi::{spsi, spsi_matrix};
use arcdex::synth::{generate, GenSpec};
use arcdex::{AliasTable, PipelineConfig, SentimentLexicon, SentimentSeries};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn corpus_series(per_archetype: usize) -> Vec<SentimentSeries> {
    let lex = SentimentLexicon::default_english();
    let spec = GenSpec {
        books_per_archetype: per_archetype,
        ..GenSpec::default()
    };
    let cfg = PipelineConfig::default();
    generate(&spec, &lex)
        .unwrap()
        .books
        .iter()
        .map(|b| {
            analyze_book(&b.document, &lex, &AliasTable::new(), &cfg)
                .unwrap()
                .series
        })
        .collect()
}

fn bench_spsi(c: &mut Criterion) {
    let a = [
        0.2, 0.3, 0.5, 0.6, 0.55, 0.7, 0.8, 0.75, 0.6, 0.9, 0.85, 0.5,
    ];
    let b = [
        0.3, 0.35, 0.4, 0.65, 0.5, 0.6, 0.85, 0.7, 0.65, 0.8, 0.9, 0.45,
    ];
    c.bench_function("spsi/12", |bench| {
        bench.iter(|| spsi(black_box(&a), black_box(&b)).unwrap())
    });
}

fn bench_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("spsi_matrix");
    for per in [5, 25] {
        let series = corpus_series(per);
        group.bench_with_input(
            BenchmarkId::from_parameter(series.len()),
            &series,
            |bench, s| bench.iter(|| spsi_matrix(s.iter()).unwrap()),
        );
    }
    group.finish();
}

fn bench_cluster(c: &mut Criterion) {
    let reference = reference_matrix_as_printed().mirror_lower();
    c.bench_function("cluster/reference_matrix", |bench| {
        bench.iter(|| matrix_mode_linkage(black_box(&reference), 0.4).unwrap())
    });

    let series = corpus_series(25);
    let matrix = spsi_matrix(series.iter()).unwrap();
    c.bench_function("cluster/series_100", |bench| {
        bench.iter(|| cluster_all(&matrix, &series, 0.9).unwrap())
    });
}

fn bench_book(c: &mut Criterion) {
    let lex = SentimentLexicon::default_english();
    let spec = GenSpec {
        books_per_archetype: 1,
        ..GenSpec::default()
    };
    let book = generate(&spec, &lex).unwrap().books.remove(0);
    let cfg = PipelineConfig::default();
    let aliases = AliasTable::new();
    c.bench_function("analyze_book", |bench| {
        bench.iter(|| analyze_book(black_box(&book.document), &lex, &aliases, &cfg).unwrap())
    });
}

criterion_group!(benches, bench_spsi, bench_matrix, bench_cluster, bench_book);
criterion_main!(benches);
