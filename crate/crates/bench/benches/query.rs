use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rambo_bench::{built_index, random_kmer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn query_term(c: &mut Criterion) {
    let mut group = c.benchmark_group("query_term");
    for k in [100usize, 1000] {
        let buckets = ((k as f64 / 2.0).sqrt().round() as u32).max(2);
        let (index, corpus) = built_index(k, 200, buckets, 3);
        let present = corpus[k / 2].1[17].clone();
        let absent = random_kmer(&mut ChaCha8Rng::seed_from_u64(99), 31);
        group.bench_with_input(BenchmarkId::new("present", k), &present, |b, t| {
            b.iter(|| black_box(index.query_term(t).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("absent", k), &absent, |b, t| {
            b.iter(|| black_box(index.query_term(t).unwrap()))
        });
    }
    group.finish();
}

fn query_sequence(c: &mut Criterion) {
    let (index, _) = built_index(100, 1000, 8, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seq = random_kmer(&mut rng, 1000);
    c.bench_function("query_sequence/absent_1000bp", |b| b.iter(|| black_box(index.query_sequence(&seq, 31).unwrap())));
}

criterion_group!(benches, query_term, query_sequence);
criterion_main!(benches);
