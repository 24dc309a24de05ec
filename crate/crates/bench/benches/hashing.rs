use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use rambo_core::hashing::{derive_hasher, key_digest, HashRole};

fn hashing(c: &mut Criterion) {
    let h = derive_hasher(1, HashRole::Bloom, 0, 1 << 20).unwrap();
    let term = b"ACGTACGTACGTACGTACGTACGTACGTACG";
    let mut group = c.benchmark_group("hashing");
    group.throughput(Throughput::Elements(1));
    group.bench_function("key_digest_31", |b| b.iter(|| black_box(key_digest(black_box(term)))));
    group.bench_function("universal_hash", |b| b.iter(|| black_box(h.hash(black_box(0x1234_5678_9abc)))));
    group.finish();
}

criterion_group!(benches, hashing);
criterion_main!(benches);
