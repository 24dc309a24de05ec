use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use rambo_bench::kmer_corpus;
use rambo_core::{RamboIndex, RamboParams};

fn insert(c: &mut Criterion) {
    let corpus = kmer_corpus(3, 100, 1000, 31);
    let mut group = c.benchmark_group("insert");
    group.throughput(Throughput::Elements(100 * 1000));
    for r in [1u16, 2, 4] {
        let params = RamboParams::new(16, r).sized_for(100, 1000, 0.01).unwrap();
        group.bench_function(format!("K100_B16_R{r}"), |b| {
            b.iter_batched(
                || RamboIndex::new(params).unwrap(),
                |mut idx| {
                    for (name, terms) in &corpus {
                        idx.insert_set(name, terms);
                    }
                    black_box(idx)
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, insert);
criterion_main!(benches);
