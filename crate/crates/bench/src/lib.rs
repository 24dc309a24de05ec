//! Synthetic corpora shared by the benchmarks.

use rambo_core::ingest::NamedTerms;
use rambo_core::{RamboIndex, RamboParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_kmer(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| b"ACGT"[rng.random_range(0..4)]).collect()
}

/// `sets` sets of `terms` random k-mers each.
pub fn kmer_corpus(seed: u64, sets: usize, terms: usize, k: usize) -> Vec<NamedTerms> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sets).map(|i| (format!("set{i:05}"), (0..terms).map(|_| random_kmer(&mut rng, k)).collect())).collect()
}

/// An index over [`kmer_corpus`] with filters sized for p = 0.01.
pub fn built_index(sets: usize, terms: usize, buckets: u32, repetitions: u16) -> (RamboIndex, Vec<NamedTerms>) {
    let corpus = kmer_corpus(1, sets, terms, 31);
    let params = RamboParams::new(buckets, repetitions)
        .with_seed(7)
        .sized_for(sets as u64, terms as u64, 0.01)
        .expect("valid parameters");
    let index = RamboIndex::build(params, corpus.iter().map(|(n, t)| (n, t))).expect("valid parameters");
    (index, corpus)
}
