use std::collections::HashSet;
use std::fs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;

use rambo_core::ingest::kgram_tokens;
use rambo_core::{load_index, save_index, Corpus, CorpusSpec, RamboIndex, RamboParams};

fn acgt(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| b"ACGT"[rng.random_range(0..4)]).collect()
}

#[test]
fn every_window_of_a_long_sequence_is_found() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seq = acgt(&mut rng, 10_000);
    let windows: Vec<&[u8]> = kgram_tokens(&seq, 31).unwrap().collect();
    assert_eq!(windows.len(), 9970);
    let mut idx = RamboIndex::new(RamboParams::new(4, 2).sized_for(1, 9970, 0.01).unwrap()).unwrap();
    let id = idx.insert_set("chr", &windows);
    assert!(windows.iter().all(|w| idx.query_term(w).unwrap().contains(id)));
    assert!(idx.query_sequence(&seq, 31).unwrap().contains(id));
}

#[test]
fn directory_to_index_and_back() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    fs::create_dir(&root).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut seqs = Vec::new();
    for i in 0..100 {
        let s = acgt(&mut rng, 400);
        // wrapped lines, as in FASTA-style files
        let text: Vec<u8> = s.chunks(60).flat_map(|c| c.iter().copied().chain(*b"\n")).collect();
        fs::write(root.join(format!("g{i:03}.fa")), text).unwrap();
        seqs.push(s);
    }
    let corpus = Corpus::open(&CorpusSpec::sequences(&root, 31)).unwrap();
    assert_eq!(corpus.len(), 100);
    let avg = corpus.sample_avg_cardinality(10).unwrap();
    assert_eq!(avg, 370.0);
    let params = RamboParams::new(16, 2).with_seed(5).sized_for(100, avg as u64, 0.01).unwrap();
    let mut idx = RamboIndex::new(params).unwrap();
    let report = corpus.ingest_into(&mut idx);
    assert!(report.issues.is_empty());
    assert_eq!(idx.num_sets(), 100);
    assert_eq!(report.terms, 100 * 370);

    let path = dir.path().join("idx.rmbo");
    save_index(&idx, &path).unwrap();
    let loaded = load_index(&path).unwrap();
    assert_eq!(loaded, idx);
    for (i, s) in seqs.iter().enumerate().step_by(7) {
        let name = format!("g{i:03}.fa");
        let id = loaded.registry().id(&name).unwrap();
        assert!(loaded.query_sequence(&s[100..200], 31).unwrap().contains(id));
    }
}

#[test]
fn sampled_cardinality_sizes_filters_near_target() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let law = LogNormal::new(600f64.ln(), 0.5).unwrap();
    let mut truth = Vec::new();
    for i in 0..80 {
        let card = rng.sample(law).round().max(1.0) as usize;
        let seq = acgt(&mut rng, card + 30);
        let distinct: HashSet<&[u8]> = kgram_tokens(&seq, 31).unwrap().collect();
        truth.push(distinct.len() as f64);
        fs::write(dir.path().join(format!("s{i:02}")), &seq).unwrap();
    }
    let true_avg = truth.iter().sum::<f64>() / truth.len() as f64;
    let corpus = Corpus::open(&CorpusSpec::sequences(dir.path(), 31)).unwrap();
    let est = corpus.sample_avg_cardinality(8).unwrap();
    assert!(est / true_avg > 0.5 && est / true_avg < 2.0, "estimate {est} vs {true_avg}");

    let target = 0.01;
    let params = RamboParams::new(8, 2).sized_for(80, est.ceil() as u64, target).unwrap();
    let mut idx = RamboIndex::new(params).unwrap();
    corpus.ingest_into(&mut idx);
    let p = idx.realized_fp();
    assert!(p > target / 3.0 && p < target * 3.0, "realized p {p}");
}
