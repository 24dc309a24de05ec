//! Planted-term false-positive benchmark on a synthetic k-mer corpus.
//!
//! Every set gets `terms_per_set` random ACGT terms. Each of `num_queries`
//! planted terms is then inserted into V uniformly chosen sets, V drawn from
//! a multiplicity law. All planted terms and as many absent terms are queried
//! and checked against an exact inverted index.

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::Serialize;

use crate::analysis::{self, InvertedIndexOracle};
use crate::error::{RamboError, Result};
use crate::index::{RamboIndex, RamboParams};

const ALPHABET: &[u8; 4] = b"ACGT";

/// Distribution of V, the number of sets a planted term goes into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", content = "alpha", rename_all = "snake_case")]
pub enum MultiplicityLaw {
    /// `V = min(cap, 1 + ⌊X⌋)`, `X ~ Exp(rate α)`.
    ExponentialRate(f64),
    /// `V = min(cap, 1 + ⌊X⌋)`, `X ~ Exp(mean α)`.
    ExponentialMean(f64),
    /// Every planted term goes into exactly this many sets (capped).
    Fixed(u32),
}

impl MultiplicityLaw {
    fn rate(self) -> Option<f64> {
        match self {
            Self::ExponentialRate(a) => Some(a),
            Self::ExponentialMean(a) => Some(1.0 / a),
            Self::Fixed(_) => None,
        }
    }

    /// `E[V]`. For the exponential laws `P(⌊X⌋ ≥ j) = e^{−λj}`, so
    /// `E[min(cap, 1 + ⌊X⌋)] = 1 + Σ_{j=1}^{cap−1} e^{−λj}`.
    pub fn mean(self, cap: u32) -> f64 {
        match self.rate() {
            Some(lambda) => 1.0 + (1..cap).map(|j| (-lambda * f64::from(j)).exp()).sum::<f64>(),
            None => f64::from(self.fixed_value().min(cap)),
        }
    }

    fn fixed_value(self) -> u32 {
        match self {
            Self::Fixed(v) => v,
            _ => 0,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Self::ExponentialRate(a) | Self::ExponentialMean(a) if !(a > 0.0 && a.is_finite()) => {
                Err(RamboError::param(format!("alpha must be positive, got {a}")))
            }
            Self::Fixed(0) => Err(RamboError::param("fixed multiplicity must be at least 1")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchConfig {
    pub num_queries: u32,
    pub term_length: u32,
    pub multiplicity: MultiplicityLaw,
    pub seed: u64,
    /// Upper bound on V; defaults to the number of sets.
    pub k_cap: Option<u32>,
    /// K.
    pub sets: u32,
    pub terms_per_set: u32,
    pub buckets: u32,
    pub repetitions: u16,
    pub eta: u16,
    /// Per-filter false-positive rate the filters are sized for.
    pub target_p: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            num_queries: 1000,
            term_length: 30,
            multiplicity: MultiplicityLaw::ExponentialRate(100.0),
            seed: 0,
            k_cap: None,
            sets: 100,
            terms_per_set: 1000,
            buckets: 16,
            repetitions: 2,
            eta: 2,
            target_p: 0.01,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_queries < 1 || self.term_length < 1 {
            return Err(RamboError::param("num_queries and term_length must be at least 1"));
        }
        if self.sets < 1 {
            return Err(RamboError::param("need at least one set"));
        }
        if !(self.target_p > 0.0 && self.target_p < 1.0) {
            return Err(RamboError::param(format!("target p must be in (0, 1), got {}", self.target_p)));
        }
        self.multiplicity.validate()
    }

    pub fn cap(&self) -> u32 {
        self.k_cap.unwrap_or(self.sets).clamp(1, self.sets)
    }

    pub fn expected_multiplicity(&self) -> f64 {
        self.multiplicity.mean(self.cap())
    }

    fn draw_multiplicity(&self, rng: &mut ChaCha8Rng) -> u32 {
        let cap = self.cap();
        match self.multiplicity.rate() {
            Some(lambda) => {
                let x: f64 = rng.sample(Exp::new(lambda).expect("validated rate"));
                let v = 1.0 + x.floor();
                if v >= f64::from(cap) {
                    cap
                } else {
                    v as u32
                }
            }
            None => self.multiplicity.fixed_value().min(cap),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FpReport {
    pub config: BenchConfig,
    pub params: RamboParams,
    pub planted_queries: u64,
    pub absent_queries: u64,
    /// Must be 0.
    pub false_negatives: u64,
    /// Reported-but-absent (query, set) pairs over planted queries.
    pub false_positive_pairs: u64,
    /// `false_positive_pairs / Σ_q (K − V_q)`.
    pub per_set_fp: f64,
    /// Reported pairs over absent queries, divided by `K · absent_queries`.
    pub absent_fp: f64,
    /// Mean `fill^η` over all filters.
    pub realized_p: f64,
    pub expected_multiplicity: f64,
    pub mean_multiplicity: f64,
    /// Per-set FP rate formula at the realized p and `expected_multiplicity`.
    pub predicted_fp_at_mean_v: f64,
    /// The same formula averaged over the drawn V values.
    pub predicted_fp_distributional: f64,
    /// Union bound over K at the realized p and `expected_multiplicity`, clamped.
    pub failure_bound: f64,
    /// Filter probes per planted query; B·R for single-term queries.
    pub mean_bfu_probes: f64,
    pub mean_intersect_work: f64,
    /// `bfu_probes + intersect_work`, averaged over planted queries.
    pub mean_query_cost: f64,
    /// Cost model at the realized p and `mean_multiplicity`.
    pub expected_query_cost: f64,
    /// Terms inserted, counting each planted copy.
    pub total_insertions: u64,
    pub grid_bytes: u64,
    pub build_ms: f64,
    pub query_ms: f64,
}

fn random_term(rng: &mut ChaCha8Rng, len: u32) -> Vec<u8> {
    (0..len).map(|_| ALPHABET[rng.random_range(0..4)]).collect()
}

/// Build the synthetic index and measure it. Deterministic given `config.seed`.
pub fn run(config: &BenchConfig) -> Result<FpReport> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.sets as usize;

    let mut planted: Vec<(Vec<u8>, Vec<u32>)> = Vec::with_capacity(config.num_queries as usize);
    let mut per_set: Vec<Vec<u32>> = vec![Vec::new(); k];
    for q in 0..config.num_queries {
        let v = config.draw_multiplicity(&mut rng) as usize;
        let mut hosts: Vec<u32> = sample(&mut rng, k, v).into_iter().map(|s| s as u32).collect();
        hosts.sort_unstable();
        for &s in &hosts {
            per_set[s as usize].push(q);
        }
        planted.push((random_term(&mut rng, config.term_length), hosts));
    }
    let mean_v = planted.iter().map(|(_, h)| h.len() as f64).sum::<f64>() / planted.len() as f64;

    let load = f64::from(config.terms_per_set) + f64::from(config.num_queries) * mean_v / k as f64;
    let params = RamboParams::new(config.buckets, config.repetitions)
        .with_eta(config.eta)
        .with_seed(config.seed)
        .sized_for(u64::from(config.sets), load.ceil() as u64, config.target_p)?;

    let started = Instant::now();
    let mut index = RamboIndex::new(params)?;
    let mut oracle = InvertedIndexOracle::new();
    let mut total = 0u64;
    for (s, queries) in per_set.iter().enumerate() {
        let mut w = index.begin_set(&format!("set{s:05}"));
        let id = w.id();
        for _ in 0..config.terms_per_set {
            let t = random_term(&mut rng, config.term_length);
            w.insert(&t);
            oracle.insert(id, &t);
        }
        for &q in queries {
            let t = &planted[q as usize].0;
            w.insert(t);
            oracle.insert(id, t);
        }
        total += w.terms();
    }
    let build_ms = started.elapsed().as_secs_f64() * 1e3;

    let started = Instant::now();
    let (mut fneg, mut fpos, mut negatives, mut work, mut probes) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for (term, _) in &planted {
        let truth = oracle.query(term);
        let res = index.query_term(term)?;
        fneg += truth.iter().filter(|&&id| !res.contains(id)).count() as u64;
        fpos += res.set_ids.iter().filter(|id| truth.binary_search(id).is_err()).count() as u64;
        negatives += (k - truth.len()) as u64;
        work += res.intersect_work;
        probes += res.bfu_probes;
    }
    let mut absent_hits = 0u64;
    let mut absent = 0u64;
    while absent < u64::from(config.num_queries) {
        let t = random_term(&mut rng, config.term_length);
        if !oracle.query(&t).is_empty() {
            continue;
        }
        absent_hits += index.query_term(&t)?.set_ids.len() as u64;
        absent += 1;
    }
    let query_ms = started.elapsed().as_secs_f64() * 1e3;

    let b = u64::from(config.buckets);
    let r = u32::from(config.repetitions);
    let p = index.realized_fp();
    let expected_v = config.expected_multiplicity();
    let n_q = planted.len() as f64;
    let mean_probes = probes as f64 / n_q;
    let mean_work = work as f64 / n_q;
    Ok(FpReport {
        config: *config,
        params,
        planted_queries: planted.len() as u64,
        absent_queries: absent,
        false_negatives: fneg,
        false_positive_pairs: fpos,
        per_set_fp: if negatives == 0 { 0.0 } else { fpos as f64 / negatives as f64 },
        absent_fp: absent_hits as f64 / (k as f64 * absent as f64),
        realized_p: p,
        expected_multiplicity: expected_v,
        mean_multiplicity: mean_v,
        predicted_fp_at_mean_v: analysis::fp_rate_at(p, b, expected_v, r),
        predicted_fp_distributional: planted
            .iter()
            .map(|(_, h)| analysis::fp_rate(p, b, h.len() as u64, r))
            .sum::<f64>()
            / n_q,
        failure_bound: analysis::failure_bound_at(k as u64, p, b, expected_v, r).clamp(0.0, 1.0),
        mean_bfu_probes: mean_probes,
        mean_intersect_work: mean_work,
        mean_query_cost: mean_probes + mean_work,
        expected_query_cost: analysis::expected_query_cost(k as u64, b, r, 0, p, u32::from(config.eta))
            + (k as f64 / b as f64) * mean_v * f64::from(r),
        total_insertions: total,
        grid_bytes: index.grid_bytes(),
        build_ms,
        query_ms,
    })
}
