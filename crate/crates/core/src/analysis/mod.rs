//! Closed-form cost and accuracy model of the grid, with Monte-Carlo checks.
//!
//! Notation: K sets, B cells per table, R tables, V sets containing the
//! query, p the per-filter false-positive rate, η hashes per filter.

mod oracle;

pub use oracle::InvertedIndexOracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{RamboError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisInput {
    pub sets: u64,
    pub buckets: u64,
    pub repetitions: u32,
    pub multiplicity: u64,
    pub p: f64,
    pub eta: u32,
    pub delta: f64,
}

impl AnalysisInput {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(RamboError::param(format!("p = {} outside [0, 1]", self.p)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(RamboError::param(format!("delta = {} outside (0, 1]", self.delta)));
        }
        if self.buckets < 2 {
            return Err(RamboError::param("B must be at least 2"));
        }
        if self.sets < 1 {
            return Err(RamboError::param("K must be at least 1"));
        }
        if self.repetitions < 1 || self.eta < 1 {
            return Err(RamboError::param("R and eta must be at least 1"));
        }
        Ok(())
    }
}

/// `(s, 1 − s)` with `s = (1 − 1/B)^V`, the probability that one table
/// places none of the V holders in a given set's cell. `1 − s` is computed
/// without cancellation so the per-table rate `p·s + (1 − s)` stays accurate
/// when it is small.
fn separation(b: u64, v: f64) -> (f64, f64) {
    let log_s = v * (-1.0 / b as f64).ln_1p();
    (log_s.exp(), -log_s.exp_m1())
}

/// Per-set false-positive rate:
/// `F_p = (p(1 − 1/B)^V + 1 − (1 − 1/B)^V)^R`.
pub fn fp_rate(p: f64, b: u64, v: u64, r: u32) -> f64 {
    fp_rate_at(p, b, v as f64, r)
}

/// [`fp_rate`] with a real-valued multiplicity, e.g. a distribution mean.
pub fn fp_rate_at(p: f64, b: u64, v: f64, r: u32) -> f64 {
    let (s, not_s) = separation(b, v);
    (p * s + not_s).powi(r as i32)
}

/// Union bound over all K sets: `K(1 − (1 − p)(1 − 1/B)^V)^R`, unclamped.
pub fn failure_bound_raw(k: u64, p: f64, b: u64, v: u64, r: u32) -> f64 {
    failure_bound_at(k, p, b, v as f64, r)
}

/// [`failure_bound_raw`] with a real-valued multiplicity.
pub fn failure_bound_at(k: u64, p: f64, b: u64, v: f64, r: u32) -> f64 {
    // 1 − (1 − p)s rewritten as (1 − s) + p·s
    let (s, not_s) = separation(b, v);
    k as f64 * (not_s + p * s).powi(r as i32)
}

/// [`failure_bound_raw`] clamped to `[0, 1]` for reporting.
pub fn failure_bound(k: u64, p: f64, b: u64, v: u64, r: u32) -> f64 {
    failure_bound_raw(k, p, b, v, r).clamp(0.0, 1.0)
}

/// `R = max(1, ⌈ln K − ln δ⌉)`.
pub fn min_repetitions(k: u64, delta: f64) -> Result<u32> {
    if k < 1 || !(delta > 0.0 && delta <= 1.0) {
        return Err(RamboError::param(format!("need K >= 1 and 0 < delta <= 1 (K = {k}, delta = {delta})")));
    }
    let r = ((k as f64).ln() - delta.ln()).ceil();
    Ok((r as u32).max(1))
}

/// `E[q_t] = BRη + (K/B)(V + Bp)R`.
pub fn expected_query_cost(k: u64, b: u64, r: u32, v: u64, p: f64, eta: u32) -> f64 {
    let (k, b, r, v, eta) = (k as f64, b as f64, f64::from(r), v as f64, f64::from(eta));
    b * r * eta + (k / b) * (v + b * p) * r
}

/// Continuous minimizer of [`expected_query_cost`] over B: `√(KV/η)`.
pub fn optimal_buckets(k: u64, v: u64, eta: u32) -> f64 {
    ((k as f64) * (v as f64) / f64::from(eta)).sqrt()
}

/// Series form of the memory factor:
/// `Γ = Σ_{v=1..V} (1/v)·(B−1)^{V−2v+1} / B^{V−1}`.
pub fn gamma_series(b: u64, v: u64) -> f64 {
    let bm1 = (b - 1) as f64;
    let denom = (b as f64).powf(v as f64 - 1.0);
    (1..=v)
        .map(|i| {
            let exp = v as f64 - 2.0 * i as f64 + 1.0;
            bm1.powf(exp) / (i as f64 * denom)
        })
        .sum()
}

/// `E[1/v]` where v is the occupancy of a tagged ball's bin when V balls are
/// thrown uniformly into B bins: `B(1 − (1 − 1/B)^V)/V`.
pub fn gamma_balls_in_bins(b: u64, v: u64) -> f64 {
    b as f64 * separation(b, v as f64).1 / v as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Empirical `E[1/v]` for a tagged ball among V balls in B bins.
pub fn gamma_monte_carlo(b: u64, v: u64, trials: u64, seed: u64) -> MonteCarloEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let tagged = rng.random_range(0..b);
        let mut occupancy = 1u64;
        for _ in 1..v {
            if rng.random_range(0..b) == tagged {
                occupancy += 1;
            }
        }
        let x = 1.0 / occupancy as f64;
        sum += x;
        sum_sq += x * x;
    }
    let n = trials.max(1) as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    MonteCarloEstimate { mean, std_error: (var / n).sqrt(), trials }
}

/// Expected index size in bits: `Γ*·ln K·log₂(1/p)·N` with the balls-in-bins Γ*.
pub fn expected_memory_bits(b: u64, v: u64, k: u64, p: f64, total_insertions: u64) -> f64 {
    gamma_balls_in_bins(b, v) * (k as f64).ln() * (1.0 / p).log2() * total_insertions as f64
}

/// Every formula evaluated for one parameter point.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub input: AnalysisInput,
    pub total_insertions: u64,
    pub fp_rate: f64,
    pub failure_bound: f64,
    pub failure_bound_raw: f64,
    pub min_repetitions: u32,
    pub expected_query_cost: f64,
    pub optimal_b: f64,
    pub gamma_series: f64,
    pub gamma_balls_in_bins: f64,
    pub expected_memory_bits: f64,
    pub expected_memory_bits_gamma_series: f64,
}

pub fn analyze(input: AnalysisInput, total_insertions: u64) -> Result<AnalysisReport> {
    input.validate()?;
    let AnalysisInput { sets: k, buckets: b, repetitions: r, multiplicity: v, p, eta, delta } = input;
    let v_gamma = v.max(1);
    let mem_scale = (k as f64).ln() * (1.0 / p).log2() * total_insertions as f64;
    Ok(AnalysisReport {
        input,
        total_insertions,
        fp_rate: fp_rate(p, b, v, r),
        failure_bound: failure_bound(k, p, b, v, r),
        failure_bound_raw: failure_bound_raw(k, p, b, v, r),
        min_repetitions: min_repetitions(k, delta)?,
        expected_query_cost: expected_query_cost(k, b, r, v, p, eta),
        optimal_b: optimal_buckets(k, v.max(1), eta),
        gamma_series: gamma_series(b, v_gamma),
        gamma_balls_in_bins: gamma_balls_in_bins(b, v_gamma),
        expected_memory_bits: expected_memory_bits(b, v_gamma, k, p, total_insertions),
        expected_memory_bits_gamma_series: gamma_series(b, v_gamma) * mem_scale,
    })
}
