//! Fixed-size Bloom filter units: the cells of the grid.
//!
//! Bit `i` lives in byte `i / 8` at position `i % 8` (LSB first). Internally
//! bits are packed into little-endian `u64` words, which serialize to exactly
//! that byte layout.

use std::sync::Arc;

use crate::error::{RamboError, Result};
use crate::hashing::{derive_hasher, HashRole, KeyDigest, UniversalHasher};

/// Smallest filter ever allocated, in bits.
pub const MIN_BITS: u64 = 8;

/// The η bit-position hashers shared by every filter of an index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomHashers {
    hashers: Vec<UniversalHasher>,
    bits: u64,
}

impl BloomHashers {
    pub fn derive(master_seed: u64, eta: u32, bits: u64) -> Result<Self> {
        if eta == 0 {
            return Err(RamboError::param("eta must be at least 1"));
        }
        if bits == 0 {
            return Err(RamboError::param("filter size must be at least 1 bit"));
        }
        let hashers =
            (0..eta).map(|i| derive_hasher(master_seed, HashRole::Bloom, i, bits)).collect::<Result<Vec<_>>>()?;
        Ok(Self { hashers, bits })
    }

    pub fn eta(&self) -> u32 {
        self.hashers.len() as u32
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn hashers(&self) -> &[UniversalHasher] {
        &self.hashers
    }

    /// Write the η bit positions of `d` into `out` (cleared first).
    #[inline]
    pub fn positions_into(&self, d: KeyDigest, out: &mut Vec<u64>) {
        out.clear();
        out.extend(self.hashers.iter().map(|h| h.hash(d.0)));
    }

    pub fn positions(&self, d: KeyDigest) -> Vec<u64> {
        let mut v = Vec::with_capacity(self.hashers.len());
        self.positions_into(d, &mut v);
        v
    }
}

#[derive(Debug, Clone)]
pub struct BloomFilterUnit {
    words: Vec<u64>,
    hashers: Arc<BloomHashers>,
    insert_count: u64,
}

impl BloomFilterUnit {
    pub fn new(hashers: Arc<BloomHashers>) -> Self {
        let words = vec![0u64; hashers.bits().div_ceil(64) as usize];
        Self { words, hashers, insert_count: 0 }
    }

    /// Rebuild a filter from its packed LSB-first byte image.
    pub fn from_bytes(hashers: Arc<BloomHashers>, bytes: &[u8], insert_count: u64) -> Result<Self> {
        let m = hashers.bits();
        if bytes.len() as u64 != m.div_ceil(8) {
            return Err(RamboError::CorruptIndex(format!(
                "filter image has {} bytes, expected {}",
                bytes.len(),
                m.div_ceil(8)
            )));
        }
        let mut words = vec![0u64; m.div_ceil(64) as usize];
        for (i, &byte) in bytes.iter().enumerate() {
            words[i / 8] |= u64::from(byte) << ((i % 8) * 8);
        }
        let tail = m % 64;
        if tail != 0 && words.last().is_some_and(|w| w >> tail != 0) {
            return Err(RamboError::CorruptIndex("padding bits set past filter end".into()));
        }
        Ok(Self { words, hashers, insert_count })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let len = self.bits().div_ceil(8) as usize;
        let mut out = Vec::with_capacity(len);
        self.write_bytes(&mut out);
        out
    }

    pub fn write_bytes(&self, out: &mut Vec<u8>) {
        let len = self.bits().div_ceil(8) as usize;
        out.extend(self.words.iter().flat_map(|w| w.to_le_bytes()).take(len));
    }

    pub fn bits(&self) -> u64 {
        self.hashers.bits()
    }

    pub fn eta(&self) -> u32 {
        self.hashers.eta()
    }

    pub fn hashers(&self) -> &Arc<BloomHashers> {
        &self.hashers
    }

    /// Number of inserts observed (n), counting repeats.
    pub fn insert_count(&self) -> u64 {
        self.insert_count
    }

    pub(crate) fn set_insert_count(&mut self, n: u64) {
        self.insert_count = n;
    }

    pub fn insert(&mut self, d: KeyDigest) {
        let words = &mut self.words;
        for h in self.hashers.hashers() {
            let i = h.hash(d.0);
            words[(i / 64) as usize] |= 1 << (i % 64);
        }
        self.insert_count += 1;
    }

    pub fn contains(&self, d: KeyDigest) -> bool {
        self.hashers.hashers().iter().all(|h| self.bit(h.hash(d.0)))
    }

    /// Insert using positions precomputed by [`BloomHashers::positions_into`].
    #[inline]
    pub fn insert_positions(&mut self, positions: &[u64]) {
        for &p in positions {
            self.set_bit(p);
        }
        self.insert_count += 1;
    }

    #[inline]
    pub fn contains_positions(&self, positions: &[u64]) -> bool {
        positions.iter().all(|&p| self.bit(p))
    }

    #[inline]
    pub fn bit(&self, i: u64) -> bool {
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn set_bit(&mut self, i: u64) {
        self.words[(i / 64) as usize] |= 1 << (i % 64);
    }

    pub fn popcount(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn fill_ratio(&self) -> f64 {
        self.popcount() as f64 / self.bits() as f64
    }

    /// False-positive estimate from the current fill: `fill^η`.
    pub fn realized_fp(&self) -> f64 {
        self.fill_ratio().powi(self.eta() as i32)
    }

    pub fn is_compatible(&self, other: &BloomFilterUnit) -> bool {
        Arc::ptr_eq(&self.hashers, &other.hashers) || *self.hashers == *other.hashers
    }

    /// Bitwise OR of two filters built with identical hashers.
    pub fn or_merge(&self, other: &BloomFilterUnit) -> Result<BloomFilterUnit> {
        let mut out = self.clone();
        out.or_assign(other)?;
        Ok(out)
    }

    pub fn or_assign(&mut self, other: &BloomFilterUnit) -> Result<()> {
        if !self.is_compatible(other) {
            return Err(RamboError::IncompatibleFilter(format!(
                "m/eta/seeds differ (m {} vs {}, eta {} vs {})",
                self.bits(),
                other.bits(),
                self.eta(),
                other.eta()
            )));
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
        self.insert_count += other.insert_count;
        Ok(())
    }
}

/// Equality compares geometry, hashers and bits. Insert counts are build
/// statistics and are not part of a filter's identity.
impl PartialEq for BloomFilterUnit {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words && *self.hashers == *other.hashers
    }
}

impl Eq for BloomFilterUnit {}

/// `(1 − e^{−ηn/m})^η`.
pub fn fp_theoretical(n: u64, m: u64, eta: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let eta = f64::from(eta);
    (1.0 - (-eta * n as f64 / m as f64).exp()).powf(eta)
}

/// Smallest `m` such that a filter with `eta` hashes holding `n` keys has
/// theoretical false-positive rate at most `p`. Never below [`MIN_BITS`].
pub fn size_for(n: u64, p: f64, eta: u32) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(RamboError::param(format!("target false-positive rate {p} outside (0, 1)")));
    }
    if eta == 0 {
        return Err(RamboError::param("eta must be at least 1"));
    }
    if n == 0 {
        return Ok(MIN_BITS);
    }
    let eta_f = f64::from(eta);
    let denom = -(1.0 - p.powf(1.0 / eta_f)).ln();
    let mut m = (eta_f * n as f64 / denom).ceil() as u64;
    // guard against ceil landing one ulp short
    while fp_theoretical(n, m, eta) > p {
        m += 1;
    }
    Ok(m.max(MIN_BITS))
}

/// `η = log₂(1/p)` (rounded, at least 1) and `m = n·log₂(1/p)` (rounded up).
/// Smaller than [`size_for`] by a factor of about ln 2.
pub fn log2_sizing(p: f64, n: u64) -> Result<(u32, u64)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(RamboError::param(format!("target false-positive rate {p} outside (0, 1)")));
    }
    let bits_per_key = -p.log2();
    let eta = (bits_per_key.round() as u32).max(1);
    let m = (n as f64 * bits_per_key - 1e-9).ceil().max(0.0) as u64;
    Ok((eta, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::key_digest;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn filter(seed: u64, eta: u32, m: u64) -> BloomFilterUnit {
        BloomFilterUnit::new(Arc::new(BloomHashers::derive(seed, eta, m).unwrap()))
    }

    #[test]
    fn empty_filter_contains_nothing() {
        let f = filter(1, 2, 1024);
        assert!(!f.contains(key_digest(b"x")));
        assert_eq!(f.popcount(), 0);
    }

    #[test]
    fn insert_then_contains_and_idempotent() {
        let mut f = filter(1, 2, 1024);
        let d = key_digest(b"ACGT");
        f.insert(d);
        assert!(f.contains(d));
        let pc = f.popcount();
        f.insert(d);
        assert_eq!(f.popcount(), pc);
        assert_eq!(f.insert_count(), 2);
    }

    #[test]
    fn popcount_bounded_by_eta_times_inserts() {
        let mut f = filter(9, 2, 28_860);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let keys: Vec<KeyDigest> = (0..1000).map(|_| KeyDigest(rng.random())).collect();
        for &k in &keys {
            f.insert(k);
        }
        // oracle: number of distinct positions touched
        let mut distinct = std::collections::HashSet::new();
        for &k in &keys {
            distinct.extend(f.hashers().positions(k));
        }
        assert_eq!(f.popcount(), distinct.len() as u64);
        assert!(f.popcount() <= 2000);
        assert!(keys.iter().all(|&k| f.contains(k)));
    }

    #[test]
    fn tiny_filter_fp_matches_formula() {
        let mut f = filter(4, 2, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inserted: Vec<u64> = (0..8).map(|_| rng.random()).collect();
        for &k in &inserted {
            f.insert(KeyDigest(k));
        }
        let probes = 100_000;
        let hits = (0..probes)
            .map(|_| rng.random::<u64>())
            .filter(|k| !inserted.contains(k))
            .filter(|&k| f.contains(KeyDigest(k)))
            .count();
        let measured = hits as f64 / probes as f64;
        let theory = fp_theoretical(8, 16, 2);
        assert!(measured >= 0.5 * theory && measured <= 2.0 * theory, "{measured} vs {theory}");
    }

    #[test]
    fn fp_converges_across_load_factors() {
        let m = 20_000u64;
        for load in [0.01, 0.05, 0.1, 0.25, 0.5] {
            let n = (load * m as f64) as u64;
            let mut f = filter(77, 2, m);
            let mut rng = ChaCha8Rng::seed_from_u64(n);
            for _ in 0..n {
                f.insert(KeyDigest(rng.random()));
            }
            let probes = 100_000;
            let hits = (0..probes).filter(|_| f.contains(KeyDigest(rng.random()))).count();
            let measured = hits as f64 / probes as f64;
            let theory = fp_theoretical(n, m, 2);
            assert!(measured >= 0.5 * theory && measured <= 2.0 * theory, "load {load}: {measured} vs {theory}");
        }
    }

    #[test]
    fn fp_formula_values() {
        assert_eq!(fp_theoretical(0, 100, 2), 0.0);
        let m = 1_000_000u64;
        let n = (m as f64 * std::f64::consts::LN_2).round() as u64;
        assert!((fp_theoretical(n, m, 1) - 0.5).abs() < 1e-6);
        let n2 = (m as f64 * std::f64::consts::LN_2 / 2.0).round() as u64;
        assert!((fp_theoretical(n2, m, 2) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn sizing_values() {
        assert_eq!(size_for(0, 0.01, 2).unwrap(), 8);
        assert_eq!(size_for(1000, 0.25, 2).unwrap(), 2886);
        assert_eq!(size_for(1000, 0.01, 2).unwrap(), 18983);
        assert!(size_for(10, 0.0, 2).is_err());
        assert!(size_for(10, 1.0, 2).is_err());
    }

    #[test]
    fn log2_sizing_values() {
        assert_eq!(log2_sizing(1.0 / 1024.0, 10).unwrap().0, 10);
        assert_eq!(log2_sizing(0.5, 777).unwrap(), (1, 777));
        assert_eq!(log2_sizing(0.01, 1000).unwrap().1, 6644);
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let mut f = filter(3, 2, 1024);
        f.insert(key_digest(b"a"));
        let g = BloomFilterUnit::new(f.hashers().clone());
        assert_eq!(f.or_merge(&g).unwrap(), f);
    }

    #[test]
    fn merge_is_union() {
        let mut f = filter(3, 2, 1024);
        let mut g = BloomFilterUnit::new(f.hashers().clone());
        f.insert(key_digest(b"a"));
        g.insert(key_digest(b"b"));
        let merged = f.or_merge(&g).unwrap();
        assert!(merged.contains(key_digest(b"a")) && merged.contains(key_digest(b"b")));
        assert_eq!(merged.insert_count(), 2);
    }

    #[test]
    fn merge_rejects_mismatch() {
        let f = filter(3, 2, 1024);
        for g in [filter(3, 2, 2048), filter(3, 3, 1024), filter(4, 2, 1024)] {
            assert!(matches!(f.or_merge(&g), Err(RamboError::IncompatibleFilter(_))));
        }
    }

    #[test]
    fn byte_image_is_lsb_first() {
        let mut f = filter(3, 1, 20);
        f.set_bit(0);
        f.set_bit(9);
        f.set_bit(19);
        assert_eq!(f.to_bytes(), vec![0b0000_0001, 0b0000_0010, 0b0000_1000]);
        let back = BloomFilterUnit::from_bytes(f.hashers().clone(), &f.to_bytes(), 0).unwrap();
        assert_eq!(back, f);
        assert!(BloomFilterUnit::from_bytes(f.hashers().clone(), &[0, 0, 0x10], 0).is_err());
    }

    proptest! {
        #[test]
        fn merge_popcount_matches_per_bit_oracle(a in proptest::collection::vec(0u64..1024, 0..200),
                                                 b in proptest::collection::vec(0u64..1024, 0..200)) {
            let mut f = filter(8, 1, 1024);
            let mut g = BloomFilterUnit::new(f.hashers().clone());
            for &i in &a { f.set_bit(i); }
            for &i in &b { g.set_bit(i); }
            let fg = f.or_merge(&g).unwrap();
            let gf = g.or_merge(&f).unwrap();
            prop_assert_eq!(&fg, &gf);
            let naive = (0..1024).filter(|&i| f.bit(i) || g.bit(i)).count() as u64;
            prop_assert_eq!(fg.popcount(), naive);
        }

        #[test]
        fn sizing_meets_target(n in 0u64..100_000, p in 0.0001f64..0.9, eta in 1u32..8) {
            let m = size_for(n, p, eta).unwrap();
            prop_assert!(m >= MIN_BITS);
            prop_assert!(fp_theoretical(n, m, eta) <= p);
        }

        #[test]
        fn inserts_are_monotone(keys in proptest::collection::vec(any::<u64>(), 1..100)) {
            let mut f = filter(5, 3, 512);
            let mut prev = f.clone();
            for &k in &keys {
                f.insert(KeyDigest(k));
                for i in 0..512 {
                    prop_assert!(!prev.bit(i) || f.bit(i));
                }
                prev = f.clone();
            }
            prop_assert!(keys.iter().all(|&k| f.contains(KeyDigest(k))));
        }
    }
}
