//! Seeded Carter–Wegman hashing over the Mersenne prime 2^61 − 1.
//!
//! Every hash function in an index (the per-table partition hashes, the shard
//! router and the Bloom bit-position hashes) is derived from one master seed,
//! so independently built shards agree on all placements and bit positions.

use serde::{Deserialize, Serialize};

use crate::error::{RamboError, Result};

/// 2^61 − 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit digest of a term or set name (FNV-1a).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyDigest(pub u64);

pub fn key_digest(term: &[u8]) -> KeyDigest {
    let mut h = FNV_OFFSET;
    for &byte in term {
        h ^= u64::from(byte);
        h = h.wrapping_mul(FNV_PRIME);
    }
    KeyDigest(h)
}

/// What a derived hasher is used for. Each role gets its own seed stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HashRole {
    Partition,
    ShardRouter,
    Bloom,
}

impl HashRole {
    fn tag(self) -> u64 {
        match self {
            HashRole::Partition => 0x7061_7274,   // "part"
            HashRole::ShardRouter => 0x726f_7574, // "rout"
            HashRole::Bloom => 0x626c_6f6d,       // "blom"
        }
    }
}

/// `x -> ((a·x + b) mod P) mod range`, with the product taken over 128 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UniversalHasher {
    a: u64,
    b: u64,
    range: u64,
}

impl UniversalHasher {
    pub fn new(a: u64, b: u64, range: u64) -> Result<Self> {
        if range == 0 {
            return Err(RamboError::param("hash range must be at least 1"));
        }
        if a == 0 || a >= MERSENNE_61 {
            return Err(RamboError::param(format!("multiplier {a} outside [1, 2^61-1)")));
        }
        if b >= MERSENNE_61 {
            return Err(RamboError::param(format!("offset {b} outside [0, 2^61-1)")));
        }
        Ok(Self { a, b, range })
    }

    #[inline]
    pub fn hash(&self, x: u64) -> u64 {
        self.hash_wide(x) % self.range
    }

    /// The value before the final `mod range` reduction, in `[0, P)`.
    #[inline]
    pub fn hash_wide(&self, x: u64) -> u64 {
        mod_mersenne(u128::from(self.a) * u128::from(x) + u128::from(self.b))
    }

    #[inline]
    pub fn hash_digest(&self, d: KeyDigest) -> u64 {
        self.hash(d.0)
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    /// Same multiplier and offset, different output modulus.
    pub fn with_range(&self, range: u64) -> Result<Self> {
        Self::new(self.a, self.b, range)
    }
}

/// Reduce a value below 2^126 modulo 2^61 − 1.
#[inline]
fn mod_mersenne(v: u128) -> u64 {
    let p = u128::from(MERSENNE_61);
    let v = (v & p) + (v >> 61);
    let v = (v & p) + (v >> 61);
    let mut r = v as u64;
    if r >= MERSENNE_61 {
        r -= MERSENNE_61;
    }
    r
}

#[inline]
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministically derive the `index`-th hasher of `role` from `master_seed`.
///
/// The multiplier is always odd and in `[1, P)`; the offset is in `[0, P)`.
pub fn derive_hasher(master_seed: u64, role: HashRole, index: u32, range: u64) -> Result<UniversalHasher> {
    if range == 0 {
        return Err(RamboError::param("hash range must be at least 1"));
    }
    let stream = splitmix64(master_seed ^ splitmix64(role.tag() ^ (u64::from(index) << 32)));
    let mut a = (splitmix64(stream) % MERSENNE_61) | 1;
    if a >= MERSENNE_61 {
        a -= 2;
    }
    let b = splitmix64(stream.wrapping_add(1)) % MERSENNE_61;
    UniversalHasher::new(a, b, range)
}
