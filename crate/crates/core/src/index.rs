//! The B×R grid of merged Bloom filters.
//!
//! Each of the R tables partitions the registered sets into B cells using a
//! per-table hash of the set *name*. A cell's filter holds the union of its
//! sets' terms. A term query unions the member lists of the hit cells in each
//! table, then intersects those unions across tables.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::Serialize;

use crate::bloom::{self, BloomFilterUnit, BloomHashers};
use crate::error::{RamboError, Result};
use crate::hashing::{derive_hasher, key_digest, HashRole, KeyDigest, UniversalHasher};
use crate::ingest::kgram_tokens;

pub const DEFAULT_ETA: u16 = 2;
pub const DEFAULT_K: u16 = 31;

/// Grid geometry and seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RamboParams {
    /// B, cells per table.
    pub buckets: u32,
    /// R, number of tables.
    pub repetitions: u16,
    /// η, hash functions per filter.
    pub eta: u16,
    /// m, bits per filter.
    pub bits: u64,
    /// k-gram length used for sequence queries.
    pub k: u16,
    pub seed: u64,
    /// Simulated shard count; 1 for a monolithic index.
    pub shards: u16,
    /// Cells per table on each shard; equals `buckets` when `shards == 1`.
    pub local_buckets: u32,
}

/// How set names map to cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `φ_r(name)` with range B.
    Monolithic,
    /// `local_b·τ(name) + φ_r(name)`; the full stacked grid of a sharded build.
    Stacked,
    /// One shard's `local_b × R` sub-grid; placement `φ_r(name)` with range `local_b`.
    ShardPart,
}

impl RamboParams {
    pub fn new(buckets: u32, repetitions: u16) -> Self {
        Self {
            buckets,
            repetitions,
            eta: DEFAULT_ETA,
            bits: bloom::MIN_BITS,
            k: DEFAULT_K,
            seed: 0,
            shards: 1,
            local_buckets: buckets,
        }
    }

    /// A stacked layout of `shards` sub-grids with `local_buckets` cells each.
    pub fn sharded(shards: u16, local_buckets: u32, repetitions: u16) -> Self {
        Self {
            buckets: u32::from(shards) * local_buckets,
            shards,
            local_buckets,
            ..Self::new(local_buckets, repetitions)
        }
    }

    pub fn with_eta(mut self, eta: u16) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_bits(mut self, bits: u64) -> Self {
        self.bits = bits;
        self
    }

    pub fn with_k(mut self, k: u16) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Size every filter for `terms_per_set · ⌈expected_sets / B⌉` keys at
    /// false-positive rate `target_p`.
    pub fn sized_for(mut self, expected_sets: u64, terms_per_set: u64, target_p: f64) -> Result<Self> {
        let per_cell_sets = expected_sets.div_ceil(u64::from(self.buckets.max(1)));
        self.bits = bloom::size_for(terms_per_set * per_cell_sets, target_p, u32::from(self.eta))?;
        Ok(self)
    }

    pub fn layout(&self) -> Layout {
        if self.shards <= 1 {
            Layout::Monolithic
        } else if self.buckets == self.local_buckets {
            Layout::ShardPart
        } else {
            Layout::Stacked
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.buckets < 2 {
            return Err(RamboError::param(format!("B must be at least 2, got {}", self.buckets)));
        }
        if self.repetitions < 1 {
            return Err(RamboError::param("R must be at least 1"));
        }
        if self.eta < 1 {
            return Err(RamboError::param("eta must be at least 1"));
        }
        if self.bits < 1 {
            return Err(RamboError::param("filter size must be at least 1 bit"));
        }
        if self.k < 1 {
            return Err(RamboError::param("k must be at least 1"));
        }
        if self.shards < 1 {
            return Err(RamboError::param("shard count must be at least 1"));
        }
        match self.shards {
            1 if self.local_buckets != self.buckets => Err(RamboError::param(format!(
                "monolithic index must have local_b = B ({} != {})",
                self.local_buckets, self.buckets
            ))),
            1 => Ok(()),
            s if self.buckets == self.local_buckets
                || u64::from(self.buckets) == u64::from(s) * u64::from(self.local_buckets) =>
            {
                Ok(())
            }
            s => Err(RamboError::param(format!(
                "B = {} is neither shards·local_b = {}·{} nor a single shard",
                self.buckets, s, self.local_buckets
            ))),
        }
    }

    /// Parameters of one shard's sub-grid.
    pub fn shard_part(&self) -> Self {
        Self { buckets: self.local_buckets, ..*self }
    }

    /// Parameters of the stacked grid a shard belongs to.
    pub fn stacked(&self) -> Self {
        Self { buckets: u32::from(self.shards) * self.local_buckets, ..*self }
    }

    pub fn cells(&self) -> usize {
        self.buckets as usize * usize::from(self.repetitions)
    }
}

/// Bidirectional map between set names and dense IDs `0..K`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SetRegistry {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl SetRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut reg = Self::new();
        for name in names {
            let (_, fresh) = reg.get_or_insert(&name);
            if !fresh {
                return Err(RamboError::InconsistentIndex(format!("duplicate set name {name:?}")));
            }
        }
        Ok(reg)
    }

    /// Returns the ID and whether the name was newly registered.
    pub fn get_or_insert(&mut self, name: &str) -> (u32, bool) {
        if let Some(&id) = self.ids.get(name) {
            return (id, false);
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        (id, true)
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Matched set IDs plus the work spent finding them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct QueryResult {
    /// Sorted, deduplicated.
    pub set_ids: Vec<u32>,
    /// Filter membership tests performed.
    pub bfu_probes: u64,
    /// Candidate-list elements touched: Σ_r |X_r|.
    pub intersect_work: u64,
}

impl QueryResult {
    pub fn contains(&self, id: u32) -> bool {
        self.set_ids.binary_search(&id).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryMode {
    /// A cell passes only if every query term hits it.
    BucketConjunction,
    /// Intersect single-term answers, stopping once the running answer is empty.
    #[default]
    TermAtATime,
}

#[derive(Debug, Clone)]
pub struct RamboIndex {
    params: RamboParams,
    hashers: Arc<BloomHashers>,
    /// Indexed `r * B + b`.
    grid: Vec<BloomFilterUnit>,
    /// Sorted set IDs per cell, indexed like `grid`.
    members: Vec<Vec<u32>>,
    registry: SetRegistry,
    partition: Vec<UniversalHasher>,
    router: Option<UniversalHasher>,
}

impl PartialEq for RamboIndex {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.registry == other.registry
            && self.members == other.members
            && self.grid == other.grid
    }
}

impl Eq for RamboIndex {}

fn partition_hashers(params: &RamboParams) -> Result<Vec<UniversalHasher>> {
    let range = match params.layout() {
        Layout::Monolithic => u64::from(params.buckets),
        Layout::Stacked | Layout::ShardPart => u64::from(params.local_buckets),
    };
    (0..u32::from(params.repetitions)).map(|r| derive_hasher(params.seed, HashRole::Partition, r, range)).collect()
}

fn router_hasher(params: &RamboParams) -> Result<Option<UniversalHasher>> {
    if params.shards > 1 {
        derive_hasher(params.seed, HashRole::ShardRouter, 0, u64::from(params.shards)).map(Some)
    } else {
        Ok(None)
    }
}

/// Global bucket of a set under two-level placement:
/// `local_b · τ(name) + φ_r(name)`, τ over `shards` and φ_r over `local_b`.
pub fn shard_placement(params: &RamboParams, set_name: &[u8], r: u16) -> Result<u32> {
    if params.shards <= 1 {
        return Err(RamboError::param("two-level placement requires shards > 1"));
    }
    if r >= params.repetitions {
        return Err(RamboError::param(format!("table {r} out of range (R = {})", params.repetitions)));
    }
    let d = key_digest(set_name);
    let tau = derive_hasher(params.seed, HashRole::ShardRouter, 0, u64::from(params.shards))?;
    let phi = derive_hasher(params.seed, HashRole::Partition, u32::from(r), u64::from(params.local_buckets))?;
    Ok(params.local_buckets * tau.hash_digest(d) as u32 + phi.hash_digest(d) as u32)
}

/// Which shard a set name routes to.
pub fn shard_of(params: &RamboParams, set_name: &[u8]) -> Result<u16> {
    let tau = derive_hasher(params.seed, HashRole::ShardRouter, 0, u64::from(params.shards.max(1)))?;
    Ok(tau.hash_digest(key_digest(set_name)) as u16)
}

/// Merge-intersect two sorted lists.
fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn union_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Intersect per-table candidate lists in ascending table order, stopping
/// early once the running set is empty.
fn intersect_tables(tables: Vec<Vec<u32>>) -> Vec<u32> {
    let mut iter = tables.into_iter();
    let Some(mut acc) = iter.next() else {
        return Vec::new();
    };
    for g in iter {
        if acc.is_empty() {
            break;
        }
        acc = intersect_sorted(&acc, &g);
    }
    acc
}

/// Streaming inserter for one set; see [`RamboIndex::begin_set`].
pub struct SetWriter<'a> {
    index: &'a mut RamboIndex,
    id: u32,
    cells: Vec<usize>,
    positions: Vec<u64>,
    terms: u64,
}

impl SetWriter<'_> {
    pub fn id(&self) -> u32 {
        self.id
    }

    /// Terms inserted through this writer so far.
    pub fn terms(&self) -> u64 {
        self.terms
    }

    pub fn insert(&mut self, term: &[u8]) {
        self.insert_digest(key_digest(term));
    }

    pub fn insert_digest(&mut self, d: KeyDigest) {
        self.index.hashers.positions_into(d, &mut self.positions);
        for &c in &self.cells {
            self.index.grid[c].insert_positions(&self.positions);
        }
        self.terms += 1;
    }
}

impl RamboIndex {
    /// An empty grid. All filters share one η-tuple of bit hashers.
    pub fn new(params: RamboParams) -> Result<Self> {
        params.validate()?;
        let hashers = Arc::new(BloomHashers::derive(params.seed, u32::from(params.eta), params.bits)?);
        let cells = params.cells();
        Ok(Self {
            grid: (0..cells).map(|_| BloomFilterUnit::new(hashers.clone())).collect(),
            members: vec![Vec::new(); cells],
            registry: SetRegistry::new(),
            partition: partition_hashers(&params)?,
            router: router_hasher(&params)?,
            hashers,
            params,
        })
    }

    /// An empty grid whose filters are sized from an estimate of the number
    /// of sets and the average set cardinality.
    pub fn with_sizing(params: RamboParams, expected_sets: u64, terms_per_set: u64, target_p: f64) -> Result<Self> {
        Self::new(params.sized_for(expected_sets, terms_per_set, target_p)?)
    }

    /// Build a monolithic (or stacked, if `params.shards > 1`) index from a
    /// corpus of `(name, terms)` pairs in one pass.
    pub fn build<I, N, T, B>(params: RamboParams, corpus: I) -> Result<Self>
    where
        I: IntoIterator<Item = (N, T)>,
        N: AsRef<str>,
        T: IntoIterator<Item = B>,
        B: AsRef<[u8]>,
    {
        let mut idx = Self::new(params)?;
        for (name, terms) in corpus {
            idx.insert_set(name.as_ref(), terms);
        }
        Ok(idx)
    }

    pub(crate) fn from_parts(
        params: RamboParams,
        registry: SetRegistry,
        members: Vec<Vec<u32>>,
        grid: Vec<BloomFilterUnit>,
        hashers: Arc<BloomHashers>,
    ) -> Result<Self> {
        params.validate()?;
        let idx = Self {
            partition: partition_hashers(&params)?,
            router: router_hasher(&params)?,
            params,
            hashers,
            grid,
            members,
            registry,
        };
        idx.check_partition()?;
        Ok(idx)
    }

    pub fn params(&self) -> &RamboParams {
        &self.params
    }

    pub fn registry(&self) -> &SetRegistry {
        &self.registry
    }

    pub fn bloom_hashers(&self) -> &Arc<BloomHashers> {
        &self.hashers
    }

    pub fn num_sets(&self) -> usize {
        self.registry.len()
    }

    pub fn buckets(&self) -> u32 {
        self.params.buckets
    }

    pub fn repetitions(&self) -> u16 {
        self.params.repetitions
    }

    #[inline]
    fn cell_index(&self, b: u32, r: u16) -> usize {
        usize::from(r) * self.params.buckets as usize + b as usize
    }

    pub fn cell(&self, b: u32, r: u16) -> &BloomFilterUnit {
        &self.grid[self.cell_index(b, r)]
    }

    pub fn members(&self, b: u32, r: u16) -> &[u32] {
        &self.members[self.cell_index(b, r)]
    }

    /// All filters, table-major (`r * B + b`).
    pub fn cells(&self) -> &[BloomFilterUnit] {
        &self.grid
    }

    /// All member lists, table-major.
    pub fn member_lists(&self) -> &[Vec<u32>] {
        &self.members
    }

    /// Size of the filter section of the serialized index.
    pub fn grid_bytes(&self) -> u64 {
        self.params.cells() as u64 * self.params.bits.div_ceil(8)
    }

    /// Mean of `fill^η` over all filters.
    pub fn realized_fp(&self) -> f64 {
        self.grid.iter().map(BloomFilterUnit::realized_fp).sum::<f64>() / self.grid.len() as f64
    }

    /// Cell of `name` in table `r`.
    pub fn placement(&self, name: &str, r: u16) -> u32 {
        self.placement_digest(key_digest(name.as_bytes()), r)
    }

    fn placement_digest(&self, d: KeyDigest, r: u16) -> u32 {
        let local = self.partition[usize::from(r)].hash_digest(d) as u32;
        match (self.params.layout(), self.router) {
            (Layout::Stacked, Some(tau)) => self.params.local_buckets * tau.hash_digest(d) as u32 + local,
            _ => local,
        }
    }

    /// Register `name` (or reopen it if already present) and return a writer
    /// that streams terms into its R cells.
    pub fn begin_set(&mut self, name: &str) -> SetWriter<'_> {
        let (id, fresh) = self.registry.get_or_insert(name);
        let d = key_digest(name.as_bytes());
        let cells: Vec<usize> =
            (0..self.params.repetitions).map(|r| self.cell_index(self.placement_digest(d, r), r)).collect();
        if fresh {
            for &c in &cells {
                // IDs are assigned in increasing order, so push keeps lists sorted
                self.members[c].push(id);
            }
        }
        SetWriter { positions: Vec::with_capacity(usize::from(self.params.eta)), index: self, id, cells, terms: 0 }
    }

    /// Insert every term of a set. Re-inserting a known name appends to it.
    pub fn insert_set<T, B>(&mut self, name: &str, terms: T) -> u32
    where
        T: IntoIterator<Item = B>,
        B: AsRef<[u8]>,
    {
        let mut w = self.begin_set(name);
        for t in terms {
            w.insert(t.as_ref());
        }
        w.id()
    }

    pub fn query_term(&self, q: &[u8]) -> Result<QueryResult> {
        if q.is_empty() {
            return Err(RamboError::InvalidQuery("empty query term".into()));
        }
        Ok(self.query_digest(key_digest(q)))
    }

    /// Probe every cell of every table, union the hit cells' members per
    /// table, and intersect across tables.
    pub fn query_digest(&self, d: KeyDigest) -> QueryResult {
        let positions = self.hashers.positions(d);
        let b = self.params.buckets as usize;
        let mut work = 0u64;
        let tables: Vec<Vec<u32>> = self
            .grid
            .chunks(b)
            .zip(self.members.chunks(b))
            .map(|(cells, members)| {
                let mut g: Vec<u32> = cells
                    .iter()
                    .zip(members)
                    .filter(|(cell, _)| cell.contains_positions(&positions))
                    .flat_map(|(_, m)| m.iter().copied())
                    .collect();
                g.sort_unstable();
                work += g.len() as u64;
                g
            })
            .collect();
        QueryResult { set_ids: intersect_tables(tables), bfu_probes: self.grid.len() as u64, intersect_work: work }
    }

    /// Sets that (approximately) contain every term of `terms`.
    pub fn query_terms<T: AsRef<[u8]>>(&self, terms: &[T], mode: QueryMode) -> Result<QueryResult> {
        if terms.is_empty() {
            return Err(RamboError::InvalidQuery("empty term list".into()));
        }
        if terms.iter().any(|t| t.as_ref().is_empty()) {
            return Err(RamboError::InvalidQuery("empty query term".into()));
        }
        Ok(match mode {
            QueryMode::TermAtATime => self.query_term_at_a_time(terms.iter().map(|t| key_digest(t.as_ref()))),
            QueryMode::BucketConjunction => {
                let positions: Vec<Vec<u64>> =
                    terms.iter().map(|t| self.hashers.positions(key_digest(t.as_ref()))).collect();
                self.query_bucket_conjunction(&positions)
            }
        })
    }

    fn query_term_at_a_time(&self, digests: impl Iterator<Item = KeyDigest>) -> QueryResult {
        let mut out = QueryResult::default();
        let mut running: Option<Vec<u32>> = None;
        for d in digests {
            let res = self.query_digest(d);
            out.bfu_probes += res.bfu_probes;
            out.intersect_work += res.intersect_work;
            let next = match running {
                None => res.set_ids,
                Some(acc) => intersect_sorted(&acc, &res.set_ids),
            };
            let empty = next.is_empty();
            running = Some(next);
            if empty {
                break;
            }
        }
        out.set_ids = running.unwrap_or_default();
        out
    }

    fn query_bucket_conjunction(&self, positions: &[Vec<u64>]) -> QueryResult {
        let b = self.params.buckets as usize;
        let mut probes = 0u64;
        let mut work = 0u64;
        let tables: Vec<Vec<u32>> = self
            .grid
            .chunks(b)
            .zip(self.members.chunks(b))
            .map(|(cells, members)| {
                let mut g = Vec::new();
                for (cell, m) in cells.iter().zip(members) {
                    let mut pass = true;
                    for p in positions {
                        probes += 1;
                        if !cell.contains_positions(p) {
                            pass = false;
                            break;
                        }
                    }
                    if pass {
                        g.extend_from_slice(m);
                    }
                }
                g.sort_unstable();
                work += g.len() as u64;
                g
            })
            .collect();
        QueryResult { set_ids: intersect_tables(tables), bfu_probes: probes, intersect_work: work }
    }

    /// Query a long sequence by its distinct k-grams, term at a time, stopping
    /// at the first k-gram whose running answer is empty.
    pub fn query_sequence(&self, seq: &[u8], k: usize) -> Result<QueryResult> {
        if k == 0 {
            return Err(RamboError::param("k must be at least 1"));
        }
        if seq.len() < k {
            return Err(RamboError::InvalidQuery(format!("sequence of length {} is shorter than k = {k}", seq.len())));
        }
        let mut seen = HashSet::new();
        let digests = kgram_tokens(seq, k)?.map(key_digest).filter(|d| seen.insert(*d));
        Ok(self.query_term_at_a_time(digests))
    }

    /// Halve B by OR-ing cell `b + B/2` into cell `b` in every table.
    ///
    /// Placement becomes `φ_r mod B/2`, so the result equals a direct build
    /// with B/2 cells from the same corpus and seed. For a stacked index the
    /// shard count halves instead.
    pub fn fold(&self) -> Result<RamboIndex> {
        let p = self.params;
        if !p.buckets.is_multiple_of(2) {
            return Err(RamboError::CannotFold(format!("B = {} is odd", p.buckets)));
        }
        if p.buckets / 2 < 2 {
            return Err(RamboError::CannotFold(format!("B = {} cannot shrink below 2", p.buckets)));
        }
        let params = match p.layout() {
            Layout::Monolithic => RamboParams { buckets: p.buckets / 2, local_buckets: p.buckets / 2, ..p },
            Layout::Stacked if p.shards.is_multiple_of(2) => {
                let shards = p.shards / 2;
                RamboParams { buckets: p.buckets / 2, shards, local_buckets: p.local_buckets, ..p }
            }
            Layout::Stacked => {
                return Err(RamboError::CannotFold(format!("stacked index with an odd shard count ({})", p.shards)))
            }
            Layout::ShardPart => {
                return Err(RamboError::CannotFold("fold the stacked index, not a single shard".into()))
            }
        };
        let half = params.buckets as usize;
        let full = p.buckets as usize;
        let mut grid = Vec::with_capacity(params.cells());
        let mut members = Vec::with_capacity(params.cells());
        for r in 0..usize::from(p.repetitions) {
            for b in 0..half {
                let lo = r * full + b;
                let hi = lo + half;
                grid.push(self.grid[lo].or_merge(&self.grid[hi])?);
                members.push(union_sorted(&self.members[lo], &self.members[hi]));
            }
        }
        Ok(RamboIndex {
            partition: partition_hashers(&params)?,
            router: router_hasher(&params)?,
            params,
            hashers: self.hashers.clone(),
            grid,
            members,
            registry: self.registry.clone(),
        })
    }

    /// Fold `times` times.
    pub fn fold_times(&self, times: u32) -> Result<RamboIndex> {
        let mut idx = self.clone();
        for _ in 0..times {
            idx = idx.fold()?;
        }
        Ok(idx)
    }

    /// Build each shard's sub-grid independently: every set is routed wholly
    /// to shard `τ(name)` and placed there with `φ_r` over `local_b` cells.
    pub fn build_shards<I, N, T, B>(params: RamboParams, corpus: I) -> Result<Vec<RamboIndex>>
    where
        I: IntoIterator<Item = (N, T)>,
        N: AsRef<str>,
        T: IntoIterator<Item = B>,
        B: AsRef<[u8]>,
    {
        params.validate()?;
        if params.shards < 2 || params.layout() != Layout::Stacked {
            return Err(RamboError::param(format!(
                "sharded build needs shards > 1 and B = shards·local_b (shards {}, B {}, local_b {})",
                params.shards, params.buckets, params.local_buckets
            )));
        }
        let part = params.shard_part();
        let mut shards = (0..params.shards).map(|_| RamboIndex::new(part)).collect::<Result<Vec<_>>>()?;
        let tau = router_hasher(&params)?.expect("shards > 1");
        for (name, terms) in corpus {
            let name = name.as_ref();
            let s = tau.hash_digest(key_digest(name.as_bytes())) as usize;
            shards[s].insert_set(name, terms);
        }
        Ok(shards)
    }

    /// Sharded build followed by vertical stacking. With `shards == 1` this
    /// is an ordinary monolithic build.
    pub fn build_sharded<I, N, T, B>(params: RamboParams, corpus: I) -> Result<RamboIndex>
    where
        I: IntoIterator<Item = (N, T)>,
        N: AsRef<str>,
        T: IntoIterator<Item = B>,
        B: AsRef<[u8]>,
    {
        if params.shards <= 1 {
            return Self::build(params, corpus);
        }
        Self::stack(Self::build_shards(params, corpus)?)
    }

    /// Stack shard sub-grids vertically: shard `i` occupies global buckets
    /// `[i·local_b, (i+1)·local_b)`. Set IDs are renumbered shard-major.
    pub fn stack(parts: Vec<RamboIndex>) -> Result<RamboIndex> {
        let Some(first) = parts.first() else {
            return Err(RamboError::IncompatibleShard("no shards to stack".into()));
        };
        let part_params = first.params;
        if parts.len() == 1 && part_params.layout() != Layout::ShardPart {
            return Ok(parts.into_iter().next().expect("one part"));
        }
        if part_params.layout() != Layout::ShardPart {
            return Err(RamboError::IncompatibleShard("input is not a shard sub-index".into()));
        }
        if parts.len() != usize::from(part_params.shards) {
            return Err(RamboError::IncompatibleShard(format!(
                "expected {} shards, got {}",
                part_params.shards,
                parts.len()
            )));
        }
        for (i, part) in parts.iter().enumerate() {
            if part.params != part_params {
                return Err(RamboError::IncompatibleShard(format!(
                    "shard {i} parameters {:?} differ from shard 0 {:?}",
                    part.params, part_params
                )));
            }
        }
        let params = part_params.stacked();
        let tau = router_hasher(&params)?.expect("shards > 1");
        let local = part_params.local_buckets as usize;
        let mut registry = SetRegistry::new();
        let mut offsets = Vec::with_capacity(parts.len());
        for (i, part) in parts.iter().enumerate() {
            offsets.push(registry.len() as u32);
            for name in part.registry.names() {
                let routed = tau.hash_digest(key_digest(name.as_bytes())) as usize;
                if routed != i {
                    return Err(RamboError::IncompatibleShard(format!(
                        "set {name:?} routes to shard {routed} but was found in shard {i}"
                    )));
                }
                if !registry.get_or_insert(name).1 {
                    return Err(RamboError::IncompatibleShard(format!("set {name:?} appears in two shards")));
                }
            }
        }
        let mut grid = Vec::with_capacity(params.cells());
        let mut members = Vec::with_capacity(params.cells());
        for r in 0..usize::from(params.repetitions) {
            for (part, &offset) in parts.iter().zip(&offsets) {
                for b in 0..local {
                    let c = r * local + b;
                    grid.push(part.grid[c].clone());
                    members.push(part.members[c].iter().map(|id| id + offset).collect());
                }
            }
        }
        Ok(RamboIndex {
            partition: partition_hashers(&params)?,
            router: Some(tau),
            params,
            hashers: first.hashers.clone(),
            grid,
            members,
            registry,
        })
    }

    /// Per table, member lists are sorted, disjoint, and cover `0..K`.
    pub fn check_partition(&self) -> Result<()> {
        let k = self.registry.len();
        if self.members.len() != self.params.cells() || self.grid.len() != self.params.cells() {
            return Err(RamboError::InconsistentIndex("grid size does not match B·R".into()));
        }
        let b = self.params.buckets as usize;
        let digests: Vec<KeyDigest> = self.registry.names().iter().map(|n| key_digest(n.as_bytes())).collect();
        for (r, table) in self.members.chunks(b).enumerate() {
            let mut seen = vec![false; k];
            for (cell, list) in table.iter().enumerate() {
                if list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(RamboError::InconsistentIndex(format!("unsorted member list in table {r}")));
                }
                for &id in list {
                    let slot = seen
                        .get_mut(id as usize)
                        .ok_or_else(|| RamboError::InconsistentIndex(format!("set ID {id} out of range (K = {k})")))?;
                    if *slot {
                        return Err(RamboError::InconsistentIndex(format!("set ID {id} appears twice in table {r}")));
                    }
                    *slot = true;
                    if self.placement_digest(digests[id as usize], r as u16) as usize != cell {
                        return Err(RamboError::InconsistentIndex(format!(
                            "set ID {id} is in cell {cell} of table {r}, not where its name hashes"
                        )));
                    }
                }
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(RamboError::InconsistentIndex(format!("set ID {missing} missing from table {r}")));
            }
        }
        Ok(())
    }

    /// Set names for a list of IDs.
    pub fn names_of<'a>(&'a self, ids: &'a [u32]) -> impl Iterator<Item = &'a str> + 'a {
        ids.iter().filter_map(|&id| self.registry.name(id))
    }
}
