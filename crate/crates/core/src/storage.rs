//! Binary index file format (version 1, all integers little-endian):
//!
//! ```text
//! header   magic "RMBO" | version u16 | B u32 | R u16 | eta u16 | m u64 | k u16
//!          | seed u64 | shards u16 | local_b u32 | K u32
//! registry K × (len u32, UTF-8 name bytes), in ID order
//! members  for r in 0..R, b in 0..B: count u32, sorted IDs u32 × count
//! filters  for r in 0..R, b in 0..B: ⌈m/8⌉ bytes, bit i at byte i/8, LSB first
//! trailer  CRC32 (IEEE) of every preceding byte
//! ```

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::bloom::{BloomFilterUnit, BloomHashers};
use crate::error::{RamboError, Result};
use crate::index::{RamboIndex, RamboParams, SetRegistry};

pub const MAGIC: [u8; 4] = *b"RMBO";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 42;
const CRC_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexFileHeader {
    pub version: u16,
    pub params: RamboParams,
    pub num_sets: u32,
}

impl IndexFileHeader {
    fn write(&self, out: &mut Vec<u8>) {
        let p = &self.params;
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&p.buckets.to_le_bytes());
        out.extend_from_slice(&p.repetitions.to_le_bytes());
        out.extend_from_slice(&p.eta.to_le_bytes());
        out.extend_from_slice(&p.bits.to_le_bytes());
        out.extend_from_slice(&p.k.to_le_bytes());
        out.extend_from_slice(&p.seed.to_le_bytes());
        out.extend_from_slice(&p.shards.to_le_bytes());
        out.extend_from_slice(&p.local_buckets.to_le_bytes());
        out.extend_from_slice(&self.num_sets.to_le_bytes());
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        if r.take(4)? != MAGIC {
            return Err(RamboError::CorruptIndex("bad magic".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(RamboError::CorruptIndex(format!("unsupported version {version}")));
        }
        let params = RamboParams {
            buckets: r.u32()?,
            repetitions: r.u16()?,
            eta: r.u16()?,
            bits: r.u64()?,
            k: r.u16()?,
            seed: r.u64()?,
            shards: r.u16()?,
            local_buckets: r.u32()?,
        };
        let num_sets = r.u32()?;
        Ok(Self { version, params, num_sets })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| RamboError::CorruptIndex("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn to_bytes(index: &RamboIndex) -> Vec<u8> {
    let params = *index.params();
    let filter_len = params.bits.div_ceil(8) as usize;
    let mut out = Vec::with_capacity(HEADER_LEN + params.cells() * (4 + filter_len) + CRC_LEN);
    IndexFileHeader { version: VERSION, params, num_sets: index.num_sets() as u32 }.write(&mut out);
    for name in index.registry().names() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for list in index.member_lists() {
        out.extend_from_slice(&(list.len() as u32).to_le_bytes());
        for id in list {
            out.extend_from_slice(&id.to_le_bytes());
        }
    }
    for cell in index.cells() {
        cell.write_bytes(&mut out);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<RamboIndex> {
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(RamboError::CorruptIndex(format!("file too short ({} bytes)", bytes.len())));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - CRC_LEN);
    let mut r = Reader { buf: body, pos: 0 };
    let header = IndexFileHeader::read(&mut r)?;
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(RamboError::CorruptIndex("checksum mismatch".into()));
    }
    let params = header.params;
    params.validate().map_err(|e| RamboError::CorruptIndex(format!("bad header: {e}")))?;

    let mut names = Vec::with_capacity(header.num_sets.min(1 << 20) as usize);
    for _ in 0..header.num_sets {
        let len = r.u32()? as usize;
        let raw = r.take(len)?;
        let name = std::str::from_utf8(raw).map_err(|_| RamboError::CorruptIndex("set name is not UTF-8".into()))?;
        names.push(name.to_owned());
    }
    let registry = SetRegistry::from_names(names)?;

    let cells = params.cells();
    let mut members = Vec::with_capacity(cells);
    for _ in 0..cells {
        let count = r.u32()? as usize;
        let raw =
            r.take(count.checked_mul(4).ok_or_else(|| RamboError::CorruptIndex("member count overflow".into()))?)?;
        members.push(raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect());
    }

    let hashers = Arc::new(BloomHashers::derive(params.seed, u32::from(params.eta), params.bits)?);
    let filter_len = params.bits.div_ceil(8) as usize;
    let mut grid = Vec::with_capacity(cells);
    for _ in 0..cells {
        let mut cell = BloomFilterUnit::from_bytes(hashers.clone(), r.take(filter_len)?, 0)?;
        // insert counts are not persisted; keep the lower bound popcount/η
        let n = cell.popcount().div_ceil(u64::from(params.eta));
        cell.set_insert_count(n);
        grid.push(cell);
    }
    if r.pos != body.len() {
        return Err(RamboError::CorruptIndex(format!("{} trailing bytes", body.len() - r.pos)));
    }
    RamboIndex::from_parts(params, registry, members, grid, hashers)
}

/// Write `index` to `path`. A partially written file is removed on failure.
pub fn save_index(index: &RamboIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(index);
    if let Err(e) = fs::write(path, &bytes) {
        let _ = fs::remove_file(path);
        return Err(e.into());
    }
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<RamboIndex> {
    from_bytes(&fs::read(path)?)
}

/// Header only; validates magic and version but not the checksum.
pub fn read_header(path: impl AsRef<Path>) -> Result<IndexFileHeader> {
    let bytes = fs::read(path)?;
    IndexFileHeader::read(&mut Reader { buf: &bytes, pos: 0 })
}

/// Load shard files (in shard order) and stack them into one index.
pub fn stack_shards<P: AsRef<Path>>(paths: &[P]) -> Result<RamboIndex> {
    let parts = paths.iter().map(load_index).collect::<Result<Vec<_>>>()?;
    RamboIndex::stack(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_index(seed: u64, sets: usize, b: u32, r: u16) -> RamboIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = RamboIndex::new(RamboParams::new(b, r).with_bits(300).with_seed(seed)).unwrap();
        for i in 0..sets {
            let terms: Vec<[u8; 8]> = (0..20).map(|_| rng.random()).collect();
            idx.insert_set(&format!("set-{i}"), terms);
        }
        idx
    }

    #[test]
    fn empty_index_file_size() {
        let idx = RamboIndex::new(RamboParams::new(4, 3).with_bits(100)).unwrap();
        let bytes = to_bytes(&idx);
        assert_eq!(bytes.len(), HEADER_LEN + 12 * (4 + 13) + 4);
        assert_eq!(&bytes[..4], b"RMBO");
        assert_eq!(from_bytes(&bytes).unwrap(), idx);
    }

    #[test]
    fn header_layout_is_little_endian() {
        let idx = RamboIndex::new(RamboParams::new(0x0102, 3).with_bits(64).with_seed(0xAABB).with_k(31)).unwrap();
        let bytes = to_bytes(&idx);
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[0x02, 0x01, 0, 0]);
        assert_eq!(&bytes[10..12], &[3, 0]);
        assert_eq!(&bytes[12..14], &[2, 0]);
        assert_eq!(&bytes[14..22], &64u64.to_le_bytes());
        assert_eq!(&bytes[22..24], &[31, 0]);
        assert_eq!(&bytes[24..32], &0xAABBu64.to_le_bytes());
    }

    #[test]
    fn round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let idx = sample_index(3, 12, 8, 2);
        let a = dir.path().join("a.rmbo");
        let b = dir.path().join("b.rmbo");
        save_index(&idx, &a).unwrap();
        save_index(&idx, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let back = load_index(&a).unwrap();
        assert_eq!(back, idx);
        for t in [b"x".as_slice(), b"set-0", b"12345678"] {
            assert_eq!(back.query_term(t).unwrap(), idx.query_term(t).unwrap());
        }
        assert!(back.cells().iter().all(|c| c.popcount() <= u64::from(c.eta()) * c.insert_count()));
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = to_bytes(&sample_index(4, 5, 4, 2));
        for i in (0..bytes.len()).step_by(7).chain([bytes.len() - 1]) {
            let mut bad = bytes.clone();
            bad[i] ^= 0x40;
            assert!(matches!(from_bytes(&bad), Err(RamboError::CorruptIndex(_))), "byte {i}");
        }
        for cut in [0, 10, HEADER_LEN + 3, bytes.len() - 1] {
            assert!(matches!(from_bytes(&bytes[..cut]), Err(RamboError::CorruptIndex(_))));
        }
    }

    #[test]
    fn partition_violation_is_inconsistent() {
        let idx = sample_index(5, 3, 4, 1);
        let mut bytes = to_bytes(&idx);
        // duplicate one member ID by overwriting another list's entry
        let mut pos = HEADER_LEN;
        for name in idx.registry().names() {
            pos += 4 + name.len();
        }
        let lists = idx.member_lists();
        let first_nonempty = lists.iter().position(|l| !l.is_empty()).unwrap();
        for l in &lists[..first_nonempty] {
            pos += 4 + 4 * l.len();
        }
        let victim = lists[first_nonempty][0];
        let replacement = (victim + 1) % 3;
        bytes[pos + 4..pos + 8].copy_from_slice(&replacement.to_le_bytes());
        let body_len = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(from_bytes(&bytes), Err(RamboError::InconsistentIndex(_))));
    }

    #[test]
    fn renamed_set_is_misplaced() {
        let idx = sample_index(5, 3, 64, 3);
        let mut bytes = to_bytes(&idx);
        // "set-0" -> "set-7": same length, different cells
        bytes[HEADER_LEN + 4 + 4] = b'7';
        let body_len = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(from_bytes(&bytes), Err(RamboError::InconsistentIndex(_))));
    }

    #[test]
    fn fold_commutes_with_persistence() {
        let dir = tempfile::tempdir().unwrap();
        let idx = sample_index(6, 20, 16, 2);
        let path = dir.path().join("f.rmbo");
        save_index(&idx.fold().unwrap(), &path).unwrap();
        let loaded = load_index(&path).unwrap();
        assert_eq!(from_bytes(&to_bytes(&idx)).unwrap().fold().unwrap(), loaded);
    }

    #[test]
    fn stack_shard_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let corpus: Vec<(String, Vec<[u8; 6]>)> =
            (0..30).map(|i| (format!("f{i}"), (0..10).map(|_| rng.random()).collect())).collect();
        let params = RamboParams::sharded(4, 500, 1).with_bits(64);
        let parts = RamboIndex::build_shards(params, corpus.clone()).unwrap();
        let paths: Vec<_> = parts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let path = dir.path().join(format!("s{i}"));
                save_index(p, &path).unwrap();
                path
            })
            .collect();
        let stacked = stack_shards(&paths).unwrap();
        assert_eq!(stacked.buckets(), 2000);
        assert_eq!(stacked, RamboIndex::stack(parts).unwrap());
        assert!(stack_shards(&paths[..3]).is_err());
        let single = dir.path().join("mono");
        let mono = sample_index(1, 4, 4, 1);
        save_index(&mono, &single).unwrap();
        assert_eq!(stack_shards(&[&single]).unwrap(), mono);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_indexes_round_trip(seed: u64, sets in 0usize..15, b in 2u32..9, r in 1u16..4) {
            let idx = sample_index(seed, sets, b, r);
            let bytes = to_bytes(&idx);
            let back = from_bytes(&bytes).unwrap();
            prop_assert_eq!(to_bytes(&back), bytes);
            prop_assert_eq!(back, idx);
        }
    }
}
