//! Per-cell occupancy summary of a built index.

use serde::Serialize;

use crate::index::RamboIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            n += 1;
        }
        if n == 0 {
            return Self { min: 0.0, max: 0.0, mean: 0.0 };
        }
        Self { min, max, mean: sum / n as f64 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellStats {
    pub table: u16,
    pub bucket: u32,
    pub members: usize,
    pub fill: f64,
    /// `fill^η`.
    pub fp_estimate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexStats {
    pub sets: usize,
    pub buckets: u32,
    pub repetitions: u16,
    pub bits: u64,
    pub eta: u16,
    pub shards: u16,
    pub grid_bytes: u64,
    pub fill: Summary,
    pub fp_estimate: Summary,
    pub members: Summary,
    pub cells: Vec<CellStats>,
}

pub fn index_stats(index: &RamboIndex) -> IndexStats {
    let p = index.params();
    let cells: Vec<CellStats> = (0..p.repetitions)
        .flat_map(|r| (0..p.buckets).map(move |b| (r, b)))
        .map(|(r, b)| {
            let cell = index.cell(b, r);
            CellStats {
                table: r,
                bucket: b,
                members: index.members(b, r).len(),
                fill: cell.fill_ratio(),
                fp_estimate: cell.realized_fp(),
            }
        })
        .collect();
    IndexStats {
        sets: index.num_sets(),
        buckets: p.buckets,
        repetitions: p.repetitions,
        bits: p.bits,
        eta: p.eta,
        shards: p.shards,
        grid_bytes: index.grid_bytes(),
        fill: Summary::of(cells.iter().map(|c| c.fill)),
        fp_estimate: Summary::of(cells.iter().map(|c| c.fp_estimate)),
        members: Summary::of(cells.iter().map(|c| c.members as f64)),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::RamboParams;

    #[test]
    fn empty_index_has_zero_fill() {
        let idx = RamboIndex::new(RamboParams::new(4, 2).with_bits(64)).unwrap();
        let s = index_stats(&idx);
        assert_eq!(s.cells.len(), 8);
        assert_eq!(s.fill.max, 0.0);
        assert_eq!(s.members.max, 0.0);
    }

    #[test]
    fn uniform_corpus_is_balanced() {
        // K/B = 16 sets per cell on average
        let corpus = (0..256).map(|i| (format!("doc{i}"), vec![format!("t{i}")]));
        let idx = RamboIndex::build(RamboParams::new(16, 3).with_bits(1024).with_seed(5), corpus).unwrap();
        let s = index_stats(&idx);
        assert!(s.members.max <= 4.0 * s.members.min, "{:?}", s.members);
        assert!((s.members.mean - 16.0).abs() < 1e-9);
        assert!(s.fill.max <= 1.0);
    }
}
