//! RAMBO: a B×R grid of merged Bloom filters answering "which of K sets
//! contain this term?" in time sublinear in K.

pub mod analysis;
pub mod bloom;
pub mod error;
pub mod fpbench;
pub mod hashing;
pub mod index;
pub mod ingest;
pub mod stats;
pub mod storage;

pub use bloom::{fp_theoretical, log2_sizing, size_for, BloomFilterUnit, BloomHashers};
pub use error::{RamboError, Result};
pub use hashing::{key_digest, HashRole, KeyDigest, UniversalHasher};
pub use index::{shard_of, shard_placement, Layout, QueryMode, QueryResult, RamboIndex, RamboParams, SetRegistry};
pub use ingest::{Corpus, CorpusKind, CorpusSpec};
pub use storage::{load_index, save_index, stack_shards};
