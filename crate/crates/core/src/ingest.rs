//! Corpus readers: one file per set, streamed as k-grams or word unigrams.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{RamboError, Result};
use crate::index::RamboIndex;

/// Stride-1 windows of length `k`. Empty when `seq` is shorter than `k`.
pub fn kgram_tokens(seq: &[u8], k: usize) -> Result<std::slice::Windows<'_, u8>> {
    if k == 0 {
        return Err(RamboError::param("k must be at least 1"));
    }
    Ok(seq.windows(k))
}

/// Lowercased maximal runs of ASCII alphanumerics, minus stopwords.
pub fn word_tokens(text: &[u8], stoplist: &HashSet<String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut splitter = WordSplitter::default();
    let mut emit = |w: &[u8]| {
        // tokens are ASCII by construction
        let w = std::str::from_utf8(w).expect("ascii token");
        if !stoplist.contains(w) {
            out.push(w.to_owned());
        }
    };
    splitter.feed(text, &mut emit);
    splitter.finish(&mut emit);
    out
}

#[derive(Default)]
struct WordSplitter {
    current: Vec<u8>,
}

impl WordSplitter {
    fn feed(&mut self, bytes: &[u8], emit: &mut impl FnMut(&[u8])) {
        for &c in bytes {
            let c = c.to_ascii_lowercase();
            if c.is_ascii_lowercase() || c.is_ascii_digit() {
                self.current.push(c);
            } else if !self.current.is_empty() {
                emit(&self.current);
                self.current.clear();
            }
        }
    }

    fn finish(&mut self, emit: &mut impl FnMut(&[u8])) {
        if !self.current.is_empty() {
            emit(&self.current);
            self.current.clear();
        }
    }
}

/// Sliding k-gram window over a byte stream with line breaks removed.
struct KgramWindow {
    k: usize,
    buf: Vec<u8>,
}

impl KgramWindow {
    fn new(k: usize) -> Self {
        Self { k, buf: Vec::with_capacity(2 * k) }
    }

    fn feed(&mut self, bytes: &[u8], emit: &mut impl FnMut(&[u8])) {
        for &c in bytes {
            if c == b'\n' || c == b'\r' {
                continue;
            }
            if self.buf.len() == 2 * self.k {
                self.buf.drain(..self.k);
            }
            self.buf.push(c);
            if self.buf.len() >= self.k {
                emit(&self.buf[self.buf.len() - self.k..]);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    /// Whole file (newlines stripped) is one sequence, split into k-grams.
    Sequence,
    /// Free text, split into word unigrams.
    Document,
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub root: PathBuf,
    pub kind: CorpusKind,
    pub k: usize,
    pub stoplist: Option<PathBuf>,
}

impl CorpusSpec {
    pub fn sequences(root: impl Into<PathBuf>, k: usize) -> Self {
        Self { root: root.into(), kind: CorpusKind::Sequence, k, stoplist: None }
    }

    pub fn documents(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), kind: CorpusKind::Document, k: 1, stoplist: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusFile {
    /// Set name: the file name.
    pub name: String,
    pub path: PathBuf,
}

/// A set name and its materialized terms.
pub type NamedTerms = (String, Vec<Vec<u8>>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestIssue {
    pub name: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub sets: usize,
    pub terms: u64,
    pub issues: Vec<IngestIssue>,
}

/// A directory of set files, in lexicographic file-name order.
#[derive(Debug, Clone)]
pub struct Corpus {
    kind: CorpusKind,
    k: usize,
    stoplist: HashSet<String>,
    files: Vec<CorpusFile>,
}

pub fn load_stoplist(path: &Path) -> Result<HashSet<String>> {
    Ok(fs::read_to_string(path)?.lines().map(|l| l.trim().to_ascii_lowercase()).filter(|l| !l.is_empty()).collect())
}

impl Corpus {
    pub fn open(spec: &CorpusSpec) -> Result<Self> {
        if spec.kind == CorpusKind::Sequence && spec.k == 0 {
            return Err(RamboError::param("sequence corpus needs k >= 1"));
        }
        let mut files = Vec::new();
        for entry in fs::read_dir(&spec.root)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                continue;
            }
            files.push(CorpusFile { name: entry.file_name().to_string_lossy().into_owned(), path: entry.path() });
        }
        files.sort_by(|a, b| a.name.cmp(&b.name));
        let stoplist = match &spec.stoplist {
            Some(p) => load_stoplist(p)?,
            None => HashSet::new(),
        };
        Ok(Self { kind: spec.kind, k: spec.k, stoplist, files })
    }

    pub fn files(&self) -> &[CorpusFile] {
        &self.files
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn kind(&self) -> CorpusKind {
        self.kind
    }

    /// Stream the terms of one file through `f` without materializing them.
    /// Returns the number of terms produced.
    pub fn for_each_term(&self, file: &CorpusFile, f: impl FnMut(&[u8])) -> io::Result<u64> {
        self.stream_terms(BufReader::new(File::open(&file.path)?), f)
    }

    fn stream_terms<R: BufRead>(&self, mut reader: R, mut f: impl FnMut(&[u8])) -> io::Result<u64> {
        let mut count = 0u64;
        let mut emit = |t: &[u8]| {
            count += 1;
            f(t)
        };
        match self.kind {
            CorpusKind::Sequence => {
                let mut window = KgramWindow::new(self.k);
                loop {
                    let chunk = reader.fill_buf()?;
                    if chunk.is_empty() {
                        break;
                    }
                    let n = chunk.len();
                    window.feed(chunk, &mut emit);
                    reader.consume(n);
                }
            }
            CorpusKind::Document => {
                let mut splitter = WordSplitter::default();
                let stop = &self.stoplist;
                let mut filtered = |w: &[u8]| {
                    if stop.is_empty() || !stop.contains(std::str::from_utf8(w).expect("ascii token")) {
                        emit(w);
                    }
                };
                loop {
                    let chunk = reader.fill_buf()?;
                    if chunk.is_empty() {
                        break;
                    }
                    let n = chunk.len();
                    splitter.feed(chunk, &mut filtered);
                    reader.consume(n);
                }
                splitter.finish(&mut filtered);
            }
        }
        Ok(count)
    }

    /// Terms of an in-memory file image; same rules as [`Corpus::for_each_term`].
    pub fn terms_of(&self, bytes: &[u8]) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        self.stream_terms(bytes, |t| out.push(t.to_vec())).expect("in-memory read");
        out
    }

    /// Mean distinct-term count over the first `sample_files` files.
    pub fn sample_avg_cardinality(&self, sample_files: usize) -> Result<f64> {
        if sample_files == 0 {
            return Err(RamboError::param("sample size must be at least 1"));
        }
        if self.files.is_empty() {
            return Err(RamboError::EmptyCorpus("no files to sample".into()));
        }
        let mut total = 0usize;
        let mut sampled = 0usize;
        for file in self.files.iter().take(sample_files) {
            let mut distinct: HashSet<Vec<u8>> = HashSet::new();
            let read = self.for_each_term(file, |t| {
                if !distinct.contains(t) {
                    distinct.insert(t.to_vec());
                }
            });
            if read.is_ok() {
                total += distinct.len();
                sampled += 1;
            }
        }
        if sampled == 0 {
            return Err(RamboError::EmptyCorpus("no sampled file was readable".into()));
        }
        Ok(total as f64 / sampled as f64)
    }

    /// Insert every file as a set. Unreadable files are recorded and skipped.
    pub fn ingest_into(&self, index: &mut RamboIndex) -> IngestReport {
        let mut report = IngestReport::default();
        for file in &self.files {
            let reader = match File::open(&file.path) {
                Ok(f) => BufReader::new(f),
                Err(e) => {
                    report.issues.push(IngestIssue { name: file.name.clone(), message: e.to_string() });
                    continue;
                }
            };
            let mut writer = index.begin_set(&file.name);
            let result = self.stream_terms(reader, |t| writer.insert(t));
            report.sets += 1;
            match result {
                Ok(0) if self.kind == CorpusKind::Sequence => report.issues.push(IngestIssue {
                    name: file.name.clone(),
                    message: format!("sequence shorter than k = {}; set has no terms", self.k),
                }),
                Ok(n) => report.terms += n,
                Err(e) => report
                    .issues
                    .push(IngestIssue { name: file.name.clone(), message: format!("read failed part-way: {e}") }),
            }
        }
        report
    }

    /// Read every file fully into `(name, terms)` pairs; unreadable files are skipped.
    pub fn materialize(&self) -> (Vec<NamedTerms>, Vec<IngestIssue>) {
        let mut sets = Vec::new();
        let mut issues = Vec::new();
        for file in &self.files {
            let mut data = Vec::new();
            match File::open(&file.path).and_then(|mut f| f.read_to_end(&mut data)) {
                Ok(_) => sets.push((file.name.clone(), self.terms_of(&data))),
                Err(e) => issues.push(IngestIssue { name: file.name.clone(), message: e.to_string() }),
            }
        }
        (sets, issues)
    }
}
