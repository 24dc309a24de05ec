use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rambo_core::analysis::{self, AnalysisInput};
use rambo_core::fpbench::{self, BenchConfig, MultiplicityLaw};
use rambo_core::ingest::IngestIssue;
use rambo_core::stats::index_stats;
use rambo_core::{
    load_index, save_index, shard_of, stack_shards, Corpus, CorpusKind, CorpusSpec, QueryMode, RamboIndex, RamboParams,
};
use serde::Serialize;

use crate::{
    AnalyzeArgs, BenchArgs, BuildArgs, Cli, Command, Failure, FoldArgs, Kind, Law, Mode, QueryArgs, StackArgs,
};

type CmdResult = Result<(), Failure>;

pub fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Build(a) => build(cli, a),
        Command::Query(a) => query(cli, a),
        Command::Fold(a) => fold(cli, a),
        Command::Stack(a) => stack(cli, a),
        Command::BenchFp(a) => bench_fp(cli, a),
        Command::Analyze(a) => analyze(a),
        Command::Stats => stats(cli),
    }
}

fn index_path(cli: &Cli) -> Result<&Path, Failure> {
    cli.index.as_deref().ok_or_else(|| Failure::usage("--index is required for this command"))
}

/// A closed downstream pipe (`rambo stats | head`) is not an error.
fn ignore_broken_pipe(r: io::Result<()>) -> CmdResult {
    match r {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn print_json<T: Serialize>(value: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(value)?;
    ignore_broken_pipe(writeln!(io::stdout().lock(), "{text}"))
}

pub fn shard_path(index: &Path, i: usize) -> PathBuf {
    let mut s = index.as_os_str().to_owned();
    s.push(format!(".shard{i}"));
    PathBuf::from(s)
}

/// Nearest power of two to `x`, at least 4 so one fold is always possible.
fn nearest_power_of_two(x: f64) -> u32 {
    let e = x.max(1.0).log2().round().clamp(2.0, 31.0);
    1u32 << (e as u32)
}

#[derive(Serialize)]
struct BuildSummary<'a> {
    index: &'a Path,
    sets: usize,
    buckets: u32,
    repetitions: u16,
    bits: u64,
    eta: u16,
    shards: u16,
    avg_cardinality: f64,
    bits_set: u64,
    grid_bytes: u64,
    realized_p: f64,
    terms: u64,
    build_ms: f64,
    shard_files: Vec<PathBuf>,
    issues: &'a [IngestIssue],
}

fn build(cli: &Cli, a: &BuildArgs) -> CmdResult {
    let out = index_path(cli)?;
    if a.kind == Kind::Sequence && a.k == 0 {
        return Err(Failure::usage("--k must be at least 1"));
    }
    let spec = CorpusSpec {
        root: a.input.clone(),
        kind: match a.kind {
            Kind::Sequence => CorpusKind::Sequence,
            Kind::Document => CorpusKind::Document,
        },
        k: usize::from(a.k),
        stoplist: a.stoplist.clone(),
    };
    let corpus = Corpus::open(&spec)?;
    let k = corpus.len() as u64;
    let avg = corpus.sample_avg_cardinality(a.sample_files.max(1))?;

    let repetitions = match a.repetitions {
        Some(r) => r,
        None => analysis::min_repetitions(k, a.delta)?.min(u32::from(u16::MAX)) as u16,
    };
    let mut params = match (a.shards, a.local_b) {
        (Some(s), Some(local)) => {
            if a.buckets.is_some() {
                return Err(Failure::usage("--B cannot be combined with --shards/--local-b"));
            }
            if a.foldable && !(u32::from(s) * local).is_power_of_two() {
                return Err(Failure::usage("--foldable needs shards·local_b to be a power of two"));
            }
            RamboParams::sharded(s, local, repetitions)
        }
        _ => {
            let buckets = match a.buckets {
                Some(b) if a.foldable && !b.is_power_of_two() => {
                    return Err(Failure::usage(format!("--foldable needs a power-of-two --B, got {b}")));
                }
                Some(b) => b,
                None => {
                    let b = analysis::optimal_buckets(k, 1, u32::from(a.eta));
                    if a.foldable {
                        nearest_power_of_two(b)
                    } else {
                        (b.round() as u32).max(2)
                    }
                }
            };
            RamboParams::new(buckets, repetitions)
        }
    };
    params = params.with_eta(a.eta).with_k(a.k).with_seed(cli.seed).sized_for(k, avg.ceil() as u64, a.p)?;

    let started = Instant::now();
    let mut issues = Vec::new();
    let mut terms = 0u64;
    let mut shard_files = Vec::new();
    let index = if params.shards > 1 {
        let part = params.shard_part();
        let mut shards = (0..params.shards).map(|_| RamboIndex::new(part)).collect::<Result<Vec<_>, _>>()?;
        for file in corpus.files() {
            let s = usize::from(shard_of(&params, file.name.as_bytes())?);
            let mut writer = shards[s].begin_set(&file.name);
            match corpus.for_each_term(file, |t| writer.insert(t)) {
                Ok(n) => terms += n,
                Err(e) => issues.push(IngestIssue { name: file.name.clone(), message: e.to_string() }),
            }
        }
        for (i, shard) in shards.iter().enumerate() {
            let path = shard_path(out, i);
            save_index(shard, &path)?;
            shard_files.push(path);
        }
        stack_shards(&shard_files)?
    } else {
        let mut index = RamboIndex::new(params)?;
        let report = corpus.ingest_into(&mut index);
        terms = report.terms;
        issues = report.issues;
        index
    };
    let build_ms = started.elapsed().as_secs_f64() * 1e3;
    save_index(&index, out)?;
    for issue in &issues {
        eprintln!("warning: {}: {}", issue.name, issue.message);
    }

    let summary = BuildSummary {
        index: out,
        sets: index.num_sets(),
        buckets: params.buckets,
        repetitions: params.repetitions,
        bits: params.bits,
        eta: params.eta,
        shards: params.shards,
        avg_cardinality: avg,
        bits_set: index.cells().iter().map(|c| c.popcount()).sum(),
        grid_bytes: index.grid_bytes(),
        realized_p: index.realized_fp(),
        terms,
        build_ms,
        shard_files,
        issues: &issues,
    };
    if cli.json {
        return print_json(&summary);
    }
    println!(
        "K={} B={} R={} m={} eta={} bits_set={} realized_p={:.4e} build_ms={:.1}",
        summary.sets,
        summary.buckets,
        summary.repetitions,
        summary.bits,
        summary.eta,
        summary.bits_set,
        summary.realized_p,
        summary.build_ms
    );
    for f in &summary.shard_files {
        println!("shard {}", f.display());
    }
    Ok(())
}

fn query(cli: &Cli, a: &QueryArgs) -> CmdResult {
    let index = load_index(index_path(cli)?)?;
    let mode = match a.mode {
        Mode::Term => QueryMode::TermAtATime,
        Mode::Bucket => QueryMode::BucketConjunction,
    };
    let k = usize::from(index.params().k);
    let lines: Vec<String> =
        if a.queries.is_empty() { io::stdin().lock().lines().collect::<io::Result<_>>()? } else { a.queries.clone() };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut failed = 0usize;
    for line in &lines {
        let q = line.trim();
        let res = if a.sequence {
            index.query_sequence(q.as_bytes(), k)
        } else {
            let terms: Vec<&str> = q.split_whitespace().collect();
            index.query_terms(&terms, mode)
        };
        match res {
            Ok(res) => {
                let names: Vec<&str> = index.names_of(&res.set_ids).collect();
                let mut line = format!("{q}\t{}", names.join(","));
                if a.probes {
                    line.push_str(&format!("\t{}\t{}", res.bfu_probes, res.intersect_work));
                }
                if let Err(e) = writeln!(out, "{line}") {
                    return ignore_broken_pipe(Err(e));
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: query {q:?}: {e}");
            }
        }
    }
    if failed > 0 {
        return Err(Failure { code: 2, message: format!("{failed} of {} queries failed", lines.len()) });
    }
    Ok(())
}

fn probe_fp(index: &RamboIndex, probes: &[String]) -> f64 {
    let hits: usize = probes.iter().filter_map(|t| index.query_term(t.as_bytes()).ok()).map(|r| r.set_ids.len()).sum();
    hits as f64 / (probes.len().max(1) * index.num_sets().max(1)) as f64
}

#[derive(Serialize)]
struct FoldSummary {
    buckets_before: u32,
    buckets_after: u32,
    grid_bytes_before: u64,
    grid_bytes_after: u64,
    file_bytes_before: u64,
    file_bytes_after: u64,
    fp_before: Option<f64>,
    fp_after: Option<f64>,
}

fn fold(cli: &Cli, a: &FoldArgs) -> CmdResult {
    let input = index_path(cli)?;
    let index = load_index(input)?;
    let folded = index.fold_times(a.times)?;
    save_index(&folded, &a.out)?;
    let probes: Option<Vec<String>> = match &a.probe_file {
        Some(p) => {
            Some(fs::read_to_string(p)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect())
        }
        None => None,
    };
    let summary = FoldSummary {
        buckets_before: index.buckets(),
        buckets_after: folded.buckets(),
        grid_bytes_before: index.grid_bytes(),
        grid_bytes_after: folded.grid_bytes(),
        file_bytes_before: fs::metadata(input)?.len(),
        file_bytes_after: fs::metadata(&a.out)?.len(),
        fp_before: probes.as_ref().map(|p| probe_fp(&index, p)),
        fp_after: probes.as_ref().map(|p| probe_fp(&folded, p)),
    };
    if cli.json {
        return print_json(&summary);
    }
    println!(
        "B {} -> {}, grid bytes {} -> {}",
        summary.buckets_before, summary.buckets_after, summary.grid_bytes_before, summary.grid_bytes_after
    );
    if let (Some(before), Some(after)) = (summary.fp_before, summary.fp_after) {
        println!("probe FP {before:.4e} -> {after:.4e}");
    }
    Ok(())
}

fn stack(cli: &Cli, a: &StackArgs) -> CmdResult {
    let out = index_path(cli)?;
    let paths: Vec<PathBuf> = if a.shards.is_empty() {
        (0..).map(|i| shard_path(out, i)).take_while(|p| p.exists()).collect()
    } else {
        a.shards.clone()
    };
    if paths.is_empty() {
        return Err(Failure { code: 2, message: format!("no shard files found for {}", out.display()) });
    }
    let index = stack_shards(&paths)?;
    save_index(&index, out)?;
    if cli.json {
        return print_json(&serde_json::json!({
            "index": out,
            "shards": paths.len(),
            "sets": index.num_sets(),
            "buckets": index.buckets(),
        }));
    }
    println!("stacked {} shards: K={} B={}", paths.len(), index.num_sets(), index.buckets());
    Ok(())
}

fn bench_fp(cli: &Cli, a: &BenchArgs) -> CmdResult {
    let config = BenchConfig {
        num_queries: a.queries,
        term_length: a.term_length,
        multiplicity: match a.law {
            Law::Rate => MultiplicityLaw::ExponentialRate(a.alpha),
            Law::Mean => MultiplicityLaw::ExponentialMean(a.alpha),
            Law::Fixed => MultiplicityLaw::Fixed(a.v),
        },
        seed: cli.seed,
        k_cap: a.k_cap,
        sets: a.sets,
        terms_per_set: a.terms_per_set,
        buckets: a.buckets,
        repetitions: a.repetitions,
        eta: a.eta,
        target_p: a.p,
    };
    let report = fpbench::run(&config)?;
    print_json(&report)?;
    if report.false_negatives != 0 {
        return Err(Failure { code: 2, message: format!("{} false negatives", report.false_negatives) });
    }
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> CmdResult {
    let buckets = a
        .buckets
        .unwrap_or_else(|| (analysis::optimal_buckets(a.sets, a.multiplicity.max(1), a.eta).round() as u64).max(2));
    let repetitions = match a.repetitions {
        Some(r) => r,
        None => analysis::min_repetitions(a.sets, a.delta)?,
    };
    let input = AnalysisInput {
        sets: a.sets,
        buckets,
        repetitions,
        multiplicity: a.multiplicity,
        p: a.p,
        eta: a.eta,
        delta: a.delta,
    };
    print_json(&analysis::analyze(input, a.insertions)?)
}

fn stats(cli: &Cli) -> CmdResult {
    let index = load_index(index_path(cli)?)?;
    print_json(&index_stats(&index))
}
