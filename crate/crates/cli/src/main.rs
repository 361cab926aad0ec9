use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lateindex::bench::{emit_tradeoff_csv, parse_sweep, percentile, run_bench};
use lateindex::eval::{evaluate_run, DEFAULT_CUTOFFS};
use lateindex::index::{
    build_flat_index, build_plaid_lite, default_centroid_count, load_index, save_index, RetrievalIndex,
    DEFAULT_KMEANS_ITERATIONS,
};
use lateindex::ingest::{load_embeddings, load_qrels, load_run, write_embeddings, write_qrels, write_run};
use lateindex::retrieval::{PipelineConfig, PipelineMode, Searcher, DEFAULT_RERANK_DEPTH, DEFAULT_TOP_K};
use lateindex::synth::{generate, SyntheticSpec};
use lateindex::{EncodingConfig, Error, InnerProjection};

#[derive(Parser)]
#[command(name = "lateindex", version, about = "Multi-vector late-interaction retrieval toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum IndexMode {
    Flat,
    Plaid,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Projection {
    Identity,
    Sketch,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SearchMode {
    Exact,
    Plaid,
    Muvera,
    MuveraRerank,
}

#[derive(Subcommand)]
enum Command {
    /// Build a flat FDE index or a PLAID-lite centroid index from a corpus file.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "flat")]
        mode: IndexMode,
        /// Token embedding dimension the corpus must have.
        #[arg(long, default_value_t = 128)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        k_sim: u32,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, value_enum, default_value = "identity")]
        projection: Projection,
        /// Sketch output dimension (default d/4).
        #[arg(long)]
        sketch_dim: Option<usize>,
        /// Number of centroids for plaid (default round(4*sqrt(tokens))).
        #[arg(long)]
        centroids: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run queries against an index and write a TREC run file.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_enum)]
        mode: SearchMode,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        #[arg(long, default_value_t = DEFAULT_RERANK_DEPTH)]
        rerank_k: usize,
        /// Candidate depth for plaid (default: top-k).
        #[arg(long)]
        candidates: Option<usize>,
        #[arg(long)]
        run_out: PathBuf,
        /// Run tag (default: the mode name).
        #[arg(long)]
        tag: Option<String>,
        /// Accepted for interface uniformity; search itself draws no randomness.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a TREC run against TREC qrels.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CUTOFFS.to_vec())]
        cutoffs: Vec<usize>,
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Time index builds and query latency over a sweep of pipelines.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// Semicolon-separated entries such as "muvera:0;muvera-rerank:3;exact;plaid".
        #[arg(long)]
        sweep: String,
        #[arg(long, default_value_t = lateindex::bench::DEFAULT_WARMUP)]
        warmup: usize,
        #[arg(long)]
        csv_out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a synthetic corpus, queries and qrels with planted relevance.
    Synth {
        #[arg(long, default_value_t = 1000)]
        docs: usize,
        #[arg(long, default_value_t = 32)]
        tokens: usize,
        #[arg(long, default_value_t = 50)]
        queries: usize,
        #[arg(long, default_value_t = 128)]
        d: usize,
        #[arg(long, default_value_t = 5)]
        relevant: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes <prefix>.corpus.tcte, <prefix>.queries.tcte and <prefix>.qrels.
        #[arg(long)]
        out_prefix: PathBuf,
    },
}

/// 1 for I/O and format problems, 2 for configuration, 3 for evaluation
/// mismatches.
fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) else {
        return 1;
    };
    match e {
        Error::InvalidConfig(_)
        | Error::ModeMismatch { .. }
        | Error::RerankDepthBelowTopK { .. }
        | Error::CandidatesBelowTopK { .. }
        | Error::RoleMismatch { .. } => 2,
        Error::QueriesMissingFromQrels(_) | Error::QueryMissingFromRun(_) => 3,
        _ => 1,
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[allow(clippy::too_many_arguments)]
fn cmd_index(
    corpus: &Path,
    out: &Path,
    mode: IndexMode,
    d: usize,
    k_sim: u32,
    reps: usize,
    projection: Projection,
    sketch_dim: Option<usize>,
    centroids: Option<usize>,
    seed: u64,
) -> Result<()> {
    let docs = load_embeddings(corpus)?;
    if let Some(first) = docs.first() {
        if first.dim() != d {
            return Err(Error::DimensionMismatch {
                id: first.id().to_string(),
                expected: d,
                actual: first.dim(),
            }
            .into());
        }
    }
    let start = Instant::now();
    let (index, summary) = match mode {
        IndexMode::Flat => {
            let projection = match projection {
                Projection::Identity => InnerProjection::Identity,
                Projection::Sketch => match sketch_dim {
                    Some(target_dim) => InnerProjection::SparseSketch { target_dim },
                    None => EncodingConfig::default_sketch(d),
                },
            };
            let config = EncodingConfig::new(d, k_sim)
                .with_repetitions(reps)
                .with_projection(projection)
                .with_seed(seed);
            config.validate()?;
            let flat = build_flat_index(&docs, &config)?;
            let summary = format!("fde_dim={}", flat.fde_dim());
            (RetrievalIndex::Flat(flat), summary)
        }
        IndexMode::Plaid => {
            let tokens: usize = docs.iter().map(|m| m.len()).sum();
            let count = centroids.unwrap_or_else(|| default_centroid_count(tokens));
            let plaid = build_plaid_lite(&docs, count, DEFAULT_KMEANS_ITERATIONS, seed)?;
            let summary = format!("centroids={} tokens={tokens}", plaid.num_centroids());
            (RetrievalIndex::PlaidLite(plaid), summary)
        }
    };
    let index_ms = start.elapsed().as_secs_f64() * 1e3;
    save_index(&index, out)?;
    println!(
        "mode={} docs={} {summary} index_ms={index_ms:.3} corpus_sha256={}",
        index.kind(),
        index.docs().len(),
        index.meta().corpus_hash_hex()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    index: &Path,
    queries: &Path,
    mode: SearchMode,
    top_k: usize,
    rerank_k: usize,
    candidates: Option<usize>,
    run_out: &Path,
    tag: Option<String>,
) -> Result<()> {
    let mode = match mode {
        SearchMode::Exact => PipelineMode::ExactFull,
        SearchMode::Plaid => PipelineMode::PlaidLite {
            n_candidates: candidates.unwrap_or(top_k),
        },
        SearchMode::Muvera => PipelineMode::Muvera,
        SearchMode::MuveraRerank => PipelineMode::MuveraRerank { depth: rerank_k },
    };
    let config = PipelineConfig::new(mode, top_k);
    config.validate()?;
    let index = load_index(index)?;
    let queries = load_embeddings(queries)?;
    let searcher = Searcher::new(&index, &config)?;
    let (run, timings) = searcher.run(&queries)?;
    let tag = tag.unwrap_or_else(|| mode.name().to_string());
    write_run(&run, &tag, run_out)?;

    let mut lat: Vec<f64> = timings.iter().map(|t| t.total_ms).collect();
    let mean = if lat.is_empty() { 0.0 } else { lat.iter().sum::<f64>() / lat.len() as f64 };
    lat.sort_by(f64::total_cmp);
    let encode: f64 = timings.iter().map(|t| t.encode_ms).sum::<f64>() / timings.len().max(1) as f64;
    let rerank: f64 = timings.iter().map(|t| t.rerank_ms).sum::<f64>() / timings.len().max(1) as f64;
    println!(
        "mode={mode} queries={} lat_mean_ms={mean:.4} lat_p50_ms={:.4} lat_p95_ms={:.4} encode_mean_ms={encode:.4} rerank_mean_ms={rerank:.4}",
        timings.len(),
        percentile(&lat, 50.0),
        percentile(&lat, 95.0),
    );
    Ok(())
}

fn cmd_evaluate(run: &Path, qrels: &Path, cutoffs: &[usize], report_out: Option<&Path>) -> Result<()> {
    let run = load_run(run)?;
    let qrels = load_qrels(qrels)?;
    let report = match evaluate_run(&run, &qrels, cutoffs) {
        Err(Error::QueriesMissingFromQrels(ids)) => {
            for id in &ids {
                eprintln!("query not in qrels: {id}");
            }
            return Err(Error::QueriesMissingFromQrels(ids).into());
        }
        other => other?,
    };
    println!("{}", report.to_table());
    if let Some(path) = report_out {
        report.write_key_values(path)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    corpus: &Path,
    queries: &Path,
    qrels: &Path,
    sweep: &str,
    warmup: usize,
    csv_out: &Path,
    seed: u64,
) -> Result<()> {
    let docs = load_embeddings(corpus)?;
    let dim = docs.first().map(|m| m.dim()).ok_or(Error::EmptyCorpus)?;
    let sweep = parse_sweep(sweep, dim, seed)?;
    let queries = load_embeddings(queries)?;
    let qrels = load_qrels(qrels)?;
    let report = run_bench(&docs, &queries, &qrels, &sweep, warmup, seed)?;
    emit_tradeoff_csv(&report, csv_out)?;
    let mut eval_text = String::new();
    for (i, row) in report.rows.iter().enumerate() {
        eval_text.push_str(&format!("# row {i} mode={} fde_dim={}\n", row.config.mode, row.fde_dim));
        eval_text.push_str(&row.metrics.to_key_values());
    }
    let eval_path = csv_out.with_extension("eval.txt");
    std::fs::write(&eval_path, eval_text).with_context(|| format!("writing {}", eval_path.display()))?;
    println!("{}", report.to_table());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    docs: usize,
    tokens: usize,
    queries: usize,
    d: usize,
    relevant: usize,
    seed: u64,
    out_prefix: &Path,
) -> Result<()> {
    let corpus = generate(&SyntheticSpec::new(docs, tokens, queries, d, relevant, seed))?;
    let paths = [
        with_suffix(out_prefix, ".corpus.tcte"),
        with_suffix(out_prefix, ".queries.tcte"),
        with_suffix(out_prefix, ".qrels"),
    ];
    write_embeddings(&corpus.docs, &paths[0])?;
    write_embeddings(&corpus.queries, &paths[1])?;
    write_qrels(&corpus.qrels, &paths[2])?;
    for p in &paths {
        println!("wrote {}", p.display());
    }
    println!("docs={docs} queries={queries} judged={}", corpus.qrels.judgment_count());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index {
            corpus,
            out,
            mode,
            d,
            k_sim,
            reps,
            projection,
            sketch_dim,
            centroids,
            seed,
        } => cmd_index(&corpus, &out, mode, d, k_sim, reps, projection, sketch_dim, centroids, seed),
        Command::Search {
            index,
            queries,
            mode,
            top_k,
            rerank_k,
            candidates,
            run_out,
            tag,
            seed: _,
        } => cmd_search(&index, &queries, mode, top_k, rerank_k, candidates, &run_out, tag),
        Command::Evaluate {
            run,
            qrels,
            cutoffs,
            report_out,
        } => cmd_evaluate(&run, &qrels, &cutoffs, report_out.as_deref()),
        Command::Bench {
            corpus,
            queries,
            qrels,
            sweep,
            warmup,
            csv_out,
            seed,
        } => cmd_bench(&corpus, &queries, &qrels, &sweep, warmup, &csv_out, seed),
        Command::Synth {
            docs,
            tokens,
            queries,
            d,
            relevant,
            seed,
            out_prefix,
        } => cmd_synth(docs, tokens, queries, d, relevant, seed, &out_prefix),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
