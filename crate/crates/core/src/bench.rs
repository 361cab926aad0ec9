//! Indexing-time and per-query latency harness. Each sweep entry is built
//! (timed), warmed up, run over every query in a sequential timed loop and
//! evaluated on that same run.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::eval::{evaluate_run, MetricReport, DEFAULT_CUTOFFS};
use crate::index::{
    build_flat_index, build_plaid_lite, default_centroid_count, RetrievalIndex, DEFAULT_KMEANS_ITERATIONS,
};
use crate::model::{EncodingConfig, Qrels, TokenMatrix};
use crate::retrieval::{PipelineConfig, PipelineMode, Searcher, DEFAULT_RERANK_DEPTH, DEFAULT_TOP_K};

pub const DEFAULT_WARMUP: usize = 10;
pub const CSV_HEADER: &str = "mode,fde_dim,index_ms,lat_mean_ms,lat_p50_ms,lat_p95_ms,ndcg@100,map,recall@100";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub config: PipelineConfig,
    /// FDE dimension for the FDE modes, 0 otherwise.
    pub fde_dim: usize,
    pub index_ms: f64,
    pub lat_mean_ms: f64,
    pub lat_p50_ms: f64,
    pub lat_p95_ms: f64,
    pub latencies_ms: Vec<f64>,
    pub metrics: MetricReport,
    pub warmup: usize,
    pub measured: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub environment: String,
}

impl BenchReport {
    /// One line per row, fixed-width.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<22} {:>8} {:>12} {:>12} {:>12} {:>12} {:>9} {:>9} {:>10}",
            "mode", "fde_dim", "index_ms", "lat_mean_ms", "lat_p50_ms", "lat_p95_ms", "ndcg@100", "map", "recall@100"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{:<22} {:>8} {:>12.3} {:>12.4} {:>12.4} {:>12.4} {:>9.6} {:>9.6} {:>10.6}",
                r.config.mode.to_string(),
                r.fde_dim,
                r.index_ms,
                r.lat_mean_ms,
                r.lat_p50_ms,
                r.lat_p95_ms,
                r.metrics.ndcg_at(100).unwrap_or(f64::NAN),
                r.metrics.map,
                r.metrics.recall_at(100).unwrap_or(f64::NAN),
            )
            .unwrap();
        }
        write!(out, "environment: {}", self.environment).unwrap();
        out
    }
}

/// Free-text description of where the numbers came from.
pub fn environment_note() -> String {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!(
        "os={} arch={} hw_threads={} build={} timed_loop=sequential",
        std::env::consts::OS,
        std::env::consts::ARCH,
        threads,
        if cfg!(debug_assertions) { "debug" } else { "optimized" }
    )
}

/// Nearest-rank percentile of an ascending slice (`p` in `[0, 100]`).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn build_for(corpus: &[TokenMatrix], config: &PipelineConfig, seed: u64) -> Result<Option<RetrievalIndex>> {
    Ok(match config.mode {
        PipelineMode::ExactFull => None,
        PipelineMode::PlaidLite { .. } => {
            let total: usize = corpus.iter().map(TokenMatrix::len).sum();
            Some(RetrievalIndex::PlaidLite(build_plaid_lite(
                corpus,
                default_centroid_count(total),
                DEFAULT_KMEANS_ITERATIONS,
                seed,
            )?))
        }
        PipelineMode::Muvera | PipelineMode::MuveraRerank { .. } => {
            let dim = corpus.first().ok_or(Error::EmptyCorpus)?.dim();
            let encoding = config.encoding.unwrap_or_else(|| EncodingConfig::new(dim, 3).with_seed(seed));
            Some(RetrievalIndex::Flat(build_flat_index(corpus, &encoding)?))
        }
    })
}

/// Benchmarks every sweep entry in order. `seed` drives k-means and the
/// default encoding of FDE entries that carry none.
pub fn run_bench(
    corpus: &[TokenMatrix],
    queries: &[TokenMatrix],
    qrels: &Qrels,
    sweep: &[PipelineConfig],
    warmup: usize,
    seed: u64,
) -> Result<BenchReport> {
    if sweep.is_empty() {
        return Err(Error::InvalidConfig("sweep must contain at least one configuration".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if queries.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs at least one query".into()));
    }
    let mut rows = Vec::with_capacity(sweep.len());
    for config in sweep {
        config.validate()?;
        let start = Instant::now();
        let index = build_for(corpus, config, seed)?;
        // exact search has no index; its "build" is taking its own corpus copy
        let exact_docs = index.is_none().then(|| corpus.to_vec());
        let index_ms = start.elapsed().as_secs_f64() * 1e3;
        let searcher = match (&index, &exact_docs) {
            (Some(idx), _) => Searcher::new(idx, config)?,
            (None, Some(docs)) => Searcher::exact(docs, config.top_k)?,
            (None, None) => unreachable!(),
        };
        let fde_dim = match &index {
            Some(RetrievalIndex::Flat(f)) if config.mode.uses_fde() => f.fde_dim(),
            _ => 0,
        };

        for q in queries.iter().cycle().take(warmup) {
            searcher.search(q)?;
        }
        let (run, timings) = searcher.run(queries)?;
        let mut latencies: Vec<f64> = timings.iter().map(|t| t.total_ms).collect();
        let lat_mean_ms = latencies.iter().sum::<f64>() / latencies.len() as f64;
        let measured_order = latencies.clone();
        latencies.sort_by(f64::total_cmp);
        let metrics = evaluate_run(&run, qrels, &DEFAULT_CUTOFFS)?;
        rows.push(BenchRow {
            config: *config,
            fde_dim,
            index_ms,
            lat_mean_ms,
            lat_p50_ms: percentile(&latencies, 50.0),
            lat_p95_ms: percentile(&latencies, 95.0),
            latencies_ms: measured_order,
            metrics,
            warmup,
            measured: timings.len(),
        });
    }
    Ok(BenchReport {
        rows,
        environment: environment_note(),
    })
}

fn csv_row(r: &BenchRow) -> String {
    format!(
        "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        r.config.mode.name(),
        r.fde_dim,
        r.index_ms,
        r.lat_mean_ms,
        r.lat_p50_ms,
        r.lat_p95_ms,
        r.metrics.ndcg_at(100).unwrap_or(f64::NAN),
        r.metrics.map,
        r.metrics.recall_at(100).unwrap_or(f64::NAN),
    )
}

pub fn tradeoff_csv(report: &BenchReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

pub fn emit_tradeoff_csv(report: &BenchReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, tradeoff_csv(report)).map_err(|e| Error::io(path, e))
}

/// Parses `mode[:arg]` entries separated by `;`. `muvera:K` and
/// `muvera-rerank:K` take the SimHash bit count (default 3); `plaid:N` takes
/// the candidate depth; `exact` takes nothing. Rerank entries use depth 100
/// and return that many hits; the others return 1000.
pub fn parse_sweep(spec: &str, dim: usize, seed: u64) -> Result<Vec<PipelineConfig>> {
    let bad = |entry: &str, why: &str| Error::InvalidConfig(format!("bad sweep entry {entry:?}: {why}"));
    let mut out = Vec::new();
    for entry in spec.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (mode, arg) = match entry.split_once(':') {
            Some((m, a)) => (m.trim(), Some(a.trim())),
            None => (entry, None),
        };
        let number = |a: &str| a.parse::<usize>().map_err(|_| bad(entry, "argument is not a non-negative integer"));
        let fde = |arg: Option<&str>| -> Result<EncodingConfig> {
            let k = match arg {
                Some(a) => number(a)?,
                None => 3,
            };
            let k = u32::try_from(k).map_err(|_| bad(entry, "k_sim out of range"))?;
            let cfg = EncodingConfig::new(dim, k).with_seed(seed);
            cfg.validate().map_err(|e| bad(entry, &e.to_string()))?;
            Ok(cfg)
        };
        let config = match mode {
            "exact" => {
                if arg.is_some() {
                    return Err(bad(entry, "exact takes no argument"));
                }
                PipelineConfig::new(PipelineMode::ExactFull, DEFAULT_TOP_K)
            }
            "plaid" => {
                let n_candidates = arg.map(number).transpose()?.unwrap_or(DEFAULT_TOP_K);
                PipelineConfig::new(PipelineMode::PlaidLite { n_candidates }, DEFAULT_TOP_K.min(n_candidates.max(1)))
            }
            "muvera" => PipelineConfig::new(PipelineMode::Muvera, DEFAULT_TOP_K).with_encoding(fde(arg)?),
            "muvera-rerank" => PipelineConfig::new(
                PipelineMode::MuveraRerank {
                    depth: DEFAULT_RERANK_DEPTH,
                },
                DEFAULT_RERANK_DEPTH,
            )
            .with_encoding(fde(arg)?),
            other => return Err(bad(entry, &format!("unknown mode {other:?}"))),
        };
        config.validate()?;
        out.push(config);
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig("sweep spec is empty".into()));
    }
    Ok(out)
}
