//! TREC-style evaluation: nDCG@k (exponential gain), Recall@k, Precision@k
//! and average precision, macro-averaged over queries that have at least one
//! relevant document.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Qrels, RunResult};

pub const DEFAULT_CUTOFFS: [usize; 6] = [10, 100, 250, 500, 750, 1000];
pub const MAP_CUTOFF: usize = 1000;

fn is_relevant(judged: &BTreeMap<String, u32>, doc: &str) -> bool {
    judged.get(doc).is_some_and(|&g| g > 0)
}

fn relevant_count(judged: &BTreeMap<String, u32>) -> usize {
    judged.values().filter(|&&g| g > 0).count()
}

/// Fraction of the first `k` slots holding a relevant document; missing slots
/// count as non-relevant.
pub fn precision_at_k(ranked: &[&str], judged: &BTreeMap<String, u32>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|d| is_relevant(judged, d)).count();
    hits as f64 / k as f64
}

/// Relevant documents in the top `k` over all relevant documents; 0 when the
/// query has none.
pub fn recall_at_k(ranked: &[&str], judged: &BTreeMap<String, u32>, k: usize) -> f64 {
    let total = relevant_count(judged);
    if total == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|d| is_relevant(judged, d)).count();
    hits as f64 / total as f64
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// DCG@k / IDCG@k with gain `2^grade - 1` and discount `1 / log2(rank + 1)`.
pub fn ndcg_at_k(ranked: &[&str], judged: &BTreeMap<String, u32>, k: usize) -> f64 {
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| gain(judged.get(*d).copied().unwrap_or(0)) * discount(i + 1))
        .sum();
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) * discount(i + 1))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Sum of Precision@r over relevant documents retrieved at rank `r <= cutoff`,
/// divided by the total number of relevant documents.
pub fn average_precision(ranked: &[&str], judged: &BTreeMap<String, u32>, cutoff: usize) -> f64 {
    let total = relevant_count(judged);
    if total == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().take(cutoff).enumerate() {
        if is_relevant(judged, d) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    /// Indexed like [`MetricReport::cutoffs`].
    pub ndcg: Vec<f64>,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub cutoffs: Vec<usize>,
    pub ndcg: Vec<f64>,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub map: f64,
    pub per_query: BTreeMap<String, QueryMetrics>,
    /// Run queries whose judgments contain no relevant document.
    pub skipped_no_relevant: Vec<String>,
    /// Judged queries the run did not answer.
    pub missing_from_run: Vec<String>,
}

impl MetricReport {
    pub fn num_queries(&self) -> usize {
        self.per_query.len()
    }

    fn position(&self, k: usize) -> Option<usize> {
        self.cutoffs.iter().position(|&c| c == k)
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.position(k).map(|i| self.ndcg[i])
    }

    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.position(k).map(|i| self.recall[i])
    }

    pub fn precision_at(&self, k: usize) -> Option<f64> {
        self.position(k).map(|i| self.precision[i])
    }

    /// `metric@cutoff<TAB>value` lines with six decimals, then `map` and the
    /// query counts.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (name, values) in [("ndcg", &self.ndcg), ("recall", &self.recall), ("precision", &self.precision)] {
            for (k, v) in self.cutoffs.iter().zip(values.iter()) {
                writeln!(out, "{name}@{k}\t{v:.6}").unwrap();
            }
        }
        writeln!(out, "map\t{:.6}", self.map).unwrap();
        writeln!(out, "queries\t{}", self.num_queries()).unwrap();
        writeln!(out, "skipped_no_relevant\t{}", self.skipped_no_relevant.len()).unwrap();
        writeln!(out, "missing_from_run\t{}", self.missing_from_run.len()).unwrap();
        out
    }

    pub fn write_key_values(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_key_values()).map_err(|e| Error::io(path, e))
    }

    /// Fixed-width table: one row per metric family, one column per cutoff.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        write!(out, "{:<10}", "metric").unwrap();
        for k in &self.cutoffs {
            write!(out, " {:>10}", format!("@{k}")).unwrap();
        }
        out.push('\n');
        for (name, values) in [("nDCG", &self.ndcg), ("Recall", &self.recall), ("Precision", &self.precision)] {
            write!(out, "{name:<10}").unwrap();
            for v in values {
                write!(out, " {v:>10.6}").unwrap();
            }
            out.push('\n');
        }
        writeln!(out, "{:<10} {:>10.6}", "mAP", self.map).unwrap();
        write!(
            out,
            "queries evaluated: {} (skipped, no relevant: {}; judged but missing from run: {})",
            self.num_queries(),
            self.skipped_no_relevant.len(),
            self.missing_from_run.len()
        )
        .unwrap();
        out
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Evaluates a run in its stored order (no re-sorting by score).
pub fn evaluate_run(run: &RunResult, qrels: &Qrels, cutoffs: &[usize]) -> Result<MetricReport> {
    if run.is_empty() {
        return Err(Error::EmptyRun);
    }
    let mut cutoffs = cutoffs.to_vec();
    cutoffs.sort_unstable();
    cutoffs.dedup();
    if cutoffs.is_empty() || cutoffs[0] == 0 {
        return Err(Error::InvalidConfig("cutoffs must be non-empty and positive".into()));
    }
    let unknown: Vec<String> = run
        .query_ids()
        .filter(|q| qrels.query(q).is_none())
        .map(str::to_string)
        .collect();
    if !unknown.is_empty() {
        return Err(Error::QueriesMissingFromQrels(unknown));
    }
    let answered: HashSet<&str> = run.query_ids().collect();
    let missing_from_run = qrels
        .query_ids()
        .filter(|q| !answered.contains(q))
        .map(str::to_string)
        .collect();

    let mut per_query = BTreeMap::new();
    let mut skipped_no_relevant = Vec::new();
    for (qid, hits) in run.iter() {
        let judged = qrels.query(qid).expect("checked above");
        if relevant_count(judged) == 0 {
            skipped_no_relevant.push(qid.to_string());
            continue;
        }
        let ranked: Vec<&str> = hits.iter().map(|h| h.doc_id.as_str()).collect();
        per_query.insert(
            qid.to_string(),
            QueryMetrics {
                ndcg: cutoffs.iter().map(|&k| ndcg_at_k(&ranked, judged, k)).collect(),
                recall: cutoffs.iter().map(|&k| recall_at_k(&ranked, judged, k)).collect(),
                precision: cutoffs.iter().map(|&k| precision_at_k(&ranked, judged, k)).collect(),
                average_precision: average_precision(&ranked, judged, MAP_CUTOFF),
            },
        );
    }

    let column = |f: fn(&QueryMetrics) -> &Vec<f64>, i: usize| mean(per_query.values().map(|m| f(m)[i]));
    let ndcg = (0..cutoffs.len()).map(|i| column(|m| &m.ndcg, i)).collect();
    let recall = (0..cutoffs.len()).map(|i| column(|m| &m.recall, i)).collect();
    let precision = (0..cutoffs.len()).map(|i| column(|m| &m.precision, i)).collect();
    let map = mean(per_query.values().map(|m| m.average_precision));
    Ok(MetricReport {
        cutoffs,
        ndcg,
        recall,
        precision,
        map,
        per_query,
        skipped_no_relevant,
        missing_from_run,
    })
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson over tie-averaged ranks). Returns 0 when
/// either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman needs equal-length inputs");
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}
