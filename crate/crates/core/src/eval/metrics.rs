use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use super::run::{Qrels, RankedList};
use crate::{Error, Result};

/// Mean of precision@r over the ranks `r` holding relevant items, divided by
/// the total number of relevant items (relevant items missing from the list
/// count as zero).
pub fn average_precision(ranked: &[usize], relevant: &BTreeSet<usize>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::InvalidArgument("average precision needs a nonempty relevant set".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranked.iter().enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

pub fn reciprocal_rank(ranked: &[usize], relevant: &BTreeSet<usize>) -> f64 {
    ranked
        .iter()
        .position(|i| relevant.contains(i))
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

/// Binary-gain NDCG truncated at `k`.
pub fn ndcg_at_k(ranked: &[usize], relevant: &BTreeSet<usize>, k: usize) -> f64 {
    assert!(k >= 1, "ndcg cutoff must be at least 1");
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.contains(i))
        .map(|(r, _)| discount(r))
        .sum();
    let ideal: f64 = (0..k.min(relevant.len())).map(discount).sum();
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}

// 1 / log2(rank + 1) for a zero-based position.
fn discount(pos: usize) -> f64 {
    1.0 / ((pos + 2) as f64).log2()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub query_key: String,
    pub ap: f64,
    pub rr: f64,
    /// One value per report cutoff, same order.
    pub ndcg: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub cutoffs: Vec<usize>,
    pub per_query: Vec<QueryMetrics>,
    pub map: f64,
    pub mrr: f64,
    pub ndcg: Vec<f64>,
    pub queries: usize,
}

impl MetricReport {
    pub fn query(&self, key: &str) -> Option<&QueryMetrics> {
        self.per_query.iter().find(|q| q.query_key == key)
    }

    /// NDCG mean at one of the report cutoffs.
    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == k).map(|i| self.ndcg[i])
    }

    /// Per-query values of one metric (`map`, `mrr` or `ndcg@k`) in report order.
    pub fn metric_values(&self, name: &str) -> Result<Vec<f64>> {
        let pick: Box<dyn Fn(&QueryMetrics) -> f64> = match name {
            "map" | "ap" => Box::new(|q| q.ap),
            "mrr" | "rr" => Box::new(|q| q.rr),
            other => {
                let k: usize = other
                    .strip_prefix("ndcg@")
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {other:?}")))?;
                let i = self
                    .cutoffs
                    .iter()
                    .position(|&c| c == k)
                    .ok_or_else(|| Error::InvalidArgument(format!("cutoff {k} not in report")))?;
                Box::new(move |q| q.ndcg[i])
            }
        };
        Ok(self.per_query.iter().map(pick).collect())
    }

    pub fn summary_line(&self) -> String {
        let mut s = format!("queries={} map={:.6} mrr={:.6}", self.queries, self.map, self.mrr);
        for (k, v) in self.cutoffs.iter().zip(&self.ndcg) {
            s.push_str(&format!(" ndcg@{k}={v:.6}"));
        }
        s
    }
}

/// Scores a run against judgments. Every judged query is reported, in
/// ascending key order; queries absent from the run score zero.
pub fn evaluate_run(run: &[RankedList], qrels: &Qrels, cutoffs: &[usize]) -> Result<MetricReport> {
    if cutoffs.iter().any(|&k| k == 0) {
        return Err(Error::InvalidArgument("ndcg cutoffs must be at least 1".into()));
    }
    let mut seen = HashSet::new();
    for list in run {
        if !seen.insert(list.query_key.as_str()) {
            return Err(Error::DuplicateQueryKey(list.query_key.clone()));
        }
        if !qrels.contains_key(&list.query_key) {
            return Err(Error::UnknownQueryKey(list.query_key.clone()));
        }
    }
    let by_key: std::collections::HashMap<&str, &RankedList> =
        run.iter().map(|l| (l.query_key.as_str(), l)).collect();

    let mut per_query = Vec::with_capacity(qrels.len());
    for (key, relevant) in qrels {
        let ranked = by_key.get(key.as_str()).map(|l| l.item_ids()).unwrap_or_default();
        per_query.push(QueryMetrics {
            query_key: key.clone(),
            ap: average_precision(&ranked, relevant)?,
            rr: reciprocal_rank(&ranked, relevant),
            ndcg: cutoffs.iter().map(|&k| ndcg_at_k(&ranked, relevant, k)).collect(),
        });
    }
    let n = per_query.len();
    let mean = |f: &dyn Fn(&QueryMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_query.iter().map(f).sum::<f64>() / n as f64
        }
    };
    Ok(MetricReport {
        cutoffs: cutoffs.to_vec(),
        map: mean(&|q| q.ap),
        mrr: mean(&|q| q.rr),
        ndcg: (0..cutoffs.len()).map(|i| mean(&|q| q.ndcg[i])).collect(),
        queries: n,
        per_query,
    })
}
