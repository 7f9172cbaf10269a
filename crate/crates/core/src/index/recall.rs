use std::collections::HashSet;
use std::time::Instant;

use serde::Serialize;

use super::{IndexMode, RetrievalHit, SearchRequest, StyleIndex};
use crate::error::{Error, Result};

/// Fraction of the exact hits present in `approx`.
pub fn recall_at_k(approx: &[RetrievalHit], exact: &[RetrievalHit]) -> f64 {
    if exact.is_empty() {
        return 1.0;
    }
    let found: HashSet<&str> = approx.iter().map(|h| h.clip_id.as_str()).collect();
    let hit = exact.iter().filter(|h| found.contains(h.clip_id.as_str())).count();
    hit as f64 / exact.len() as f64
}

/// Ground truth: every cluster probed.
pub fn exact_top_k(index: &StyleIndex, query: &[f64], k: usize) -> Result<Vec<RetrievalHit>> {
    let probes = index.n_clusters().max(1);
    index.search(&SearchRequest::new(query.to_vec(), k).with_probes(probes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeStats {
    pub probes: usize,
    pub k: usize,
    pub recall: f64,
    pub mean_latency_us: f64,
}

/// Mean recall@k against the exhaustive result for each probe count.
pub fn probe_sweep(index: &StyleIndex, queries: &[Vec<f64>], k: usize, probes: &[usize]) -> Result<Vec<ProbeStats>> {
    if index.mode() != IndexMode::Clustered {
        return Err(Error::InvalidArgument(
            "recall evaluation needs a clustered index".into(),
        ));
    }
    if queries.is_empty() {
        return Err(Error::EmptyInput("queries"));
    }
    let truth: Vec<Vec<RetrievalHit>> = queries
        .iter()
        .map(|q| exact_top_k(index, q, k))
        .collect::<Result<_>>()?;
    probes
        .iter()
        .map(|&p| {
            let mut recall = 0.0;
            let start = Instant::now();
            for (q, t) in queries.iter().zip(&truth) {
                let hits = index.search(&SearchRequest::new(q.clone(), k).with_probes(p))?;
                recall += recall_at_k(&hits, t);
            }
            let elapsed = start.elapsed().as_secs_f64() * 1e6;
            Ok(ProbeStats {
                probes: p,
                k,
                recall: recall / queries.len() as f64,
                mean_latency_us: elapsed / queries.len() as f64,
            })
        })
        .collect()
}

/// `1, 2, 4, ...` up to and including `n_clusters`.
pub fn doubling_probes(n_clusters: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 1;
    while p < n_clusters {
        out.push(p);
        p *= 2;
    }
    out.push(n_clusters.max(1));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(id: &str) -> RetrievalHit {
        RetrievalHit {
            clip_id: id.into(),
            score: 0.0,
            rank: 1,
        }
    }

    #[test]
    fn recall_fraction() {
        let exact = [hit("a"), hit("b"), hit("c")];
        assert_eq!(recall_at_k(&[hit("a"), hit("x"), hit("c")], &exact), 2.0 / 3.0);
        assert_eq!(recall_at_k(&[], &[]), 1.0);
    }

    #[test]
    fn doubling() {
        assert_eq!(doubling_probes(1), vec![1]);
        assert_eq!(doubling_probes(8), vec![1, 2, 4, 8]);
        assert_eq!(doubling_probes(45), vec![1, 2, 4, 8, 16, 32, 45]);
    }
}
