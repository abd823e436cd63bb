//! nDCG@k and Recall@k with trec_eval conventions.
//!
//! Queries without any relevant judgment are excluded from averages.
//! Judged documents absent from the corpus still count towards the ideal
//! DCG and the recall denominator.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Qrels;
use crate::run::ScoredRun;

/// Gain applied to a relevance grade in DCG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// `2^grade - 1`.
    #[default]
    Exponential,
    /// `grade`, as computed by trec_eval's `ndcg_cut`.
    Linear,
}

impl Gain {
    pub fn apply(self, grade: u32) -> f64 {
        match self {
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
            Gain::Linear => f64::from(grade),
        }
    }
}

fn discount(rank_zero_based: usize) -> f64 {
    (rank_zero_based as f64 + 2.0).log2()
}

/// `None` when the query has no relevant (grade > 0) documents.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], judgments: &HashMap<String, u32>, k: usize, gain: Gain) -> Option<f64> {
    let mut ideal: Vec<u32> = judgments.values().copied().filter(|&g| g > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain.apply(g) / discount(i))
        .sum();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| {
            let g = judgments.get(d.as_ref()).copied().unwrap_or(0);
            gain.apply(g) / discount(i)
        })
        .sum();
    Some(dcg / idcg)
}

/// `None` when the query has no relevant (grade > 0) documents.
pub fn recall_at_k<S: AsRef<str>>(ranking: &[S], judgments: &HashMap<String, u32>, k: usize) -> Option<f64> {
    let relevant = judgments.values().filter(|&&g| g > 0).count();
    if relevant == 0 {
        return None;
    }
    let hits = ranking
        .iter()
        .take(k)
        .filter(|d| judgments.get(d.as_ref()).is_some_and(|&g| g > 0))
        .count();
    Some(hits as f64 / relevant as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub ndcg10: f64,
    pub recall100: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub ndcg10: f64,
    pub recall100: f64,
    pub per_query: BTreeMap<String, QueryMetrics>,
}

impl RunMetrics {
    pub fn n_queries(&self) -> usize {
        self.per_query.len()
    }
}

/// Per-query and mean metrics for every judged query with at least one
/// relevant document. A judged query missing from the run scores 0.
pub fn evaluate_run(run: &ScoredRun, qrels: &Qrels, gain: Gain) -> RunMetrics {
    let mut per_query = BTreeMap::new();
    for (qid, judgments) in qrels.iter() {
        let ranking: Vec<&str> = run
            .get(qid)
            .map(|r| r.iter().map(|d| d.doc_id.as_str()).collect())
            .unwrap_or_default();
        let (Some(ndcg10), Some(recall100)) = (
            ndcg_at_k(&ranking, judgments, 10, gain),
            recall_at_k(&ranking, judgments, 100),
        ) else {
            continue;
        };
        per_query.insert(qid.to_owned(), QueryMetrics { ndcg10, recall100 });
    }
    let n = per_query.len().max(1) as f64;
    RunMetrics {
        ndcg10: per_query.values().map(|m| m.ndcg10).sum::<f64>() / n,
        recall100: per_query.values().map(|m| m.recall100).sum::<f64>() / n,
        per_query,
    }
}
