use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::latency::ms_per_unit;
use super::metrics::{evaluate_run, Gain, QueryMetrics};
use crate::corpus::{Dataset, Qrels};
use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::run::ScoredRun;
use crate::scoring::{Retriever, ScorerConfig};

pub const RECALL_WEIGHT: f64 = 0.8;
pub const NDCG_WEIGHT: f64 = 0.2;

/// `0.8 * recall + 0.2 * ndcg`. Units are whatever the inputs use.
pub fn fitness(mean_recall100: f64, mean_ndcg10: f64) -> f64 {
    RECALL_WEIGHT * mean_recall100 + NDCG_WEIGHT * mean_ndcg10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Ranking depth kept per query.
    pub depth: usize,
    pub gain: Gain,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            depth: 1000,
            gain: Gain::Exponential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub name: String,
    pub ndcg10: f64,
    pub recall100: f64,
    pub n_queries: usize,
    pub indexing_ms_per_doc: f64,
    pub query_ms_per_query: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_query: BTreeMap<String, QueryMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scorer: String,
    pub datasets: Vec<DatasetReport>,
    pub mean_ndcg10: f64,
    pub mean_recall100: f64,
    pub fitness: f64,
    pub indexing_ms_per_doc: f64,
    pub query_ms_per_query: f64,
}

impl EvalReport {
    /// Macro-averages over datasets. Errors on an empty list.
    pub fn from_datasets(scorer: impl Into<String>, datasets: Vec<DatasetReport>) -> Result<Self> {
        if datasets.is_empty() {
            return Err(Error::Precondition("report needs at least one dataset".into()));
        }
        let n = datasets.len() as f64;
        let mean = |f: fn(&DatasetReport) -> f64| datasets.iter().map(f).sum::<f64>() / n;
        let mean_ndcg10 = mean(|d| d.ndcg10);
        let mean_recall100 = mean(|d| d.recall100);
        Ok(EvalReport {
            scorer: scorer.into(),
            mean_ndcg10,
            mean_recall100,
            fitness: fitness(mean_recall100, mean_ndcg10),
            indexing_ms_per_doc: mean(|d| d.indexing_ms_per_doc),
            query_ms_per_query: mean(|d| d.query_ms_per_query),
            datasets,
        })
    }

    /// A report carrying only a fitness value, for evaluators that have
    /// no retrieval metrics (toy problems).
    pub fn synthetic(scorer: impl Into<String>, value: f64) -> Self {
        EvalReport {
            scorer: scorer.into(),
            datasets: Vec::new(),
            mean_ndcg10: value,
            mean_recall100: value,
            fitness: value,
            indexing_ms_per_doc: 0.0,
            query_ms_per_query: 0.0,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// Percentages, as in published result tables.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:>8} {:>9} {:>10} {:>10} {:>11}",
            "dataset", "queries", "nDCG@10", "R@100", "ms/doc", "ms/query"
        );
        for d in &self.datasets {
            let _ = writeln!(
                out,
                "{:<20} {:>8} {:>9.2} {:>10.2} {:>10.4} {:>11.4}",
                d.name,
                d.n_queries,
                100.0 * d.ndcg10,
                100.0 * d.recall100,
                d.indexing_ms_per_doc,
                d.query_ms_per_query
            );
        }
        let _ = writeln!(
            out,
            "{:<20} {:>8} {:>9.2} {:>10.2} {:>10.4} {:>11.4}",
            "mean",
            "",
            100.0 * self.mean_ndcg10,
            100.0 * self.mean_recall100,
            self.indexing_ms_per_doc,
            self.query_ms_per_query
        );
        let _ = writeln!(out, "scorer: {}  fitness: {:.4}", self.scorer, 100.0 * self.fitness);
        out
    }
}

/// A dataset with its indexes built once, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub name: String,
    pub dataset: Dataset,
    pub indexes: IndexSet,
    pub qrels: Qrels,
}

impl PreparedDataset {
    pub fn new(dataset: Dataset, indexes: IndexSet) -> Self {
        PreparedDataset {
            name: dataset.name.clone(),
            qrels: dataset.qrels(),
            dataset,
            indexes,
        }
    }

    /// Builds every channel any scorer might need.
    pub fn build(dataset: Dataset) -> Self {
        let indexes = IndexSet::build(&dataset.documents, &crate::tokenize::TokenChannel::ALL);
        PreparedDataset::new(dataset, indexes)
    }

    /// Scores every query. The indexing latency is that of `self.indexes`.
    pub fn evaluate(&self, scorer: &ScorerConfig, opts: &EvalOptions) -> Result<(DatasetReport, ScoredRun)> {
        if self.dataset.queries.is_empty() {
            return Err(Error::Precondition(format!("dataset `{}` has no queries", self.name)));
        }
        let indexing_ms_per_doc = self.indexes.indexing_ms_per_doc().ok_or(Error::EmptyCorpus)?;
        let retriever = Retriever::new(&self.indexes, scorer.clone())?;
        let (run, elapsed) = retriever.run(&self.dataset.queries, Some(opts.depth))?;
        let metrics = evaluate_run(&run, &self.qrels, opts.gain);
        let report = DatasetReport {
            name: self.name.clone(),
            ndcg10: metrics.ndcg10,
            recall100: metrics.recall100,
            n_queries: metrics.n_queries(),
            indexing_ms_per_doc,
            query_ms_per_query: ms_per_unit(elapsed, self.dataset.queries.len())?,
            per_query: metrics.per_query,
        };
        Ok((report, run))
    }
}

/// Indexes only the channels `scorer` needs, then evaluates it.
pub fn evaluate_dataset(dataset: &Dataset, scorer: &ScorerConfig, opts: &EvalOptions) -> Result<(DatasetReport, ScoredRun)> {
    scorer.validate()?;
    let indexes = IndexSet::build(&dataset.documents, &scorer.channels());
    PreparedDataset::new(dataset.clone(), indexes).evaluate(scorer, opts)
}
