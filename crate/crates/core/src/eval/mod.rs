//! Retrieval metrics, fitness, latency, and significance testing.

pub mod latency;
pub mod metrics;
pub mod report;
pub mod ttest;

pub use latency::{measure_latency, measure_repeated, ms_per_unit, LatencyStats, Phase};
pub use metrics::{evaluate_run, ndcg_at_k, recall_at_k, Gain, QueryMetrics, RunMetrics};
pub use report::{evaluate_dataset, fitness, DatasetReport, EvalOptions, EvalReport, PreparedDataset};
pub use ttest::{paired_ttest, TTest};
