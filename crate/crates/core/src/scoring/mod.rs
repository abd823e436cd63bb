//! Ranking functions and the retriever that runs them over an index set.

pub mod baseline;
pub mod evolved_bm25;
pub mod evolved_ql;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::Query;
use crate::error::{Error, Result};
use crate::index::{represent_query, IndexSet};
use crate::run::{sort_ranking, ScoredDoc, ScoredRun};
use crate::tokenize::TokenChannel;

pub use baseline::{Bm25Params, QlParams};
pub use evolved_bm25::EvolvedBm25Config;
pub use evolved_ql::{EnrichedLm, EvolvedQlConfig};

/// A scorer and its parameters. Serialized as a flat JSON object tagged by
/// `name`, e.g. `{"name": "bm25", "k1": 1.2}`; omitted fields take their
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum ScorerConfig {
    #[serde(rename = "bm25")]
    Bm25(Bm25Params),
    #[serde(rename = "bm25plus")]
    Bm25Plus(Bm25Params),
    #[serde(rename = "ql-dir")]
    QlDir(QlParams),
    #[serde(rename = "ql-jm")]
    QlJm(QlParams),
    #[serde(rename = "evolved-bm25")]
    EvolvedBm25(EvolvedBm25Config),
    #[serde(rename = "evolved-ql")]
    EvolvedQl(EvolvedQlConfig),
}

impl ScorerConfig {
    pub const NAMES: [&'static str; 6] = ["bm25", "bm25plus", "ql-dir", "ql-jm", "evolved-bm25", "evolved-ql"];

    pub fn name(&self) -> &'static str {
        match self {
            ScorerConfig::Bm25(_) => "bm25",
            ScorerConfig::Bm25Plus(_) => "bm25plus",
            ScorerConfig::QlDir(_) => "ql-dir",
            ScorerConfig::QlJm(_) => "ql-jm",
            ScorerConfig::EvolvedBm25(_) => "evolved-bm25",
            ScorerConfig::EvolvedQl(_) => "evolved-ql",
        }
    }

    /// Token channels this scorer needs indexed.
    pub fn channels(&self) -> Vec<TokenChannel> {
        match self {
            ScorerConfig::EvolvedBm25(cfg) => evolved_bm25::required_channels(cfg),
            _ => vec![TokenChannel::Base],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScorerConfig::Bm25(p) | ScorerConfig::Bm25Plus(p) => p.validate(),
            ScorerConfig::QlDir(p) | ScorerConfig::QlJm(p) => p.validate(),
            ScorerConfig::EvolvedBm25(c) => c.validate(),
            ScorerConfig::EvolvedQl(c) => c.validate(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScorerConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pretty JSON with one parameter per line.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scorer config is always serializable")
    }
}

impl FromStr for ScorerConfig {
    type Err = Error;

    /// Parses a bare scorer name into its default configuration.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bm25" => ScorerConfig::Bm25(Bm25Params::default()),
            "bm25plus" | "bm25+" => ScorerConfig::Bm25Plus(Bm25Params::default()),
            "ql-dir" => ScorerConfig::QlDir(QlParams::default()),
            "ql-jm" => ScorerConfig::QlJm(QlParams::default()),
            "evolved-bm25" => ScorerConfig::EvolvedBm25(EvolvedBm25Config::default()),
            "evolved-ql" => ScorerConfig::EvolvedQl(EvolvedQlConfig::default()),
            other => {
                return Err(Error::InvalidParam(format!(
                    "unknown scorer `{other}` (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for ScorerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A scorer bound to an index set, with any per-corpus precomputation done.
pub struct Retriever<'a> {
    indexes: &'a IndexSet,
    scorer: ScorerConfig,
    lm: Option<EnrichedLm>,
}

impl<'a> Retriever<'a> {
    pub fn new(indexes: &'a IndexSet, scorer: ScorerConfig) -> Result<Self> {
        scorer.validate()?;
        for c in scorer.channels() {
            indexes.get(c)?;
        }
        let lm = match &scorer {
            ScorerConfig::EvolvedQl(cfg) => Some(EnrichedLm::build(indexes.get(evolved_ql::CHANNEL)?, cfg)?),
            _ => None,
        };
        Ok(Retriever { indexes, scorer, lm })
    }

    pub fn scorer(&self) -> &ScorerConfig {
        &self.scorer
    }

    /// Raw `(doc ordinal, score)` for every candidate, in ordinal order.
    pub fn score_ordinals(&self, query: &str) -> Result<Vec<(u32, f64)>> {
        let base = TokenChannel::Base;
        let base_terms = || represent_query(query, &[base]);
        match &self.scorer {
            ScorerConfig::Bm25(p) => {
                baseline::score_bm25(self.indexes.get(base)?, base_terms().terms(base), p)
            }
            ScorerConfig::Bm25Plus(p) => {
                baseline::score_bm25_plus(self.indexes.get(base)?, base_terms().terms(base), p)
            }
            ScorerConfig::QlDir(p) => {
                baseline::score_ql_dirichlet(self.indexes.get(base)?, base_terms().terms(base), p)
            }
            ScorerConfig::QlJm(p) => {
                baseline::score_ql_jm(self.indexes.get(base)?, base_terms().terms(base), p)
            }
            ScorerConfig::EvolvedBm25(cfg) => {
                let rep = represent_query(query, &TokenChannel::ALL);
                evolved_bm25::score_evolved_bm25(self.indexes, &rep, cfg)
            }
            ScorerConfig::EvolvedQl(cfg) => {
                let lm = self.lm.as_ref().expect("language model built in Retriever::new");
                evolved_ql::score_evolved_ql(self.indexes.get(base)?, lm, &base_terms(), cfg)
            }
        }
    }

    /// Ranked results, truncated to `depth` when given.
    pub fn retrieve(&self, query: &str, depth: Option<usize>) -> Result<Vec<ScoredDoc>> {
        let base = self.indexes.get(self.scorer.channels()[0])?;
        let mut ranking: Vec<ScoredDoc> = self
            .score_ordinals(query)?
            .into_iter()
            .map(|(doc, score)| ScoredDoc {
                doc_id: base.doc_id(doc).to_owned(),
                score,
            })
            .collect();
        sort_ranking(&mut ranking);
        if let Some(d) = depth {
            ranking.truncate(d);
        }
        Ok(ranking)
    }

    /// Runs every query and returns the run plus total wall-clock time.
    pub fn run(&self, queries: &[Query], depth: Option<usize>) -> Result<(ScoredRun, Duration)> {
        let mut run = ScoredRun::new();
        let start = Instant::now();
        for q in queries {
            run.insert(q.id.clone(), self.retrieve(&q.text, depth)?);
        }
        Ok((run, start.elapsed()))
    }
}
