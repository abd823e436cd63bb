//! Ranked result lists and TREC run files.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::read_utf8;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Descending score, ties broken by ascending doc id.
pub fn ranking_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

pub fn sort_ranking(docs: &mut [ScoredDoc]) {
    docs.sort_by(ranking_order);
}

/// Per-query rankings, keyed by query id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredRun {
    rankings: BTreeMap<String, Vec<ScoredDoc>>,
}

impl ScoredRun {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a ranking, sorting it into canonical order.
    pub fn insert(&mut self, query_id: impl Into<String>, mut ranking: Vec<ScoredDoc>) {
        sort_ranking(&mut ranking);
        self.rankings.insert(query_id.into(), ranking);
    }

    pub fn get(&self, query_id: &str) -> Option<&[ScoredDoc]> {
        self.rankings.get(query_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[ScoredDoc])> {
        self.rankings.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    /// Renders the six-column TREC format `qid Q0 docid rank score tag`.
    pub fn to_trec(&self, tag: &str, cutoff: Option<usize>) -> String {
        let mut out = String::new();
        for (qid, ranking) in &self.rankings {
            let n = cutoff.map_or(ranking.len(), |c| c.min(ranking.len()));
            for (i, d) in ranking[..n].iter().enumerate() {
                out.push_str(&format!("{qid} Q0 {} {} {} {tag}\n", d.doc_id, i + 1, d.score));
            }
        }
        out
    }

    pub fn parse_trec(content: &str) -> std::result::Result<Self, (usize, String)> {
        let mut rankings: BTreeMap<String, Vec<ScoredDoc>> = BTreeMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 6 {
                return Err((i + 1, format!("expected 6 columns, found {}", cols.len())));
            }
            let score: f64 = cols[4]
                .parse()
                .map_err(|_| (i + 1, format!("bad score `{}`", cols[4])))?;
            rankings.entry(cols[0].to_owned()).or_default().push(ScoredDoc {
                doc_id: cols[2].to_owned(),
                score,
            });
        }
        let mut run = ScoredRun::new();
        for (q, r) in rankings {
            run.insert(q, r);
        }
        Ok(run)
    }
}

pub fn write_run(run: &ScoredRun, tag: &str, path: impl AsRef<Path>, cutoff: Option<usize>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, run.to_trec(tag, cutoff)).map_err(|e| Error::io(path, e))
}

pub fn read_run(path: impl AsRef<Path>) -> Result<ScoredRun> {
    let path = path.as_ref();
    let content = read_utf8(path)?;
    ScoredRun::parse_trec(&content).map_err(|(line, message)| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    })
}
