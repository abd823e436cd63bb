//! Seed and baseline rankers: BM25, BM25+, and query likelihood with
//! Dirichlet or Jelinek-Mercer smoothing.
//!
//! Every scorer walks unique query terms and multiplies the per-term
//! contribution by the query term frequency, so a repeated query term
//! counts once per occurrence. Logs are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{match_table, ChannelIndex, QueryTerm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    /// Lower-bound shift added to the saturated tf component (BM25+ only).
    pub delta: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 0.9,
            b: 0.4,
            delta: 1.0,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::InvalidParam(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParam(format!("b must be in [0, 1], got {}", self.b)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParam(format!("delta must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QlParams {
    /// Dirichlet prior.
    pub mu: f64,
    /// Jelinek-Mercer weight on the collection model.
    pub alpha: f64,
}

impl Default for QlParams {
    fn default() -> Self {
        QlParams {
            mu: 2000.0,
            alpha: 0.1,
        }
    }
}

impl QlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParam(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParam(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Robertson-Sparck Jones IDF. Negative when a term occurs in more than
/// half the collection.
pub fn bm25_idf(df: u32, n_docs: usize) -> f64 {
    let (df, n) = (f64::from(df), n_docs as f64);
    ((n - df + 0.5) / (df + 0.5)).ln()
}

fn ensure_nonempty(index: &ChannelIndex) -> Result<()> {
    if index.n_docs() == 0 {
        Err(Error::EmptyCorpus)
    } else {
        Ok(())
    }
}

fn bm25_impl(index: &ChannelIndex, terms: &[QueryTerm], params: &Bm25Params, delta: f64) -> Result<Vec<(u32, f64)>> {
    ensure_nonempty(index)?;
    params.validate()?;
    let stats = index.stats();
    let idfs: Vec<f64> = terms
        .iter()
        .map(|t| bm25_idf(index.df(&t.term), stats.n_docs))
        .collect();
    let k1 = params.k1;
    Ok(match_table(index, terms)
        .into_iter()
        .map(|(doc, tfs)| {
            let norm = k1 * (1.0 - params.b + params.b * f64::from(index.doc_len(doc)) / stats.avgdl);
            let score = tfs
                .iter()
                .zip(terms)
                .zip(&idfs)
                .filter(|((&tf, _), _)| tf > 0)
                .map(|((&tf, qt), idf)| {
                    let tf = f64::from(tf);
                    let sat = tf * (k1 + 1.0) / (tf + norm);
                    f64::from(qt.qtf) * idf * (sat + delta)
                })
                .sum();
            (doc, score)
        })
        .collect())
}

pub fn score_bm25(index: &ChannelIndex, terms: &[QueryTerm], params: &Bm25Params) -> Result<Vec<(u32, f64)>> {
    bm25_impl(index, terms, params, 0.0)
}

pub fn score_bm25_plus(index: &ChannelIndex, terms: &[QueryTerm], params: &Bm25Params) -> Result<Vec<(u32, f64)>> {
    bm25_impl(index, terms, params, params.delta)
}

/// Collection language model `ctf / |C|`.
pub fn collection_prob(index: &ChannelIndex, term: &str) -> f64 {
    let total = index.stats().total_tokens;
    if total == 0 {
        0.0
    } else {
        index.ctf(term) as f64 / total as f64
    }
}

fn in_vocabulary(index: &ChannelIndex, terms: &[QueryTerm]) -> Vec<QueryTerm> {
    terms.iter().filter(|t| index.ctf(&t.term) > 0).cloned().collect()
}

pub fn score_ql_dirichlet(index: &ChannelIndex, terms: &[QueryTerm], params: &QlParams) -> Result<Vec<(u32, f64)>> {
    ensure_nonempty(index)?;
    params.validate()?;
    let terms = in_vocabulary(index, terms);
    let probs: Vec<f64> = terms.iter().map(|t| collection_prob(index, &t.term)).collect();
    let mu = params.mu;
    Ok(match_table(index, &terms)
        .into_iter()
        .map(|(doc, tfs)| {
            let dl = f64::from(index.doc_len(doc));
            let score = tfs
                .iter()
                .zip(&terms)
                .zip(&probs)
                .map(|((&tf, qt), p)| f64::from(qt.qtf) * ((f64::from(tf) + mu * p) / (dl + mu)).ln())
                .sum();
            (doc, score)
        })
        .collect())
}

pub fn score_ql_jm(index: &ChannelIndex, terms: &[QueryTerm], params: &QlParams) -> Result<Vec<(u32, f64)>> {
    ensure_nonempty(index)?;
    params.validate()?;
    let terms = in_vocabulary(index, terms);
    let probs: Vec<f64> = terms.iter().map(|t| collection_prob(index, &t.term)).collect();
    let alpha = params.alpha;
    Ok(match_table(index, &terms)
        .into_iter()
        .filter(|(doc, _)| index.doc_len(*doc) > 0)
        .map(|(doc, tfs)| {
            let dl = f64::from(index.doc_len(doc));
            let score = tfs
                .iter()
                .zip(&terms)
                .zip(&probs)
                .map(|((&tf, qt), p)| {
                    f64::from(qt.qtf) * ((1.0 - alpha) * f64::from(tf) / dl + alpha * p).ln()
                })
                .sum();
            (doc, score)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::index::represent_query;
    use crate::tokenize::TokenChannel;
    use approx::assert_abs_diff_eq;

    fn index(texts: &[&str]) -> ChannelIndex {
        let docs: Vec<Document> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{}", i + 1), *t))
            .collect();
        ChannelIndex::build(&docs, TokenChannel::Base)
    }

    fn q(text: &str) -> Vec<QueryTerm> {
        represent_query(text, &[TokenChannel::Base])
            .terms(TokenChannel::Base)
            .to_vec()
    }

    fn score_of(scores: &[(u32, f64)], doc: u32) -> f64 {
        scores.iter().find(|s| s.0 == doc).unwrap().1
    }

    const TOY: [&str; 3] = ["x x y", "y z", "z z"];

    #[test]
    fn bm25_toy_value() {
        // N=3, df(x)=1, avgdl=7/3, |d1|=3, tf=2; evaluated by hand.
        let s = score_bm25(&index(&TOY), &q("x"), &Bm25Params::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_abs_diff_eq!(score_of(&s, 0), 0.646_430_142_3, epsilon = 1e-9);
    }

    #[test]
    fn bm25_negative_idf_allowed() {
        let s = score_bm25(&index(&["a b", "a c", "a"]), &q("a"), &Bm25Params::default()).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|(_, v)| *v < 0.0));
    }

    #[test]
    fn bm25_unknown_terms_give_empty_ranking() {
        assert!(score_bm25(&index(&TOY), &q("nothing"), &Bm25Params::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn bm25_plus_shift() {
        let idx = index(&TOY);
        let zero = Bm25Params { delta: 0.0, ..Default::default() };
        assert_eq!(
            score_bm25_plus(&idx, &q("x y z"), &zero).unwrap(),
            score_bm25(&idx, &q("x y z"), &zero).unwrap()
        );
        let s = score_bm25_plus(&idx, &q("x"), &Bm25Params::default()).unwrap();
        let idf = (2.5f64 / 1.5).ln();
        assert_abs_diff_eq!(score_of(&s, 0), 0.646_430_142_3 + idf, epsilon = 1e-9);
        assert_abs_diff_eq!(idf, 0.510_825_623_8, epsilon = 1e-9);
    }

    #[test]
    fn ql_dirichlet_per_term_value() {
        // tf=1, |d|=100, mu=2000, P(t|C)=0.001
        let v: f64 = ((1.0 + 2000.0 * 0.001) / (100.0 + 2000.0) as f64).ln();
        assert_abs_diff_eq!(v, -6.551_080_335, epsilon = 1e-8);
    }

    #[test]
    fn ql_dirichlet_tf_zero_term_is_negative() {
        let idx = index(&TOY);
        let s = score_ql_dirichlet(&idx, &q("x z"), &QlParams::default()).unwrap();
        // d1 matches only x; z contributes ln(mu*P/(|d|+mu)) < 0.
        let p_z = 3.0 / 7.0;
        let p_x = 2.0 / 7.0;
        let expected = ((2.0 + 2000.0 * p_x) / 2003.0f64).ln() + ((2000.0 * p_z) / 2003.0f64).ln();
        assert_abs_diff_eq!(score_of(&s, 0), expected, epsilon = 1e-12);
        assert!(score_ql_dirichlet(&idx, &q("oov"), &QlParams::default()).unwrap().is_empty());
    }

    #[test]
    fn ql_jm_examples() {
        let idx = index(&TOY);
        let full = QlParams { alpha: 1.0, ..Default::default() };
        let s = score_ql_jm(&idx, &q("z y"), &full).unwrap();
        assert!(s.windows(2).all(|w| w[0].1 == w[1].1));

        // alpha=0.5, tf=1, |d|=2, P=0.1 -> ln(0.3)
        let v = (0.5 * 1.0 / 2.0 + 0.5 * 0.1f64).ln();
        assert_abs_diff_eq!(v, 0.3f64.ln(), epsilon = 1e-15);

        let half = QlParams { alpha: 0.5, ..Default::default() };
        let s = score_ql_jm(&idx, &q("x z"), &half).unwrap();
        let expected = (0.5 * 2.0 / 3.0 + 0.5 * 2.0 / 7.0f64).ln() + (0.5 * 3.0 / 7.0f64).ln();
        assert_abs_diff_eq!(score_of(&s, 0), expected, epsilon = 1e-12);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let idx = index(&[]);
        assert!(matches!(score_bm25(&idx, &q("a"), &Bm25Params::default()), Err(Error::EmptyCorpus)));
        assert!(matches!(score_ql_dirichlet(&idx, &q("a"), &QlParams::default()), Err(Error::EmptyCorpus)));
        assert!(matches!(score_ql_jm(&idx, &q("a"), &QlParams::default()), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn parameter_validation() {
        let idx = index(&TOY);
        let bad_b = Bm25Params { b: 1.5, ..Default::default() };
        assert!(matches!(score_bm25(&idx, &q("x"), &bad_b), Err(Error::InvalidParam(_))));
        let bad_alpha = QlParams { alpha: 0.0, ..Default::default() };
        assert!(matches!(score_ql_jm(&idx, &q("x"), &bad_alpha), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn bm25_b_zero_ignores_length() {
        let idx = index(&["a b", "a c c c c c c c"]);
        let p = Bm25Params { b: 0.0, ..Default::default() };
        let s = score_bm25(&idx, &q("a"), &p).unwrap();
        assert_eq!(s[0].1, s[1].1);
    }

    #[test]
    fn more_tf_scores_higher() {
        // df(a) = 2 of 6, so the Robertson IDF is positive.
        let idx = index(&["a b b b", "a a b b", "c d e f", "c d e g", "c c d d", "e e f f"]);
        let s = score_bm25(&idx, &q("a"), &Bm25Params::default()).unwrap();
        assert!(score_of(&s, 1) > score_of(&s, 0));
        let s = score_ql_dirichlet(&idx, &q("a"), &QlParams::default()).unwrap();
        assert!(score_of(&s, 1) > score_of(&s, 0));
    }
}
