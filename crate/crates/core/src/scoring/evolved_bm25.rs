//! Multi-channel modulated BM25 descendant.
//!
//! A shared core score `R` is evaluated independently in each token
//! channel using that channel's own statistics:
//!
//! ```text
//! R = ln(1 + E) * B_cov * B_spec * B_coord * B_anc / B_len
//! E = sum over matched terms of w(t) * ln(1 + tf)
//! ```
//!
//! and the channels are combined as
//! `S = R_base + w_pfx R_pfx + w_bi R_bi + w_mic G(q) R_mic`, where the
//! gate `G` is a logistic function of the query's mean IDF in the base
//! channel.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{match_table, ChannelIndex, IndexSet, QueryRep, QueryTerm};
use crate::tokenize::TokenChannel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolvedBm25Config {
    pub w_pfx: f64,
    pub w_bi: f64,
    pub w_mic: f64,
    pub gate_center: f64,
    pub gate_scale: f64,
    pub cov_coeff: f64,
    pub spec_coeff: f64,
    pub pmi_cap: f64,
    pub len_floor: f64,
    pub coord_coeff: f64,
    pub tau_coord: f64,
    pub anc_coeff: f64,
    pub anc_threshold: f64,
    pub len_coeff: f64,
    pub qtf_exp: f64,
    pub idf_sat_exp: f64,
    pub idf_shift: f64,
}

impl Default for EvolvedBm25Config {
    fn default() -> Self {
        EvolvedBm25Config {
            w_pfx: 0.1,
            w_bi: 0.08,
            w_mic: 0.12,
            gate_center: 2.2,
            gate_scale: 1.0,
            cov_coeff: 0.25,
            spec_coeff: 0.10,
            pmi_cap: 3.0,
            len_floor: 25.0,
            coord_coeff: 0.20,
            tau_coord: 2.5,
            anc_coeff: 0.14,
            anc_threshold: 4.2,
            len_coeff: 0.15,
            qtf_exp: 0.5,
            idf_sat_exp: 0.6,
            idf_shift: 1.25,
        }
    }
}

impl EvolvedBm25Config {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("w_pfx", self.w_pfx),
            ("w_bi", self.w_bi),
            ("w_mic", self.w_mic),
            ("gate_center", self.gate_center),
            ("cov_coeff", self.cov_coeff),
            ("spec_coeff", self.spec_coeff),
            ("pmi_cap", self.pmi_cap),
            ("len_floor", self.len_floor),
            ("coord_coeff", self.coord_coeff),
            ("tau_coord", self.tau_coord),
            ("anc_coeff", self.anc_coeff),
            ("anc_threshold", self.anc_threshold),
            ("len_coeff", self.len_coeff),
            ("qtf_exp", self.qtf_exp),
            ("idf_sat_exp", self.idf_sat_exp),
            ("idf_shift", self.idf_shift),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        if !(self.gate_scale > 0.0 && self.gate_scale.is_finite()) {
            return Err(Error::InvalidParam(format!("gate_scale must be > 0, got {}", self.gate_scale)));
        }
        Ok(())
    }

    fn channel_weight(&self, channel: TokenChannel) -> f64 {
        match channel {
            TokenChannel::Base => 1.0,
            TokenChannel::Prefix => self.w_pfx,
            TokenChannel::Bigram => self.w_bi,
            TokenChannel::Micro => self.w_mic,
        }
    }
}

/// `-ln((df + 1) / (N + 2))`; strictly positive whenever `df <= N`.
pub fn evolved_idf(df: u32, n_docs: usize) -> f64 {
    -((f64::from(df) + 1.0) / (n_docs as f64 + 2.0)).ln()
}

/// Composite weight: square-root query tf times three IDF factors that
/// together act as a soft stopword filter.
pub fn term_weight(qtf: u32, idf: f64, cfg: &EvolvedBm25Config) -> f64 {
    f64::from(qtf).powf(cfg.qtf_exp)
        * idf
        * (idf / (idf + 1.0)).powf(cfg.idf_sat_exp)
        * (idf / (idf + cfg.idf_shift))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Micro-channel gate from the mean evolved IDF of the unique base query
/// terms. Zero when no base term is in the vocabulary.
pub fn gate(base_terms: &[QueryTerm], base: &ChannelIndex, cfg: &EvolvedBm25Config) -> f64 {
    if base_terms.is_empty() || base_terms.iter().all(|t| !base.contains(&t.term)) {
        return 0.0;
    }
    let n = base.n_docs();
    let mean = base_terms
        .iter()
        .map(|t| evolved_idf(base.df(&t.term), n))
        .sum::<f64>()
        / base_terms.len() as f64;
    sigmoid((mean - cfg.gate_center) / cfg.gate_scale)
}

/// The intermediate quantities of one `R` evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelScoreParts {
    pub evidence: f64,
    pub total_weight: f64,
    pub matched_weight: f64,
    pub matched_terms: usize,
    pub query_terms: usize,
    pub cov: f64,
    pub spec: f64,
    pub coord: f64,
    pub anc: f64,
    pub len: f64,
    pub r: f64,
}

#[derive(Debug, Clone)]
struct WeightedTerm {
    df: u32,
    idf: f64,
    weight: f64,
}

/// A query prepared against one channel: per-term IDFs and weights.
#[derive(Debug, Clone)]
pub struct ChannelQuery<'a> {
    index: &'a ChannelIndex,
    terms: &'a [QueryTerm],
    weighted: Vec<WeightedTerm>,
    total_weight: f64,
    cfg: EvolvedBm25Config,
}

impl<'a> ChannelQuery<'a> {
    pub fn new(index: &'a ChannelIndex, terms: &'a [QueryTerm], cfg: &EvolvedBm25Config) -> Self {
        let n = index.n_docs();
        let weighted: Vec<WeightedTerm> = terms
            .iter()
            .map(|t| {
                let df = index.df(&t.term);
                let idf = evolved_idf(df, n);
                WeightedTerm {
                    df,
                    idf,
                    weight: term_weight(t.qtf, idf, cfg),
                }
            })
            .collect();
        let total_weight = weighted.iter().map(|w| w.weight).sum();
        ChannelQuery {
            index,
            terms,
            weighted,
            total_weight,
            cfg: *cfg,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Core score given the document's tf for each query term (aligned with
    /// the query terms) and its length in this channel.
    pub fn parts(&self, tfs: &[u32], doc_len: u32) -> ChannelScoreParts {
        debug_assert_eq!(tfs.len(), self.weighted.len());
        let cfg = &self.cfg;
        let stats = self.index.stats();
        let n = stats.n_docs as f64;
        let dl = f64::from(doc_len);
        let w_total = self.total_weight;

        let mut evidence = 0.0;
        let mut matched_weight = 0.0;
        let mut matched_terms = 0usize;
        let mut spec_mass = 0.0;
        let mut anchor: f64 = 0.0;
        for (&tf, wt) in tfs.iter().zip(&self.weighted) {
            if tf == 0 {
                continue;
            }
            matched_terms += 1;
            matched_weight += wt.weight;
            evidence += wt.weight * (1.0 + f64::from(tf)).ln();
            let pmi = (f64::from(tf) * n / (dl.max(cfg.len_floor) * f64::from(wt.df))).ln();
            if pmi > 0.0 {
                spec_mass += wt.weight * pmi.min(cfg.pmi_cap);
            }
            if wt.idf > cfg.anc_threshold {
                anchor = anchor.max((wt.idf - cfg.anc_threshold) / wt.idf);
            }
        }

        let (cov, spec) = if w_total > 0.0 {
            (
                1.0 + cfg.cov_coeff * matched_weight / w_total,
                1.0 + cfg.spec_coeff * spec_mass / w_total,
            )
        } else {
            (1.0, 1.0)
        };
        let query_terms = self.terms.len();
        let coverage = if query_terms == 0 {
            0.0
        } else {
            matched_terms as f64 / query_terms as f64
        };
        let calibration = cfg.tau_coord / (cfg.tau_coord + (1.0 + w_total).ln());
        let coord = 1.0 + cfg.coord_coeff * calibration * coverage;
        let anc = 1.0 + cfg.anc_coeff * (1.0 + anchor).ln();
        let len = 1.0 + cfg.len_coeff * (1.0 + (dl + 1.0) / (stats.avgdl + 1.0)).ln();
        let r = (1.0 + evidence).ln() * cov * spec * coord * anc / len;

        ChannelScoreParts {
            evidence,
            total_weight: w_total,
            matched_weight,
            matched_terms,
            query_terms,
            cov,
            spec,
            coord,
            anc,
            len,
            r,
        }
    }

    /// Scores every document that matches at least one query term.
    pub fn score_candidates(&self) -> Vec<(u32, ChannelScoreParts)> {
        match_table(self.index, self.terms)
            .into_iter()
            .map(|(doc, tfs)| (doc, self.parts(&tfs, self.index.doc_len(doc))))
            .collect()
    }
}

/// Core score of a single document in one channel.
pub fn core_score(
    index: &ChannelIndex,
    terms: &[QueryTerm],
    doc: u32,
    cfg: &EvolvedBm25Config,
) -> ChannelScoreParts {
    let tfs: Vec<u32> = terms.iter().map(|t| index.tf(&t.term, doc)).collect();
    ChannelQuery::new(index, terms, cfg).parts(&tfs, index.doc_len(doc))
}

/// Per-document breakdown of the combined score.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvolvedBm25Breakdown {
    pub gate: f64,
    /// `R` for each channel that contributed, before channel weighting.
    pub channel_r: Vec<(TokenChannel, f64)>,
    pub score: f64,
}

/// Scores the union of candidates across all channels with non-zero
/// effective weight.
pub fn score_evolved_bm25(
    indexes: &IndexSet,
    rep: &QueryRep,
    cfg: &EvolvedBm25Config,
) -> Result<Vec<(u32, f64)>> {
    Ok(score_evolved_bm25_detailed(indexes, rep, cfg)?
        .into_iter()
        .map(|(doc, b)| (doc, b.score))
        .collect())
}

pub fn score_evolved_bm25_detailed(
    indexes: &IndexSet,
    rep: &QueryRep,
    cfg: &EvolvedBm25Config,
) -> Result<Vec<(u32, EvolvedBm25Breakdown)>> {
    cfg.validate()?;
    let base = indexes.get(TokenChannel::Base)?;
    if base.n_docs() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let g = gate(rep.terms(TokenChannel::Base), base, cfg);

    let mut acc: HashMap<u32, EvolvedBm25Breakdown> = HashMap::new();
    for channel in TokenChannel::ALL {
        let weight = match channel {
            TokenChannel::Micro => cfg.channel_weight(channel) * g,
            _ => cfg.channel_weight(channel),
        };
        if weight == 0.0 {
            continue;
        }
        let index = indexes.get(channel)?;
        let query = ChannelQuery::new(index, rep.terms(channel), cfg);
        for (doc, parts) in query.score_candidates() {
            let entry = acc.entry(doc).or_insert_with(|| EvolvedBm25Breakdown {
                gate: g,
                ..Default::default()
            });
            entry.channel_r.push((channel, parts.r));
            entry.score += weight * parts.r;
        }
    }
    let mut out: Vec<_> = acc.into_iter().collect();
    out.sort_unstable_by_key(|e| e.0);
    Ok(out)
}

/// Channels the scorer reads for a given configuration.
pub fn required_channels(cfg: &EvolvedBm25Config) -> Vec<TokenChannel> {
    TokenChannel::ALL
        .into_iter()
        .filter(|&c| cfg.channel_weight(c) > 0.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::index::represent_query;
    use approx::assert_abs_diff_eq;

    fn corpus(texts: &[&str]) -> Vec<Document> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{}", i + 1), *t))
            .collect()
    }

    fn base_terms(q: &str) -> Vec<QueryTerm> {
        represent_query(q, &[TokenChannel::Base]).terms(TokenChannel::Base).to_vec()
    }

    #[test]
    fn idf_examples() {
        assert_abs_diff_eq!(evolved_idf(1, 3), 0.916_290_731_874_155, epsilon = 1e-12);
        assert_abs_diff_eq!(evolved_idf(1, 1), 0.405_465_108_108_164, epsilon = 1e-12);
        assert_abs_diff_eq!(evolved_idf(0, 0), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn weight_examples() {
        let cfg = EvolvedBm25Config::default();
        assert_eq!(term_weight(3, 0.0, &cfg), 0.0);
        assert_abs_diff_eq!(term_weight(1, 0.9163, &cfg), 0.248_943_783_4, epsilon = 1e-9);
        let idf = 2.7;
        assert_abs_diff_eq!(
            term_weight(4, idf, &cfg),
            2.0 * term_weight(1, idf, &cfg),
            epsilon = 1e-15
        );
    }

    #[test]
    fn gate_values() {
        let cfg = EvolvedBm25Config::default();
        let at = |m: f64| sigmoid((m - cfg.gate_center) / cfg.gate_scale);
        assert_eq!(at(2.2), 0.5);
        assert_abs_diff_eq!(at(3.2), 0.731_058_578_630_005, epsilon = 1e-12);
        assert!(at(1e6) > 1.0 - 1e-12);

        let idx = ChannelIndex::build(&corpus(&["a b", "c"]), TokenChannel::Base);
        assert_eq!(gate(&base_terms("zzz"), &idx, &cfg), 0.0);
        assert_eq!(gate(&[], &idx, &cfg), 0.0);
        let g = gate(&base_terms("a"), &idx, &cfg);
        assert_abs_diff_eq!(g, at(evolved_idf(1, 2)), epsilon = 1e-15);
    }

    #[test]
    fn unmatched_doc_scores_zero() {
        let cfg = EvolvedBm25Config::default();
        let idx = ChannelIndex::build(&corpus(&["a b", "c d"]), TokenChannel::Base);
        let p = core_score(&idx, &base_terms("a"), 1, &cfg);
        assert_eq!(p.evidence, 0.0);
        assert_eq!(p.r, 0.0);
    }

    #[test]
    fn full_match_coverage_and_average_length() {
        let cfg = EvolvedBm25Config::default();
        let idx = ChannelIndex::build(&corpus(&["a b", "c d"]), TokenChannel::Base);
        let p = core_score(&idx, &base_terms("a b"), 0, &cfg);
        assert_eq!(p.cov, 1.25);
        // |d| = avgdl = 2
        assert_abs_diff_eq!(p.len, 1.0 + 0.15 * std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(p.len, 1.103_972_077_083_992, epsilon = 1e-12);
    }

    #[test]
    fn pmi_is_capped() {
        let cfg = EvolvedBm25Config::default();
        // 1000 docs, term in one doc with tf=1 -> PMI = ln(1000 / 25) > 3.
        let mut texts = vec!["rare".to_owned()];
        texts.extend((0..999).map(|i| format!("filler{i}")));
        let docs: Vec<Document> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), t.clone()))
            .collect();
        let idx = ChannelIndex::build(&docs, TokenChannel::Base);
        let terms = base_terms("rare");
        let p = core_score(&idx, &terms, 0, &cfg);
        assert!((1000.0f64 / 25.0).ln() > 3.0);
        assert_abs_diff_eq!(p.spec, 1.0 + 0.10 * 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_channel_weights_reduce_to_base() {
        let docs = corpus(&["information retrieval systems", "retrieving informative text", "cats"]);
        let set = IndexSet::build(&docs, &TokenChannel::ALL);
        let rep = represent_query("information retrieval", &TokenChannel::ALL);
        let cfg = EvolvedBm25Config {
            w_pfx: 0.0,
            w_bi: 0.0,
            w_mic: 0.0,
            ..Default::default()
        };
        let base = set.get(TokenChannel::Base).unwrap();
        let scores = score_evolved_bm25(&set, &rep, &cfg).unwrap();
        for (doc, s) in scores {
            assert_eq!(s, core_score(base, rep.terms(TokenChannel::Base), doc, &cfg).r);
        }
    }

    #[test]
    fn base_only_match() {
        // Single-token query: no bigram terms, prefix and micro switched off.
        let docs = corpus(&["zz", "yy"]);
        let set = IndexSet::build(&docs, &TokenChannel::ALL);
        let cfg = EvolvedBm25Config {
            w_pfx: 0.0,
            w_mic: 0.0,
            ..Default::default()
        };
        let rep = represent_query("zz", &TokenChannel::ALL);
        let s = score_evolved_bm25(&set, &rep, &cfg).unwrap();
        let base = set.get(TokenChannel::Base).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].1, core_score(base, rep.terms(TokenChannel::Base), 0, &cfg).r);
    }

    #[test]
    fn closed_gate_silences_micro_channel() {
        // "cats" is not a base term, so the gate is 0, yet its 3-gram "cat"
        // occurs in the micro channel of d1.
        let docs = corpus(&["catalog entries", "dog"]);
        let set = IndexSet::build(&docs, &TokenChannel::ALL);
        let cfg = EvolvedBm25Config {
            w_pfx: 0.0,
            ..Default::default()
        };
        let rep = represent_query("cats", &TokenChannel::ALL);
        assert!(set.get(TokenChannel::Micro).unwrap().contains("cat"));
        assert!(score_evolved_bm25(&set, &rep, &cfg).unwrap().is_empty());
    }

    #[test]
    fn missing_channel_is_an_error() {
        let docs = corpus(&["a"]);
        let set = IndexSet::build(&docs, &[TokenChannel::Base]);
        let rep = represent_query("a", &TokenChannel::ALL);
        assert!(matches!(
            score_evolved_bm25(&set, &rep, &EvolvedBm25Config::default()),
            Err(Error::MissingChannel(TokenChannel::Prefix))
        ));
    }

    #[test]
    fn double_saturation() {
        let cfg = EvolvedBm25Config::default();
        let idx = ChannelIndex::build(&corpus(&["a", "b", "c", "d"]), TokenChannel::Base);
        let terms = base_terms("a");
        let q = ChannelQuery::new(&idx, &terms, &cfg);
        let r10 = q.parts(&[10], 10).r;
        let r_big = q.parts(&[1_000_000], 1_000_000).r;
        assert!(r_big / r10 < 3.0, "ratio {}", r_big / r10);
        // Same length, more tf: strictly more.
        assert!(q.parts(&[11], 20).r > q.parts(&[10], 20).r);
    }
}
