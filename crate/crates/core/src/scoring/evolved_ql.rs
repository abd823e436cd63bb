//! Query-likelihood descendant with an enriched collection model.
//!
//! Per unique in-vocabulary query term `t` and candidate document `d`:
//!
//! ```text
//! s_base(t,d) = g(t) * ln((1 + tf^beta(t) / (mu P_C(t))) / ((|d| + mu) / mu))
//! s~(t,d)     = s_base if s_base >= 0 else leak * s_base
//! m(t,d)      = [tf = 0] * miss * omega(t) * ln(mu P_C(t) / (|d| + mu))
//! AND(q,d)    = and / |q_u| * sum tanh(omega(t) * max(s~, 0) / and_scale)
//! LP(d)       = -lp * (ln |d| - ln avgdl)^2
//! S           = sum omega(t) s~(t,d) + sum m(t,d) + AND + LP
//! ```
//!
//! `P_C` is a tempered, document-frequency-mixed, uniformly floored
//! collection model; `g` is the dispersion gate `P_df / P_C`; `omega` is a
//! damped query weight.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{candidate_docs, ChannelIndex, QueryRep, QueryTerm};
use crate::tokenize::TokenChannel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolvedQlConfig {
    pub tau: f64,
    pub mix_df: f64,
    pub mix_uniform: f64,
    pub beta_span: f64,
    pub mu: f64,
    pub edr_coeff: f64,
    pub edr_clip: f64,
    pub qw_exp: f64,
    pub resid_coeff: f64,
    pub resid_clip: f64,
    pub leak: f64,
    pub miss_coeff: f64,
    pub and_coeff: f64,
    pub and_scale: f64,
    pub lp_coeff: f64,
}

impl Default for EvolvedQlConfig {
    fn default() -> Self {
        EvolvedQlConfig {
            tau: 0.85,
            mix_df: 0.10,
            mix_uniform: 0.03,
            beta_span: 0.30,
            mu: 1750.0,
            edr_coeff: 0.45,
            edr_clip: 2.5,
            qw_exp: 0.6,
            resid_coeff: 0.9,
            resid_clip: 2.5,
            leak: 0.12,
            miss_coeff: 0.07,
            and_coeff: 0.14,
            and_scale: 3.0,
            lp_coeff: 0.06,
        }
    }
}

impl EvolvedQlConfig {
    /// Degenerate settings under which the score collapses onto the
    /// Dirichlet seed (plus a per-query constant).
    pub fn seed_reduction(mu: f64) -> Self {
        EvolvedQlConfig {
            tau: 1.0,
            mix_df: 0.0,
            mix_uniform: 0.0,
            beta_span: 0.0,
            mu,
            edr_coeff: 0.0,
            edr_clip: 2.5,
            qw_exp: 1.0,
            resid_coeff: 0.0,
            resid_clip: 2.5,
            leak: 1.0,
            miss_coeff: 0.0,
            and_coeff: 0.0,
            and_scale: 3.0,
            lp_coeff: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must be in (0, 1], got {}", self.tau));
        }
        for (name, v) in [("mix_df", self.mix_df), ("mix_uniform", self.mix_uniform)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.beta_span) {
            return bad(format!("beta_span must be in [0, 1], got {}", self.beta_span));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be > 0, got {}", self.mu));
        }
        for (name, v) in [("and_scale", self.and_scale), ("resid_clip", self.resid_clip)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        let nonneg = [
            ("edr_coeff", self.edr_coeff),
            ("edr_clip", self.edr_clip),
            ("qw_exp", self.qw_exp),
            ("resid_coeff", self.resid_coeff),
            ("leak", self.leak),
            ("miss_coeff", self.miss_coeff),
            ("and_coeff", self.and_coeff),
            ("lp_coeff", self.lp_coeff),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TermModel {
    /// Raw `ctf / |C|`.
    pub p_raw: f64,
    /// Tempered and renormalized.
    pub p_tau: f64,
    /// `df / N`.
    pub p_df: f64,
    /// Final smoothed background probability.
    pub p_c: f64,
    /// Normalized IDF in `[0, 1]`.
    pub idf01: f64,
}

/// Enriched collection language model over one channel's vocabulary.
#[derive(Debug, Clone)]
pub struct EnrichedLm {
    terms: HashMap<String, TermModel>,
}

impl EnrichedLm {
    pub fn build(index: &ChannelIndex, cfg: &EvolvedQlConfig) -> Result<Self> {
        cfg.validate()?;
        let n = index.n_docs();
        if n == 0 {
            return Err(Error::EmptyCorpus);
        }
        let vocab = index.vocabulary();
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let total = index.stats().total_tokens as f64;
        let v = vocab.len() as f64;
        let n_f = n as f64;

        let raw: Vec<f64> = vocab.iter().map(|&(_, _, ctf)| ctf as f64 / total).collect();
        let tempered: Vec<f64> = raw.iter().map(|p| p.powf(cfg.tau)).collect();
        let norm: f64 = tempered.iter().sum();
        let raw_idf: Vec<f64> = vocab
            .iter()
            .map(|&(_, df, _)| ((n_f + 1.0) / (f64::from(df) + 1.0)).ln())
            .collect();
        let max_idf = raw_idf.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let terms = vocab
            .iter()
            .enumerate()
            .map(|(i, &(term, df, _))| {
                let p_tau = tempered[i] / norm;
                let p_df = f64::from(df) / n_f;
                let p_mix = (1.0 - cfg.mix_df) * p_tau + cfg.mix_df * p_df;
                let p_c = (1.0 - cfg.mix_uniform) * p_mix + cfg.mix_uniform / v;
                // max_idf is 0 only when every term occurs in every document.
                let idf01 = if max_idf > 0.0 { raw_idf[i] / max_idf } else { 1.0 };
                (
                    term.to_owned(),
                    TermModel {
                        p_raw: raw[i],
                        p_tau,
                        p_df,
                        p_c,
                        idf01,
                    },
                )
            })
            .collect();
        Ok(EnrichedLm { terms })
    }

    pub fn get(&self, term: &str) -> Option<&TermModel> {
        self.terms.get(term)
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TermModel)> {
        self.terms.iter().map(|(t, m)| (t.as_str(), m))
    }
}

pub fn beta(idf01: f64, cfg: &EvolvedQlConfig) -> f64 {
    1.0 - cfg.beta_span * (1.0 - idf01)
}

fn dispersion_log(p_df: f64, p_c: f64) -> f64 {
    (p_df / p_c).ln()
}

/// Dispersion gate `1 + c * clip(ln(P_df / P_C), -k, k)`.
pub fn edr_gate(p_df: f64, p_c: f64, cfg: &EvolvedQlConfig) -> f64 {
    1.0 + cfg.edr_coeff * dispersion_log(p_df, p_c).clamp(-cfg.edr_clip, cfg.edr_clip)
}

/// Residual boost `r(t)` in `[1, 1 + resid_coeff]`.
pub fn residual_weight(p_df: f64, p_c: f64, cfg: &EvolvedQlConfig) -> f64 {
    1.0 + cfg.resid_coeff * dispersion_log(p_df, p_c).clamp(0.0, cfg.resid_clip) / cfg.resid_clip
}

pub fn query_weight(qtf: u32, p_df: f64, p_c: f64, cfg: &EvolvedQlConfig) -> f64 {
    (f64::from(qtf) * residual_weight(p_df, p_c, cfg)).powf(cfg.qw_exp)
}

/// Everything computed for one query term against one document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QlTermParts {
    pub tf: u32,
    pub beta: f64,
    pub gate: f64,
    pub residual: f64,
    pub omega: f64,
    pub s_base: f64,
    pub s_rect: f64,
    pub missing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolvedQlParts {
    pub terms: Vec<QlTermParts>,
    pub weighted_sum: f64,
    pub missing_sum: f64,
    pub and_bonus: f64,
    pub length_prior: f64,
    pub score: f64,
}

struct PreparedTerm<'a> {
    term: &'a str,
    model: TermModel,
    beta: f64,
    gate: f64,
    residual: f64,
    omega: f64,
}

/// A query prepared against the enriched model. Out-of-vocabulary terms
/// are dropped.
pub struct QlQuery<'a> {
    index: &'a ChannelIndex,
    terms: Vec<PreparedTerm<'a>>,
    cfg: EvolvedQlConfig,
}

impl<'a> QlQuery<'a> {
    pub fn new(index: &'a ChannelIndex, lm: &EnrichedLm, terms: &'a [QueryTerm], cfg: &EvolvedQlConfig) -> Self {
        let terms = terms
            .iter()
            .filter_map(|qt| {
                let model = *lm.get(&qt.term)?;
                Some(PreparedTerm {
                    term: &qt.term,
                    model,
                    beta: beta(model.idf01, cfg),
                    gate: edr_gate(model.p_df, model.p_c, cfg),
                    residual: residual_weight(model.p_df, model.p_c, cfg),
                    omega: query_weight(qt.qtf, model.p_df, model.p_c, cfg),
                })
            })
            .collect();
        QlQuery {
            index,
            terms,
            cfg: *cfg,
        }
    }

    /// Number of unique in-vocabulary query terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn parts(&self, doc: u32) -> EvolvedQlParts {
        let cfg = &self.cfg;
        let mu = cfg.mu;
        let dl = f64::from(self.index.doc_len(doc));
        let stats = self.index.stats();

        let mut per_term = Vec::with_capacity(self.terms.len());
        let (mut weighted_sum, mut missing_sum, mut and_sum) = (0.0, 0.0, 0.0);
        for t in &self.terms {
            let tf = self.index.tf(t.term, doc);
            let mu_p = mu * t.model.p_c;
            let tf_eff = f64::from(tf).powf(t.beta);
            let s_base = t.gate * ((1.0 + tf_eff / mu_p) / ((dl + mu) / mu)).ln();
            let s_rect = if s_base >= 0.0 { s_base } else { cfg.leak * s_base };
            let missing = if tf == 0 {
                cfg.miss_coeff * t.omega * (mu_p / (dl + mu)).ln()
            } else {
                0.0
            };
            weighted_sum += t.omega * s_rect;
            missing_sum += missing;
            and_sum += (t.omega * s_rect.max(0.0) / cfg.and_scale).tanh();
            per_term.push(QlTermParts {
                tf,
                beta: t.beta,
                gate: t.gate,
                residual: t.residual,
                omega: t.omega,
                s_base,
                s_rect,
                missing,
            });
        }
        let and_bonus = if self.terms.is_empty() {
            0.0
        } else {
            cfg.and_coeff * and_sum / self.terms.len() as f64
        };
        let length_prior = -cfg.lp_coeff * (dl.ln() - stats.avgdl.ln()).powi(2);
        EvolvedQlParts {
            terms: per_term,
            weighted_sum,
            missing_sum,
            and_bonus,
            length_prior,
            score: weighted_sum + missing_sum + and_bonus + length_prior,
        }
    }
}

/// Scores every base-channel candidate of the query.
pub fn score_evolved_ql(
    index: &ChannelIndex,
    lm: &EnrichedLm,
    rep: &QueryRep,
    cfg: &EvolvedQlConfig,
) -> Result<Vec<(u32, f64)>> {
    cfg.validate()?;
    if index.n_docs() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let query = QlQuery::new(index, lm, rep.terms(index.channel()), cfg);
    Ok(candidate_docs(index, rep)
        .into_iter()
        .map(|doc| (doc, query.parts(doc).score))
        .collect())
}

pub const CHANNEL: TokenChannel = TokenChannel::Base;
