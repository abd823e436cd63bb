//! Brute-force scorer transcriptions over raw token lists. No index, no
//! shared code with the library beyond std: every statistic is recounted
//! from the token lists on every call.

#![allow(dead_code)]

use std::collections::BTreeMap;

pub type Tokens = Vec<String>;

fn counts(tokens: &[String]) -> BTreeMap<&str, u32> {
    let mut m = BTreeMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

fn tf(doc: &[String], term: &str) -> u32 {
    doc.iter().filter(|t| t.as_str() == term).count() as u32
}

fn df(docs: &[Tokens], term: &str) -> u32 {
    docs.iter().filter(|d| d.iter().any(|t| t == term)).count() as u32
}

fn ctf(docs: &[Tokens], term: &str) -> u32 {
    docs.iter().map(|d| tf(d, term)).sum()
}

fn total_len(docs: &[Tokens]) -> usize {
    docs.iter().map(Vec::len).sum()
}

fn avgdl(docs: &[Tokens]) -> f64 {
    total_len(docs) as f64 / docs.len() as f64
}

// ---- channels -------------------------------------------------------------

pub fn prefix(base: &[String]) -> Tokens {
    base.iter().map(|t| t.chars().take(5).collect()).collect()
}

pub fn bigram(base: &[String]) -> Tokens {
    base.windows(2).map(|w| format!("{}_{}", w[0], w[1])).collect()
}

pub fn micro(base: &[String]) -> Tokens {
    let mut out = Vec::new();
    for t in base {
        let cs: Vec<char> = t.chars().collect();
        if cs.len() < 3 {
            out.push(t.clone());
        } else {
            for i in 0..=cs.len() - 3 {
                out.push(cs[i..i + 3].iter().collect());
            }
        }
    }
    out
}

// ---- baselines ------------------------------------------------------------

/// `None` for documents that match no query term.
pub fn bm25(docs: &[Tokens], query: &[String], k1: f64, b: f64, delta: f64) -> Vec<Option<f64>> {
    let n = docs.len() as f64;
    let avg = avgdl(docs);
    let q = counts(query);
    docs.iter()
        .map(|d| {
            let mut matched = false;
            let mut s = 0.0;
            for (&t, &qtf) in &q {
                let f = tf(d, t) as f64;
                if f == 0.0 {
                    continue;
                }
                matched = true;
                let dfv = df(docs, t) as f64;
                let idf = ((n - dfv + 0.5) / (dfv + 0.5)).ln();
                let k = k1 * (1.0 - b + b * d.len() as f64 / avg);
                s += qtf as f64 * idf * (f * (k1 + 1.0) / (f + k) + delta);
            }
            matched.then_some(s)
        })
        .collect()
}

pub fn ql_dirichlet(docs: &[Tokens], query: &[String], mu: f64) -> Vec<Option<f64>> {
    let c = total_len(docs) as f64;
    let q = counts(query);
    docs.iter()
        .map(|d| {
            let mut matched = false;
            let mut s = 0.0;
            for (&t, &qtf) in &q {
                let p = ctf(docs, t) as f64 / c;
                if p == 0.0 {
                    continue;
                }
                let f = tf(d, t) as f64;
                matched |= f > 0.0;
                s += qtf as f64 * ((f + mu * p) / (d.len() as f64 + mu)).ln();
            }
            matched.then_some(s)
        })
        .collect()
}

pub fn ql_jm(docs: &[Tokens], query: &[String], alpha: f64) -> Vec<Option<f64>> {
    let c = total_len(docs) as f64;
    let q = counts(query);
    docs.iter()
        .map(|d| {
            if d.is_empty() {
                return None;
            }
            let mut matched = false;
            let mut s = 0.0;
            for (&t, &qtf) in &q {
                let p = ctf(docs, t) as f64 / c;
                if p == 0.0 {
                    continue;
                }
                let f = tf(d, t) as f64;
                matched |= f > 0.0;
                s += qtf as f64 * ((1.0 - alpha) * f / d.len() as f64 + alpha * p).ln();
            }
            matched.then_some(s)
        })
        .collect()
}

// ---- evolved BM25 -----------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct Bm25EvoParams {
    pub w_pfx: f64,
    pub w_bi: f64,
    pub w_mic: f64,
}

impl Default for Bm25EvoParams {
    fn default() -> Self {
        Bm25EvoParams {
            w_pfx: 0.1,
            w_bi: 0.08,
            w_mic: 0.12,
        }
    }
}

fn evo_idf(df: u32, n: usize) -> f64 {
    -((df as f64 + 1.0) / (n as f64 + 2.0)).ln()
}

fn evo_weight(qtf: u32, idf: f64) -> f64 {
    (qtf as f64).sqrt() * idf * (idf / (idf + 1.0)).powf(0.6) * idf / (idf + 1.25)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CoreParts {
    pub matched: usize,
    pub cov: f64,
    pub spec: f64,
    pub coord: f64,
    pub anc: f64,
    pub len: f64,
    pub r: f64,
}

/// Core score `R` of document `doc` in one token space.
pub fn core_r(docs: &[Tokens], query: &[String], doc: usize) -> CoreParts {
    let n = docs.len();
    let q = counts(query);
    let d = &docs[doc];
    let dl = d.len() as f64;
    let avg = avgdl(docs);

    let w_total: f64 = q.iter().map(|(&t, &qtf)| evo_weight(qtf, evo_idf(df(docs, t), n))).sum();
    let (mut e, mut wm, mut spec_sum, mut a) = (0.0, 0.0, 0.0, 0.0f64);
    let mut matched = 0;
    for (&t, &qtf) in &q {
        let f = tf(d, t);
        if f == 0 {
            continue;
        }
        matched += 1;
        let dft = df(docs, t);
        let idf = evo_idf(dft, n);
        let w = evo_weight(qtf, idf);
        e += w * (1.0 + f as f64).ln();
        wm += w;
        let pmi = (f as f64 * n as f64 / (dl.max(25.0) * dft as f64)).ln();
        if pmi > 0.0 {
            spec_sum += w * pmi.min(3.0);
        }
        if idf > 4.2 {
            a = a.max((idf - 4.2) / idf);
        }
    }
    let cov = if w_total > 0.0 { 1.0 + 0.25 * wm / w_total } else { 1.0 };
    let spec = if w_total > 0.0 { 1.0 + 0.10 * spec_sum / w_total } else { 1.0 };
    let frac = if q.is_empty() { 0.0 } else { matched as f64 / q.len() as f64 };
    let coord = 1.0 + 0.20 * (2.5 / (2.5 + (1.0 + w_total).ln())) * frac;
    let anc = 1.0 + 0.14 * (1.0 + a).ln();
    let len = 1.0 + 0.15 * (1.0 + (dl + 1.0) / (avg + 1.0)).ln();
    CoreParts {
        matched,
        cov,
        spec,
        coord,
        anc,
        len,
        r: (1.0 + e).ln() * cov * spec * coord * anc / len,
    }
}

pub fn evo_gate(docs: &[Tokens], query: &[String]) -> f64 {
    let q = counts(query);
    if q.is_empty() || q.keys().all(|t| df(docs, t) == 0) {
        return 0.0;
    }
    let mean = q.keys().map(|t| evo_idf(df(docs, t), docs.len())).sum::<f64>() / q.len() as f64;
    1.0 / (1.0 + (-(mean - 2.2)).exp())
}

pub fn evolved_bm25(docs: &[Tokens], query: &[String], p: Bm25EvoParams) -> Vec<Option<f64>> {
    let g = evo_gate(docs, query);
    let spaces: [(fn(&[String]) -> Tokens, f64); 4] = [
        (|b| b.to_vec(), 1.0),
        (prefix, p.w_pfx),
        (bigram, p.w_bi),
        (micro, p.w_mic * g),
    ];
    let mut out = vec![None; docs.len()];
    for (derive, weight) in spaces {
        if weight == 0.0 {
            continue;
        }
        let cdocs: Vec<Tokens> = docs.iter().map(|d| derive(d)).collect();
        let cq = derive(query);
        for (i, slot) in out.iter_mut().enumerate() {
            let parts = core_r(&cdocs, &cq, i);
            if parts.matched > 0 {
                *slot = Some(slot.unwrap_or(0.0) + weight * parts.r);
            }
        }
    }
    out
}

// ---- evolved QL -------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct QlEvoParams {
    pub tau: f64,
    pub mix_df: f64,
    pub mix_uniform: f64,
    pub beta_span: f64,
    pub mu: f64,
    pub edr_coeff: f64,
    pub qw_exp: f64,
    pub resid_coeff: f64,
    pub leak: f64,
    pub miss_coeff: f64,
    pub and_coeff: f64,
    pub lp_coeff: f64,
}

impl Default for QlEvoParams {
    fn default() -> Self {
        QlEvoParams {
            tau: 0.85,
            mix_df: 0.10,
            mix_uniform: 0.03,
            beta_span: 0.30,
            mu: 1750.0,
            edr_coeff: 0.45,
            qw_exp: 0.6,
            resid_coeff: 0.9,
            leak: 0.12,
            miss_coeff: 0.07,
            and_coeff: 0.14,
            lp_coeff: 0.06,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmEntry {
    pub p_tau: f64,
    pub p_df: f64,
    pub p_c: f64,
    pub idf01: f64,
}

pub fn enriched_lm(docs: &[Tokens], p: &QlEvoParams) -> BTreeMap<String, LmEntry> {
    let n = docs.len() as f64;
    let c = total_len(docs) as f64;
    let mut vocab: Vec<String> = docs.iter().flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();
    let v = vocab.len() as f64;
    let z: f64 = vocab.iter().map(|t| (ctf(docs, t) as f64 / c).powf(p.tau)).sum();
    let max_idf = vocab
        .iter()
        .map(|t| ((n + 1.0) / (df(docs, t) as f64 + 1.0)).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    vocab
        .iter()
        .map(|t| {
            let p_tau = (ctf(docs, t) as f64 / c).powf(p.tau) / z;
            let p_df = df(docs, t) as f64 / n;
            let p_c = (1.0 - p.mix_uniform) * ((1.0 - p.mix_df) * p_tau + p.mix_df * p_df) + p.mix_uniform / v;
            let idf = ((n + 1.0) / (df(docs, t) as f64 + 1.0)).ln();
            let idf01 = if max_idf > 0.0 { idf / max_idf } else { 1.0 };
            (t.clone(), LmEntry { p_tau, p_df, p_c, idf01 })
        })
        .collect()
}

pub fn evolved_ql(docs: &[Tokens], query: &[String], p: &QlEvoParams) -> Vec<Option<f64>> {
    let lm = enriched_lm(docs, p);
    let q: Vec<(&str, u32, LmEntry)> = counts(query)
        .into_iter()
        .filter_map(|(t, qtf)| lm.get(t).map(|e| (t, qtf, *e)))
        .collect();
    let avg = avgdl(docs);
    let mu = p.mu;
    docs.iter()
        .map(|d| {
            if !q.iter().any(|(t, _, _)| tf(d, t) > 0) {
                return None;
            }
            let dl = d.len() as f64;
            let (mut sum, mut miss, mut and) = (0.0, 0.0, 0.0);
            for &(t, qtf, e) in &q {
                let f = tf(d, t) as f64;
                let ratio = (e.p_df / e.p_c).ln();
                let beta = 1.0 - p.beta_span * (1.0 - e.idf01);
                let g = 1.0 + p.edr_coeff * ratio.clamp(-2.5, 2.5);
                let r = 1.0 + p.resid_coeff * ratio.clamp(0.0, 2.5) / 2.5;
                let omega = (qtf as f64 * r).powf(p.qw_exp);
                let s = g * ((1.0 + f.powf(beta) / (mu * e.p_c)) / ((dl + mu) / mu)).ln();
                let s = if s >= 0.0 { s } else { p.leak * s };
                sum += omega * s;
                if f == 0.0 {
                    miss += p.miss_coeff * omega * (mu * e.p_c / (dl + mu)).ln();
                }
                and += (omega * s.max(0.0) / 3.0).tanh();
            }
            let and = p.and_coeff * and / q.len() as f64;
            let lp = -p.lp_coeff * (dl.ln() - avg.ln()).powi(2);
            Some(sum + miss + and + lp)
        })
        .collect()
}
