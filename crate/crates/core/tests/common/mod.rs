#![allow(dead_code)]

pub mod oracle;

use std::collections::HashMap;

use lexevolve::corpus::Document;
use rand::Rng;

pub use oracle::Tokens;

/// A random corpus: `docs` as raw base tokens, ready for the oracle, and
/// the same content as `Document`s for the library.
pub struct Fixture {
    pub tokens: Vec<Tokens>,
    pub documents: Vec<Document>,
    pub vocab: Vec<String>,
}

fn word(rng: &mut impl Rng) -> String {
    // Small alphabet so prefixes and 3-grams collide across words.
    let len = rng.gen_range(1..=8);
    (0..len).map(|_| (b'a' + rng.gen_range(0..5)) as char).collect()
}

/// Up to `max_docs` documents over a vocabulary of at most `max_vocab`
/// words; at least one document is non-empty.
pub fn random_fixture(rng: &mut impl Rng, max_docs: usize, max_vocab: usize) -> Fixture {
    let mut vocab: Vec<String> = (0..rng.gen_range(1..=max_vocab)).map(|_| word(rng)).collect();
    vocab.sort();
    vocab.dedup();
    let n = rng.gen_range(1..=max_docs);
    let mut tokens: Vec<Tokens> = (0..n)
        .map(|_| {
            let len = if rng.gen_bool(0.05) { 0 } else { rng.gen_range(1..=30) };
            (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].clone()).collect()
        })
        .collect();
    if tokens.iter().all(Vec::is_empty) {
        tokens[0].push(vocab[0].clone());
    }
    let documents = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("doc{i:03}"), t.join(" ")))
        .collect();
    Fixture {
        tokens,
        documents,
        vocab,
    }
}

/// 1-5 query tokens from the vocabulary, sometimes with an unseen word.
pub fn random_query(rng: &mut impl Rng, vocab: &[String]) -> Tokens {
    let mut q: Tokens = (0..rng.gen_range(1..=5))
        .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
        .collect();
    if rng.gen_bool(0.2) {
        q.push("zzzunseen".to_owned());
    }
    q
}

/// Largest absolute difference, or an error describing the first
/// candidate-set mismatch.
pub fn compare(expected: &[Option<f64>], actual: &[(u32, f64)]) -> Result<f64, String> {
    let got: HashMap<u32, f64> = actual.iter().copied().collect();
    if got.len() != actual.len() {
        return Err("duplicate documents in scorer output".into());
    }
    let mut worst: f64 = 0.0;
    for (i, e) in expected.iter().enumerate() {
        match (e, got.get(&(i as u32))) {
            (None, None) => {}
            (Some(e), Some(a)) => {
                if !a.is_finite() || !e.is_finite() {
                    return Err(format!("doc {i}: non-finite score (expected {e}, got {a})"));
                }
                worst = worst.max((e - a).abs());
            }
            (e, a) => return Err(format!("doc {i}: candidate mismatch (expected {e:?}, got {a:?})")),
        }
    }
    Ok(worst)
}

/// Parses `qid 0 docid grade` lines.
pub fn parse_trec_qrels(text: &str) -> Vec<lexevolve::QrelEntry> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            lexevolve::QrelEntry::new(f[0], f[2], f[3].parse().unwrap())
        })
        .collect()
}
