//! Per-channel inverted indexes and the collection statistics scorers need.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tokenize::{derive, tokenize_base, TokenChannel, TokenStream};

const MAGIC: &[u8; 6] = b"LXIDX\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TermEntry {
    ctf: u64,
    postings: Vec<Posting>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionStats {
    pub n_docs: usize,
    /// Zero for an empty corpus.
    pub avgdl: f64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone)]
pub struct ChannelIndex {
    channel: TokenChannel,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    terms: HashMap<String, TermEntry>,
    stats: CollectionStats,
    build_time: Duration,
}

impl PartialEq for ChannelIndex {
    fn eq(&self, other: &Self) -> bool {
        self.channel == other.channel
            && self.doc_ids == other.doc_ids
            && self.doc_lengths == other.doc_lengths
            && self.terms == other.terms
    }
}

impl ChannelIndex {
    pub fn build(documents: &[Document], channel: TokenChannel) -> Self {
        let start = Instant::now();
        let streams = documents
            .iter()
            .map(|d| derive(&tokenize_base(&d.indexed_text()), channel));
        let ids = documents.iter().map(|d| d.id.clone());
        let mut index = Self::from_streams(channel, ids.zip(streams));
        index.build_time = start.elapsed();
        index
    }

    pub(crate) fn from_streams(
        channel: TokenChannel,
        docs: impl Iterator<Item = (String, TokenStream)>,
    ) -> Self {
        let mut doc_ids = Vec::new();
        let mut doc_lengths = Vec::new();
        let mut terms: HashMap<String, TermEntry> = HashMap::new();
        for (ordinal, (id, stream)) in docs.enumerate() {
            debug_assert_eq!(stream.channel, channel);
            let mut counts: HashMap<&str, u32> = HashMap::new();
            for tok in stream.iter() {
                *counts.entry(tok).or_insert(0) += 1;
            }
            for (&tok, &tf) in &counts {
                let entry = terms.entry(tok.to_owned()).or_insert_with(|| TermEntry {
                    ctf: 0,
                    postings: Vec::new(),
                });
                entry.ctf += u64::from(tf);
                entry.postings.push(Posting {
                    doc: ordinal as u32,
                    tf,
                });
            }
            doc_ids.push(id);
            doc_lengths.push(stream.len() as u32);
        }
        // Documents are visited in ordinal order, so every postings list is
        // already sorted.
        Self::assemble(channel, doc_ids, doc_lengths, terms)
    }

    fn assemble(
        channel: TokenChannel,
        doc_ids: Vec<String>,
        doc_lengths: Vec<u32>,
        terms: HashMap<String, TermEntry>,
    ) -> Self {
        let n_docs = doc_ids.len();
        let total_tokens: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avgdl = if n_docs == 0 {
            0.0
        } else {
            total_tokens as f64 / n_docs as f64
        };
        ChannelIndex {
            channel,
            doc_ids,
            doc_lengths,
            terms,
            stats: CollectionStats {
                n_docs,
                avgdl,
                total_tokens,
            },
            build_time: Duration::ZERO,
        }
    }

    pub fn channel(&self) -> TokenChannel {
        self.channel
    }

    pub fn stats(&self) -> &CollectionStats {
        &self.stats
    }

    pub fn n_docs(&self) -> usize {
        self.stats.n_docs
    }

    pub fn doc_id(&self, doc: u32) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_len(&self, doc: u32) -> u32 {
        self.doc_lengths[doc as usize]
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains_key(term)
    }

    pub fn df(&self, term: &str) -> u32 {
        self.terms.get(term).map_or(0, |e| e.postings.len() as u32)
    }

    /// Collection term frequency.
    pub fn ctf(&self, term: &str) -> u64 {
        self.terms.get(term).map_or(0, |e| e.ctf)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.terms.get(term).map_or(&[], |e| e.postings.as_slice())
    }

    pub fn tf(&self, term: &str, doc: u32) -> u32 {
        let postings = self.postings(term);
        postings
            .binary_search_by_key(&doc, |p| p.doc)
            .map_or(0, |i| postings[i].tf)
    }

    /// `(term, df, ctf)` in lexicographic term order.
    pub fn vocabulary(&self) -> Vec<(&str, u32, u64)> {
        let mut v: Vec<_> = self
            .terms
            .iter()
            .map(|(t, e)| (t.as_str(), e.postings.len() as u32, e.ctf))
            .collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }

    pub fn build_time(&self) -> Duration {
        self.build_time
    }

    /// Checks every structural invariant of the index.
    pub fn audit(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Precondition(format!("index audit: {m}")));
        let n = self.stats.n_docs;
        if self.doc_ids.len() != n || self.doc_lengths.len() != n {
            return fail("document table size mismatch".into());
        }
        let total: u64 = self.doc_lengths.iter().map(|&l| u64::from(l)).sum();
        if total != self.stats.total_tokens {
            return fail("sum of document lengths differs from total_tokens".into());
        }
        let mut ctf_sum = 0u64;
        let mut per_doc = vec![0u64; n];
        for (term, entry) in &self.terms {
            let df = entry.postings.len();
            if df == 0 || df > n {
                return fail(format!("df({term}) = {df} out of range"));
            }
            let mut tf_sum = 0u64;
            for w in entry.postings.windows(2) {
                if w[0].doc >= w[1].doc {
                    return fail(format!("postings for `{term}` not strictly ascending"));
                }
            }
            for p in &entry.postings {
                if p.tf == 0 || p.doc as usize >= n {
                    return fail(format!("bad posting for `{term}`"));
                }
                tf_sum += u64::from(p.tf);
                per_doc[p.doc as usize] += u64::from(p.tf);
            }
            if tf_sum != entry.ctf || entry.ctf < df as u64 {
                return fail(format!("ctf({term}) inconsistent with postings"));
            }
            ctf_sum += entry.ctf;
        }
        if ctf_sum != self.stats.total_tokens {
            return fail("sum of ctf differs from total_tokens".into());
        }
        if per_doc
            .iter()
            .zip(&self.doc_lengths)
            .any(|(&s, &l)| s != u64::from(l))
        {
            return fail("postings do not account for document lengths".into());
        }
        if n > 0 {
            let expected = total as f64 / n as f64;
            if (self.stats.avgdl - expected).abs() > 1e-12 * expected.max(1.0) {
                return fail("avgdl mismatch".into());
            }
        }
        Ok(())
    }

    /// Versioned little-endian binary encoding. Terms are written in sorted
    /// order so equal indexes encode to identical bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.channel.code());
        out.extend_from_slice(&(self.doc_ids.len() as u64).to_le_bytes());
        for (id, len) in self.doc_ids.iter().zip(&self.doc_lengths) {
            put_str(&mut out, id);
            out.extend_from_slice(&len.to_le_bytes());
        }
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_unstable_by(|a, b| a.0.cmp(b.0));
        out.extend_from_slice(&(terms.len() as u64).to_le_bytes());
        for (term, entry) in terms {
            put_str(&mut out, term);
            out.extend_from_slice(&entry.ctf.to_le_bytes());
            out.extend_from_slice(&(entry.postings.len() as u32).to_le_bytes());
            for p in &entry.postings {
                out.extend_from_slice(&p.doc.to_le_bytes());
                out.extend_from_slice(&p.tf.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err("bad magic header".into());
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(format!("unsupported format version {version}"));
        }
        let channel = TokenChannel::from_code(r.take(1)?[0]).ok_or("unknown channel code")?;
        let n_docs = r.u64()? as usize;
        let mut doc_ids = Vec::with_capacity(n_docs.min(1 << 20));
        let mut doc_lengths = Vec::with_capacity(n_docs.min(1 << 20));
        for _ in 0..n_docs {
            doc_ids.push(r.string()?);
            doc_lengths.push(r.u32()?);
        }
        let n_terms = r.u64()? as usize;
        let mut terms = HashMap::with_capacity(n_terms.min(1 << 20));
        for _ in 0..n_terms {
            let term = r.string()?;
            let ctf = r.u64()?;
            let n_post = r.u32()? as usize;
            let mut postings = Vec::with_capacity(n_post.min(1 << 20));
            for _ in 0..n_post {
                postings.push(Posting {
                    doc: r.u32()?,
                    tf: r.u32()?,
                });
            }
            terms.insert(term, TermEntry { ctf, postings });
        }
        if r.pos != bytes.len() {
            return Err("trailing bytes".into());
        }
        let index = Self::assemble(channel, doc_ids, doc_lengths, terms);
        index.audit().map_err(|e| e.to_string())?;
        Ok(index)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|message| Error::IndexFormat {
            path: path.to_owned(),
            message,
        })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or("truncated index file")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "invalid UTF-8 in index".into())
    }
}

/// Several channel indexes over the same corpus.
#[derive(Debug, Clone)]
pub struct IndexSet {
    channels: BTreeMap<TokenChannel, ChannelIndex>,
    n_docs: usize,
    build_time: Duration,
}

impl IndexSet {
    /// Tokenizes every document once and derives all requested channels.
    pub fn build(documents: &[Document], channels: &[TokenChannel]) -> Self {
        let start = Instant::now();
        let wanted: BTreeSet<TokenChannel> = channels.iter().copied().collect();
        let bases: Vec<TokenStream> = documents
            .iter()
            .map(|d| tokenize_base(&d.indexed_text()))
            .collect();
        let map = wanted
            .into_iter()
            .map(|c| {
                let docs = documents
                    .iter()
                    .zip(&bases)
                    .map(|(d, b)| (d.id.clone(), derive(b, c)));
                (c, ChannelIndex::from_streams(c, docs))
            })
            .collect();
        IndexSet {
            channels: map,
            n_docs: documents.len(),
            build_time: start.elapsed(),
        }
    }

    pub fn from_indexes(indexes: impl IntoIterator<Item = ChannelIndex>) -> Result<Self> {
        let mut channels = BTreeMap::new();
        let mut n_docs = None;
        let mut build_time = Duration::ZERO;
        for idx in indexes {
            match n_docs {
                None => n_docs = Some(idx.n_docs()),
                Some(n) if n != idx.n_docs() => {
                    return Err(Error::Precondition(
                        "channel indexes cover different corpora".into(),
                    ))
                }
                _ => {}
            }
            build_time += idx.build_time;
            channels.insert(idx.channel(), idx);
        }
        let set = IndexSet {
            channels,
            n_docs: n_docs.unwrap_or(0),
            build_time,
        };
        if let Some(first) = set.channels.values().next() {
            if set.channels.values().any(|c| c.doc_ids != first.doc_ids) {
                return Err(Error::Precondition(
                    "channel indexes cover different corpora".into(),
                ));
            }
        }
        Ok(set)
    }

    pub fn get(&self, channel: TokenChannel) -> Result<&ChannelIndex> {
        self.channels
            .get(&channel)
            .ok_or(Error::MissingChannel(channel))
    }

    pub fn channels(&self) -> impl Iterator<Item = TokenChannel> + '_ {
        self.channels.keys().copied()
    }

    pub fn indexes(&self) -> impl Iterator<Item = &ChannelIndex> {
        self.channels.values()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn doc_id(&self, doc: u32) -> Option<&str> {
        self.channels.values().next().map(|c| c.doc_id(doc))
    }

    pub fn build_time(&self) -> Duration {
        self.build_time
    }

    /// Wall-clock indexing time divided by corpus size.
    pub fn indexing_ms_per_doc(&self) -> Option<f64> {
        (self.n_docs > 0).then(|| self.build_time.as_secs_f64() * 1e3 / self.n_docs as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTerm {
    pub term: String,
    pub qtf: u32,
}

/// A query tokenized into one or more channels, as unique terms with
/// query term frequencies (lexicographic order).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryRep {
    channels: BTreeMap<TokenChannel, Vec<QueryTerm>>,
}

impl QueryRep {
    pub fn terms(&self, channel: TokenChannel) -> &[QueryTerm] {
        self.channels.get(&channel).map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.channels.values().all(Vec::is_empty)
    }

    pub fn channels(&self) -> impl Iterator<Item = TokenChannel> + '_ {
        self.channels.keys().copied()
    }
}

fn count_terms(stream: &TokenStream) -> Vec<QueryTerm> {
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for t in stream.iter() {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|(t, qtf)| QueryTerm {
            term: t.to_owned(),
            qtf,
        })
        .collect()
}

pub fn represent_query(text: &str, channels: &[TokenChannel]) -> QueryRep {
    let base = tokenize_base(text);
    QueryRep {
        channels: channels
            .iter()
            .map(|&c| (c, count_terms(&derive(&base, c))))
            .collect(),
    }
}

/// Documents matching at least one of the rep's terms in this channel,
/// ascending.
pub fn candidate_docs(index: &ChannelIndex, rep: &QueryRep) -> Vec<u32> {
    let mut docs: BTreeSet<u32> = BTreeSet::new();
    for qt in rep.terms(index.channel()) {
        docs.extend(index.postings(&qt.term).iter().map(|p| p.doc));
    }
    docs.into_iter().collect()
}

/// For every document matching at least one term, the term frequency of
/// each query term (aligned with `terms`). Sorted by document ordinal.
pub fn match_table(index: &ChannelIndex, terms: &[QueryTerm]) -> Vec<(u32, Vec<u32>)> {
    let mut table: HashMap<u32, Vec<u32>> = HashMap::new();
    for (i, qt) in terms.iter().enumerate() {
        for p in index.postings(&qt.term) {
            table.entry(p.doc).or_insert_with(|| vec![0; terms.len()])[i] = p.tf;
        }
    }
    let mut rows: Vec<_> = table.into_iter().collect();
    rows.sort_unstable_by_key(|r| r.0);
    rows
}
