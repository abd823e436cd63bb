//! BEIR-format dataset loading.
//!
//! A BEIR dataset directory holds `corpus.jsonl`, `queries.jsonl` and one
//! tab-separated judgment file per split under `qrels/`.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "_id")]
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            title: None,
            text: text.into(),
        }
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = Some(title.into());
        self
    }

    /// Text fed to the tokenizers: `title + " " + text` when the title is
    /// non-empty, the body alone otherwise.
    pub fn indexed_text(&self) -> Cow<'_, str> {
        match self.title.as_deref() {
            Some(title) if !title.is_empty() => Cow::Owned(format!("{title} {}", self.text)),
            _ => Cow::Borrowed(&self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    #[serde(rename = "_id")]
    pub id: String,
    pub text: String,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Query {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QrelEntry {
    pub query_id: String,
    pub doc_id: String,
    pub grade: u32,
}

impl QrelEntry {
    pub fn new(query_id: impl Into<String>, doc_id: impl Into<String>, grade: u32) -> Self {
        QrelEntry {
            query_id: query_id.into(),
            doc_id: doc_id.into(),
            grade,
        }
    }
}

/// Relevance judgments grouped by query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    by_query: BTreeMap<String, HashMap<String, u32>>,
}

impl Qrels {
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = &'a QrelEntry>) -> Self {
        let mut by_query: BTreeMap<String, HashMap<String, u32>> = BTreeMap::new();
        for e in entries {
            by_query
                .entry(e.query_id.clone())
                .or_default()
                .insert(e.doc_id.clone(), e.grade);
        }
        Qrels { by_query }
    }

    pub fn judgments(&self, query_id: &str) -> Option<&HashMap<String, u32>> {
        self.by_query.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &HashMap<String, u32>)> {
        self.by_query.iter().map(|(q, j)| (q.as_str(), j))
    }

    pub fn len(&self) -> usize {
        self.by_query.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_query.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub documents: Vec<Document>,
    pub queries: Vec<Query>,
    pub qrels: Vec<QrelEntry>,
}

impl Dataset {
    /// Validates the cross-file invariants and builds a dataset.
    ///
    /// Qrels may point at documents that are not in the corpus; they still
    /// count towards ideal DCG and recall denominators.
    pub fn new(
        name: impl Into<String>,
        documents: Vec<Document>,
        queries: Vec<Query>,
        qrels: Vec<QrelEntry>,
    ) -> Result<Self> {
        check_unique(documents.iter().map(|d| d.id.as_str()), "document")?;
        check_unique(queries.iter().map(|q| q.id.as_str()), "query")?;
        let known: HashSet<&str> = queries.iter().map(|q| q.id.as_str()).collect();
        if let Some(orphan) = qrels.iter().find(|e| !known.contains(e.query_id.as_str())) {
            return Err(Error::Precondition(format!(
                "qrels reference unknown query `{}`",
                orphan.query_id
            )));
        }
        Ok(Dataset {
            name: name.into(),
            documents,
            queries,
            qrels,
        })
    }

    /// Loads `<dir>/corpus.jsonl`, `<dir>/queries.jsonl` and
    /// `<dir>/qrels/<split>.tsv`. Only queries that have judgments in the
    /// split are kept, since BEIR ships one query file for all splits.
    pub fn load_beir(dir: impl AsRef<Path>, split: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let documents = load_corpus(dir.join("corpus.jsonl"))?;
        let qrels = load_qrels(dir.join("qrels").join(format!("{split}.tsv")))?;
        let judged: HashSet<&str> = qrels.iter().map(|e| e.query_id.as_str()).collect();
        let queries = load_queries(dir.join("queries.jsonl"))?
            .into_iter()
            .filter(|q| judged.contains(q.id.as_str()))
            .collect();
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_owned());
        Dataset::new(name, documents, queries, qrels)
    }

    pub fn qrels(&self) -> Qrels {
        Qrels::from_entries(&self.qrels)
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>, kind: &'static str) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(Error::Precondition(format!("empty {kind} id")));
        }
        if !seen.insert(id) {
            return Err(Error::DuplicateId {
                kind,
                id: id.to_owned(),
            });
        }
    }
    Ok(())
}

pub(crate) fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|source| Error::Utf8 {
        path: path.to_owned(),
        source,
    })
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let content = read_utf8(path)?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let docs: Vec<Document> = parse_jsonl(path.as_ref())?;
    check_unique(docs.iter().map(|d| d.id.as_str()), "document")?;
    Ok(docs)
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let queries: Vec<Query> = parse_jsonl(path.as_ref())?;
    check_unique(queries.iter().map(|q| q.id.as_str()), "query")?;
    Ok(queries)
}

pub fn load_qrels(path: impl AsRef<Path>) -> Result<Vec<QrelEntry>> {
    let path = path.as_ref();
    let content = read_utf8(path)?;
    let mut lines = content.lines().enumerate();
    let header_ok = lines
        .next()
        .map(|(_, h)| {
            let cols: Vec<&str> = h.trim_end_matches('\r').split('\t').collect();
            cols == ["query-id", "corpus-id", "score"]
        })
        .unwrap_or(false);
    if !header_ok {
        return Err(Error::Format {
            path: path.to_owned(),
            message: "expected header `query-id\\tcorpus-id\\tscore`".to_owned(),
        });
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(parse_err(format!("expected 3 columns, found {}", cols.len())));
        }
        let grade: u32 = cols[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("grade `{}` is not a non-negative integer", cols[2])))?;
        let entry = QrelEntry::new(cols[0], cols[1], grade);
        if !seen.insert((entry.query_id.clone(), entry.doc_id.clone())) {
            return Err(parse_err(format!(
                "duplicate judgment for ({}, {})",
                entry.query_id, entry.doc_id
            )));
        }
        out.push(entry);
    }
    Ok(out)
}

/// Writes documents as BEIR `corpus.jsonl`.
pub fn write_corpus(documents: &[Document], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(documents, path.as_ref())
}

pub fn write_queries(queries: &[Query], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(queries, path.as_ref())
}

pub fn write_qrels(qrels: &[QrelEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("query-id\tcorpus-id\tscore\n");
    for e in qrels {
        out.push_str(&format!("{}\t{}\t{}\n", e.query_id, e.doc_id, e.grade));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}
