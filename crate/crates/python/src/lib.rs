//! Python bindings: tokenizers, an in-memory index with every scorer,
//! metrics, the paired t-test, diff application and a toy evolution run.

use std::collections::HashMap;

use lexevolve::corpus::{Dataset, Document, QrelEntry, Qrels};
use lexevolve::eval::{self, EvalOptions, EvalReport, Gain, PreparedDataset};
use lexevolve::evolve::mutator::{toy_seed, ToyMutatorConfig};
use lexevolve::evolve::{self as evo, EvolveConfig, MarkerEvaluator, ToyMutator};
use lexevolve::index::IndexSet;
use lexevolve::run::{ScoredDoc, ScoredRun};
use lexevolve::{Retriever, ScorerConfig, TokenChannel};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(err: lexevolve::Error) -> PyErr {
    use lexevolve::Error as E;
    match err {
        E::Io { .. } => PyIOError::new_err(err.to_string()),
        E::Evaluator(_) | E::Mutator(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Round-trips through the `json` module so results arrive as plain
/// dicts and lists.
fn to_pyobject<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn channel(name: &str) -> PyResult<TokenChannel> {
    name.parse().map_err(PyValueError::new_err)
}

fn scorer(spec: &str) -> PyResult<ScorerConfig> {
    if spec.trim_start().starts_with('{') {
        ScorerConfig::from_json(spec).map_err(to_py)
    } else {
        spec.parse().map_err(to_py)
    }
}

fn gain(name: &str) -> PyResult<Gain> {
    match name {
        "exponential" => Ok(Gain::Exponential),
        "linear" => Ok(Gain::Linear),
        other => Err(PyValueError::new_err(format!("unknown gain `{other}` (exponential or linear)"))),
    }
}

/// Tokens of `text` in one channel: base, prefix, bigram or micro.
#[pyfunction]
#[pyo3(signature = (text, channel_name = "base"))]
fn tokenize(text: &str, channel_name: &str) -> PyResult<Vec<String>> {
    let ch = channel(channel_name)?;
    Ok(lexevolve::tokenize::tokenize(text, ch).iter().map(str::to_owned).collect())
}

/// Inverted indexes over `(doc_id, text)` pairs.
#[pyclass(module = "lexevolve_py")]
struct Index {
    indexes: IndexSet,
}

#[pymethods]
impl Index {
    /// `channels` defaults to all four.
    #[new]
    #[pyo3(signature = (documents, channels = None))]
    fn new(documents: Vec<(String, String)>, channels: Option<Vec<String>>) -> PyResult<Self> {
        let channels = match channels {
            Some(names) => names.iter().map(|n| channel(n)).collect::<PyResult<Vec<_>>>()?,
            None => TokenChannel::ALL.to_vec(),
        };
        let docs: Vec<Document> = documents.into_iter().map(|(id, text)| Document::new(id, text)).collect();
        Ok(Index {
            indexes: IndexSet::build(&docs, &channels),
        })
    }

    #[getter]
    fn n_docs(&self) -> usize {
        self.indexes.n_docs()
    }

    #[getter]
    fn channels(&self) -> Vec<String> {
        self.indexes.channels().map(|c| c.to_string()).collect()
    }

    #[pyo3(signature = (term, channel_name = "base"))]
    fn df(&self, term: &str, channel_name: &str) -> PyResult<u32> {
        Ok(self.indexes.get(channel(channel_name)?).map_err(to_py)?.df(term))
    }

    /// Top-`k` `(doc_id, score)` pairs. `scorer` is a name such as
    /// `"bm25"` or a JSON object like `'{"name": "bm25", "k1": 1.2}'`.
    #[pyo3(signature = (query, scorer_spec = "bm25", k = 10))]
    fn search(&self, query: &str, scorer_spec: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        let retriever = Retriever::new(&self.indexes, scorer(scorer_spec)?).map_err(to_py)?;
        let hits = retriever.retrieve(query, Some(k)).map_err(to_py)?;
        Ok(hits.into_iter().map(|h| (h.doc_id, h.score)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Index(n_docs={}, channels={:?})", self.indexes.n_docs(), self.channels())
    }
}

/// nDCG@10 and Recall@100 for a run `{qid: [(doc_id, score), ...]}`
/// against qrels `{qid: {doc_id: grade}}`.
#[pyfunction]
#[pyo3(signature = (run, qrels, gain_name = "exponential"))]
fn evaluate<'py>(
    py: Python<'py>,
    run: HashMap<String, Vec<(String, f64)>>,
    qrels: HashMap<String, HashMap<String, u32>>,
    gain_name: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mut scored = ScoredRun::new();
    for (qid, hits) in run {
        let ranking = hits.into_iter().map(|(doc_id, score)| ScoredDoc { doc_id, score }).collect();
        scored.insert(qid, ranking);
    }
    let entries: Vec<QrelEntry> = qrels
        .iter()
        .flat_map(|(q, docs)| docs.iter().map(move |(d, g)| QrelEntry::new(q.as_str(), d.as_str(), *g)))
        .collect();
    let metrics = eval::evaluate_run(&scored, &Qrels::from_entries(&entries), gain(gain_name)?);
    to_pyobject(py, &metrics)
}

/// Paired two-sided t-test; returns `{"t", "df", "p", "mean_diff"}`.
#[pyfunction]
fn paired_ttest<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let t = eval::paired_ttest(&a, &b).map_err(to_py)?;
    to_pyobject(py, &t)
}

/// `0.8 * recall + 0.2 * ndcg`.
#[pyfunction]
fn fitness(mean_recall100: f64, mean_ndcg10: f64) -> f64 {
    eval::fitness(mean_recall100, mean_ndcg10)
}

/// Applies SEARCH/REPLACE blocks to `program`.
#[pyfunction]
fn apply_diff(program: &str, diff: &str) -> PyResult<String> {
    evo::apply_diff(program, diff).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Evaluates a scorer on a BEIR-layout directory; returns the report dict.
#[pyfunction]
#[pyo3(signature = (path, scorer_spec = "bm25", split = "test", gain_name = "exponential"))]
fn evaluate_beir<'py>(
    py: Python<'py>,
    path: &str,
    scorer_spec: &str,
    split: &str,
    gain_name: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = scorer(scorer_spec)?;
    let opts = EvalOptions {
        gain: gain(gain_name)?,
        ..Default::default()
    };
    let report = py
        .detach(|| -> lexevolve::Result<EvalReport> {
            let ds = Dataset::load_beir(path, split)?;
            let prepared = PreparedDataset::new(ds.clone(), IndexSet::build(&ds.documents, &cfg.channels()));
            let (r, _) = prepared.evaluate(&cfg, &opts)?;
            EvalReport::from_datasets(cfg.name(), vec![r])
        })
        .map_err(to_py)?;
    to_pyobject(py, &report)
}

/// Island-model evolution of the toy marker program with the mock
/// mutator. Returns the best program, its fitness and the trajectory.
#[pyfunction]
#[pyo3(signature = (steps, seed = 0))]
fn evolve_toy<'py>(py: Python<'py>, steps: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = EvolveConfig {
        complexity_range: (10.0, 2_000.0),
        seed,
        ..Default::default()
    };
    let mutator = ToyMutator::new(ToyMutatorConfig { seed, ..Default::default() });
    let out = py
        .detach(|| evo::evolve_loop(&toy_seed(), steps, mutator, MarkerEvaluator, cfg))
        .map_err(to_py)?;
    #[derive(Serialize)]
    struct Summary {
        best_program: String,
        best_fitness: Option<f64>,
        trajectory: Vec<(usize, f64)>,
        candidates: usize,
    }
    let summary = Summary {
        best_program: out.best.program.clone(),
        best_fitness: out.best.fitness,
        trajectory: out.trajectory(),
        candidates: out.population.candidates().len(),
    };
    to_pyobject(py, &summary)
}

#[pymodule]
fn lexevolve_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Index>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(paired_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(fitness, m)?)?;
    m.add_function(wrap_pyfunction!(apply_diff, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_beir, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_toy, m)?)?;
    m.add("SCORERS", ScorerConfig::NAMES.to_vec())?;
    Ok(())
}
