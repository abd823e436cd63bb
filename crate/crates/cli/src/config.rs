//! Run configuration: one JSON document, patched by `--set key=value`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use lexevolve::eval::{EvalOptions, Gain};
use lexevolve::evolve::mutator::HttpMutatorConfig;
use lexevolve::evolve::EvolveConfig;
use lexevolve::{ScorerConfig, TokenChannel};
use serde::Deserialize;
use serde_json::Value;

use crate::UsageError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// Directory in BEIR layout: corpus.jsonl, queries.jsonl, qrels/<split>.tsv.
    pub path: PathBuf,
    #[serde(default = "default_split")]
    pub split: String,
}

fn default_split() -> String {
    "test".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MutatorSpec {
    /// Marker/filler edits on toy programs.
    Toy {
        #[serde(default = "default_p_add")]
        p_add: f64,
        #[serde(default = "default_p_remove")]
        p_remove: f64,
    },
    /// Log-uniform jitter of one numeric parameter in a scorer config.
    Jitter {
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// Replays diffs from files, cycling.
    Scripted { diffs: Vec<PathBuf> },
    Http(HttpMutatorConfig),
}

fn default_p_add() -> f64 {
    0.6
}
fn default_p_remove() -> f64 {
    0.2
}
fn default_scale() -> f64 {
    0.3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EvaluatorSpec {
    /// Programs are scorer configs, evaluated on the configured datasets.
    Scorer,
    /// Fitness is the number of marker lines.
    Marker,
    /// Program on stdin, report JSON on stdout.
    Subprocess {
        command: String,
        #[serde(default)]
        args: Vec<String>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSpec {
    pub steps: usize,
    pub mutator: MutatorSpec,
    pub evaluator: EvaluatorSpec,
    /// Seed program file; defaults to the scorer config (scorer evaluator)
    /// or the toy seed (marker evaluator).
    pub seed_program: Option<PathBuf>,
    pub population: EvolveConfig,
}

impl Default for EvolveSpec {
    fn default() -> Self {
        EvolveSpec {
            steps: 50,
            mutator: MutatorSpec::Jitter { scale: default_scale() },
            evaluator: EvaluatorSpec::Scorer,
            seed_program: None,
            population: EvolveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSpec>,
    pub scorer: ScorerConfig,
    /// Channels for `index`; defaults to what the scorer reads.
    pub channels: Option<Vec<TokenChannel>>,
    pub output_dir: PathBuf,
    pub depth: usize,
    pub gain: Gain,
    pub seed: u64,
    pub evolve: EvolveSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            datasets: Vec::new(),
            scorer: ScorerConfig::Bm25(Default::default()),
            channels: None,
            output_dir: PathBuf::from("lexevolve-out"),
            depth: 1000,
            gain: Gain::Exponential,
            seed: 0,
            evolve: EvolveSpec::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies overrides in order, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| UsageError(format!("config {} is not valid JSON: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        if !doc.is_object() {
            bail!(UsageError("config must be a JSON object".into()));
        }
        // Tagged sections need their tag before `--set` can fill in fields.
        for (path, tag) in [
            ("/scorer", r#"{"name": "bm25"}"#),
            ("/evolve/mutator", r#"{"kind": "jitter"}"#),
            ("/evolve/evaluator", r#"{"kind": "scorer"}"#),
        ] {
            if doc.pointer(path).is_none() {
                let key = path[1..].replace('/', ".");
                apply_override(&mut doc, &format!("{key}={tag}"))?;
            }
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| UsageError(format!("invalid config: {e}")))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.evolve.population.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.scorer.validate().map_err(|e| UsageError(e.to_string()))?;
        self.evolve
            .population
            .validate()
            .map_err(|e| UsageError(e.to_string()))?;
        if self.depth == 0 {
            bail!(UsageError("depth must be at least 1".into()));
        }
        for d in &self.datasets {
            if !d.path.is_dir() {
                bail!(UsageError(format!("dataset directory {} does not exist", d.path.display())));
            }
        }
        Ok(())
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            depth: self.depth,
            gain: self.gain,
        }
    }

    pub fn channels(&self) -> Vec<TokenChannel> {
        self.channels.clone().unwrap_or_else(|| self.scorer.channels())
    }

    pub fn require_datasets(&self) -> Result<()> {
        if self.datasets.is_empty() {
            bail!(UsageError("no datasets configured (use --dataset or `datasets` in the config)".into()));
        }
        Ok(())
    }
}

/// `a.b.c=value`: the value is parsed as JSON, falling back to a string.
/// Missing intermediate objects are created.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| UsageError(format!("--set expects key=value, got `{assignment}`")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        bail!(UsageError(format!("bad key in --set `{assignment}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(map) => map,
            other if other.is_null() => {
                *other = Value::Object(Default::default());
                other.as_object_mut().expect("just set")
            }
            _ => bail!(UsageError(format!("--set {key}: `{}` is not an object", parts[..i].join(".")))),
        };
        if i + 1 == parts.len() {
            obj.insert((*part).to_owned(), value);
            return Ok(());
        }
        node = obj.entry(*part).or_insert(Value::Null);
    }
    unreachable!("key has at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_create_nested_keys() {
        let mut doc = json!({"scorer": {"name": "bm25"}});
        apply_override(&mut doc, "scorer.k1=1.2").unwrap();
        apply_override(&mut doc, "evolve.mutator.kind=toy").unwrap();
        apply_override(&mut doc, "output_dir=out dir").unwrap();
        assert_eq!(doc, json!({
            "scorer": {"name": "bm25", "k1": 1.2},
            "evolve": {"mutator": {"kind": "toy"}},
            "output_dir": "out dir",
        }));
    }

    #[test]
    fn override_through_scalar_fails() {
        let mut doc = json!({"depth": 10});
        assert!(apply_override(&mut doc, "depth.x=1").is_err());
        assert!(apply_override(&mut doc, "novalue").is_err());
    }

    #[test]
    fn defaults_deserialize() {
        let cfg = RunConfig::load(None, &["scorer.name=ql-dir".into(), "scorer.mu=1500".into()], Some(9)).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.evolve.population.seed, 9);
        assert!(matches!(cfg.scorer, ScorerConfig::QlDir(p) if p.mu == 1500.0));
        assert!(RunConfig::load(None, &["bogus=1".into()], None).is_err());
    }
}
