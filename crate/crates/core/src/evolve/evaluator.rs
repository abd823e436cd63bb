//! Evaluation backends: program text in, report out.

use std::io::Write as _;
use std::process::{Command, Stdio};

use super::mutator::TOY_MARKER;
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, EvalReport, PreparedDataset};
use crate::scoring::ScorerConfig;

pub trait Evaluator {
    fn evaluate(&self, program: &str) -> Result<EvalReport>;
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&self, program: &str) -> Result<EvalReport> {
        (**self).evaluate(program)
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn evaluate(&self, program: &str) -> Result<EvalReport> {
        (**self).evaluate(program)
    }
}

/// Toy fitness: number of whitespace-separated marker tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct MarkerEvaluator;

pub fn count_markers(program: &str) -> usize {
    program.split_whitespace().filter(|t| *t == TOY_MARKER).count()
}

impl Evaluator for MarkerEvaluator {
    fn evaluate(&self, program: &str) -> Result<EvalReport> {
        Ok(EvalReport::synthetic("toy", count_markers(program) as f64))
    }
}

/// Parses the program as a JSON scorer configuration and evaluates it on
/// every dataset.
pub struct ScorerEvaluator {
    datasets: Vec<PreparedDataset>,
    opts: EvalOptions,
}

impl ScorerEvaluator {
    pub fn new(datasets: Vec<PreparedDataset>, opts: EvalOptions) -> Result<Self> {
        if datasets.is_empty() {
            return Err(Error::Precondition("scorer evaluator needs at least one dataset".into()));
        }
        Ok(ScorerEvaluator { datasets, opts })
    }
}

impl Evaluator for ScorerEvaluator {
    fn evaluate(&self, program: &str) -> Result<EvalReport> {
        let scorer = ScorerConfig::from_json(program)?;
        let reports = self
            .datasets
            .iter()
            .map(|d| d.evaluate(&scorer, &self.opts).map(|(r, _)| r))
            .collect::<Result<Vec<_>>>()?;
        EvalReport::from_datasets(scorer.name(), reports)
    }
}

/// Runs an external command with the program on stdin; expects an
/// `EvalReport` as JSON on stdout. No sandboxing is applied.
#[derive(Debug, Clone)]
pub struct SubprocessEvaluator {
    pub command: String,
    pub args: Vec<String>,
}

impl SubprocessEvaluator {
    pub fn new(command: impl Into<String>, args: Vec<String>) -> Self {
        SubprocessEvaluator {
            command: command.into(),
            args,
        }
    }
}

impl Evaluator for SubprocessEvaluator {
    fn evaluate(&self, program: &str) -> Result<EvalReport> {
        let mut child = Command::new(&self.command)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Evaluator(format!("cannot start `{}`: {e}", self.command)))?;
        // Write from a thread so a child that streams output before
        // reading all of stdin cannot deadlock us.
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let input = program.to_owned();
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let out = child
            .wait_with_output()
            .map_err(|e| Error::Evaluator(format!("`{}` failed: {e}", self.command)))?;
        // A child that exits without reading stdin produces a broken pipe;
        // its exit status is what matters.
        let _ = writer.join();
        if !out.status.success() {
            return Err(Error::Evaluator(format!(
                "`{}` exited with {}: {}",
                self.command,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        serde_json::from_slice(&out.stdout)
            .map_err(|e| Error::Evaluator(format!("`{}` printed an invalid report: {e}", self.command)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dataset, Document, QrelEntry, Query};

    #[test]
    fn markers() {
        assert_eq!(count_markers("MARK a\nMARK b\nMARKED\n<end>"), 2);
        assert_eq!(MarkerEvaluator.evaluate("MARK").unwrap().fitness, 1.0);
    }

    #[test]
    fn scorer_evaluator_runs_configs() {
        let ds = Dataset::new(
            "toy",
            vec![Document::new("d1", "apple pie"), Document::new("d2", "banana")],
            vec![Query::new("q1", "apple")],
            vec![QrelEntry::new("q1", "d1", 1)],
        )
        .unwrap();
        let ev = ScorerEvaluator::new(vec![PreparedDataset::build(ds)], EvalOptions::default()).unwrap();
        let r = ev.evaluate(r#"{"name": "bm25"}"#).unwrap();
        assert_eq!(r.fitness, 1.0);
        assert!(ev.evaluate("not json").is_err());
        assert!(ev.evaluate(r#"{"name": "bm25", "k1": -1.0}"#).is_err());
    }

    #[cfg(unix)]
    #[test]
    fn subprocess_round_trip() {
        let report = EvalReport::synthetic("ext", 0.25).to_json_pretty();
        let ev = SubprocessEvaluator::new("sh", vec!["-c".into(), format!("cat >/dev/null; printf '%s' '{report}'")]);
        assert_eq!(ev.evaluate("program").unwrap().fitness, 0.25);
        let bad = SubprocessEvaluator::new("sh", vec!["-c".into(), "exit 3".into()]);
        assert!(matches!(bad.evaluate("p"), Err(Error::Evaluator(_))));
        let missing = SubprocessEvaluator::new("/nonexistent/evaluator", vec![]);
        assert!(missing.evaluate("p").is_err());
    }
}
