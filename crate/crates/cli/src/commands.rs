use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lexevolve::corpus::{self, Dataset, Qrels};
use lexevolve::eval::{evaluate_run, paired_ttest, EvalReport, Gain, PreparedDataset};
use lexevolve::evolve::mutator::{toy_seed, ToyMutatorConfig};
use lexevolve::evolve::{
    Evaluator, Evolution, HttpMutator, MarkerEvaluator, Mutator, ParamJitterMutator, ScorerEvaluator,
    ScriptedMutator, StepStatus, SubprocessEvaluator, ToyMutator,
};
use lexevolve::index::{ChannelIndex, IndexSet};
use lexevolve::run::{read_run, write_run};
use serde::Serialize;

use crate::config::{DatasetSpec, EvaluatorSpec, MutatorSpec, RunConfig};
use crate::UsageError;

fn dataset_name(spec: &DatasetSpec) -> String {
    spec.path
        .canonicalize()
        .unwrap_or_else(|_| spec.path.clone())
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn index(cfg: &RunConfig) -> Result<()> {
    cfg.require_datasets()?;
    let channels = cfg.channels();
    if channels.is_empty() {
        bail!(UsageError("no channels to index".into()));
    }
    for spec in &cfg.datasets {
        let name = dataset_name(spec);
        let documents = corpus::load_corpus(spec.path.join("corpus.jsonl"))?;
        let dir = cfg.output_dir.join("index").join(&name);
        create_dir(&dir)?;
        let mut total = std::time::Duration::ZERO;
        for &channel in &channels {
            let idx = ChannelIndex::build(&documents, channel);
            total += idx.build_time();
            let path = dir.join(format!("{channel}.idx"));
            idx.save(&path)?;
            println!("{name}\t{channel}\t{} terms\t{}", idx.vocab_size(), path.display());
        }
        let per_doc = if documents.is_empty() {
            0.0
        } else {
            total.as_secs_f64() * 1e3 / documents.len() as f64
        };
        println!("{name}\t{} docs\tindexing {per_doc:.4} ms/doc", documents.len());
    }
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    cfg.require_datasets()?;
    let opts = cfg.eval_options();
    let scorer = &cfg.scorer;
    let run_dir = cfg.output_dir.join("runs");
    create_dir(&run_dir)?;
    let mut reports = Vec::new();
    for spec in &cfg.datasets {
        let mut ds = Dataset::load_beir(&spec.path, &spec.split)?;
        ds.name = dataset_name(spec);
        let indexes = IndexSet::build(&ds.documents, &scorer.channels());
        let prepared = PreparedDataset::new(ds, indexes);
        let (report, run) = prepared.evaluate(scorer, &opts)?;
        let path = run_dir.join(format!("{}.{}.trec", report.name, scorer.name()));
        write_run(&run, scorer.name(), &path, Some(opts.depth))?;
        eprintln!("wrote {}", path.display());
        reports.push(report);
    }
    let report = EvalReport::from_datasets(scorer.name(), reports)?;
    let path = cfg.output_dir.join(format!("report.{}.json", scorer.name()));
    fs::write(&path, report.to_json_pretty()).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    print!("{}", report.to_table());
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct MetricComparison {
    pub metric: &'static str,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub significant: bool,
}

pub fn compare(run_a: &Path, run_b: &Path, qrels: &Path, gain: Gain, alpha: f64, json: Option<&Path>) -> Result<()> {
    for p in [run_a, run_b, qrels] {
        if !p.is_file() {
            bail!(UsageError(format!("{} does not exist", p.display())));
        }
    }
    let a = read_run(run_a)?;
    let b = read_run(run_b)?;
    let qa: BTreeSet<&str> = a.query_ids().collect();
    let qb: BTreeSet<&str> = b.query_ids().collect();
    if qa != qb {
        let only_a = qa.difference(&qb).count();
        let only_b = qb.difference(&qa).count();
        bail!(UsageError(format!(
            "runs cover different query sets ({only_a} only in A, {only_b} only in B)"
        )));
    }
    let qrels = Qrels::from_entries(&corpus::load_qrels(qrels)?);
    let ma = evaluate_run(&a, &qrels, gain);
    let mb = evaluate_run(&b, &qrels, gain);
    let mut rows = Vec::new();
    type Pick = fn(&lexevolve::eval::QueryMetrics) -> f64;
    let metrics: [(&str, Pick); 2] = [("nDCG@10", |m| m.ndcg10), ("R@100", |m| m.recall100)];
    for (metric, pick) in metrics {
        let xa: Vec<f64> = ma.per_query.values().map(pick).collect();
        let xb: Vec<f64> = mb.per_query.values().map(pick).collect();
        let t = paired_ttest(&xa, &xb)?;
        rows.push(MetricComparison {
            metric,
            mean_a: xa.iter().sum::<f64>() / xa.len() as f64,
            mean_b: xb.iter().sum::<f64>() / xb.len() as f64,
            mean_diff: t.mean_diff,
            t: t.t,
            df: t.df,
            p: t.p,
            significant: t.significant(alpha),
        });
    }
    println!("queries: {}  (A = {}, B = {})", ma.n_queries(), run_a.display(), run_b.display());
    println!("{:<8} {:>8} {:>8} {:>9} {:>9} {:>4} {:>8}  sig@{alpha}", "metric", "A", "B", "A-B", "t", "df", "p");
    for r in &rows {
        println!(
            "{:<8} {:>8.4} {:>8.4} {:>+9.4} {:>9.4} {:>4} {:>8.4}  {}",
            r.metric,
            r.mean_a,
            r.mean_b,
            r.mean_diff,
            r.t,
            r.df,
            r.p,
            if r.significant { "yes" } else { "no" }
        );
    }
    if let Some(path) = json {
        fs::write(path, serde_json::to_string_pretty(&rows)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn build_mutator(spec: &MutatorSpec, seed: u64) -> Result<Box<dyn Mutator>> {
    Ok(match spec {
        MutatorSpec::Toy { p_add, p_remove } => {
            let ok = |p: f64| (0.0..=1.0).contains(&p);
            if !(ok(*p_add) && ok(*p_remove) && ok(p_add + p_remove)) {
                bail!(UsageError(format!("toy mutator needs probabilities with p_add + p_remove <= 1, got {p_add} and {p_remove}")));
            }
            Box::new(ToyMutator::new(ToyMutatorConfig {
                p_add: *p_add,
                p_remove: *p_remove,
                seed,
            }))
        }
        MutatorSpec::Jitter { scale } => Box::new(ParamJitterMutator::new(seed, *scale)?),
        MutatorSpec::Scripted { diffs } => {
            if diffs.is_empty() {
                bail!(UsageError("scripted mutator needs at least one diff file".into()));
            }
            let texts = diffs
                .iter()
                .map(|p| fs::read_to_string(p).map_err(|e| UsageError(format!("cannot read diff {}: {e}", p.display()))))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Box::new(ScriptedMutator::new(texts))
        }
        MutatorSpec::Http(http) => Box::new(HttpMutator::new(http.clone())?),
    })
}

fn build_evaluator(cfg: &RunConfig) -> Result<Box<dyn Evaluator>> {
    Ok(match &cfg.evolve.evaluator {
        EvaluatorSpec::Marker => Box::new(MarkerEvaluator),
        EvaluatorSpec::Subprocess { command, args } => Box::new(SubprocessEvaluator::new(command.clone(), args.clone())),
        EvaluatorSpec::Scorer => {
            cfg.require_datasets()?;
            let mut prepared = Vec::new();
            for spec in &cfg.datasets {
                let mut ds = Dataset::load_beir(&spec.path, &spec.split)?;
                ds.name = dataset_name(spec);
                prepared.push(PreparedDataset::build(ds));
            }
            Box::new(ScorerEvaluator::new(prepared, cfg.eval_options())?)
        }
    })
}

fn seed_program(cfg: &RunConfig) -> Result<String> {
    if let Some(p) = &cfg.evolve.seed_program {
        return fs::read_to_string(p).map_err(|e| UsageError(format!("cannot read seed program {}: {e}", p.display())).into());
    }
    match cfg.evolve.evaluator {
        EvaluatorSpec::Scorer => Ok(cfg.scorer.to_json_pretty()),
        EvaluatorSpec::Marker => Ok(toy_seed()),
        EvaluatorSpec::Subprocess { .. } => {
            bail!(UsageError("the subprocess evaluator needs evolve.seed_program".into()))
        }
    }
}

pub fn evolve(cfg: &RunConfig, quiet: bool) -> Result<()> {
    let spec = &cfg.evolve;
    // Everything that can be misconfigured is checked before step 0.
    let mutator = build_mutator(&spec.mutator, cfg.seed)?;
    let seed = seed_program(cfg)?;
    let evaluator = build_evaluator(cfg)?;
    create_dir(&cfg.output_dir)?;
    let out = |name: &str| cfg.output_dir.join(name);
    let lineage_path = out("lineage.jsonl");
    let lineage = BufWriter::new(File::create(&lineage_path).with_context(|| format!("creating {}", lineage_path.display()))?);

    let mut evo = Evolution::new(&seed, spec.population.clone(), mutator, evaluator)?.with_lineage_sink(lineage)?;
    let initial = evo.best().fitness.expect("seed is evaluated");
    for _ in 0..spec.steps {
        let r = evo.step()?;
        if !quiet {
            let what = match &r.status {
                StepStatus::Inserted { child, outcome } => format!("child {child} {}", outcome_name(outcome)),
                StepStatus::Rejected { child, .. } => format!("child {child} rejected"),
                StepStatus::MutatorFailed { error } => format!("mutator failed: {error}"),
                StepStatus::DiffFailed { kind, .. } => format!("diff failed ({kind})"),
                StepStatus::EvaluatorFailed { error } => format!("evaluator failed: {error}"),
            };
            let fit = r.child_fitness.map(|f| format!("{f:.4}")).unwrap_or_else(|| "-".into());
            let mig = if r.migrations.is_empty() {
                String::new()
            } else {
                format!(", {} migrant copies", r.migrations.len())
            };
            eprintln!(
                "step {:>4} island {} {:<8} {what} fitness {fit} best {:.4}{mig}",
                r.step,
                r.island,
                format!("{:?}", r.selection).to_lowercase(),
                r.best_fitness
            );
        }
    }
    let outcome = evo.into_outcome();
    let best = &outcome.best;

    write_file(&out("best_program.txt"), best.program.as_bytes())?;
    write_file(&out("best.json"), serde_json::to_string_pretty(best)?.as_bytes())?;
    write_file(&out("trajectory.csv"), outcome.trajectory_csv().as_bytes())?;
    let accepted = outcome.records.iter().filter(|r| r.accepted()).count();
    let failed = outcome.records.iter().filter(|r| r.failed()).count();
    println!(
        "steps: {}  accepted: {accepted}  failed: {failed}  candidates: {}",
        outcome.records.len(),
        outcome.population.candidates().len()
    );
    println!(
        "fitness: initial {initial:.6}  best {:.6}  (candidate {}, island {}, generation {})",
        best.fitness.expect("evaluated"),
        best.id,
        best.island,
        best.generation
    );
    println!("outputs: {}", cfg.output_dir.display());
    Ok(())
}

fn outcome_name(o: &lexevolve::evolve::InsertOutcome) -> &'static str {
    match o {
        lexevolve::evolve::InsertOutcome::Accepted => "placed",
        lexevolve::evolve::InsertOutcome::Evicted { .. } => "replaced occupant",
        lexevolve::evolve::InsertOutcome::Rejected { .. } => "rejected",
    }
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(bytes).with_context(|| format!("writing {}", path.display()))
}
