//! The evolution loop.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::EvolveConfig;
use super::diff::{apply_blocks, parse_diff, summarize, DiffError};
use super::evaluator::Evaluator;
use super::grid::{Candidate, CandidateId, InsertOutcome, Origin};
use super::mutator::Mutator;
use super::population::{MigrationEvent, MutationContext, Population, SelectionMode};
use crate::error::{Error, Result};
use crate::eval::EvalReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepStatus {
    Inserted {
        child: CandidateId,
        #[serde(flatten)]
        outcome: InsertOutcome,
    },
    Rejected {
        child: CandidateId,
        #[serde(flatten)]
        outcome: InsertOutcome,
    },
    MutatorFailed { error: String },
    DiffFailed { kind: String, error: String },
    /// The child got the worst possible fitness and was not inserted.
    EvaluatorFailed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub island: usize,
    pub parent: CandidateId,
    pub selection: SelectionMode,
    #[serde(flatten)]
    pub status: StepStatus,
    pub child_fitness: Option<f64>,
    pub best_fitness: f64,
    pub best_id: CandidateId,
    pub migrations: Vec<MigrationEvent>,
}

impl StepRecord {
    pub fn accepted(&self) -> bool {
        matches!(self.status, StepStatus::Inserted { .. })
    }

    pub fn failed(&self) -> bool {
        matches!(
            self.status,
            StepStatus::MutatorFailed { .. } | StepStatus::DiffFailed { .. } | StepStatus::EvaluatorFailed { .. }
        )
    }
}

/// One line of the JSON-lines lineage log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LineageEvent {
    Candidate(Candidate),
    Step(StepRecord),
}

pub struct Evolution<'a> {
    population: Population,
    mutator: Box<dyn Mutator + 'a>,
    evaluator: Box<dyn Evaluator + 'a>,
    rng: ChaCha8Rng,
    step: usize,
    records: Vec<StepRecord>,
    sink: Option<Box<dyn Write + 'a>>,
}

impl<'a> Evolution<'a> {
    /// Evaluates the seed and places a copy on every island.
    pub fn new(
        seed_program: &str,
        cfg: EvolveConfig,
        mutator: impl Mutator + 'a,
        evaluator: impl Evaluator + 'a,
    ) -> Result<Self> {
        let mut evo = Evolution {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            population: Population::new(cfg)?,
            mutator: Box::new(mutator),
            evaluator: Box::new(evaluator),
            step: 0,
            records: Vec::new(),
            sink: None,
        };
        let report = evo
            .evaluator
            .evaluate(seed_program)
            .map_err(|e| Error::Evaluator(format!("seed program failed to evaluate: {e}")))?;
        if !report.fitness.is_finite() {
            return Err(Error::Evaluator(format!("seed fitness is {}", report.fitness)));
        }
        for island in 0..evo.population.n_islands() {
            let cell = evo.population.cell_of(seed_program, island, None, &mut evo.rng);
            let id = evo.population.register(Candidate {
                id: 0,
                program: seed_program.to_owned(),
                fitness: Some(report.fitness),
                metrics: Some(report.clone()),
                island,
                cell,
                parent_id: None,
                generation: 0,
                migrated: false,
                origin: Origin::Seed,
                step: 0,
                change: None,
            });
            evo.population.try_insert(id)?;
        }
        Ok(evo)
    }

    /// Streams lineage events as JSON lines; the seeds are written at once.
    pub fn with_lineage_sink(mut self, sink: impl Write + 'a) -> Result<Self> {
        self.sink = Some(Box::new(sink));
        let seeds: Vec<Candidate> = self.population.candidates().to_vec();
        for c in seeds {
            self.emit(&LineageEvent::Candidate(c))?;
        }
        Ok(self)
    }

    fn emit(&mut self, event: &LineageEvent) -> Result<()> {
        if let Some(sink) = self.sink.as_mut() {
            let line = serde_json::to_string(event)?;
            writeln!(sink, "{line}").map_err(|e| Error::io("lineage log", e))?;
        }
        Ok(())
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn best(&self) -> &Candidate {
        self.population.best().expect("seeds are always present")
    }

    /// Runs one step. Mutator, diff and evaluator failures are recorded in
    /// the step log rather than returned.
    pub fn step(&mut self) -> Result<&StepRecord> {
        self.step += 1;
        let step = self.step;
        let island = (step - 1) % self.population.n_islands();
        let (parent_id, selection) = self.population.select_parent(island, &mut self.rng)?;
        let ctx = self.population.assemble_context(parent_id, step, &mut self.rng);
        let mut new_candidates = Vec::new();

        let (status, child_fitness) = match self.mutate_and_evaluate(&ctx) {
            Err(status) => (status, None),
            Ok((program, change, report)) => {
                let fitness = report.fitness;
                let parent = self.population.candidate(parent_id);
                let island = parent.island;
                let generation = parent.generation + 1;
                let cell = self.population.cell_of(&program, island, None, &mut self.rng);
                let child = self.population.register(Candidate {
                    id: 0,
                    program,
                    metrics: Some(report),
                    fitness: Some(fitness),
                    island,
                    cell,
                    parent_id: Some(parent_id),
                    generation,
                    migrated: false,
                    origin: Origin::Mutation,
                    step,
                    change: Some(change),
                });
                new_candidates.push(child);
                let outcome = self.population.try_insert(child)?;
                let status = if outcome.inserted() {
                    StepStatus::Inserted { child, outcome }
                } else {
                    StepStatus::Rejected { child, outcome }
                };
                (status, Some(fitness))
            }
        };

        let migrations = if step % self.population.config().migration_interval == 0 {
            let events = self.population.migrate(step, &mut self.rng)?;
            new_candidates.extend(events.iter().map(|e| e.copy));
            events
        } else {
            Vec::new()
        };

        let best = self.best();
        let record = StepRecord {
            step,
            island,
            parent: parent_id,
            selection,
            status,
            child_fitness,
            best_fitness: best.fitness.expect("inserted candidates have fitness"),
            best_id: best.id,
            migrations,
        };
        for id in new_candidates {
            let c = self.population.candidate(id).clone();
            self.emit(&LineageEvent::Candidate(c))?;
        }
        self.emit(&LineageEvent::Step(record.clone()))?;
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    /// Proposes, applies and evaluates one mutation of `ctx.parent`.
    fn mutate_and_evaluate(
        &mut self,
        ctx: &MutationContext,
    ) -> std::result::Result<(String, String, EvalReport), StepStatus> {
        let diff = self
            .mutator
            .propose(ctx)
            .map_err(|e| StepStatus::MutatorFailed { error: e.to_string() })?;
        let diff_failed = |e: DiffError| StepStatus::DiffFailed {
            kind: e.kind().to_owned(),
            error: e.to_string(),
        };
        let blocks = parse_diff(&diff).map_err(diff_failed)?;
        let program = apply_blocks(&ctx.parent.program, &blocks).map_err(diff_failed)?;
        let report = match self.evaluator.evaluate(&program) {
            Ok(r) if r.fitness.is_finite() => r,
            Ok(r) => {
                return Err(StepStatus::EvaluatorFailed {
                    error: format!("non-finite fitness {}", r.fitness),
                })
            }
            Err(e) => return Err(StepStatus::EvaluatorFailed { error: e.to_string() }),
        };
        Ok((program, summarize(&blocks), report))
    }

    pub fn run(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        if let Some(sink) = self.sink.as_mut() {
            sink.flush().map_err(|e| Error::io("lineage log", e))?;
        }
        Ok(())
    }

    pub fn into_outcome(self) -> EvolveOutcome {
        EvolveOutcome {
            best: self.best().clone(),
            records: self.records,
            population: self.population,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub best: Candidate,
    pub records: Vec<StepRecord>,
    pub population: Population,
}

impl EvolveOutcome {
    /// `(step, best fitness)` including step 0.
    pub fn trajectory(&self) -> Vec<(usize, f64)> {
        let seed = self.population.candidate(0).fitness.expect("seed has fitness");
        std::iter::once((0, seed))
            .chain(self.records.iter().map(|r| (r.step, r.best_fitness)))
            .collect()
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("step,best_fitness,accepted\n");
        let seed = self.population.candidate(0).fitness.expect("seed has fitness");
        out.push_str(&format!("0,{seed},true\n"));
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.step, r.best_fitness, r.accepted()));
        }
        out
    }
}

/// Runs `steps` steps from `seed_program` and returns the best candidate
/// with the full step log.
pub fn evolve_loop(
    seed_program: &str,
    steps: usize,
    mutator: impl Mutator,
    evaluator: impl Evaluator,
    cfg: EvolveConfig,
) -> Result<EvolveOutcome> {
    let mut evo = Evolution::new(seed_program, cfg, mutator, evaluator)?;
    evo.run(steps)?;
    Ok(evo.into_outcome())
}
