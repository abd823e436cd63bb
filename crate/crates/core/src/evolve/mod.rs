//! Island-model MAP-Elites program evolution.

pub mod config;
pub mod diff;
pub mod engine;
pub mod evaluator;
pub mod grid;
pub mod mutator;
pub mod population;

pub use config::EvolveConfig;
pub use diff::{apply_diff, parse_diff, DiffBlock, DiffError};
pub use engine::{evolve_loop, EvolveOutcome, Evolution, LineageEvent, StepRecord, StepStatus};
pub use evaluator::{Evaluator, MarkerEvaluator, ScorerEvaluator, SubprocessEvaluator};
pub use grid::{Candidate, CandidateId, Cell, InsertOutcome, IslandGrid, Origin};
pub use mutator::{
    HttpMutator, HttpMutatorConfig, Mutator, ParamJitterMutator, ScriptedMutator, ToyMutator, ToyMutatorConfig,
};
pub use population::{MigrationEvent, MutationContext, Population, SelectionMode};
