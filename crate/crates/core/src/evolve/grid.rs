//! Candidates and the per-island MAP-Elites grid.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eval::EvalReport;

pub type CandidateId = u64;
pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Origin {
    Seed,
    Mutation,
    Migration { source: CandidateId, from_island: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandidateId,
    pub program: String,
    pub metrics: Option<EvalReport>,
    pub fitness: Option<f64>,
    pub island: usize,
    pub cell: Cell,
    pub parent_id: Option<CandidateId>,
    pub generation: u32,
    pub migrated: bool,
    pub origin: Origin,
    /// Step at which the candidate was created.
    pub step: usize,
    /// What the mutation that produced this candidate changed.
    pub change: Option<String>,
}

impl Candidate {
    /// Sorting key: higher fitness first, older candidates win ties.
    pub(crate) fn rank_key(&self) -> (f64, std::cmp::Reverse<CandidateId>) {
        (self.fitness.unwrap_or(f64::NEG_INFINITY), std::cmp::Reverse(self.id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum InsertOutcome {
    Accepted,
    Rejected { occupant: CandidateId, occupant_fitness: f64 },
    Evicted { old: CandidateId, old_fitness: f64 },
}

impl InsertOutcome {
    pub fn inserted(&self) -> bool {
        !matches!(self, InsertOutcome::Rejected { .. })
    }
}

/// Log-scale bin of `value` over `[lo, hi]`; values outside clamp to the
/// edge bins. The small epsilon keeps exact boundaries from rounding down.
pub fn log_bin(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if value <= lo {
        return 0;
    }
    let frac = (value.ln() - lo.ln()) / (hi.ln() - lo.ln());
    ((frac * bins as f64 + 1e-9).floor() as usize).min(bins - 1)
}

/// Linear bin of `value` over `[0, hi]`, clamped.
pub fn linear_bin(value: f64, hi: f64, bins: usize) -> usize {
    if value <= 0.0 {
        return 0;
    }
    (((value / hi) * bins as f64 + 1e-9).floor() as usize).min(bins - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandGrid {
    bins: usize,
    elite_size: usize,
    cells: BTreeMap<Cell, (CandidateId, f64)>,
    /// Best candidates ever accepted, best first.
    elites: Vec<(CandidateId, f64)>,
}

impl IslandGrid {
    pub fn new(bins: usize, elite_size: usize) -> Self {
        IslandGrid {
            bins,
            elite_size,
            cells: BTreeMap::new(),
            elites: Vec::new(),
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Inserts when the cell is empty or `fitness` strictly beats the
    /// occupant.
    pub fn try_insert(&mut self, id: CandidateId, cell: Cell, fitness: f64) -> InsertOutcome {
        assert!(cell.0 < self.bins && cell.1 < self.bins, "cell {cell:?} outside {0}x{0} grid", self.bins);
        let outcome = match self.cells.get(&cell) {
            None => InsertOutcome::Accepted,
            Some(&(occupant, occupant_fitness)) if fitness <= occupant_fitness => {
                return InsertOutcome::Rejected {
                    occupant,
                    occupant_fitness,
                }
            }
            Some(&(old, old_fitness)) => InsertOutcome::Evicted { old, old_fitness },
        };
        self.cells.insert(cell, (id, fitness));
        self.update_elites(id, fitness);
        outcome
    }

    fn update_elites(&mut self, id: CandidateId, fitness: f64) {
        let pos = self
            .elites
            .iter()
            .position(|&(eid, f)| fitness > f || (fitness == f && id < eid))
            .unwrap_or(self.elites.len());
        if pos < self.elite_size {
            self.elites.insert(pos, (id, fitness));
            self.elites.truncate(self.elite_size);
        }
    }

    pub fn occupant(&self, cell: Cell) -> Option<(CandidateId, f64)> {
        self.cells.get(&cell).copied()
    }

    /// Current occupants in id order.
    pub fn members(&self) -> Vec<CandidateId> {
        let mut ids: Vec<CandidateId> = self.cells.values().map(|&(id, _)| id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell, CandidateId, f64)> + '_ {
        self.cells.iter().map(|(&c, &(id, f))| (c, id, f))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn elites(&self) -> Vec<CandidateId> {
        self.elites.iter().map(|&(id, _)| id).collect()
    }

    pub fn best(&self) -> Option<(CandidateId, f64)> {
        self.cells
            .values()
            .copied()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
    }
}
