//! The island-partitioned population database. All mutation goes through
//! `&mut self`, so there is a single writer by construction.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::EvolveConfig;
use super::grid::{linear_bin, log_bin, Candidate, CandidateId, Cell, InsertOutcome, IslandGrid, Origin};
use crate::error::{Error, Result};

/// Added to the fitness shift so the worst member keeps a positive weight.
pub const WEIGHT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Explore,
    Exploit,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertRecord {
    pub island: usize,
    pub cell: Cell,
    pub candidate: CandidateId,
    pub fitness: f64,
    #[serde(flatten)]
    pub outcome: InsertOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationEvent {
    pub step: usize,
    pub from_island: usize,
    pub to_island: usize,
    pub source: CandidateId,
    pub copy: CandidateId,
    pub fitness: f64,
    #[serde(flatten)]
    pub outcome: InsertOutcome,
}

/// What the mutator sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationContext {
    pub island: usize,
    pub step: usize,
    pub parent: Candidate,
    pub top: Vec<Candidate>,
    pub random: Vec<Candidate>,
    /// Most recent first.
    pub prior_changes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Population {
    cfg: EvolveConfig,
    candidates: Vec<Candidate>,
    grids: Vec<IslandGrid>,
    inserts: Vec<InsertRecord>,
}

impl Population {
    pub fn new(cfg: EvolveConfig) -> Result<Self> {
        cfg.validate()?;
        let grids = (0..cfg.islands)
            .map(|_| IslandGrid::new(cfg.bins, cfg.elite_size))
            .collect();
        Ok(Population {
            cfg,
            candidates: Vec::new(),
            grids,
            inserts: Vec::new(),
        })
    }

    pub fn config(&self) -> &EvolveConfig {
        &self.cfg
    }

    pub fn n_islands(&self) -> usize {
        self.grids.len()
    }

    pub fn candidate(&self, id: CandidateId) -> &Candidate {
        &self.candidates[id as usize]
    }

    /// Every candidate ever created, inserted or not, in id order.
    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn grid(&self, island: usize) -> &IslandGrid {
        &self.grids[island]
    }

    pub fn members(&self, island: usize) -> Vec<CandidateId> {
        self.grids[island].members()
    }

    pub fn insert_log(&self) -> &[InsertRecord] {
        &self.inserts
    }

    pub fn next_id(&self) -> CandidateId {
        self.candidates.len() as CandidateId
    }

    /// Best current occupant over all islands.
    pub fn best(&self) -> Option<&Candidate> {
        self.grids
            .iter()
            .filter_map(IslandGrid::best)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(id, _)| self.candidate(id))
    }

    /// `(complexity_bin, diversity_bin)` of `program` relative to the
    /// current members of `island`, excluding `exclude`.
    pub fn cell_of(&self, program: &str, island: usize, exclude: Option<CandidateId>, rng: &mut impl Rng) -> Cell {
        let b = self.cfg.bins;
        let (lo, hi) = self.cfg.complexity_range;
        let length = program.chars().count() as f64;
        let complexity = log_bin(length, lo, hi, b);

        let others: Vec<CandidateId> = self
            .members(island)
            .into_iter()
            .filter(|&id| Some(id) != exclude)
            .collect();
        let reference: Vec<CandidateId> = if self.cfg.exact_diversity {
            others
        } else {
            others
                .choose_multiple(rng, self.cfg.diversity_sample)
                .copied()
                .collect()
        };
        let distance = if reference.is_empty() {
            0.0
        } else {
            reference
                .iter()
                .map(|&id| strsim::levenshtein(program, &self.candidate(id).program) as f64)
                .sum::<f64>()
                / reference.len() as f64
        };
        (complexity, linear_bin(distance, self.cfg.diversity_max(), b))
    }

    /// Stores a candidate (assigning its id) without inserting it anywhere.
    pub fn register(&mut self, mut cand: Candidate) -> CandidateId {
        let id = self.next_id();
        cand.id = id;
        self.candidates.push(cand);
        id
    }

    /// Offers a stored, evaluated candidate to its island's grid.
    pub fn try_insert(&mut self, id: CandidateId) -> Result<InsertOutcome> {
        let cand = &self.candidates[id as usize];
        let fitness = cand
            .fitness
            .ok_or_else(|| Error::Precondition(format!("candidate {id} has no fitness")))?;
        let (island, cell) = (cand.island, cand.cell);
        let outcome = self.grids[island].try_insert(id, cell, fitness);
        self.inserts.push(InsertRecord {
            island,
            cell,
            candidate: id,
            fitness,
            outcome,
        });
        Ok(outcome)
    }

    pub fn select_parent(&self, island: usize, rng: &mut impl Rng) -> Result<(CandidateId, SelectionMode)> {
        let members = self.members(island);
        if members.is_empty() {
            return Err(Error::Precondition(format!("island {island} is empty")));
        }
        let r: f64 = rng.gen();
        if r < self.cfg.p_explore {
            return Ok((*members.choose(rng).expect("non-empty"), SelectionMode::Explore));
        }
        if r < self.cfg.p_explore + self.cfg.p_exploit {
            let elites = self.grids[island].elites();
            if let Some(&id) = elites.choose(rng) {
                return Ok((id, SelectionMode::Exploit));
            }
        }
        let fitness: Vec<f64> = members
            .iter()
            .map(|&id| self.candidate(id).fitness.unwrap_or(0.0))
            .collect();
        let min = fitness.iter().copied().fold(f64::INFINITY, f64::min);
        // Positive fitness is used as-is; otherwise everything is shifted up
        // so the worst member keeps a small positive weight.
        let shift = if min > 0.0 { 0.0 } else { min - WEIGHT_EPSILON };
        let weights: Vec<f64> = fitness.iter().map(|f| f - shift).collect();
        let total: f64 = weights.iter().sum();
        let mut x = rng.gen::<f64>() * total;
        for (&id, w) in members.iter().zip(&weights) {
            if x < *w {
                return Ok((id, SelectionMode::Weighted));
            }
            x -= w;
        }
        Ok((*members.last().expect("non-empty"), SelectionMode::Weighted))
    }

    /// Lineage change summaries, most recent first, capped by config.
    pub fn prior_changes(&self, id: CandidateId) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            if out.len() == self.cfg.prior_changes {
                break;
            }
            let cand = self.candidate(c);
            if let Some(change) = &cand.change {
                out.push(change.clone());
            }
            cur = cand.parent_id;
        }
        out
    }

    pub fn assemble_context(&self, parent: CandidateId, step: usize, rng: &mut impl Rng) -> MutationContext {
        let parent_c = self.candidate(parent).clone();
        let island = parent_c.island;
        let mut others: Vec<&Candidate> = self
            .members(island)
            .into_iter()
            .filter(|&id| id != parent)
            .map(|id| self.candidate(id))
            .collect();
        others.sort_by(|a, b| b.rank_key().partial_cmp(&a.rank_key()).expect("finite fitness"));
        let split = others.len().min(self.cfg.top_inspirations);
        let top: Vec<Candidate> = others[..split].iter().map(|c| (*c).clone()).collect();
        let rest = &others[split..];
        let random: Vec<Candidate> = rest
            .choose_multiple(rng, self.cfg.random_inspirations)
            .map(|c| (*c).clone())
            .collect();
        MutationContext {
            island,
            step,
            prior_changes: self.prior_changes(parent),
            parent: parent_c,
            top,
            random,
        }
    }

    fn neighbours(&self, island: usize) -> Vec<usize> {
        let k = self.grids.len();
        let mut out = vec![(island + 1) % k, (island + k - 1) % k];
        out.retain(|&j| j != island);
        out.dedup();
        out
    }

    /// Copies the top `ceil(gamma * size)` never-migrated members of every
    /// island to its ring neighbours. Uses a snapshot of the islands taken
    /// before any copy lands.
    pub fn migrate(&mut self, step: usize, rng: &mut impl Rng) -> Result<Vec<MigrationEvent>> {
        if step == 0 || step % self.cfg.migration_interval != 0 {
            return Err(Error::Precondition(format!(
                "migration at step {step} is not a positive multiple of {}",
                self.cfg.migration_interval
            )));
        }
        let snapshot: Vec<Vec<CandidateId>> = (0..self.grids.len()).map(|i| self.members(i)).collect();
        let mut events = Vec::new();
        for (island, members) in snapshot.iter().enumerate() {
            let neighbours = self.neighbours(island);
            if members.is_empty() || neighbours.is_empty() {
                continue;
            }
            let quota = (self.cfg.migration_fraction * members.len() as f64).ceil() as usize;
            let mut eligible: Vec<&Candidate> = members
                .iter()
                .map(|&id| self.candidate(id))
                .filter(|c| !c.migrated)
                .collect();
            eligible.sort_by(|a, b| b.rank_key().partial_cmp(&a.rank_key()).expect("finite fitness"));
            let migrants: Vec<CandidateId> = eligible.iter().take(quota).map(|c| c.id).collect();
            for source in migrants {
                self.candidates[source as usize].migrated = true;
                for &to in &neighbours {
                    let src = self.candidate(source);
                    let mut copy = src.clone();
                    copy.island = to;
                    copy.parent_id = Some(source);
                    copy.origin = Origin::Migration {
                        source,
                        from_island: island,
                    };
                    copy.step = step;
                    copy.change = None;
                    copy.migrated = true;
                    copy.cell = self.cell_of(&src.program, to, None, rng);
                    let fitness = copy.fitness.expect("members are evaluated");
                    let id = self.register(copy);
                    let outcome = self.try_insert(id)?;
                    events.push(MigrationEvent {
                        step,
                        from_island: island,
                        to_island: to,
                        source,
                        copy: id,
                        fitness,
                        outcome,
                    });
                }
            }
        }
        Ok(events)
    }
}
