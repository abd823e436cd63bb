use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    /// Number of islands (K).
    pub islands: usize,
    /// Bins per behavioural axis (B).
    pub bins: usize,
    /// Migration every this many steps (M).
    pub migration_interval: usize,
    /// Fraction of each island that migrates (gamma).
    pub migration_fraction: f64,
    /// Best programs shown to the mutator (T).
    pub top_inspirations: usize,
    /// Random programs shown to the mutator (S).
    pub random_inspirations: usize,
    /// Probability of uniform sampling from the island.
    #[serde(alias = "p_e")]
    pub p_explore: f64,
    /// Probability of uniform sampling from the elite archive.
    #[serde(alias = "p_x")]
    pub p_exploit: f64,
    pub elite_size: usize,
    /// Log-scale complexity bins span `[min, max]` characters.
    pub complexity_range: (f64, f64),
    /// Upper end of the linear diversity bins; defaults to the complexity max.
    pub diversity_max: Option<f64>,
    /// Island members sampled for the diversity estimate.
    pub diversity_sample: usize,
    /// Compare against every island member instead of a sample (slow).
    pub exact_diversity: bool,
    /// Lineage summaries included as prior changes.
    pub prior_changes: usize,
    pub seed: u64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            islands: 3,
            bins: 12,
            migration_interval: 20,
            migration_fraction: 0.15,
            top_inspirations: 4,
            random_inspirations: 4,
            p_explore: 0.2,
            p_exploit: 0.2,
            elite_size: 8,
            complexity_range: (10.0, 100_000.0),
            diversity_max: None,
            diversity_sample: 10,
            exact_diversity: false,
            prior_changes: 5,
            seed: 0,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.islands == 0 || self.bins == 0 || self.migration_interval == 0 {
            return bad("islands, bins and migration_interval must be >= 1".into());
        }
        if self.elite_size == 0 {
            return bad("elite_size must be >= 1".into());
        }
        if !(self.migration_fraction > 0.0 && self.migration_fraction <= 1.0) {
            return bad(format!("migration_fraction must be in (0, 1], got {}", self.migration_fraction));
        }
        for (name, p) in [("p_explore", self.p_explore), ("p_exploit", self.p_exploit)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.p_explore + self.p_exploit > 1.0 + 1e-12 {
            return bad("p_explore + p_exploit must be <= 1".into());
        }
        let (lo, hi) = self.complexity_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return bad(format!("complexity_range must satisfy 0 < min < max, got [{lo}, {hi}]"));
        }
        if let Some(d) = self.diversity_max {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("diversity_max must be positive, got {d}"));
            }
        }
        Ok(())
    }

    pub fn diversity_max(&self) -> f64 {
        self.diversity_max.unwrap_or(self.complexity_range.1)
    }
}
