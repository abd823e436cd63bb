//! Wall-clock latency per unit of work (ms/doc, ms/query).

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Indexing,
    Query,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Indexing => "ms/doc",
            Phase::Query => "ms/query",
        })
    }
}

/// Milliseconds per unit for a measured total.
pub fn ms_per_unit(total: Duration, units: usize) -> Result<f64> {
    if units == 0 {
        return Err(Error::Precondition("latency workload has zero units".into()));
    }
    Ok(total.as_secs_f64() * 1e3 / units as f64)
}

/// Runs `work` once on the current thread and returns ms per unit.
pub fn measure_latency<T>(units: usize, work: impl FnOnce() -> T) -> Result<(T, f64)> {
    if units == 0 {
        return Err(Error::Precondition("latency workload has zero units".into()));
    }
    let start = Instant::now();
    let out = work();
    Ok((out, ms_per_unit(start.elapsed(), units)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub phase: Phase,
    pub repeats: usize,
    pub mean_ms: f64,
    /// Sample variance across repeats; 0 for a single repeat.
    pub variance_ms2: f64,
}

/// Repeats `work` and reports mean and variance of ms per unit.
pub fn measure_repeated(phase: Phase, units: usize, repeats: usize, mut work: impl FnMut()) -> Result<LatencyStats> {
    if repeats == 0 {
        return Err(Error::Precondition("latency needs at least one repeat".into()));
    }
    let samples = (0..repeats)
        .map(|_| measure_latency(units, &mut work).map(|(_, ms)| ms))
        .collect::<Result<Vec<f64>>>()?;
    let mean = samples.iter().sum::<f64>() / repeats as f64;
    let variance = if repeats > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64
    } else {
        0.0
    };
    Ok(LatencyStats {
        phase,
        repeats,
        mean_ms: mean,
        variance_ms2: variance,
    })
}
