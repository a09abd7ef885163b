//! Availability and latency of federated (distributed) search compared with
//! a harvested central index.
//!
//! Sources are assumed to fail independently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FederationSourceStats {
    /// Probability in `[0, 1]` that the source answers.
    pub uptime: f64,
    /// Response time in milliseconds.
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FederationError {
    #[error("a federation needs at least one source")]
    EmptyFederation,
    #[error("source {index}: uptime {value} is outside [0, 1]")]
    BadUptime { index: usize, value: f64 },
    #[error("source {index}: latency {value} must be finite and non-negative")]
    BadLatency { index: usize, value: f64 },
}

impl FederationSourceStats {
    pub fn new(uptime: f64, latency: f64) -> Self {
        FederationSourceStats { uptime, latency }
    }
}

/// Checks the per-source invariants.
pub fn validate(sources: &[FederationSourceStats]) -> Result<(), FederationError> {
    for (index, s) in sources.iter().enumerate() {
        if !(0.0..=1.0).contains(&s.uptime) {
            return Err(FederationError::BadUptime { index, value: s.uptime });
        }
        if !s.latency.is_finite() || s.latency < 0.0 {
            return Err(FederationError::BadLatency { index, value: s.latency });
        }
    }
    Ok(())
}

/// Probability that every source is up. Empty federation: 1.
///
/// The running product is kept as an unevaluated sum `hi + lo` so that the
/// result is rounded once at the end rather than after every factor.
pub fn composite_uptime(sources: &[FederationSourceStats]) -> f64 {
    let (mut hi, mut lo) = (1.0f64, 0.0f64);
    for s in sources {
        let p = hi * s.uptime;
        let err = hi.mul_add(s.uptime, -p) + lo * s.uptime;
        hi = p + err;
        lo = err - (hi - p);
    }
    hi + lo
}

/// Time until the slowest source has answered, plus merge time.
pub fn federated_latency(sources: &[FederationSourceStats], processing: f64) -> Result<f64, FederationError> {
    let slowest = sources
        .iter()
        .map(|s| s.latency)
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.max(l))))
        .ok_or(FederationError::EmptyFederation)?;
    Ok(slowest + processing)
}

/// Fraction of `trials` simulated queries for which all sources were up.
pub fn simulate_availability(sources: &[FederationSourceStats], trials: u64, seed: u64) -> f64 {
    if trials == 0 {
        return composite_uptime(sources);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0u64;
    for _ in 0..trials {
        // Every source is sampled each trial so the stream does not depend on outcomes.
        let mut all_up = true;
        for s in sources {
            all_up &= rng.random::<f64>() < s.uptime;
        }
        ok += all_up as u64;
    }
    ok as f64 / trials as f64
}
