//! Moving kNN maintenance with influential neighbor sets.
//!
//! Both engines keep a prefetch set `R` (the ⌊ρk⌋ nearest sites when last
//! verified), report its first `k` members as the kNN set, and guard them
//! with the influential set `I(R) ∪ (R \ kNN)`. A tick only scans the kNN set
//! and the influential set; the update path escalates from re-ranking inside
//! `R`, to a single-object swap, to a full recomputation.

mod euclidean;
mod network;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, SiteId};
use crate::network::NetworkError;

pub use euclidean::{influential_neighbor_set, QueryState};
pub use network::{network_influential_neighbor_set, NetQueryState};

/// Query parameters: `k` reported neighbors and prefetch ratio `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryConfig {
    pub k: usize,
    pub rho: f64,
}

impl QueryConfig {
    pub fn new(k: usize, rho: f64) -> Result<Self, EngineError> {
        if k == 0 {
            return Err(EngineError::InvalidConfig("k must be at least 1".into()));
        }
        if !rho.is_finite() || rho < 1.0 {
            return Err(EngineError::InvalidConfig(format!(
                "rho must be a finite number >= 1, got {rho}"
            )));
        }
        Ok(Self { k, rho })
    }

    /// ⌊ρk⌋, the size of the prefetch set.
    pub fn prefetch_size(&self) -> usize {
        // the epsilon absorbs products like 1.15 * 20 = 22.999999999999996
        (self.rho * self.k as f64 + 1e-9).floor() as usize
    }

    pub(crate) fn check_sites(&self, available: usize) -> Result<usize, EngineError> {
        let needed = self.prefetch_size();
        if needed > available {
            return Err(EngineError::TooFewSites { needed, available });
        }
        Ok(needed)
    }
}

/// Outcome of the per-tick scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub valid: bool,
    /// Nearest member of the influential set.
    pub candidate: Option<SiteId>,
    /// Farthest member of the kNN set.
    pub delete: Option<SiteId>,
    /// Key comparisons spent on the scan.
    pub comparisons: usize,
    /// Network mode only: the query left the cached subnetwork.
    pub off_subnetwork: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TickEvent {
    None,
    Rerank,
    Swap,
    Recompute,
}

impl TickEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            TickEvent::None => "none",
            TickEvent::Rerank => "rerank",
            TickEvent::Swap => "swap",
            TickEvent::Recompute => "recompute",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub ticks: u64,
    pub validations: u64,
    pub false_alarms: u64,
    pub swaps: u64,
    pub reranks: u64,
    /// Includes the initial computation.
    pub full_recomputes: u64,
    pub knn_changes: u64,
    pub comparisons: u64,
}

impl Metrics {
    pub(crate) fn record_update(&mut self, event: TickEvent, knn_changed: bool) {
        match event {
            TickEvent::None => return,
            TickEvent::Rerank => self.reranks += 1,
            TickEvent::Swap => self.swaps += 1,
            TickEvent::Recompute => self.full_recomputes += 1,
        }
        if knn_changed {
            self.knn_changes += 1;
        } else {
            self.false_alarms += 1;
        }
    }
}

/// What one tick did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickOutcome {
    pub validation: ValidationResult,
    pub event: TickEvent,
    /// |kNN| + |IS| of the state that was validated.
    pub scanned: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid query configuration: {0}")]
    InvalidConfig(String),
    #[error("prefetch set needs {needed} sites but only {available} exist")]
    TooFewSites { needed: usize, available: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Membership test on an id-sorted slice.
pub(crate) fn sorted_contains(sorted: &[SiteId], id: SiteId) -> bool {
    sorted.binary_search(&id).is_ok()
}

pub(crate) fn sorted_ids(ids: &[SiteId]) -> Vec<SiteId> {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v
}
