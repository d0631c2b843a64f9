//! Per-iteration walk diagnostics.
//!
//! Every walk records one [`WalkRecord`] per iteration plus a terminal
//! record, so a trace for a `T`-iteration walk has `T + 1` records. The
//! terminal record carries the final potential and active-set size; its
//! `alpha` and `dim_u` are zero since no step was taken from it.

use serde::{Deserialize, Serialize};

/// Serde adapter for floats that may be non-finite: JSON has no literal for
/// them, so they serialize as null and deserialize back to minus infinity.
mod nonfinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

/// State snapshot at the start of one iteration, plus the step taken from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkRecord {
    /// Potential value at the start of the iteration.
    pub phi: f64,
    /// Natural log of the potential; the monotonicity checks compare these
    /// so that tiny potentials do not lose precision. Minus infinity when
    /// the potential is 0 (e.g. a column instance with no light rows), so
    /// JSON stores it as null.
    #[serde(with = "nonfinite_as_null")]
    pub log_phi: f64,
    /// Step scale chosen in this iteration (0 in the terminal record).
    pub alpha: f64,
    /// Number of non-frozen coordinates.
    pub active: usize,
    /// Dimension of the admissible update subspace (0 in the terminal record).
    pub dim_u: usize,
}

/// Event emitted when a heavy row leaves the constrained set for good in the
/// column-balancing walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeavyExit {
    /// Row index in the stacked (two-sided) matrix.
    pub row: usize,
    /// Iteration at which the row exited.
    pub iteration: usize,
    /// Number of still-active columns where the row is nonzero.
    pub active_support: usize,
}

/// Full record of one walk run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkTrace {
    /// Step size of the walk.
    pub delta: f64,
    /// One record per iteration plus the terminal record.
    pub records: Vec<WalkRecord>,
    /// Heavy-row exit events (column-balancing walk only; empty otherwise).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub heavy_exits: Vec<HeavyExit>,
}

impl WalkTrace {
    pub fn new(delta: f64) -> Self {
        WalkTrace { delta, records: Vec::new(), heavy_exits: Vec::new() }
    }

    /// Number of iterations the walk performed.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Largest relative potential growth between consecutive records, i.e.
    /// `max(phi_{t+1}/phi_t) - 1` computed in log space. Nonpositive when
    /// the potential never increases.
    pub fn worst_growth(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| (w[1].log_phi - w[0].log_phi).exp() - 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
