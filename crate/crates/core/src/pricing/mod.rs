//! Exact pricing: minimum reduced-cost columns for CVRP (elementary
//! resource-constrained shortest path by labeling) and SSCFLP (one knapsack per
//! facility), plus exhaustive oracles for both.

mod brute;
mod knapsack;
mod labeling;

pub use brute::{price_cvrp_bruteforce, DEFAULT_ENUMERATION_BOUND};
pub use knapsack::{price_sscflp, price_sscflp_bruteforce};
pub use labeling::{price_cvrp, price_cvrp_with, LabelingOptions};

use std::cmp::Ordering;

use crate::column::{Column, ColumnKind, DualSolution};
use crate::error::{Error, Result};

/// Reduced costs closer than this are ties.
pub const PRICING_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct PricingResult {
    /// Best column; the empty route or empty assignment when nothing beats it.
    pub column: Column,
    pub reduced_cost: f64,
    /// Labels (or candidate subsets) generated; diagnostic only.
    pub labels: usize,
}

/// `c_l + π_0 − Σ π_u` for routes, `c_l + π_f − Σ π_u` for assignments.
pub fn reduced_cost(col: &Column, duals: &DualSolution) -> Result<f64> {
    let coupling = match col.kind {
        ColumnKind::Route => duals.pi_0,
        ColumnKind::FacilityAssignment { facility } => *duals
            .pi_f
            .get(facility)
            .ok_or_else(|| Error::MissingDual(format!("no dual for facility {facility}")))?,
        ColumnKind::Artificial => {
            return Err(Error::InvalidColumn(
                "artificial columns are never priced".into(),
            ))
        }
    };
    let mut rc = col.cost + coupling;
    for &u in &col.covers {
        rc -= duals
            .pi_u
            .get(u)
            .ok_or_else(|| Error::MissingDual(format!("no dual for item {u}")))?;
    }
    Ok(rc)
}

/// Canonical order on candidates: reduced cost (with tolerance), then fewer
/// items, then the lexicographically smaller sequence.
pub(crate) fn candidate_order(rc_a: f64, seq_a: &[usize], rc_b: f64, seq_b: &[usize]) -> Ordering {
    if rc_a < rc_b - PRICING_TOL {
        return Ordering::Less;
    }
    if rc_b < rc_a - PRICING_TOL {
        return Ordering::Greater;
    }
    seq_a.len().cmp(&seq_b.len()).then_with(|| seq_a.cmp(seq_b))
}
