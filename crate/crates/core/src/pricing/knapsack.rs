//! SSCFLP pricing: for each facility `f`, a 0/1 knapsack
//! `min c_f + π_f + Σ (c_fu − π_u) x_u` subject to `Σ d_u x_u ≤ D_f`.

use super::{reduced_cost, PricingResult, PRICING_TOL};
use crate::column::{Column, DualSolution};
use crate::error::{Error, Result};
use crate::instance::SscflpInstance;

fn check_duals(inst: &SscflpInstance, duals: &DualSolution) -> Result<()> {
    if duals.pi_u.len() != inst.n_customers() || duals.pi_f.len() != inst.n_facilities() {
        return Err(Error::MissingDual(format!(
            "expected {} customer and {} facility duals",
            inst.n_customers(),
            inst.n_facilities()
        )));
    }
    Ok(())
}

/// `(value, count)` ordering with tolerance on the value.
fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 - PRICING_TOL || (a.0 <= b.0 + PRICING_TOL && a.1 < b.1)
}

/// Exact 0/1 knapsack over capacity for one facility. Returns the chosen
/// customers (sorted) and the number of DP cells evaluated.
fn knapsack(inst: &SscflpInstance, duals: &DualSolution, f: usize) -> (Vec<usize>, usize) {
    let cap = inst.facility(f).capacity as usize;
    // only strictly profitable customers can improve the objective
    let cand: Vec<(usize, usize, f64)> = (0..inst.n_customers())
        .map(|u| {
            (
                u,
                inst.demand(u) as usize,
                inst.service_cost(f, u) as f64 - duals.pi_u[u],
            )
        })
        .filter(|&(_, d, p)| p < 0.0 && d <= cap)
        .collect();
    let mut best = vec![(0.0, 0usize); cap + 1];
    let mut take = vec![vec![false; cap + 1]; cand.len()];
    for (i, &(_, d, p)) in cand.iter().enumerate() {
        for c in (d..=cap).rev() {
            let with = (best[c - d].0 + p, best[c - d].1 + 1);
            if better(with, best[c]) {
                best[c] = with;
                take[i][c] = true;
            }
        }
    }
    let mut chosen = Vec::new();
    let mut c = cap;
    for i in (0..cand.len()).rev() {
        if take[i][c] {
            chosen.push(cand[i].0);
            c -= cand[i].1;
        }
    }
    chosen.sort_unstable();
    (chosen, cand.len() * (cap + 1))
}

fn pick_best(
    inst: &SscflpInstance,
    duals: &DualSolution,
    cols: Vec<Column>,
    work: usize,
) -> Result<PricingResult> {
    let mut best: Option<(f64, Column)> = None;
    for col in cols {
        let rc = reduced_cost(&col, duals)?;
        let replace = match &best {
            None => true,
            Some((brc, bcol)) => better((rc, col.covers.len()), (*brc, bcol.covers.len())),
        };
        if replace {
            best = Some((rc, col));
        }
    }
    let (reduced_cost, column) = best.ok_or_else(|| {
        Error::InvalidInstance(format!("{} facilities to price", inst.n_facilities()))
    })?;
    Ok(PricingResult {
        column,
        reduced_cost,
        labels: work,
    })
}

/// Best assignment over all facilities; ties go to fewer customers, then the
/// lower facility index.
pub fn price_sscflp(inst: &SscflpInstance, duals: &DualSolution) -> Result<PricingResult> {
    check_duals(inst, duals)?;
    let mut work = 0;
    let mut cols = Vec::with_capacity(inst.n_facilities());
    for f in 0..inst.n_facilities() {
        let (chosen, cells) = knapsack(inst, duals, f);
        work += cells;
        cols.push(Column::assignment(inst, f, &chosen)?);
    }
    pick_best(inst, duals, cols, work)
}

/// Subset enumeration per facility; refuses more than 20 customers.
pub fn price_sscflp_bruteforce(
    inst: &SscflpInstance,
    duals: &DualSolution,
) -> Result<PricingResult> {
    check_duals(inst, duals)?;
    let n = inst.n_customers();
    if n > 20 {
        return Err(Error::PricingRefused(format!(
            "{n} customers exceed the enumeration bound 20"
        )));
    }
    let mut best_per_facility = Vec::with_capacity(inst.n_facilities());
    let mut count = 0;
    for f in 0..inst.n_facilities() {
        let cap = u64::from(inst.facility(f).capacity);
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mask in 0u32..1 << n {
            let set: Vec<usize> = (0..n).filter(|&u| mask >> u & 1 == 1).collect();
            let load: u64 = set.iter().map(|&u| u64::from(inst.demand(u))).sum();
            if load > cap {
                continue;
            }
            count += 1;
            let value: f64 = set
                .iter()
                .map(|&u| inst.service_cost(f, u) as f64 - duals.pi_u[u])
                .sum();
            if best
                .as_ref()
                .is_none_or(|(bv, bs)| better((value, set.len()), (*bv, bs.len())))
            {
                best = Some((value, set));
            }
        }
        let (_, set) = best.expect("the empty set always fits");
        best_per_facility.push(Column::assignment(inst, f, &set)?);
    }
    pick_best(inst, duals, best_per_facility, count)
}
