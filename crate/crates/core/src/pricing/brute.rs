//! Exhaustive CVRP pricing over every elementary, capacity-feasible ordered
//! route. Used as an oracle for the labeling algorithm.

use super::{candidate_order, reduced_cost, PricingResult};
use crate::column::{route_cost, Column, DualSolution};
use crate::error::{Error, Result};
use crate::instance::CvrpInstance;

pub const DEFAULT_ENUMERATION_BOUND: usize = 10;

struct Enumeration<'a> {
    inst: &'a CvrpInstance,
    duals: &'a DualSolution,
    seq: Vec<usize>,
    used: Vec<bool>,
    best: (f64, Vec<usize>),
    count: usize,
}

impl Enumeration<'_> {
    fn visit(&mut self, load: u32) -> Result<()> {
        self.count += 1;
        let cost = route_cost(self.inst, &self.seq)? as f64;
        let rc = cost + self.duals.pi_0 - self.seq.iter().map(|&u| self.duals.pi_u[u]).sum::<f64>();
        if candidate_order(rc, &self.seq, self.best.0, &self.best.1).is_lt() {
            self.best = (rc, self.seq.clone());
        }
        for u in 0..self.inst.n_items() {
            let d = self.inst.demand(u);
            if self.used[u] || load + d > self.inst.capacity() {
                continue;
            }
            self.used[u] = true;
            self.seq.push(u);
            self.visit(load + d)?;
            self.seq.pop();
            self.used[u] = false;
        }
        Ok(())
    }
}

/// Minimum reduced-cost route by full enumeration; refuses instances with more
/// than `bound` items.
pub fn price_cvrp_bruteforce(
    inst: &CvrpInstance,
    duals: &DualSolution,
    bound: usize,
) -> Result<PricingResult> {
    let n = inst.n_items();
    if n > bound {
        return Err(Error::PricingRefused(format!(
            "{n} items exceed the enumeration bound {bound}"
        )));
    }
    if duals.pi_u.len() != n {
        return Err(Error::MissingDual(format!(
            "expected {n} item duals, got {}",
            duals.pi_u.len()
        )));
    }
    let mut e = Enumeration {
        inst,
        duals,
        seq: Vec::new(),
        used: vec![false; n],
        best: (f64::INFINITY, Vec::new()),
        count: 0,
    };
    e.visit(0)?;
    let column = Column::route(inst, e.best.1)?;
    Ok(PricingResult {
        reduced_cost: reduced_cost(&column, duals)?,
        column,
        labels: e.count,
    })
}
