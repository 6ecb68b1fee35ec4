//! Monodirectional labeling for the elementary shortest path with a capacity
//! resource. Labels are processed in buckets of increasing load; a label
//! records its node, load, visited set, accumulated reduced cost and parent.
//!
//! Arc costs are `c_vw − π_w`; closing a route at the depot adds `c_v0 + π_0`.
//! Pruning uses a completion bound from the q-route relaxation without
//! 2-cycles.

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use super::{candidate_order, reduced_cost, PricingResult, PRICING_TOL};
use crate::column::{Column, DualSolution};
use crate::error::{Error, Result};
use crate::instance::CvrpInstance;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelingOptions {
    /// Discard labels dominated at the same node.
    pub dominance: bool,
    /// Discard labels whose completion bound cannot beat the incumbent.
    pub bounding: bool,
    /// With dominance, also compare labels of different loads by set inclusion.
    pub subset_checks: bool,
    /// Extend labels only up to half the capacity and join pairs of them.
    pub bidirectional: bool,
}

impl Default for LabelingOptions {
    fn default() -> Self {
        Self {
            dominance: true,
            bounding: true,
            subset_checks: false,
            bidirectional: true,
        }
    }
}

type Bits = SmallVec<[u64; 2]>;

struct DominanceIndex {
    exact: FxHashMap<(u32, Bits), u32>,
    /// Label ids per node and load.
    by_load: Vec<Vec<Vec<u32>>>,
}

const ROOT: u32 = u32::MAX;

struct Label {
    node: u32,
    load: u32,
    cost: f64,
    parent: u32,
    visited: Bits,
    alive: bool,
}

fn has(bits: &Bits, u: usize) -> bool {
    bits[u / 64] >> (u % 64) & 1 == 1
}

fn disjoint(a: &Bits, b: &Bits) -> bool {
    a.iter().zip(b).all(|(x, y)| x & y == 0)
}

fn subset(a: &Bits, b: &Bits) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

/// Under the triangle inequality, removing item `w` from a route changes its
/// reduced cost by `π_w − (c_xw + c_wy − c_xy)` for its neighbours `x, y`. If
/// `π_w` does not exceed the cheapest such detour over all neighbour pairs,
/// the shorter route is never worse and has fewer items, so `w` never appears
/// in the canonical optimum.
fn useful_items(inst: &CvrpInstance, pi: &[f64]) -> Vec<bool> {
    let n = inst.n_items();
    // index n is the depot
    let c = |a: usize, b: usize| -> u64 {
        match (a == n, b == n) {
            (true, true) => 0,
            (true, false) => inst.depot_distance(b),
            (false, true) => inst.depot_distance(a),
            (false, false) => inst.item_distance(a, b),
        }
    };
    (0..n)
        .map(|w| {
            if pi[w] <= 0.0 {
                return false;
            }
            let mut detour = 2 * c(w, n);
            for x in (0..=n).filter(|&x| x != w) {
                for y in (0..=n).filter(|&y| y != w && y != x) {
                    detour = detour.min((c(x, w) + c(w, y)).saturating_sub(c(x, y)));
                }
            }
            pi[w] > detour as f64
        })
        .collect()
}

const DEPOT: u32 = u32::MAX - 1;

/// Least reduced cost of a q-path back to the depot that never returns to
/// the node it just left. `best` is the optimum with first successor `succ`;
/// `second` is the optimum over paths whose first successor differs.
struct QBound {
    n: usize,
    best: Vec<f64>,
    succ: Vec<u32>,
    second: Vec<f64>,
}

impl QBound {
    fn new(n: usize, cap: u32, demand: &[u32], arc: &[f64], end: &[f64]) -> Self {
        let size = (cap as usize + 1) * n;
        let mut q = Self {
            n,
            best: vec![0.0; size],
            succ: vec![DEPOT; size],
            second: vec![f64::INFINITY; size],
        };
        for r in 0..=cap {
            for v in 0..n {
                let (mut b1, mut s1, mut b2) = (end[v], DEPOT, f64::INFINITY);
                for w in 0..n {
                    if w == v || demand[w] > r {
                        continue;
                    }
                    let val = arc[v * n + w] + q.get(r - demand[w], w, v as u32);
                    if val < b1 {
                        if s1 != w as u32 {
                            b2 = b1;
                        }
                        b1 = val;
                        s1 = w as u32;
                    } else if s1 != w as u32 && val < b2 {
                        b2 = val;
                    }
                }
                let i = r as usize * q.n + v;
                q.best[i] = b1;
                q.succ[i] = s1;
                q.second[i] = b2;
            }
        }
        q
    }

    /// Bound from `v` with `room` left, given the node visited just before.
    fn get(&self, room: u32, v: usize, prev: u32) -> f64 {
        let i = room as usize * self.n + v;
        if self.succ[i] == prev {
            self.second[i]
        } else {
            self.best[i]
        }
    }
}

struct Search<'a> {
    n: usize,
    cap: u32,
    demand: Vec<u32>,
    min_demand: u32,
    dist: Vec<f64>,
    arc: Vec<f64>,
    start: Vec<f64>,
    end: Vec<f64>,
    /// q-path completion bounds from `v` with at most `r` further load, at
    /// index `r * n + v`.
    bound: QBound,
    /// Items with negative `in_w − π_w` (cheapest incoming arc minus dual),
    /// most negative per unit of demand first.
    gain_order: Vec<(usize, f64)>,
    /// Cheapest return leg from any item.
    min_return: f64,
    /// Items worth visiting at all (see [`useful_items`]).
    useful: Vec<bool>,
    labels: Vec<Label>,
    pi_0: f64,
    opts: LabelingOptions,
    best_rc: f64,
    best_seq: Vec<usize>,
    inst: &'a CvrpInstance,
}

impl<'a> Search<'a> {
    fn new(inst: &'a CvrpInstance, duals: &DualSolution, opts: LabelingOptions) -> Self {
        let n = inst.n_items();
        let cap = inst.capacity();
        let demand: Vec<u32> = inst.demands().collect();
        let pi = &duals.pi_u;
        let mut dist = vec![0.0; n * n];
        let mut arc = vec![0.0; n * n];
        for v in 0..n {
            for w in 0..n {
                dist[v * n + w] = inst.item_distance(v, w) as f64;
                arc[v * n + w] = dist[v * n + w] - pi[w];
            }
        }
        let start = (0..n)
            .map(|w| inst.depot_distance(w) as f64 - pi[w])
            .collect();
        let end: Vec<f64> = (0..n)
            .map(|v| inst.depot_distance(v) as f64 + duals.pi_0)
            .collect();

        let bound = QBound::new(n, cap, &demand, &arc, &end);
        let useful = useful_items(inst, pi);
        let mut gain_order: Vec<(usize, f64)> = (0..n)
            .filter(|&w| useful[w])
            .map(|w| {
                let incoming = (0..n)
                    .filter(|&x| x != w)
                    .map(|x| inst.item_distance(x, w))
                    .fold(inst.depot_distance(w), u64::min);
                (w, incoming as f64 - pi[w])
            })
            .filter(|&(_, g)| g < 0.0)
            .collect();
        gain_order.sort_by(|a, b| {
            (a.1 / f64::from(demand[a.0])).total_cmp(&(b.1 / f64::from(demand[b.0])))
        });
        let min_return =
            (0..n).map(|v| inst.depot_distance(v)).min().unwrap_or(0) as f64 + duals.pi_0;
        Self {
            n,
            cap,
            gain_order,
            min_return,
            useful,
            min_demand: demand.iter().copied().min().unwrap_or(0),
            demand,
            dist,
            arc,
            pi_0: duals.pi_0,
            start,
            end,
            bound,
            labels: Vec::new(),
            opts,
            best_rc: duals.pi_0,
            best_seq: Vec::new(),
            inst,
        }
    }

    /// Lower bound on completing a route from item `v`: every further item
    /// costs at least its cheapest incoming arc, and the chosen items fit the
    /// remaining room (fractional knapsack).
    fn elementary_bound(&self, v: usize, visited: &Bits, room: u32) -> f64 {
        let mut gain = 0.0;
        let mut left = f64::from(room);
        for &(w, g) in &self.gain_order {
            if has(visited, w) {
                continue;
            }
            let d = f64::from(self.demand[w]);
            if d <= left {
                gain += g;
                left -= d;
            } else {
                gain += g * left / d;
                break;
            }
        }
        self.end[v].min(gain + self.min_return)
    }

    fn sequence(&self, mut id: u32) -> Vec<usize> {
        let mut seq = Vec::new();
        while id != ROOT {
            let l = &self.labels[id as usize];
            seq.push(l.node as usize);
            id = l.parent;
        }
        seq.reverse();
        seq
    }

    fn offer(&mut self, rc: f64, seq: impl FnOnce(&Self) -> Vec<usize>) {
        if rc > self.best_rc + PRICING_TOL {
            return;
        }
        let seq = seq(self);
        if candidate_order(rc, &seq, self.best_rc, &self.best_seq).is_lt() {
            self.best_rc = rc;
            self.best_seq = seq;
        }
    }

    /// Greedy nearest-neighbour routes under reduced arc costs, to seed the
    /// incumbent before the exact search.
    fn greedy(&mut self) {
        let n = self.n;
        for first in 0..n {
            if !self.useful[first] {
                continue;
            }
            let mut seq = vec![first];
            let mut load = self.demand[first];
            let mut cost = self.start[first];
            let mut seen = vec![false; n];
            seen[first] = true;
            loop {
                let last = *seq.last().unwrap();
                let rc = cost + self.end[last];
                let snapshot = seq.clone();
                self.offer(rc, |_| snapshot);
                let next = (0..n)
                    .filter(|&w| self.useful[w] && !seen[w] && load + self.demand[w] <= self.cap)
                    .min_by(|&a, &b| self.arc[last * n + a].total_cmp(&self.arc[last * n + b]));
                let Some(w) = next else { break };
                seen[w] = true;
                load += self.demand[w];
                cost += self.arc[last * n + w];
                seq.push(w);
            }
        }
    }

    fn dominates(&self, a: &Label, a_id: u32, b: &Label, b_id: u32) -> bool {
        if a.load > b.load || a.cost > b.cost || !subset(&a.visited, &b.visited) {
            return false;
        }
        if a.load == b.load && a.cost == b.cost && a.visited == b.visited {
            return self.sequence(a_id) <= self.sequence(b_id);
        }
        true
    }

    /// Inserts `label` unless dominated; kills labels it dominates. Missing a
    /// dominance only costs time, so subset checks are limited to labels with
    /// a different load, and labels with the same visited set meet through a
    /// hash lookup.
    fn insert(&mut self, label: Label, index: &mut DominanceIndex, buckets: &mut [Vec<u32>]) {
        let id = self.labels.len() as u32;
        let node = label.node as usize;
        let load = label.load as usize;
        self.labels.push(label);
        if self.opts.dominance {
            let key = (
                self.labels[id as usize].node,
                self.labels[id as usize].visited.clone(),
            );
            if let Some(&old) = index.exact.get(&key) {
                let (old_label, new) = (&self.labels[old as usize], &self.labels[id as usize]);
                if old_label.alive {
                    if self.dominates(old_label, old, new, id) {
                        self.labels[id as usize].alive = false;
                        return;
                    }
                    self.labels[old as usize].alive = false;
                }
            }
            if self.opts.subset_checks {
                let new = &self.labels[id as usize];
                for l in 0..load {
                    for &o in &index.by_load[node][l] {
                        let other = &self.labels[o as usize];
                        if other.alive
                            && other.cost <= new.cost
                            && subset(&other.visited, &new.visited)
                        {
                            self.labels[id as usize].alive = false;
                            return;
                        }
                    }
                }
                let new = &self.labels[id as usize];
                let mut killed = Vec::new();
                for l in load + 1..index.by_load[node].len() {
                    for &o in &index.by_load[node][l] {
                        let other = &self.labels[o as usize];
                        if other.alive
                            && new.cost <= other.cost
                            && subset(&new.visited, &other.visited)
                        {
                            killed.push(o);
                        }
                    }
                }
                for o in killed {
                    self.labels[o as usize].alive = false;
                }
            }
            index.exact.insert(key, id);
            index.by_load[node][load].push(id);
        }
        buckets[load].push(id);
    }

    fn run(&mut self) {
        let n = self.n;
        let words = n.div_ceil(64).max(1);
        let mut index = DominanceIndex {
            exact: FxHashMap::default(),
            by_load: vec![vec![Vec::new(); self.cap as usize + 1]; n],
        };
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); self.cap as usize + 1];
        let root = Label {
            node: ROOT,
            load: 0,
            cost: 0.0,
            parent: ROOT,
            visited: SmallVec::from_elem(0, words),
            alive: true,
        };

        for load in 0..=self.cap as usize {
            let mut k = 0;
            loop {
                let from_root = load == 0 && k == 0;
                if !from_root && k >= buckets[load].len() {
                    break;
                }
                let (parent, node, cost, visited) = if from_root {
                    (ROOT, ROOT, 0.0, root.visited.clone())
                } else {
                    let id = buckets[load][k];
                    let l = &self.labels[id as usize];
                    if !l.alive || (self.opts.bidirectional && 2 * l.load >= self.cap) {
                        k += 1;
                        continue;
                    }
                    (id, l.node, l.cost, l.visited.clone())
                };
                k += 1;
                for w in 0..n {
                    if !self.useful[w] || has(&visited, w) {
                        continue;
                    }
                    let new_load = load as u32 + self.demand[w];
                    if new_load > self.cap {
                        continue;
                    }
                    let step = if node == ROOT {
                        self.start[w]
                    } else {
                        self.arc[node as usize * n + w]
                    };
                    let new_cost = cost + step;
                    self.offer(new_cost + self.end[w], |s| {
                        let mut seq = s.sequence(parent);
                        seq.push(w);
                        seq
                    });
                    let room = self.cap - new_load;
                    if room < self.min_demand {
                        continue;
                    }
                    if self.opts.bounding {
                        let lb = new_cost + self.bound.get(room, w, node);
                        if lb > self.best_rc + PRICING_TOL {
                            continue;
                        }
                    }
                    let mut bits = visited.clone();
                    bits[w / 64] |= 1 << (w % 64);
                    if self.opts.bounding
                        && new_cost + self.elementary_bound(w, &bits, room)
                            > self.best_rc + PRICING_TOL
                    {
                        continue;
                    }
                    let label = Label {
                        node: w as u32,
                        load: new_load,
                        cost: new_cost,
                        parent,
                        visited: bits,
                        alive: true,
                    };
                    self.insert(label, &mut index, &mut buckets);
                }
            }
            // labels at this load are final; free their bucket index
            buckets[load] = Vec::new();
        }
        if self.opts.bidirectional {
            self.join();
        }
    }

    /// Every route splits into a shortest prefix carrying at least half the
    /// capacity and a suffix carrying at most half. Distances are symmetric,
    /// so the reversed suffix is itself a label; joining a prefix label at
    /// `v` with a suffix label at `w` across arc `v → w` recovers the route.
    fn join(&mut self) {
        let n = self.n;
        let mut suffixes: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (id, l) in self.labels.iter().enumerate() {
            if l.alive && 2 * l.load <= self.cap {
                suffixes[l.node as usize].push(id as u32);
            }
        }
        for list in &mut suffixes {
            list.sort_by(|&a, &b| {
                self.labels[a as usize]
                    .cost
                    .total_cmp(&self.labels[b as usize].cost)
            });
        }
        for a in 0..self.labels.len() {
            let (a_load, a_node, a_cost) = {
                let l = &self.labels[a];
                if !l.alive || 2 * l.load < self.cap {
                    continue;
                }
                (l.load, l.node as usize, l.cost)
            };
            for w in 0..n {
                if !self.useful[w] || has(&self.labels[a].visited, w) {
                    continue;
                }
                let base = a_cost + self.dist[a_node * n + w] + self.pi_0;
                for &b in &suffixes[w] {
                    let lb = &self.labels[b as usize];
                    let rc = base + lb.cost;
                    if rc > self.best_rc + PRICING_TOL {
                        break;
                    }
                    if a_load + lb.load > self.cap
                        || !disjoint(&self.labels[a].visited, &lb.visited)
                    {
                        continue;
                    }
                    let mut seq = self.sequence(a as u32);
                    let mut tail = self.sequence(b);
                    tail.reverse();
                    seq.extend(tail);
                    let rev: Vec<usize> = seq.iter().rev().copied().collect();
                    self.offer(rc, |_| seq);
                    self.offer(rc, |_| rev);
                }
            }
        }
    }
}

/// Exact pricing with dominance and bounding enabled.
pub fn price_cvrp(inst: &CvrpInstance, duals: &DualSolution) -> Result<PricingResult> {
    price_cvrp_with(inst, duals, LabelingOptions::default())
}

/// Exact pricing; the options change only the amount of work, never the answer.
pub fn price_cvrp_with(
    inst: &CvrpInstance,
    duals: &DualSolution,
    opts: LabelingOptions,
) -> Result<PricingResult> {
    if duals.pi_u.len() != inst.n_items() {
        return Err(Error::MissingDual(format!(
            "expected {} item duals, got {}",
            inst.n_items(),
            duals.pi_u.len()
        )));
    }
    if duals
        .pi_u
        .iter()
        .chain([&duals.pi_0])
        .any(|x| !x.is_finite())
    {
        return Err(Error::MissingDual("non-finite dual value".into()));
    }
    let mut search = Search::new(inst, duals, opts);
    if opts.bounding {
        search.greedy();
    }
    search.run();
    let labels = search.labels.len();
    let column = Column::route(search.inst, std::mem::take(&mut search.best_seq))?;
    let reduced_cost = reduced_cost(&column, duals)?;
    Ok(PricingResult {
        column,
        reduced_cost,
        labels,
    })
}
