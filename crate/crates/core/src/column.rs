//! Columns, the restricted column pool and per-column DOI quantities.

use std::collections::{BTreeMap, HashMap};
use std::io;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{CvrpInstance, SscflpInstance};

/// Offset added to smoothing costs so swap variables vanish at termination.
pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ColumnId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ColumnKind {
    Route,
    FacilityAssignment { facility: usize },
    Artificial,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Column {
    #[serde(flatten)]
    pub kind: ColumnKind,
    /// Visit sequence for routes; empty otherwise.
    pub visit_order: Vec<usize>,
    /// Sorted covered items.
    pub covers: Vec<usize>,
    pub cost: f64,
    /// Facility opening cost alone (assignments); zero otherwise.
    pub open_cost: f64,
}

/// Sum of rounded-up leg distances from the depot through `visit_order` and back.
pub fn route_cost(inst: &CvrpInstance, visit_order: &[usize]) -> Result<u64> {
    let mut seen = vec![false; inst.n_items()];
    for &u in visit_order {
        if u >= inst.n_items() {
            return Err(Error::InvalidColumn(format!("unknown item {u}")));
        }
        if std::mem::replace(&mut seen[u], true) {
            return Err(Error::InvalidColumn(format!("item {u} visited twice")));
        }
    }
    let (Some(&first), Some(&last)) = (visit_order.first(), visit_order.last()) else {
        return Ok(0);
    };
    let inner: u64 = visit_order
        .windows(2)
        .map(|w| inst.item_distance(w[0], w[1]))
        .sum();
    Ok(inst.depot_distance(first) + inner + inst.depot_distance(last))
}

fn sorted(items: &[usize]) -> Vec<usize> {
    let mut v = items.to_vec();
    v.sort_unstable();
    v
}

impl Column {
    /// A capacity-feasible elementary route with its exact cost.
    pub fn route(inst: &CvrpInstance, visit_order: Vec<usize>) -> Result<Self> {
        let cost = route_cost(inst, &visit_order)?;
        let load: u64 = visit_order.iter().map(|&u| u64::from(inst.demand(u))).sum();
        if load > u64::from(inst.capacity()) {
            return Err(Error::InvalidColumn(format!(
                "route load {load} exceeds capacity {}",
                inst.capacity()
            )));
        }
        Ok(Self {
            kind: ColumnKind::Route,
            covers: sorted(&visit_order),
            visit_order,
            cost: cost as f64,
            open_cost: 0.0,
        })
    }

    /// Facility `facility` serving `customers`.
    pub fn assignment(inst: &SscflpInstance, facility: usize, customers: &[usize]) -> Result<Self> {
        if facility >= inst.n_facilities() {
            return Err(Error::InvalidColumn(format!("unknown facility {facility}")));
        }
        let covers = sorted(customers);
        if covers.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidColumn("customer assigned twice".into()));
        }
        if let Some(&u) = covers.iter().find(|&&u| u >= inst.n_customers()) {
            return Err(Error::InvalidColumn(format!("unknown customer {u}")));
        }
        let load: u64 = covers.iter().map(|&u| u64::from(inst.demand(u))).sum();
        let fac = inst.facility(facility);
        if load > u64::from(fac.capacity) {
            return Err(Error::InvalidColumn(format!(
                "assignment load {load} exceeds facility capacity {}",
                fac.capacity
            )));
        }
        let service: u64 = covers.iter().map(|&u| inst.service_cost(facility, u)).sum();
        Ok(Self {
            kind: ColumnKind::FacilityAssignment { facility },
            visit_order: Vec::new(),
            covers,
            cost: (fac.open_cost + service) as f64,
            open_cost: fac.open_cost as f64,
        })
    }

    /// Covers `item` alone at `big_m`; uses no vehicle or facility.
    pub fn artificial(item: usize, big_m: f64) -> Self {
        Self {
            kind: ColumnKind::Artificial,
            visit_order: Vec::new(),
            covers: vec![item],
            cost: big_m,
            open_cost: 0.0,
        }
    }

    pub fn is_artificial(&self) -> bool {
        self.kind == ColumnKind::Artificial
    }

    pub fn covers_item(&self, item: usize) -> bool {
        self.covers.binary_search(&item).is_ok()
    }

    pub fn facility(&self) -> Option<usize> {
        match self.kind {
            ColumnKind::FacilityAssignment { facility } => Some(facility),
            _ => None,
        }
    }

    fn key(&self) -> ColumnKey {
        match self.kind {
            ColumnKind::Route => {
                let rev: Vec<usize> = self.visit_order.iter().rev().copied().collect();
                ColumnKey::Route(rev.min(self.visit_order.clone()))
            }
            ColumnKind::FacilityAssignment { facility } => {
                ColumnKey::Assignment(facility, self.covers.clone())
            }
            ColumnKind::Artificial => ColumnKey::Artificial(self.covers[0]),
        }
    }
}

/// Dedup identity: routes compare up to reversal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum ColumnKey {
    Route(Vec<usize>),
    Assignment(usize, Vec<usize>),
    Artificial(usize),
}

/// Validates column invariants against the instance a pool is built for.
pub trait ColumnRules {
    fn n_items(&self) -> usize;
    fn check_column(&self, col: &Column) -> Result<()>;
}

impl ColumnRules for CvrpInstance {
    fn n_items(&self) -> usize {
        CvrpInstance::n_items(self)
    }

    fn check_column(&self, col: &Column) -> Result<()> {
        match col.kind {
            ColumnKind::Route => {
                let rebuilt = Column::route(self, col.visit_order.clone())?;
                if rebuilt.cost != col.cost || rebuilt.covers != col.covers {
                    return Err(Error::InvalidColumn(format!(
                        "route cost {} or coverage does not match its visit order (cost {})",
                        col.cost, rebuilt.cost
                    )));
                }
                Ok(())
            }
            ColumnKind::Artificial => check_artificial(col, self.n_items()),
            ColumnKind::FacilityAssignment { .. } => Err(Error::InvalidColumn(
                "facility assignment in a CVRP pool".into(),
            )),
        }
    }
}

impl ColumnRules for SscflpInstance {
    fn n_items(&self) -> usize {
        self.n_customers()
    }

    fn check_column(&self, col: &Column) -> Result<()> {
        match col.kind {
            ColumnKind::FacilityAssignment { facility } => {
                let rebuilt = Column::assignment(self, facility, &col.covers)?;
                if rebuilt.cost != col.cost
                    || rebuilt.open_cost != col.open_cost
                    || rebuilt.covers != col.covers
                {
                    return Err(Error::InvalidColumn(
                        "assignment costs do not match the instance".into(),
                    ));
                }
                Ok(())
            }
            ColumnKind::Artificial => check_artificial(col, self.n_customers()),
            ColumnKind::Route => Err(Error::InvalidColumn("route in an SSCFLP pool".into())),
        }
    }
}

fn check_artificial(col: &Column, n_items: usize) -> Result<()> {
    if col.covers.len() != 1 || col.covers[0] >= n_items || !col.visit_order.is_empty() {
        return Err(Error::InvalidColumn(
            "artificial column must cover exactly one item".into(),
        ));
    }
    Ok(())
}

/// The restricted column set, append-only with stable ids.
#[derive(Clone, Debug, Default)]
pub struct ColumnPool {
    columns: Vec<Column>,
    index: HashMap<ColumnKey, ColumnId>,
}

impl ColumnPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates and appends `col`, or returns the id of an identical column.
    pub fn add_column(&mut self, rules: &impl ColumnRules, col: Column) -> Result<ColumnId> {
        rules.check_column(&col)?;
        Ok(self.insert(col).0)
    }

    /// Like [`add_column`](Self::add_column) but reports whether the column is new.
    pub fn insert_checked(
        &mut self,
        rules: &impl ColumnRules,
        col: Column,
    ) -> Result<(ColumnId, bool)> {
        rules.check_column(&col)?;
        Ok(self.insert(col))
    }

    fn insert(&mut self, col: Column) -> (ColumnId, bool) {
        let key = col.key();
        if let Some(&id) = self.index.get(&key) {
            return (id, false);
        }
        let id = ColumnId(self.columns.len());
        self.columns.push(col);
        self.index.insert(key, id);
        (id, true)
    }

    pub fn contains(&self, col: &Column) -> bool {
        self.index.contains_key(&col.key())
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn get(&self, id: ColumnId) -> &Column {
        &self.columns[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ColumnId, &Column)> {
        self.columns
            .iter()
            .enumerate()
            .map(|(i, c)| (ColumnId(i), c))
    }

    /// Route and assignment columns, skipping artificial ones.
    pub fn real_columns(&self) -> impl Iterator<Item = (ColumnId, &Column)> {
        self.iter().filter(|(_, c)| !c.is_artificial())
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, out: &mut impl io::Write) -> io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            id: usize,
            #[serde(flatten)]
            column: &'a Column,
        }
        for (id, column) in self.iter() {
            serde_json::to_writer(&mut *out, &Line { id: id.0, column })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Normalized master duals; every entry is nonnegative up to tolerance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DualSolution {
    pub pi_u: Vec<f64>,
    pub pi_0: f64,
    pub pi_ul: BTreeMap<(usize, ColumnId), f64>,
    pub pi_dl: BTreeMap<(u32, ColumnId), f64>,
    pub pi_f: Vec<f64>,
}

impl DualSolution {
    /// Duals with only item and fleet values, as pricing sees them.
    pub fn cover(pi_u: Vec<f64>, pi_0: f64) -> Self {
        Self {
            pi_u,
            pi_0,
            ..Self::default()
        }
    }

    pub fn min_value(&self) -> f64 {
        self.pi_u
            .iter()
            .chain([&self.pi_0])
            .chain(self.pi_ul.values())
            .chain(self.pi_dl.values())
            .chain(&self.pi_f)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// `D_dl`: for each demand level of `demand_set`, how many covered items have
/// at least that demand. All zero for artificial columns.
pub fn demand_profile(demands: &[u32], demand_set: &[u32], col: &Column) -> Vec<(u32, usize)> {
    demand_set
        .iter()
        .map(|&d| {
            let count = if col.is_artificial() {
                0
            } else {
                col.covers.iter().filter(|&&u| demands[u] >= d).count()
            };
            (d, count)
        })
        .collect()
}

/// `c_ul`: twice the distance from `item` to the nearest covered item or depot.
pub fn detour_cost(inst: &CvrpInstance, col: &Column, item: usize) -> Result<u64> {
    if col.kind != ColumnKind::Route {
        return Err(Error::InvalidColumn(
            "detour cost is defined for routes only".into(),
        ));
    }
    if item >= inst.n_items() {
        return Err(Error::InvalidColumn(format!("unknown item {item}")));
    }
    let nearest = col
        .covers
        .iter()
        .map(|&v| inst.item_distance(item, v))
        .fold(inst.depot_distance(item), u64::min);
    Ok(2 * nearest)
}

/// Ordered pairs `(u, v)`, `u ≠ v`, where `u` may be swapped for `v` (`d_u ≥ d_v`).
pub fn smooth_swap_set(demands: &[u32]) -> Vec<(usize, usize)> {
    let n = demands.len();
    (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v && demands[u] >= demands[v])
        .collect()
}

/// `ρ_uv = 2·c_uv + ε` for a swap-feasible pair.
pub fn smooth_rho(inst: &CvrpInstance, u: usize, v: usize, epsilon: f64) -> Result<f64> {
    let n = inst.n_items();
    if u >= n || v >= n || u == v || inst.demand(u) < inst.demand(v) {
        return Err(Error::InvalidColumn(format!(
            "({u}, {v}) is not a swap-feasible pair"
        )));
    }
    Ok(2.0 * inst.item_distance(u, v) as f64 + epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CvrpItem, Facility, Point};

    fn inst(depot: Point, items: &[(i64, i64, u32)], capacity: u32) -> CvrpInstance {
        let items = items
            .iter()
            .map(|&(x, y, demand)| CvrpItem {
                location: Point::new(x, y),
                demand,
            })
            .collect();
        CvrpInstance::new(depot, capacity, 5, items).unwrap()
    }

    #[test]
    fn route_cost_examples() {
        let i = inst(Point::new(0, 0), &[(3, 4, 1), (6, 8, 1)], 10);
        assert_eq!(route_cost(&i, &[]).unwrap(), 0);
        assert_eq!(route_cost(&i, &[0]).unwrap(), 10);
        assert_eq!(route_cost(&i, &[0, 1]).unwrap(), 20);
        assert!(matches!(
            route_cost(&i, &[0, 0]),
            Err(Error::InvalidColumn(_))
        ));
    }

    #[test]
    fn demand_profile_counts() {
        let i = inst(
            Point::new(0, 0),
            &[(1, 1, 1), (2, 2, 1), (3, 3, 3), (4, 4, 2)],
            10,
        );
        let col = Column::route(&i, vec![0, 1, 2]).unwrap();
        let demands: Vec<u32> = i.demands().collect();
        assert_eq!(
            demand_profile(&demands, i.demand_set(), &col),
            vec![(1, 3), (2, 1), (3, 1)]
        );
        let art = Column::artificial(0, 1e6);
        assert_eq!(
            demand_profile(&demands, i.demand_set(), &art),
            vec![(1, 0), (2, 0), (3, 0)]
        );
    }

    #[test]
    fn detour_cost_examples() {
        let i = inst(Point::new(0, 0), &[(3, 4, 1), (9, 9, 1)], 10);
        let empty = Column::route(&i, vec![]).unwrap();
        assert_eq!(detour_cost(&i, &empty, 0).unwrap(), 10);
        let col = Column::route(&i, vec![0]).unwrap();
        assert_eq!(detour_cost(&i, &col, 0).unwrap(), 0);

        let i = inst(Point::new(5, 5), &[(0, 0, 1), (10, 0, 1), (2, 0, 1)], 10);
        let col = Column::route(&i, vec![0, 1]).unwrap();
        assert_eq!(detour_cost(&i, &col, 2).unwrap(), 4);
        assert!(detour_cost(&i, &Column::artificial(2, 1.0), 2).is_err());
    }

    #[test]
    fn swap_set_examples() {
        assert_eq!(smooth_swap_set(&[1, 1, 1]).len(), 6);
        let s = smooth_swap_set(&[5, 1]);
        assert!(s.contains(&(0, 1)) && !s.contains(&(1, 0)));
        assert!(smooth_swap_set(&[4]).is_empty());
    }

    #[test]
    fn smooth_rho_examples() {
        let i = inst(Point::new(0, 0), &[(0, 0, 1), (3, 4, 1), (3, 4, 1)], 10);
        assert!((smooth_rho(&i, 0, 1, 1e-4).unwrap() - 10.0001).abs() < 1e-12);
        assert_eq!(smooth_rho(&i, 1, 2, 1e-4).unwrap(), 1e-4);
        assert_eq!(smooth_rho(&i, 0, 1, 0.0).unwrap(), 10.0);
        let i = inst(Point::new(0, 0), &[(0, 0, 1), (3, 4, 2)], 10);
        assert!(smooth_rho(&i, 0, 1, 1e-4).is_err());
        assert!(smooth_rho(&i, 0, 0, 1e-4).is_err());
    }

    #[test]
    fn pool_dedup_and_validation() {
        let i = inst(Point::new(0, 0), &[(3, 4, 2), (6, 8, 2), (1, 1, 1)], 4);
        let mut pool = ColumnPool::new();
        let a = pool
            .add_column(&i, Column::route(&i, vec![0, 1]).unwrap())
            .unwrap();
        assert_eq!(a, ColumnId(0));
        let b = pool
            .add_column(&i, Column::route(&i, vec![0, 1]).unwrap())
            .unwrap();
        let c = pool
            .add_column(&i, Column::route(&i, vec![1, 0]).unwrap())
            .unwrap();
        assert_eq!((a, pool.len()), (b, 1));
        assert_eq!(c, a);

        assert!(Column::route(&i, vec![0, 1, 2]).is_err());
        let mut over = Column::route(&i, vec![0, 1]).unwrap();
        over.visit_order.push(2);
        over.covers.push(2);
        assert!(pool.add_column(&i, over).is_err());
        let mut wrong_cost = Column::route(&i, vec![2]).unwrap();
        wrong_cost.cost += 1.0;
        assert!(pool.add_column(&i, wrong_cost).is_err());
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn assignment_costs_split() {
        let ss = SscflpInstance::new(
            vec![1, 2, 1],
            vec![
                Facility {
                    capacity: 3,
                    open_cost: 7,
                },
                Facility {
                    capacity: 1,
                    open_cost: 0,
                },
            ],
            vec![vec![1, 2, 3], vec![0, 0, 0]],
        )
        .unwrap();
        let col = Column::assignment(&ss, 0, &[2, 0]).unwrap();
        assert_eq!(col.covers, vec![0, 2]);
        assert_eq!((col.cost, col.open_cost), (11.0, 7.0));
        assert!(Column::assignment(&ss, 0, &[0, 1, 2]).is_err());
        let mut pool = ColumnPool::new();
        assert!(pool.add_column(&ss, col).is_ok());
    }

    #[test]
    fn jsonl_dump_has_one_line_per_column() {
        let i = inst(Point::new(0, 0), &[(3, 4, 1), (6, 8, 1)], 10);
        let mut pool = ColumnPool::new();
        pool.add_column(&i, Column::artificial(0, 99.0)).unwrap();
        pool.add_column(&i, Column::route(&i, vec![1, 0]).unwrap())
            .unwrap();
        let mut out = Vec::new();
        pool.write_jsonl(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(v["kind"], "route");
        assert_eq!(v["visit_order"], serde_json::json!([1, 0]));
        assert_eq!(v["cost"], 20.0);
    }
}
