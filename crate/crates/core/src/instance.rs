//! CVRP and SSCFLP instances, seeded generators and the JSON file format.
//!
//! All coordinates, demands and costs are integers. Distances are the
//! Euclidean distance rounded up, which keeps route costs exact and still
//! satisfies the triangle inequality on any shared integer grid.
//!
//! Generators draw from [`ChaCha8Rng`] seeded with `seed_from_u64`, so a seed
//! reproduces the same instance on every platform.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attempts made to redraw random demands/capacities before giving up.
const MAX_REDRAWS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

/// Euclidean distance between two grid points, rounded up to the next integer.
pub fn ceil_distance(a: Point, b: Point) -> u64 {
    let dx = a.x.abs_diff(b.x);
    let dy = a.y.abs_diff(b.y);
    let sq = dx * dx + dy * dy;
    let root = sq.isqrt();
    if root * root == sq {
        root
    } else {
        root + 1
    }
}

/// A node of `N⁺`: an item, the start depot (`-1`) or the end depot (`-2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Item(usize),
    StartDepot,
    EndDepot,
}

impl NodeId {
    /// Maps the signed convention (`-1`, `-2`, or an item index) to a node.
    pub fn from_signed(id: i64) -> Result<Self> {
        match id {
            -1 => Ok(Self::StartDepot),
            -2 => Ok(Self::EndDepot),
            i if i >= 0 => Ok(Self::Item(i as usize)),
            other => Err(Error::UnknownNode(other.to_string())),
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Item(i) => write!(f, "{i}"),
            Self::StartDepot => f.write_str("-1"),
            Self::EndDepot => f.write_str("-2"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CvrpItem {
    pub location: Point,
    pub demand: u32,
}

/// A capacitated vehicle routing instance.
///
/// Both depots share `depot`; the distance matrix over items plus the depot is
/// computed once at construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CvrpInstance {
    depot: Point,
    capacity: u32,
    vehicles: u32,
    items: Vec<CvrpItem>,
    demand_set: Vec<u32>,
    // row-major (n + 1) x (n + 1), index n is the depot
    dist: Vec<u64>,
}

impl CvrpInstance {
    pub fn new(depot: Point, capacity: u32, vehicles: u32, items: Vec<CvrpItem>) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidInstance("capacity must be positive".into()));
        }
        if vehicles == 0 {
            return Err(Error::InvalidInstance(
                "vehicle count must be positive".into(),
            ));
        }
        for (i, item) in items.iter().enumerate() {
            if item.demand == 0 || item.demand > capacity {
                return Err(Error::InvalidInstance(format!(
                    "item {i} has demand {} outside 1..={capacity}",
                    item.demand
                )));
            }
        }
        let total: u64 = items.iter().map(|it| u64::from(it.demand)).sum();
        let fleet = u64::from(capacity) * u64::from(vehicles);
        if total > fleet {
            return Err(Error::InvalidInstance(format!(
                "total demand {total} exceeds fleet capacity {fleet}"
            )));
        }
        let demand_set = items
            .iter()
            .map(|it| it.demand)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let n = items.len();
        let loc = |i: usize| if i == n { depot } else { items[i].location };
        let mut dist = vec![0; (n + 1) * (n + 1)];
        for a in 0..=n {
            for b in 0..=n {
                dist[a * (n + 1) + b] = ceil_distance(loc(a), loc(b));
            }
        }

        Ok(Self {
            depot,
            capacity,
            vehicles,
            items,
            demand_set,
            dist,
        })
    }

    pub fn depot(&self) -> Point {
        self.depot
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn vehicles(&self) -> u32 {
        self.vehicles
    }

    pub fn items(&self) -> &[CvrpItem] {
        &self.items
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn demand(&self, item: usize) -> u32 {
        self.items[item].demand
    }

    pub fn demands(&self) -> impl Iterator<Item = u32> + '_ {
        self.items.iter().map(|it| it.demand)
    }

    /// Sorted distinct item demands.
    pub fn demand_set(&self) -> &[u32] {
        &self.demand_set
    }

    pub fn total_demand(&self) -> u64 {
        self.demands().map(u64::from).sum()
    }

    pub fn location(&self, node: NodeId) -> Result<Point> {
        match node {
            NodeId::Item(i) => self
                .items
                .get(i)
                .map(|it| it.location)
                .ok_or_else(|| Error::UnknownNode(node.to_string())),
            NodeId::StartDepot | NodeId::EndDepot => Ok(self.depot),
        }
    }

    /// Rounded-up Euclidean distance between two nodes of `N⁺`.
    pub fn distance(&self, a: NodeId, b: NodeId) -> Result<u64> {
        Ok(self.dist[self.matrix_index(a)? * (self.n_items() + 1) + self.matrix_index(b)?])
    }

    fn matrix_index(&self, node: NodeId) -> Result<usize> {
        match node {
            NodeId::Item(i) if i < self.n_items() => Ok(i),
            NodeId::Item(_) => Err(Error::UnknownNode(node.to_string())),
            NodeId::StartDepot | NodeId::EndDepot => Ok(self.n_items()),
        }
    }

    /// Item-to-item distance. Panics on out-of-range indices.
    #[inline]
    pub fn item_distance(&self, a: usize, b: usize) -> u64 {
        self.dist[a * (self.n_items() + 1) + b]
    }

    /// Item-to-depot distance. Panics on out-of-range indices.
    #[inline]
    pub fn depot_distance(&self, item: usize) -> u64 {
        self.dist[item * (self.n_items() + 1) + self.n_items()]
    }

    /// Cost assigned to artificial columns: ten times the item count times the
    /// diagonal of the coordinate bounding box (at least one).
    pub fn big_m(&self) -> f64 {
        let points = self.items.iter().map(|it| it.location).chain([self.depot]);
        let (mut lo, mut hi) = (self.depot, self.depot);
        for p in points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let diagonal = ceil_distance(lo, hi).max(1);
        10.0 * self.n_items().max(1) as f64 * diagonal as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Facility {
    pub capacity: u32,
    pub open_cost: u64,
}

/// A single-source capacitated facility location instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SscflpInstance {
    customers: Vec<u32>,
    facilities: Vec<Facility>,
    service_cost: Vec<Vec<u64>>,
    demand_set: Vec<u32>,
}

impl SscflpInstance {
    pub fn new(
        customers: Vec<u32>,
        facilities: Vec<Facility>,
        service_cost: Vec<Vec<u64>>,
    ) -> Result<Self> {
        if facilities.is_empty() {
            return Err(Error::InvalidInstance("no facilities".into()));
        }
        if service_cost.len() != facilities.len()
            || service_cost.iter().any(|row| row.len() != customers.len())
        {
            return Err(Error::InvalidInstance(format!(
                "service_cost must be {} x {}",
                facilities.len(),
                customers.len()
            )));
        }
        let max_cap = facilities.iter().map(|f| f.capacity).max().unwrap_or(0);
        for (u, &d) in customers.iter().enumerate() {
            if d == 0 {
                return Err(Error::InvalidInstance(format!(
                    "customer {u} has zero demand"
                )));
            }
            if d > max_cap {
                return Err(Error::InvalidInstance(format!(
                    "customer {u} demand {d} exceeds every facility capacity"
                )));
            }
        }
        let total: u64 = customers.iter().map(|&d| u64::from(d)).sum();
        let supply: u64 = facilities.iter().map(|f| u64::from(f.capacity)).sum();
        if total > supply {
            return Err(Error::InvalidInstance(format!(
                "total demand {total} exceeds total capacity {supply}"
            )));
        }
        let demand_set = customers
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Self {
            customers,
            facilities,
            service_cost,
            demand_set,
        })
    }

    pub fn n_customers(&self) -> usize {
        self.customers.len()
    }

    pub fn n_facilities(&self) -> usize {
        self.facilities.len()
    }

    pub fn demand(&self, customer: usize) -> u32 {
        self.customers[customer]
    }

    pub fn demands(&self) -> &[u32] {
        &self.customers
    }

    pub fn demand_set(&self) -> &[u32] {
        &self.demand_set
    }

    pub fn facilities(&self) -> &[Facility] {
        &self.facilities
    }

    pub fn facility(&self, f: usize) -> Facility {
        self.facilities[f]
    }

    #[inline]
    pub fn service_cost(&self, facility: usize, customer: usize) -> u64 {
        self.service_cost[facility][customer]
    }

    pub fn service_costs(&self) -> &[Vec<u64>] {
        &self.service_cost
    }

    /// Ten times an upper bound on the cost of any full assignment.
    pub fn big_m(&self) -> f64 {
        let open: u64 = self.facilities.iter().map(|f| f.open_cost).sum();
        let serve: u64 = (0..self.n_customers())
            .map(|u| {
                (0..self.n_facilities())
                    .map(|f| self.service_cost(f, u))
                    .max()
                    .unwrap_or(0)
            })
            .sum();
        10.0 * (open + serve).max(1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DemandRule {
    Unit,
    Uniform { lo: u32, hi: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvrpParams {
    pub seed: u64,
    pub n_items: usize,
    pub grid_size: i64,
    pub capacity: u32,
    pub vehicles: u32,
    pub demand_rule: DemandRule,
}

impl CvrpParams {
    /// 40 unit-demand items on a 100 x 100 grid, 5 vehicles of capacity 10.
    pub fn protocol(seed: u64) -> Self {
        Self {
            seed,
            n_items: 40,
            grid_size: 100,
            capacity: 10,
            vehicles: 5,
            demand_rule: DemandRule::Unit,
        }
    }
}

pub fn generate_cvrp(params: &CvrpParams) -> Result<CvrpInstance> {
    let CvrpParams {
        seed,
        n_items,
        grid_size,
        capacity,
        vehicles,
        demand_rule,
    } = *params;
    if n_items == 0 || grid_size <= 0 || capacity == 0 || vehicles == 0 {
        return Err(Error::InfeasibleParameters(
            "item count, grid size, capacity and vehicle count must be positive".into(),
        ));
    }
    let fleet = u64::from(capacity) * u64::from(vehicles);
    let (lo, hi) = match demand_rule {
        DemandRule::Unit => (1, 1),
        DemandRule::Uniform { lo, hi } => (lo, hi),
    };
    if lo == 0 || lo > hi || hi > capacity {
        return Err(Error::InfeasibleParameters(format!(
            "demand range {lo}..={hi} must lie within 1..={capacity}"
        )));
    }
    if n_items as u64 * u64::from(lo) > fleet {
        return Err(Error::InfeasibleParameters(format!(
            "{n_items} items of demand at least {lo} exceed fleet capacity {fleet} ({vehicles} x {capacity})"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_point = |rng: &mut ChaCha8Rng| {
        Point::new(rng.gen_range(0..=grid_size), rng.gen_range(0..=grid_size))
    };
    let depot = draw_point(&mut rng);
    let locations: Vec<Point> = (0..n_items).map(|_| draw_point(&mut rng)).collect();

    for _ in 0..MAX_REDRAWS {
        let demands: Vec<u32> = (0..n_items).map(|_| rng.gen_range(lo..=hi)).collect();
        let total: u64 = demands.iter().map(|&d| u64::from(d)).sum();
        if total <= fleet {
            let items = locations
                .iter()
                .zip(demands)
                .map(|(&location, demand)| CvrpItem { location, demand })
                .collect();
            return CvrpInstance::new(depot, capacity, vehicles, items);
        }
    }
    Err(Error::InfeasibleParameters(format!(
        "could not draw demands fitting fleet capacity {fleet} in {MAX_REDRAWS} attempts"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SscflpParams {
    pub seed: u64,
    pub n_customers: usize,
    pub n_facilities: usize,
    pub grid_size: i64,
    pub capacity_range: (u32, u32),
    pub demand_range: (u32, u32),
    pub open_cost_range: (u64, u64),
}

pub fn generate_sscflp(params: &SscflpParams) -> Result<SscflpInstance> {
    let SscflpParams {
        seed,
        n_customers,
        n_facilities,
        grid_size,
        capacity_range: (cap_lo, cap_hi),
        demand_range: (dem_lo, dem_hi),
        open_cost_range: (open_lo, open_hi),
    } = *params;
    if n_facilities == 0 || grid_size <= 0 {
        return Err(Error::InfeasibleParameters(
            "facility count and grid size must be positive".into(),
        ));
    }
    if cap_lo == 0 || cap_lo > cap_hi || dem_lo == 0 || dem_lo > dem_hi || open_lo > open_hi {
        return Err(Error::InfeasibleParameters(
            "empty or zero-based range".into(),
        ));
    }
    if dem_lo > cap_hi {
        return Err(Error::InfeasibleParameters(format!(
            "smallest demand {dem_lo} exceeds largest capacity {cap_hi}"
        )));
    }
    if n_customers as u64 * u64::from(dem_lo) > n_facilities as u64 * u64::from(cap_hi) {
        return Err(Error::InfeasibleParameters(format!(
            "{n_customers} customers of demand at least {dem_lo} exceed {n_facilities} facilities of capacity at most {cap_hi}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_point = |rng: &mut ChaCha8Rng| {
        Point::new(rng.gen_range(0..=grid_size), rng.gen_range(0..=grid_size))
    };
    let customer_loc: Vec<Point> = (0..n_customers).map(|_| draw_point(&mut rng)).collect();
    let facility_loc: Vec<Point> = (0..n_facilities).map(|_| draw_point(&mut rng)).collect();
    let open_costs: Vec<u64> = (0..n_facilities)
        .map(|_| rng.gen_range(open_lo..=open_hi))
        .collect();
    let service_cost: Vec<Vec<u64>> = facility_loc
        .iter()
        .map(|&f| customer_loc.iter().map(|&c| ceil_distance(f, c)).collect())
        .collect();

    for _ in 0..MAX_REDRAWS {
        let caps: Vec<u32> = (0..n_facilities)
            .map(|_| rng.gen_range(cap_lo..=cap_hi))
            .collect();
        let demands: Vec<u32> = (0..n_customers)
            .map(|_| rng.gen_range(dem_lo..=dem_hi))
            .collect();
        let max_cap = caps.iter().copied().max().unwrap_or(0);
        let supply: u64 = caps.iter().map(|&c| u64::from(c)).sum();
        let total: u64 = demands.iter().map(|&d| u64::from(d)).sum();
        if total <= supply && demands.iter().all(|&d| d <= max_cap) {
            let facilities = caps
                .into_iter()
                .zip(&open_costs)
                .map(|(capacity, &open_cost)| Facility {
                    capacity,
                    open_cost,
                })
                .collect();
            return SscflpInstance::new(demands, facilities, service_cost);
        }
    }
    Err(Error::InfeasibleParameters(format!(
        "could not draw a feasible capacity/demand combination in {MAX_REDRAWS} attempts"
    )))
}

/// Any instance the file format can hold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instance {
    Cvrp(CvrpInstance),
    Sscflp(SscflpInstance),
}

impl From<CvrpInstance> for Instance {
    fn from(inst: CvrpInstance) -> Self {
        Self::Cvrp(inst)
    }
}

impl From<SscflpInstance> for Instance {
    fn from(inst: SscflpInstance) -> Self {
        Self::Sscflp(inst)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum InstanceFile {
    Cvrp {
        depot: [i64; 2],
        capacity: u32,
        vehicles: u32,
        items: Vec<[i64; 3]>,
    },
    Sscflp {
        customers: Vec<u32>,
        /// `[capacity, open_cost]` per facility.
        facilities: Vec<[u64; 2]>,
        service_cost: Vec<Vec<u64>>,
    },
}

impl Instance {
    pub fn to_json(&self) -> String {
        let file = match self {
            Instance::Cvrp(inst) => InstanceFile::Cvrp {
                depot: [inst.depot.x, inst.depot.y],
                capacity: inst.capacity,
                vehicles: inst.vehicles,
                items: inst
                    .items
                    .iter()
                    .map(|it| [it.location.x, it.location.y, i64::from(it.demand)])
                    .collect(),
            },
            Instance::Sscflp(inst) => InstanceFile::Sscflp {
                customers: inst.customers.clone(),
                facilities: inst
                    .facilities
                    .iter()
                    .map(|f| [u64::from(f.capacity), f.open_cost])
                    .collect(),
                service_cost: inst.service_cost.clone(),
            },
        };
        serde_json::to_string(&file).expect("instance serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        match file {
            InstanceFile::Cvrp {
                depot,
                capacity,
                vehicles,
                items,
            } => {
                let items = items
                    .into_iter()
                    .enumerate()
                    .map(|(i, [x, y, d])| {
                        let demand = u32::try_from(d).map_err(|_| {
                            Error::Parse(format!("items[{i}]: demand {d} out of range"))
                        })?;
                        Ok(CvrpItem {
                            location: Point::new(x, y),
                            demand,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(
                    CvrpInstance::new(Point::new(depot[0], depot[1]), capacity, vehicles, items)?
                        .into(),
                )
            }
            InstanceFile::Sscflp {
                customers,
                facilities,
                service_cost,
            } => {
                let facilities = facilities
                    .into_iter()
                    .enumerate()
                    .map(|(f, [cap, open_cost])| {
                        let capacity = u32::try_from(cap).map_err(|_| {
                            Error::Parse(format!("facilities[{f}]: capacity {cap} out of range"))
                        })?;
                        Ok(Facility {
                            capacity,
                            open_cost,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SscflpInstance::new(customers, facilities, service_cost)?.into())
            }
        }
    }
}

pub fn save_instance(path: impl AsRef<Path>, inst: &Instance) -> Result<()> {
    std::fs::write(path, inst.to_json())?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    Instance::from_json(&std::fs::read_to_string(path)?)
}
