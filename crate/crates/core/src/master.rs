//! Restricted master LPs built from a column pool, and the mapping of their
//! row duals back to a [`DualSolution`].
//!
//! Six formulations are available:
//!
//! * CVRP set cover with a fleet row ([`build_unstabilized`]);
//! * the same with smoothing swap variables `ω_uv` ([`build_sdoi`]);
//! * the detour master with `θ`, `ψ` and `y` variables ([`build_dtdoi_full`]);
//! * the detour master without `θ` ([`build_dtdoi_reduced`]), where artificial
//!   columns become per-item slack variables in the cover rows;
//! * SSCFLP set cover with facility rows ([`build_sscflp_unstab`]) and its
//!   detour counterpart ([`build_sscflp_dtdoi`]).
//!
//! Variable names: `theta_l`, `psi_l`, `y_u_l`, `omega_u_v`, `slack_u`.
//! Row names: `cover_u`, `fleet`, `facility_f`, `link_u_l`, `demand_d_l`.

use std::collections::BTreeMap;

use crate::column::{
    demand_profile, detour_cost, Column, ColumnId, ColumnKind, ColumnPool, DualSolution,
};
use crate::error::{Error, Result};
use crate::instance::{CvrpInstance, SscflpInstance};
use crate::lp::{LpModel, LpSolution, RowId, RowSense, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Formulation {
    Unstabilized,
    Sdoi,
    DtdoiFull,
    DtdoiReduced,
    SscflpUnstabilized,
    SscflpDtdoi,
}

/// An LP master together with the meaning of its rows and variables.
#[derive(Clone, Debug)]
pub struct MasterModel {
    pub lp: LpModel,
    pub formulation: Formulation,
    pub cover_rows: Vec<RowId>,
    pub fleet_row: Option<RowId>,
    pub facility_rows: Vec<RowId>,
    pub link_rows: Vec<(usize, ColumnId, RowId)>,
    pub demand_rows: Vec<(u32, ColumnId, RowId)>,
    pub theta: Vec<(ColumnId, VarId)>,
    pub psi: Vec<(ColumnId, VarId)>,
    pub y: Vec<(usize, ColumnId, VarId)>,
    pub omega: Vec<((usize, usize), VarId)>,
    pub slack: Vec<(usize, VarId)>,
}

impl MasterModel {
    fn new(formulation: Formulation, n_items: usize) -> Self {
        let mut lp = LpModel::new();
        let cover_rows = (0..n_items)
            .map(|u| lp.add_row(format!("cover_{u}"), RowSense::Ge, 1.0))
            .collect();
        Self {
            lp,
            formulation,
            cover_rows,
            fleet_row: None,
            facility_rows: Vec::new(),
            link_rows: Vec::new(),
            demand_rows: Vec::new(),
            theta: Vec::new(),
            psi: Vec::new(),
            y: Vec::new(),
            omega: Vec::new(),
            slack: Vec::new(),
        }
    }

    pub fn n_items(&self) -> usize {
        self.cover_rows.len()
    }

    /// Primal values of the structured variables.
    pub fn primal(&self, sol: &LpSolution) -> Result<MasterPrimal> {
        if !sol.is_optimal() {
            return Err(Error::NotOptimal(sol.status));
        }
        let v = |var: VarId| sol.value(var);
        Ok(MasterPrimal {
            objective: sol.objective,
            theta: self.theta.iter().map(|&(l, x)| (l, v(x))).collect(),
            psi: self.psi.iter().map(|&(l, x)| (l, v(x))).collect(),
            y: self.y.iter().map(|&(u, l, x)| (u, l, v(x))).collect(),
            omega: self.omega.iter().map(|&(uv, x)| (uv, v(x))).collect(),
            slack: self.slack.iter().map(|&(u, x)| (u, v(x))).collect(),
        })
    }
}

/// Structured primal solution of a master.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MasterPrimal {
    pub objective: f64,
    pub theta: Vec<(ColumnId, f64)>,
    pub psi: Vec<(ColumnId, f64)>,
    pub y: Vec<(usize, ColumnId, f64)>,
    pub omega: Vec<((usize, usize), f64)>,
    pub slack: Vec<(usize, f64)>,
}

impl MasterPrimal {
    pub fn max_omega(&self) -> f64 {
        self.omega.iter().map(|&(_, x)| x).fold(0.0, f64::max)
    }

    /// Largest value taken by an artificial column (or artificial slack).
    pub fn max_artificial(&self, pool: &ColumnPool) -> f64 {
        self.theta
            .iter()
            .filter(|&&(l, _)| pool.get(l).is_artificial())
            .map(|&(_, x)| x)
            .chain(self.slack.iter().map(|&(_, x)| x))
            .fold(0.0, f64::max)
    }
}

fn check_covered(pool: &ColumnPool, n_items: usize) -> Result<()> {
    let mut covered = vec![false; n_items];
    for (_, col) in pool.iter() {
        for &u in &col.covers {
            if u >= n_items {
                return Err(Error::InvalidColumn(format!(
                    "column covers unknown item {u}"
                )));
            }
            covered[u] = true;
        }
    }
    match covered.iter().position(|&c| !c) {
        Some(u) => Err(Error::InvalidModel(format!(
            "item {u} has no covering column"
        ))),
        None => Ok(()),
    }
}

fn ensure_kind(pool: &ColumnPool, want_route: bool) -> Result<()> {
    for (id, col) in pool.iter() {
        let ok = match col.kind {
            ColumnKind::Artificial => true,
            ColumnKind::Route => want_route,
            ColumnKind::FacilityAssignment { .. } => !want_route,
        };
        if !ok {
            return Err(Error::InvalidColumn(format!(
                "column {} has the wrong kind for this master",
                id.0
            )));
        }
    }
    Ok(())
}

fn add_theta(master: &mut MasterModel, id: ColumnId, col: &Column, coupling: Option<RowId>) {
    let mut entries: Vec<(RowId, f64)> = col
        .covers
        .iter()
        .map(|&u| (master.cover_rows[u], 1.0))
        .collect();
    if let Some(row) = coupling {
        entries.push((row, 1.0));
    }
    let var = master
        .lp
        .add_column(format!("theta_{}", id.0), col.cost, None, entries);
    master.theta.push((id, var));
}

/// Cover rows and the fleet row.
fn fleet_base(formulation: Formulation, n_items: usize, vehicles: u32) -> (MasterModel, RowId) {
    let mut m = MasterModel::new(formulation, n_items);
    let fleet = m.lp.add_row("fleet", RowSense::Le, f64::from(vehicles));
    m.fleet_row = Some(fleet);
    (m, fleet)
}

// Builders emit everything belonging to one pooled column as a contiguous
// block, in pool order, so the master after a column is added extends the
// previous one (see `WarmLp`).

/// Set cover master: cover rows `≥ 1`, one fleet row `Σθ ≤ K` over real columns.
pub fn build_unstabilized(pool: &ColumnPool, n_items: usize, vehicles: u32) -> Result<MasterModel> {
    ensure_kind(pool, true)?;
    check_covered(pool, n_items)?;
    let (mut m, fleet) = fleet_base(Formulation::Unstabilized, n_items, vehicles);
    for (id, col) in pool.iter() {
        add_theta(&mut m, id, col, (!col.is_artificial()).then_some(fleet));
    }
    Ok(m)
}

/// Smoothing costs `ρ_uv` for every swap-feasible pair.
pub fn sdoi_costs(inst: &CvrpInstance, epsilon: f64) -> Result<BTreeMap<(usize, usize), f64>> {
    let demands: Vec<u32> = inst.demands().collect();
    crate::column::smooth_swap_set(&demands)
        .into_iter()
        .map(|(u, v)| Ok(((u, v), crate::column::smooth_rho(inst, u, v, epsilon)?)))
        .collect()
}

/// Set cover master plus swap variables `ω_uv` (cost `ρ_uv`, `−1` in row `u`,
/// `+1` in row `v`) for each pair of `swaps`.
pub fn build_sdoi(
    pool: &ColumnPool,
    n_items: usize,
    vehicles: u32,
    swaps: &[(usize, usize)],
    rho: &BTreeMap<(usize, usize), f64>,
) -> Result<MasterModel> {
    ensure_kind(pool, true)?;
    check_covered(pool, n_items)?;
    let (mut m, fleet) = fleet_base(Formulation::Sdoi, n_items, vehicles);
    for &(u, v) in swaps {
        let cost = *rho
            .get(&(u, v))
            .ok_or_else(|| Error::InvalidModel(format!("missing smoothing cost for ({u}, {v})")))?;
        if u >= n_items || v >= n_items {
            return Err(Error::InvalidModel(format!(
                "swap ({u}, {v}) references an unknown item"
            )));
        }
        let entries = [(m.cover_rows[u], -1.0), (m.cover_rows[v], 1.0)];
        let var =
            m.lp.add_column(format!("omega_{u}_{v}"), cost, None, entries);
        m.omega.push(((u, v), var));
    }
    for (id, col) in pool.iter() {
        add_theta(&mut m, id, col, (!col.is_artificial()).then_some(fleet));
    }
    Ok(m)
}

/// Detour-specific data of one real column.
struct DetourColumn {
    id: ColumnId,
    psi_cost: f64,
    y_costs: Vec<f64>,
    profile: Vec<(u32, usize)>,
    coupling: RowId,
}

/// Appends the link and demand rows of one column, then its `ψ` and `y`.
fn add_detour_column(m: &mut MasterModel, demands: &[u32], dc: DetourColumn) {
    let n = m.n_items();
    let link: Vec<RowId> = (0..n)
        .map(|u| {
            let row =
                m.lp.add_row(format!("link_{u}_{}", dc.id.0), RowSense::Le, 0.0);
            m.link_rows.push((u, dc.id, row));
            row
        })
        .collect();
    let demand: Vec<(u32, RowId)> = dc
        .profile
        .iter()
        .map(|&(d, _)| {
            let row =
                m.lp.add_row(format!("demand_{d}_{}", dc.id.0), RowSense::Le, 0.0);
            m.demand_rows.push((d, dc.id, row));
            (d, row)
        })
        .collect();

    let mut entries: Vec<(RowId, f64)> = link.iter().map(|&r| (r, -1.0)).collect();
    entries.extend(
        dc.profile
            .iter()
            .zip(&demand)
            .map(|(&(_, count), &(_, r))| (r, -(count as f64))),
    );
    entries.push((dc.coupling, 1.0));
    let psi =
        m.lp.add_column(format!("psi_{}", dc.id.0), dc.psi_cost, None, entries);
    m.psi.push((dc.id, psi));

    for u in 0..n {
        let mut entries = vec![(m.cover_rows[u], 1.0), (link[u], 1.0)];
        entries.extend(
            demand
                .iter()
                .filter(|&&(d, _)| demands[u] >= d)
                .map(|&(_, r)| (r, 1.0)),
        );
        let var =
            m.lp.add_column(format!("y_{u}_{}", dc.id.0), dc.y_costs[u], None, entries);
        m.y.push((u, dc.id, var));
    }
}

fn cvrp_detour_column(
    inst: &CvrpInstance,
    demands: &[u32],
    id: ColumnId,
    col: &Column,
    fleet: RowId,
) -> Result<DetourColumn> {
    Ok(DetourColumn {
        id,
        psi_cost: col.cost,
        y_costs: (0..inst.n_items())
            .map(|u| detour_cost(inst, col, u).map(|c| c as f64))
            .collect::<Result<_>>()?,
        profile: demand_profile(demands, inst.demand_set(), col),
        coupling: fleet,
    })
}

/// Detour master with `θ_l`, `ψ_l` and `y_ul`.
pub fn build_dtdoi_full(inst: &CvrpInstance, pool: &ColumnPool) -> Result<MasterModel> {
    let n = inst.n_items();
    ensure_kind(pool, true)?;
    check_covered(pool, n)?;
    let (mut m, fleet) = fleet_base(Formulation::DtdoiFull, n, inst.vehicles());
    let demands: Vec<u32> = inst.demands().collect();
    for (id, col) in pool.iter() {
        if col.is_artificial() {
            add_theta(&mut m, id, col, None);
        } else {
            add_theta(&mut m, id, col, Some(fleet));
            let dc = cvrp_detour_column(inst, &demands, id, col, fleet)?;
            add_detour_column(&mut m, &demands, dc);
        }
    }
    Ok(m)
}

/// Detour master without `θ`; artificial columns become `slack_u` variables.
pub fn build_dtdoi_reduced(inst: &CvrpInstance, pool: &ColumnPool) -> Result<MasterModel> {
    let n = inst.n_items();
    ensure_kind(pool, true)?;
    check_covered(pool, n)?;
    let (mut m, fleet) = fleet_base(Formulation::DtdoiReduced, n, inst.vehicles());
    let demands: Vec<u32> = inst.demands().collect();
    for (id, col) in pool.iter() {
        if col.is_artificial() {
            let u = col.covers[0];
            let var = m.lp.add_column(
                format!("slack_{u}"),
                col.cost,
                None,
                [(m.cover_rows[u], 1.0)],
            );
            m.slack.push((u, var));
        } else {
            let dc = cvrp_detour_column(inst, &demands, id, col, fleet)?;
            add_detour_column(&mut m, &demands, dc);
        }
    }
    Ok(m)
}

fn sscflp_base(
    inst: &SscflpInstance,
    pool: &ColumnPool,
    formulation: Formulation,
) -> Result<MasterModel> {
    ensure_kind(pool, false)?;
    check_covered(pool, inst.n_customers())?;
    let mut m = MasterModel::new(formulation, inst.n_customers());
    m.facility_rows = (0..inst.n_facilities())
        .map(|f| m.lp.add_row(format!("facility_{f}"), RowSense::Le, 1.0))
        .collect();
    Ok(m)
}

/// SSCFLP set cover: cover rows `≥ 1`, one `≤ 1` row per facility.
pub fn build_sscflp_unstab(inst: &SscflpInstance, pool: &ColumnPool) -> Result<MasterModel> {
    let mut m = sscflp_base(inst, pool, Formulation::SscflpUnstabilized)?;
    for (id, col) in pool.iter() {
        let row = col.facility().map(|f| m.facility_rows[f]);
        add_theta(&mut m, id, col, row);
    }
    Ok(m)
}

/// SSCFLP detour master: `ψ_l` costs only the opening cost, `y_ul` costs the
/// service cost from the column's facility, and facility rows couple `θ + ψ`.
pub fn build_sscflp_dtdoi(inst: &SscflpInstance, pool: &ColumnPool) -> Result<MasterModel> {
    let mut m = sscflp_base(inst, pool, Formulation::SscflpDtdoi)?;
    for (id, col) in pool.iter() {
        let Some(f) = col.facility() else {
            add_theta(&mut m, id, col, None);
            continue;
        };
        let row = m.facility_rows[f];
        add_theta(&mut m, id, col, Some(row));
        let dc = DetourColumn {
            id,
            psi_cost: col.open_cost,
            y_costs: (0..inst.n_customers())
                .map(|u| inst.service_cost(f, u) as f64)
                .collect(),
            profile: demand_profile(inst.demands(), inst.demand_set(), col),
            coupling: row,
        };
        add_detour_column(&mut m, inst.demands(), dc);
    }
    Ok(m)
}

/// Reads row duals into nonnegative multipliers: `π_u` from cover rows and
/// sign-flipped `π_0`, `π_ul`, `π_dl`, `π_f` from the `≤` rows.
pub fn extract_duals(master: &MasterModel, sol: &LpSolution) -> Result<DualSolution> {
    if !sol.is_optimal() {
        return Err(Error::NotOptimal(sol.status));
    }
    if sol.duals.len() != master.lp.num_rows() {
        return Err(Error::MissingDual(
            "row duals do not match the model".into(),
        ));
    }
    let y = |row: RowId| sol.dual(row);
    Ok(DualSolution {
        pi_u: master.cover_rows.iter().map(|&r| y(r)).collect(),
        pi_0: master.fleet_row.map_or(0.0, |r| -y(r)),
        pi_ul: master
            .link_rows
            .iter()
            .map(|&(u, l, r)| ((u, l), -y(r)))
            .collect(),
        pi_dl: master
            .demand_rows
            .iter()
            .map(|&(d, l, r)| ((d, l), -y(r)))
            .collect(),
        pi_f: master.facility_rows.iter().map(|&r| -y(r)).collect(),
    })
}
