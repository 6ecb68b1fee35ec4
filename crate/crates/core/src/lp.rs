//! A small linear-program container and the solve contract used by every
//! master formulation.
//!
//! Models are always minimizations over nonnegative variables. Solving is
//! delegated to HiGHS (dual simplex for one-off solves, primal simplex for
//! warm re-solves); every optimal answer is then checked
//! against an independent optimality certificate (primal feasibility, dual
//! sign feasibility, complementary slackness and the duality gap) before it
//! is returned.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io;

use highs::{ColProblem, HighsModelStatus, Sense};

use crate::error::{Error, Result};

/// Absolute primal/complementarity tolerance on unit-scaled rows.
pub const FEAS_TOL: f64 = 1e-7;
/// Relative duality-gap tolerance.
pub const GAP_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct LpColumn {
    pub name: String,
    pub cost: f64,
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub coefficients: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// `min c·x` subject to sparse rows, `0 ≤ x ≤ upper`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpModel {
    columns: Vec<LpColumn>,
    rows: Vec<LpRow>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn columns(&self) -> &[LpColumn] {
        &self.columns
    }

    pub fn rows(&self) -> &[LpRow] {
        &self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, name: impl Into<String>, sense: RowSense, rhs: f64) -> RowId {
        self.rows.push(LpRow {
            name: name.into(),
            coefficients: Vec::new(),
            sense,
            rhs,
        });
        RowId(self.rows.len() - 1)
    }

    /// Adds a variable together with its coefficients in existing rows.
    pub fn add_column(
        &mut self,
        name: impl Into<String>,
        cost: f64,
        upper: Option<f64>,
        entries: impl IntoIterator<Item = (RowId, f64)>,
    ) -> VarId {
        let var = VarId(self.columns.len());
        self.columns.push(LpColumn {
            name: name.into(),
            cost,
            upper,
        });
        for (row, coef) in entries {
            self.rows[row.0].coefficients.push((var, coef));
        }
        var
    }

    /// Checks that coefficients reference existing columns, numbers are finite
    /// and names are unique within their kind.
    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::with_capacity(self.columns.len());
        for col in &self.columns {
            if !names.insert(col.name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate column name {}",
                    col.name
                )));
            }
            if !col.cost.is_finite() || col.upper.is_some_and(|u| u.is_nan() || u < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "bad cost or bound on column {}",
                    col.name
                )));
            }
        }
        names.clear();
        for row in &self.rows {
            if !names.insert(row.name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate row name {}",
                    row.name
                )));
            }
            if !row.rhs.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "non-finite rhs on row {}",
                    row.name
                )));
            }
            for &(var, coef) in &row.coefficients {
                if var.0 >= self.columns.len() {
                    return Err(Error::InvalidModel(format!(
                        "row {} references missing column {}",
                        row.name, var.0
                    )));
                }
                if !coef.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "non-finite coefficient in row {}",
                        row.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes the model in CPLEX LP text format.
    pub fn write_lp(&self, out: &mut impl io::Write) -> io::Result<()> {
        let mut text = String::new();
        let term = |text: &mut String, first: bool, coef: f64, name: &str| {
            match (coef < 0.0, first) {
                (true, _) => text.push_str(" -"),
                (false, false) => text.push_str(" +"),
                (false, true) => {}
            }
            let mag = coef.abs();
            if mag == 1.0 {
                let _ = write!(text, " {name}");
            } else {
                let _ = write!(text, " {mag} {name}");
            }
        };
        text.push_str("Minimize\n obj:");
        let mut first = true;
        for col in self.columns.iter().filter(|c| c.cost != 0.0) {
            term(&mut text, first, col.cost, &col.name);
            first = false;
        }
        if first {
            text.push_str(" 0");
        }
        text.push_str("\nSubject To\n");
        for row in &self.rows {
            let _ = write!(text, " {}:", row.name);
            if row.coefficients.is_empty() {
                text.push_str(" 0");
            }
            for (k, &(var, coef)) in row.coefficients.iter().enumerate() {
                term(&mut text, k == 0, coef, &self.columns[var.0].name);
            }
            let op = match row.sense {
                RowSense::Le => "<=",
                RowSense::Ge => ">=",
                RowSense::Eq => "=",
            };
            let _ = writeln!(text, " {op} {}", row.rhs);
        }
        text.push_str("Bounds\n");
        for col in &self.columns {
            match col.upper {
                Some(u) => {
                    let _ = writeln!(text, " 0 <= {} <= {u}", col.name);
                }
                None => {
                    let _ = writeln!(text, " {} >= 0", col.name);
                }
            }
        }
        text.push_str("End\n");
        out.write_all(text.as_bytes())
    }

    fn row_activity(&self, primal: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.coefficients.iter().map(|&(v, a)| a * primal[v.0]).sum())
            .collect()
    }

    /// `c_j − Σ_i a_ij y_i` for every column.
    pub fn reduced_costs(&self, duals: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = self.columns.iter().map(|c| c.cost).collect();
        for (row, &y) in self.rows.iter().zip(duals) {
            for &(v, a) in &row.coefficients {
                d[v.0] -= a * y;
            }
        }
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output. Primal and dual vectors are only populated when optimal.
///
/// Row duals follow the usual minimization convention: `≥` rows carry
/// nonnegative duals and `≤` rows nonpositive ones.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
}

impl LpSolution {
    fn without_values(status: LpStatus) -> Self {
        Self {
            status,
            objective: f64::NAN,
            primal: Vec::new(),
            duals: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.primal[var.0]
    }

    pub fn dual(&self, row: RowId) -> f64 {
        self.duals[row.0]
    }
}

type Values = (f64, Vec<f64>, Vec<f64>);

fn to_highs(model: &LpModel) -> (ColProblem, Vec<highs::Row>) {
    let mut problem = ColProblem::default();
    let rows: Vec<_> = model
        .rows
        .iter()
        .map(|row| match row.sense {
            RowSense::Ge => problem.add_row(row.rhs..),
            RowSense::Le => problem.add_row(..=row.rhs),
            RowSense::Eq => problem.add_row(row.rhs..=row.rhs),
        })
        .collect();
    let mut by_column: Vec<Vec<(highs::Row, f64)>> = vec![Vec::new(); model.columns.len()];
    for (r, row) in model.rows.iter().enumerate() {
        for &(var, coef) in &row.coefficients {
            by_column[var.0].push((rows[r], coef));
        }
    }
    for (col, entries) in model.columns.iter().zip(by_column) {
        match col.upper {
            Some(u) => problem.add_column(col.cost, 0.0..=u, entries),
            None => problem.add_column(col.cost, 0.0.., entries),
        }
    }
    (problem, rows)
}

fn load(model: &LpModel, presolve: bool) -> (highs::Model, Vec<highs::Row>) {
    let (problem, rows) = to_highs(model);
    let mut highs = problem.optimise(Sense::Minimise);
    highs.make_quiet();
    highs.set_option("solver", "simplex");
    highs.set_option("primal_feasibility_tolerance", 1e-9);
    highs.set_option("dual_feasibility_tolerance", 1e-9);
    if !presolve {
        highs.set_option("presolve", "off");
    }
    (highs, rows)
}

fn run(highs: highs::Model) -> Result<(highs::Model, HighsModelStatus, Option<Values>)> {
    let solved = highs
        .try_solve()
        .map_err(|status| Error::LpFailure(format!("HiGHS returned {status:?}")))?;
    let status = solved.status();
    let values = (status == HighsModelStatus::Optimal).then(|| {
        let sol = solved.get_solution();
        (
            solved.objective_value(),
            sol.columns().to_vec(),
            sol.dual_rows().to_vec(),
        )
    });
    Ok((solved.into(), status, values))
}

fn finish(model: &LpModel, status: HighsModelStatus, values: Option<Values>) -> Result<LpSolution> {
    match status {
        HighsModelStatus::Optimal => {
            let (objective, primal, duals) = values.expect("optimal status carries values");
            let solution = LpSolution {
                status: LpStatus::Optimal,
                objective,
                primal,
                duals,
            };
            certify(model, &solution)?;
            Ok(solution)
        }
        HighsModelStatus::Infeasible => Ok(LpSolution::without_values(LpStatus::Infeasible)),
        HighsModelStatus::Unbounded => Ok(LpSolution::without_values(LpStatus::Unbounded)),
        other => Err(Error::LpFailure(format!("HiGHS model status {other:?}"))),
    }
}

/// Solves `model` and certifies optimality.
///
/// Numerical trouble (a solver error, or an "optimal" answer failing the
/// certificate) is reported as [`Error::LpFailure`], never as a status.
pub fn solve_lp(model: &LpModel) -> Result<LpSolution> {
    model.validate()?;
    if model.columns.is_empty() {
        return Ok(solve_empty(model));
    }
    let (_, mut status, mut values) = run(load(model, true).0)?;
    if status == HighsModelStatus::UnboundedOrInfeasible {
        (_, status, values) = run(load(model, false).0)?;
    }
    finish(model, status, values)
}

/// Re-solves a growing model starting from the previous optimal basis.
///
/// When the new model only appends rows and columns to the last one solved
/// (and the appended rows have entries only in appended columns), the
/// additions are pushed into the live HiGHS instance. Anything else, and any
/// warm solve that does not end in a certified optimum, falls back to
/// [`solve_lp`].
#[derive(Default)]
pub struct WarmLp {
    highs: Option<highs::Model>,
    rows: Vec<highs::Row>,
    loaded: LpModel,
}

impl WarmLp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, model: &LpModel) -> Result<LpSolution> {
        model.validate()?;
        if model.columns.is_empty() {
            self.highs = None;
            return Ok(solve_empty(model));
        }
        let highs = match self.highs.take() {
            Some(h) if extends(&self.loaded, model) => self.append(h, model),
            _ => {
                let (mut h, rows) = load(model, false);
                // appended columns keep the old basis primal feasible
                h.set_option("simplex_strategy", 4);
                self.rows = rows;
                h
            }
        };
        self.loaded = model.clone();
        let warm = run(highs).and_then(|(h, status, values)| {
            let sol = finish(model, status, values)?;
            if !sol.is_optimal() {
                return Err(Error::LpFailure(format!(
                    "warm solve ended {:?}",
                    sol.status
                )));
            }
            Ok((h, sol))
        });
        match warm {
            Ok((h, sol)) => {
                self.highs = Some(h);
                Ok(sol)
            }
            Err(e) => {
                log::debug!("warm solve rejected ({e}); solving from scratch");
                self.highs = None;
                solve_lp(model)
            }
        }
    }

    fn append(&mut self, mut highs: highs::Model, model: &LpModel) -> highs::Model {
        let (old_rows, old_cols) = (self.loaded.rows.len(), self.loaded.columns.len());
        for row in &model.rows[old_rows..] {
            let r = match row.sense {
                RowSense::Ge => highs.add_row(row.rhs.., []),
                RowSense::Le => highs.add_row(..=row.rhs, []),
                RowSense::Eq => highs.add_row(row.rhs..=row.rhs, []),
            };
            self.rows.push(r);
        }
        let mut by_column: Vec<Vec<(highs::Row, f64)>> =
            vec![Vec::new(); model.columns.len() - old_cols];
        for (r, row) in model.rows.iter().enumerate() {
            for &(var, coef) in &row.coefficients {
                if var.0 >= old_cols {
                    by_column[var.0 - old_cols].push((self.rows[r], coef));
                }
            }
        }
        for (col, entries) in model.columns[old_cols..].iter().zip(by_column) {
            match col.upper {
                Some(u) => highs.add_col(col.cost, 0.0..=u, entries),
                None => highs.add_col(col.cost, 0.0.., entries),
            };
        }
        highs
    }
}

/// Whether `new` equals `old` plus appended columns and rows, with appended
/// rows touching only appended columns.
pub(crate) fn extends(old: &LpModel, new: &LpModel) -> bool {
    let (nr, nc) = (old.rows.len(), old.columns.len());
    if new.rows.len() < nr || new.columns.len() < nc || new.columns[..nc] != old.columns[..] {
        return false;
    }
    let fresh = |coefs: &[(VarId, f64)]| coefs.iter().all(|&(v, _)| v.0 >= nc);
    old.rows.iter().zip(&new.rows).all(|(a, b)| {
        a.name == b.name
            && a.sense == b.sense
            && a.rhs == b.rhs
            && b.coefficients.starts_with(&a.coefficients)
            && fresh(&b.coefficients[a.coefficients.len()..])
    }) && new.rows[nr..].iter().all(|r| fresh(&r.coefficients))
}

fn solve_empty(model: &LpModel) -> LpSolution {
    let feasible = model.rows.iter().all(|row| match row.sense {
        RowSense::Ge => row.rhs <= FEAS_TOL,
        RowSense::Le => row.rhs >= -FEAS_TOL,
        RowSense::Eq => row.rhs.abs() <= FEAS_TOL,
    });
    if feasible {
        LpSolution {
            status: LpStatus::Optimal,
            objective: 0.0,
            primal: Vec::new(),
            duals: vec![0.0; model.rows.len()],
        }
    } else {
        LpSolution::without_values(LpStatus::Infeasible)
    }
}

/// Verifies primal feasibility, dual feasibility, complementary slackness and
/// strong duality of an optimal solution.
pub fn certify(model: &LpModel, sol: &LpSolution) -> Result<()> {
    let fail = |what: String| Err(Error::LpFailure(what));
    if sol.primal.len() != model.columns.len() || sol.duals.len() != model.rows.len() {
        return fail("solution vector sizes do not match the model".into());
    }
    let activity = model.row_activity(&sol.primal);
    for ((row, &act), &y) in model.rows.iter().zip(&activity).zip(&sol.duals) {
        let scale = row
            .coefficients
            .iter()
            .fold(row.rhs.abs().max(1.0), |m, &(_, a)| m.max(a.abs()));
        let slack = act - row.rhs;
        let (violation, sign_ok) = match row.sense {
            RowSense::Ge => ((-slack).max(0.0), y >= -FEAS_TOL),
            RowSense::Le => (slack.max(0.0), y <= FEAS_TOL),
            RowSense::Eq => (slack.abs(), true),
        };
        if violation / scale > FEAS_TOL {
            return fail(format!("row {} violated by {violation:e}", row.name));
        }
        if !sign_ok {
            return fail(format!("row {} has dual {y:e} of the wrong sign", row.name));
        }
        if (slack.abs() * y.abs()) / scale > FEAS_TOL * y.abs().max(1.0) {
            return fail(format!("complementary slackness fails on row {}", row.name));
        }
    }

    let reduced = model.reduced_costs(&sol.duals);
    let mut dual_objective: f64 = model
        .rows
        .iter()
        .zip(&sol.duals)
        .map(|(r, &y)| r.rhs * y)
        .sum();
    for ((col, &x), &d) in model.columns.iter().zip(&sol.primal).zip(&reduced) {
        let scale = col.cost.abs().max(1.0);
        if x < -FEAS_TOL || col.upper.is_some_and(|u| x > u + FEAS_TOL) {
            return fail(format!("column {} out of bounds at {x:e}", col.name));
        }
        match col.upper {
            Some(u) if d < 0.0 => {
                // an upper-bounded column may sit at its bound with a negative reduced cost
                dual_objective += u * d;
                if (u - x) * -d > FEAS_TOL * scale {
                    return fail(format!(
                        "complementary slackness fails on column {}",
                        col.name
                    ));
                }
            }
            _ => {
                if d < -FEAS_TOL * scale {
                    return fail(format!("column {} has reduced cost {d:e}", col.name));
                }
                if x * d > FEAS_TOL * scale.max(x.abs()) {
                    return fail(format!(
                        "complementary slackness fails on column {}",
                        col.name
                    ));
                }
            }
        }
    }
    let primal_objective: f64 = model
        .columns
        .iter()
        .zip(&sol.primal)
        .map(|(c, &x)| c.cost * x)
        .sum();
    let gap = (primal_objective - dual_objective).abs();
    if gap > GAP_TOL * primal_objective.abs().max(1.0) {
        return fail(format!(
            "duality gap {gap:e} between primal {primal_objective} and dual {dual_objective}"
        ));
    }
    if (primal_objective - sol.objective).abs() > GAP_TOL * primal_objective.abs().max(1.0) {
        return fail("reported objective disagrees with c·x".into());
    }
    Ok(())
}
