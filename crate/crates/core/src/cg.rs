//! The column generation loop: build the master over the pool, solve it, read
//! duals, price one column, repeat until no column has negative reduced cost.

use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::column::{
    smooth_swap_set, Column, ColumnPool, ColumnRules, DualSolution, DEFAULT_EPSILON,
};
use crate::error::{Error, Result};
use crate::instance::{CvrpInstance, SscflpInstance};
use crate::lp::WarmLp;
use crate::master::{
    build_dtdoi_full, build_dtdoi_reduced, build_sdoi, build_sscflp_dtdoi, build_sscflp_unstab,
    build_unstabilized, extract_duals, sdoi_costs, MasterModel, MasterPrimal,
};
use crate::pricing::{price_cvrp, price_sscflp, PricingResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilization {
    None,
    Sdoi,
    DtdoiFull,
    DtdoiReduced,
}

impl Stabilization {
    pub const ALL: [Stabilization; 4] =
        [Self::None, Self::Sdoi, Self::DtdoiFull, Self::DtdoiReduced];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Sdoi => "sdoi",
            Self::DtdoiFull => "dtdoi_full",
            Self::DtdoiReduced => "dtdoi_reduced",
        }
    }
}

impl fmt::Display for Stabilization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stabilization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown stabilization {s:?} (none, sdoi, dtdoi_full, dtdoi_reduced)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgConfig {
    pub stabilization: Stabilization,
    /// Offset added to smoothing costs.
    pub epsilon: f64,
    /// Stop once the best reduced cost is at least `-tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_time: Duration,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            stabilization: Stabilization::None,
            epsilon: DEFAULT_EPSILON,
            tolerance: 1e-6,
            max_iterations: 5000,
            max_time: Duration::from_secs(600),
        }
    }
}

impl CgConfig {
    pub fn with_stabilization(stabilization: Stabilization) -> Self {
        Self {
            stabilization,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidModel("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidModel(
                "at least one iteration is required".into(),
            ));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidModel(
                "epsilon must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub elapsed_sec: f64,
    pub rmp_obj: f64,
    pub min_reduced_cost: f64,
    pub lagrangian_lb: f64,
    pub best_lb: f64,
    pub num_columns: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Optimal,
    IterationCap,
    TimeCap,
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub stabilization: Stabilization,
    pub objective: f64,
    pub primal: MasterPrimal,
    pub duals: DualSolution,
    pub log: Vec<IterationRecord>,
    pub termination: Termination,
    pub pool: ColumnPool,
    /// Time spent in the loop (master solves and pricing).
    pub elapsed: Duration,
}

impl CgResult {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    pub fn best_bound(&self) -> f64 {
        self.log.last().map_or(f64::NEG_INFINITY, |r| r.best_lb)
    }

    pub fn write_log_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_log_csv(&self.log, std::fs::File::create(path)?)
    }
}

/// A failed run with the iterations completed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("column generation failed after {} iterations", .log.len())]
pub struct CgError {
    #[source]
    pub source: Error,
    pub log: Vec<IterationRecord>,
}

pub fn write_log_csv(log: &[IterationRecord], out: impl io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rec in log {
        w.serialize(rec)?;
    }
    if log.is_empty() {
        w.write_record([
            "iteration",
            "elapsed_sec",
            "rmp_obj",
            "min_reduced_cost",
            "lagrangian_lb",
            "best_lb",
            "num_columns",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log_csv(input: impl io::Read) -> Result<Vec<IterationRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// `rmp_obj + multiplier · min(min_rc, 0)`.
pub fn lagrangian_bound(rmp_obj: f64, min_rc: f64, multiplier: f64) -> f64 {
    rmp_obj + multiplier * min_rc.min(0.0)
}

type MasterBuilder<'a> = Box<dyn Fn(&ColumnPool) -> Result<MasterModel> + 'a>;

/// A problem the driver can run: artificial columns, a master per
/// stabilization, and an exact pricer.
pub trait CgProblem: ColumnRules {
    /// One column per item at a prohibitive cost, using no vehicle or facility.
    fn artificial_columns(&self) -> Vec<Column>;
    /// How many columns a solution may use; scales the Lagrangian bound.
    fn bound_multiplier(&self) -> f64;
    fn master_builder(&self, config: &CgConfig) -> Result<MasterBuilder<'_>>;
    fn price(&self, duals: &DualSolution) -> Result<PricingResult>;
}

impl CgProblem for CvrpInstance {
    fn artificial_columns(&self) -> Vec<Column> {
        artificial_columns(self)
    }

    fn bound_multiplier(&self) -> f64 {
        f64::from(self.vehicles())
    }

    fn master_builder(&self, config: &CgConfig) -> Result<MasterBuilder<'_>> {
        let (n, k) = (self.n_items(), self.vehicles());
        Ok(match config.stabilization {
            Stabilization::None => Box::new(move |pool| build_unstabilized(pool, n, k)),
            Stabilization::Sdoi => {
                let demands: Vec<u32> = self.demands().collect();
                let swaps = smooth_swap_set(&demands);
                let rho = sdoi_costs(self, config.epsilon)?;
                Box::new(move |pool| build_sdoi(pool, n, k, &swaps, &rho))
            }
            Stabilization::DtdoiFull => Box::new(move |pool| build_dtdoi_full(self, pool)),
            Stabilization::DtdoiReduced => Box::new(move |pool| build_dtdoi_reduced(self, pool)),
        })
    }

    fn price(&self, duals: &DualSolution) -> Result<PricingResult> {
        price_cvrp(self, duals)
    }
}

impl CgProblem for SscflpInstance {
    fn artificial_columns(&self) -> Vec<Column> {
        (0..self.n_customers())
            .map(|u| Column::artificial(u, self.big_m()))
            .collect()
    }

    fn bound_multiplier(&self) -> f64 {
        self.n_facilities() as f64
    }

    fn master_builder(&self, config: &CgConfig) -> Result<MasterBuilder<'_>> {
        match config.stabilization {
            Stabilization::None => Ok(Box::new(move |pool| build_sscflp_unstab(self, pool))),
            Stabilization::DtdoiFull => Ok(Box::new(move |pool| build_sscflp_dtdoi(self, pool))),
            other => Err(Error::Unsupported(format!(
                "stabilization {other} is not available for facility location (use none or dtdoi_full)"
            ))),
        }
    }

    fn price(&self, duals: &DualSolution) -> Result<PricingResult> {
        price_sscflp(self, duals)
    }
}

/// One artificial column per item at the instance's big-M cost.
pub fn artificial_columns(inst: &CvrpInstance) -> Vec<Column> {
    (0..inst.n_items())
        .map(|u| Column::artificial(u, inst.big_m()))
        .collect()
}

/// Runs column generation from the artificial columns alone.
pub fn run_cg<P: CgProblem>(
    problem: &P,
    config: &CgConfig,
) -> std::result::Result<CgResult, CgError> {
    run_cg_seeded(problem, config, Vec::new())
}

/// Runs column generation with `initial` columns added after the artificial ones.
pub fn run_cg_seeded<P: CgProblem>(
    problem: &P,
    config: &CgConfig,
    initial: Vec<Column>,
) -> std::result::Result<CgResult, CgError> {
    let mut log = Vec::new();
    match drive(problem, config, initial, &mut log) {
        Ok(res) => Ok(res),
        Err(source) => Err(CgError { source, log }),
    }
}

fn drive<P: CgProblem>(
    problem: &P,
    config: &CgConfig,
    initial: Vec<Column>,
    log: &mut Vec<IterationRecord>,
) -> Result<CgResult> {
    config.validate()?;
    let started = Instant::now();
    let mut pool = ColumnPool::new();
    for col in problem.artificial_columns().into_iter().chain(initial) {
        pool.add_column(problem, col)?;
    }
    let builder = problem.master_builder(config)?;
    let multiplier = problem.bound_multiplier();
    let mut best_lb = f64::NEG_INFINITY;
    let mut lp = WarmLp::new();

    for iteration in 1..=config.max_iterations {
        let master = builder(&pool)?;
        let sol = lp.solve(&master.lp)?;
        if !sol.is_optimal() {
            return Err(Error::LpFailure(format!(
                "restricted master is {:?} at iteration {iteration}",
                sol.status
            )));
        }
        let duals = extract_duals(&master, &sol)?;
        let priced = problem.price(&duals)?;
        let rc = priced.reduced_cost;
        let lb = lagrangian_bound(sol.objective, rc, multiplier);
        best_lb = best_lb.max(lb);
        log.push(IterationRecord {
            iteration,
            elapsed_sec: started.elapsed().as_secs_f64(),
            rmp_obj: sol.objective,
            min_reduced_cost: rc,
            lagrangian_lb: lb,
            best_lb,
            num_columns: pool.len(),
        });
        log::debug!(
            "{} it {iteration}: obj {} rc {rc}",
            config.stabilization,
            sol.objective
        );

        let finished = if rc >= -config.tolerance {
            Some(Termination::Optimal)
        } else if iteration == config.max_iterations {
            Some(Termination::IterationCap)
        } else if started.elapsed() >= config.max_time {
            Some(Termination::TimeCap)
        } else {
            None
        };
        if let Some(termination) = finished {
            return Ok(CgResult {
                stabilization: config.stabilization,
                objective: sol.objective,
                primal: master.primal(&sol)?,
                duals,
                log: std::mem::take(log),
                termination,
                pool,
                elapsed: started.elapsed(),
            });
        }

        let (id, is_new) = pool.insert_checked(problem, priced.column)?;
        if !is_new {
            return Err(Error::DuplicateColumn(format!(
                "column {} regenerated with reduced cost {rc} at iteration {iteration}",
                id.0
            )));
        }
    }
    unreachable!("the loop returns at the iteration cap")
}
