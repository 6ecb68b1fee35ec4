//! Column generation for the capacitated vehicle routing problem and the
//! single-source capacitated facility location problem, with three master
//! variants: plain set cover, smooth dual optimal inequalities (swap
//! variables) and detour dual optimal inequalities (detour variables).

pub mod bench;
pub mod cg;
pub mod column;
pub mod error;
pub mod instance;
pub mod lp;
pub mod master;
pub mod pricing;

pub use cg::{
    run_cg, run_cg_seeded, CgConfig, CgError, CgResult, IterationRecord, Stabilization, Termination,
};
pub use column::{Column, ColumnId, ColumnKind, ColumnPool, DualSolution};
pub use error::{Error, Result};
pub use instance::{
    generate_cvrp, generate_sscflp, load_instance, save_instance, CvrpInstance, CvrpParams,
    DemandRule, Instance, SscflpInstance, SscflpParams,
};
pub use lp::{solve_lp, LpModel, LpSolution, LpStatus, WarmLp};
pub use pricing::{price_cvrp, price_sscflp, PricingResult};
