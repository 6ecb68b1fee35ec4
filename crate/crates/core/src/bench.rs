//! Benchmark matrix: seeded CVRP instances × stabilizations, per-run
//! convergence CSVs and speedup summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::cg::{
    read_log_csv, run_cg, write_log_csv, CgConfig, IterationRecord, Stabilization, Termination,
};
use crate::error::{Error, Result};
use crate::instance::{generate_cvrp, CvrpInstance, CvrpParams, DemandRule};

/// Relative tolerance on final objectives across stabilizations.
pub const OBJECTIVE_AGREEMENT_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub seeds: Vec<u64>,
    pub n_items: usize,
    pub grid_size: i64,
    pub capacity: u32,
    pub vehicles: u32,
    pub demand_rule: DemandRule,
    pub stabilizations: Vec<Stabilization>,
    pub out_dir: Option<PathBuf>,
    /// Run one CG at a time so wall times are not perturbed by other runs.
    pub sequential: bool,
    /// Template for every run; its stabilization is overwritten.
    pub cg: CgConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let p = CvrpParams::protocol(0);
        Self {
            seeds: (1..=14).collect(),
            n_items: p.n_items,
            grid_size: p.grid_size,
            capacity: p.capacity,
            vehicles: p.vehicles,
            demand_rule: p.demand_rule,
            stabilizations: vec![
                Stabilization::None,
                Stabilization::DtdoiReduced,
                Stabilization::Sdoi,
            ],
            out_dir: None,
            sequential: false,
            cg: CgConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidModel("no seeds to run".into()));
        }
        if self.stabilizations.is_empty() {
            return Err(Error::InvalidModel("no stabilizations to run".into()));
        }
        self.cg.validate()
    }

    pub fn params(&self, seed: u64) -> CvrpParams {
        CvrpParams {
            seed,
            n_items: self.n_items,
            grid_size: self.grid_size,
            capacity: self.capacity,
            vehicles: self.vehicles,
            demand_rule: self.demand_rule,
        }
    }
}

pub fn instance_id(seed: u64) -> String {
    format!("seed{seed}")
}

/// Outcome of one CG run inside a benchmark.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub instance: String,
    pub seed: u64,
    pub stabilization: Stabilization,
    /// `None` when the run failed with an error.
    pub termination: Option<Termination>,
    pub error: Option<String>,
    pub objective: f64,
    pub iterations: usize,
    pub time_sec: f64,
    pub log: Vec<IterationRecord>,
    /// Largest swap variable at the final master.
    pub max_omega: f64,
    /// Largest artificial column (or slack) at the final master.
    pub max_artificial: f64,
}

impl RunOutcome {
    pub fn is_optimal(&self) -> bool {
        self.termination == Some(Termination::Optimal)
    }
}

/// Iterations and time of one run as seen by the summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunStats {
    pub iterations: usize,
    pub time_sec: f64,
    pub optimal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub instance: String,
    pub runs: BTreeMap<Stabilization, RunStats>,
}

impl SummaryRow {
    /// All runs terminated optimally.
    pub fn is_complete(&self) -> bool {
        !self.runs.is_empty() && self.runs.values().all(|r| r.optimal)
    }

    /// The detour run reported in summaries: reduced if present, else full.
    pub fn dtdoi(&self) -> Option<&RunStats> {
        self.runs
            .get(&Stabilization::DtdoiReduced)
            .or_else(|| self.runs.get(&Stabilization::DtdoiFull))
    }

    fn method(&self, which: Method) -> Option<&RunStats> {
        match which {
            Method::Unstab => self.runs.get(&Stabilization::None),
            Method::Dtdoi => self.dtdoi(),
            Method::Sdoi => self.runs.get(&Stabilization::Sdoi),
        }
    }

    fn metric(&self, which: Method, metric: Metric) -> Option<f64> {
        self.method(which).map(|r| match metric {
            Metric::Time => r.time_sec,
            Metric::Iterations => r.iterations as f64,
        })
    }

    /// Unstabilized metric over the method's, when both runs are optimal.
    fn speedup(&self, which: Method, metric: Metric) -> Option<f64> {
        let base = self.method(Method::Unstab)?;
        let other = self.method(which)?;
        if !(base.optimal && other.optimal) {
            return None;
        }
        let (b, o) = (
            self.metric(Method::Unstab, metric)?,
            self.metric(which, metric)?,
        );
        (o > 0.0).then(|| b / o)
    }

    pub fn dtdoi_time_speedup(&self) -> Option<f64> {
        self.speedup(Method::Dtdoi, Metric::Time)
    }

    pub fn sdoi_time_speedup(&self) -> Option<f64> {
        self.speedup(Method::Sdoi, Metric::Time)
    }

    pub fn dtdoi_iteration_speedup(&self) -> Option<f64> {
        self.speedup(Method::Dtdoi, Metric::Iterations)
    }

    pub fn sdoi_iteration_speedup(&self) -> Option<f64> {
        self.speedup(Method::Sdoi, Metric::Iterations)
    }

    fn cells(&self) -> [Option<f64>; 10] {
        use Method::*;
        use Metric::*;
        [
            self.metric(Unstab, Time),
            self.metric(Dtdoi, Time),
            self.metric(Sdoi, Time),
            self.speedup(Dtdoi, Time),
            self.speedup(Sdoi, Time),
            self.metric(Unstab, Iterations),
            self.metric(Dtdoi, Iterations),
            self.metric(Sdoi, Iterations),
            self.speedup(Dtdoi, Iterations),
            self.speedup(Sdoi, Iterations),
        ]
    }
}

#[derive(Clone, Copy)]
enum Method {
    Unstab,
    Dtdoi,
    Sdoi,
}

#[derive(Clone, Copy)]
enum Metric {
    Time,
    Iterations,
}

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "instance",
    "unstab_time",
    "dtdoi_time",
    "sdoi_time",
    "dtdoi_speedup",
    "sdoi_speedup",
    "unstab_iters",
    "dtdoi_iters",
    "sdoi_iters",
    "dtdoi_iter_speedup",
    "sdoi_iter_speedup",
];

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub runs: Vec<RunOutcome>,
    pub rows: Vec<SummaryRow>,
    /// Instances whose optimal runs disagree on the final objective.
    pub mismatches: Vec<String>,
}

impl BenchReport {
    /// Every run optimal and every instance's objectives in agreement.
    pub fn all_ok(&self) -> bool {
        self.mismatches.is_empty() && self.runs.iter().all(RunOutcome::is_optimal)
    }
}

fn run_one(inst: &CvrpInstance, seed: u64, st: Stabilization, template: &CgConfig) -> RunOutcome {
    let config = CgConfig {
        stabilization: st,
        ..template.clone()
    };
    let started = Instant::now();
    let base = RunOutcome {
        instance: instance_id(seed),
        seed,
        stabilization: st,
        termination: None,
        error: None,
        objective: f64::NAN,
        iterations: 0,
        time_sec: 0.0,
        log: Vec::new(),
        max_omega: 0.0,
        max_artificial: 0.0,
    };
    match run_cg(inst, &config) {
        Ok(res) => RunOutcome {
            termination: Some(res.termination),
            objective: res.objective,
            iterations: res.iterations(),
            time_sec: res.elapsed.as_secs_f64(),
            max_omega: res.primal.max_omega(),
            max_artificial: res.primal.max_artificial(&res.pool),
            log: res.log,
            ..base
        },
        Err(e) => RunOutcome {
            error: Some(e.source.to_string()),
            iterations: e.log.len(),
            time_sec: started.elapsed().as_secs_f64(),
            log: e.log,
            ..base
        },
    }
}

/// Checks that all optimal runs of one instance agree on the objective.
fn objectives_agree(runs: &[&RunOutcome]) -> bool {
    let objs: Vec<f64> = runs
        .iter()
        .filter(|r| r.is_optimal())
        .map(|r| r.objective)
        .collect();
    let Some(&first) = objs.first() else {
        return true;
    };
    objs.iter()
        .all(|&o| (o - first).abs() <= OBJECTIVE_AGREEMENT_TOL * first.abs().max(1.0))
}

/// Generates every instance, runs every stabilization, writes per-run CSVs
/// (`{instance}__{stabilization}.csv`) when an output directory is set, and
/// cross-checks final objectives.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let instances: Vec<(u64, CvrpInstance)> = config
        .seeds
        .iter()
        .map(|&s| generate_cvrp(&config.params(s)).map(|i| (s, i)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, Stabilization)> = (0..instances.len())
        .flat_map(|i| config.stabilizations.iter().map(move |&st| (i, st)))
        .collect();
    let exec = |&(i, st): &(usize, Stabilization)| {
        let (seed, inst) = &instances[i];
        let out = run_one(inst, *seed, st, &config.cg);
        log::info!(
            "{} {}: {:?} obj {} in {} iterations, {:.2}s",
            out.instance,
            st,
            out.termination,
            out.objective,
            out.iterations,
            out.time_sec
        );
        out
    };
    let runs: Vec<RunOutcome> = if config.sequential {
        jobs.iter().map(exec).collect()
    } else {
        jobs.par_iter().map(exec).collect()
    };

    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir)?;
        for r in &runs {
            let path = dir.join(format!("{}__{}.csv", r.instance, r.stabilization));
            write_log_csv(&r.log, fs::File::create(path)?)?;
        }
    }

    let mut rows = Vec::new();
    let mut mismatches = Vec::new();
    for (seed, _) in &instances {
        let id = instance_id(*seed);
        let mine: Vec<&RunOutcome> = runs.iter().filter(|r| r.seed == *seed).collect();
        if !objectives_agree(&mine) {
            mismatches.push(id.clone());
        }
        rows.push(SummaryRow {
            instance: id,
            runs: mine
                .iter()
                .map(|r| {
                    (
                        r.stabilization,
                        RunStats {
                            iterations: r.iterations,
                            time_sec: r.time_sec,
                            optimal: r.is_optimal(),
                        },
                    )
                })
                .collect(),
        });
    }
    Ok(BenchReport {
        runs,
        rows,
        mismatches,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SummaryFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for SummaryFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            _ => Err(Error::Parse(format!(
                "unknown summary format {s:?} (csv, markdown)"
            ))),
        }
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

/// Per-instance rows followed by `mean` and `median` rows over the complete
/// instances. Fails when no instance is complete.
pub fn emit_summary(rows: &[SummaryRow], format: SummaryFormat) -> Result<String> {
    let complete: Vec<&SummaryRow> = rows.iter().filter(|r| r.is_complete()).collect();
    if complete.is_empty() {
        return Err(Error::InvalidModel(
            "no instance completed every run".into(),
        ));
    }
    // iteration counts (cells 5..=7) print as integers when they are whole
    let fmt = |(c, x): (usize, Option<f64>)| {
        x.map_or(String::new(), |v| {
            if (5..=7).contains(&c) && v.fract() == 0.0 {
                format!("{v:.0}")
            } else {
                format!("{v:.4}")
            }
        })
    };
    let mut table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            std::iter::once(r.instance.clone())
                .chain(r.cells().into_iter().enumerate().map(fmt))
                .collect()
        })
        .collect();
    let per_column: Vec<Vec<f64>> = (0..10)
        .map(|c| complete.iter().filter_map(|r| r.cells()[c]).collect())
        .collect();
    for (name, stat) in [
        ("mean", mean as fn(&[f64]) -> Option<f64>),
        ("median", median),
    ] {
        table.push(
            std::iter::once(name.to_string())
                .chain(
                    per_column
                        .iter()
                        .enumerate()
                        .map(|(c, col)| fmt((c, stat(col)))),
                )
                .collect(),
        );
    }

    let mut out = String::new();
    match format {
        SummaryFormat::Csv => {
            out.push_str(&SUMMARY_COLUMNS.join(","));
            out.push('\n');
            for row in &table {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        SummaryFormat::Markdown => {
            let _ = writeln!(out, "| {} |", SUMMARY_COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(SUMMARY_COLUMNS.len()));
            for row in &table {
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
        }
    }
    Ok(out)
}

/// Rebuilds summary rows from a directory of `{instance}__{stabilization}.csv`
/// files. A run counts as optimal when its last reduced cost is at least
/// `-tolerance`.
pub fn summarize_dir(dir: impl AsRef<Path>, tolerance: f64) -> Result<Vec<SummaryRow>> {
    let mut rows: BTreeMap<String, BTreeMap<Stabilization, RunStats>> = BTreeMap::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.sort();
    for path in paths {
        let Some(stem) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_suffix(".csv"))
        else {
            continue;
        };
        let Some((instance, stab)) = stem.rsplit_once("__") else {
            continue;
        };
        let Ok(stab) = stab.parse::<Stabilization>() else {
            continue;
        };
        let log = read_log_csv(fs::File::open(&path)?)?;
        let stats = match log.last() {
            Some(last) => RunStats {
                iterations: log.len(),
                time_sec: last.elapsed_sec,
                optimal: last.min_reduced_cost >= -tolerance,
            },
            None => RunStats {
                iterations: 0,
                time_sec: 0.0,
                optimal: false,
            },
        };
        rows.entry(instance.to_string())
            .or_default()
            .insert(stab, stats);
    }
    if rows.is_empty() {
        return Err(Error::InvalidModel("no run CSVs found".into()));
    }
    let mut out: Vec<SummaryRow> = rows
        .into_iter()
        .map(|(instance, runs)| SummaryRow { instance, runs })
        .collect();
    // seed7 before seed10
    out.sort_by_key(|r| {
        let digits: String = r.instance.chars().filter(char::is_ascii_digit).collect();
        (
            r.instance
                .trim_end_matches(|c: char| c.is_ascii_digit())
                .to_string(),
            digits.parse::<u64>().unwrap_or(0),
            r.instance.clone(),
        )
    });
    Ok(out)
}
