use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use cgdoi::bench::{emit_summary, run_benchmark, summarize_dir, BenchConfig, SummaryFormat};
use cgdoi::{
    generate_cvrp, generate_sscflp, load_instance, run_cg, save_instance, CgConfig, CgResult,
    CvrpParams, DemandRule, Instance, SscflpParams, Stabilization, Termination,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "cgdoi",
    version,
    about = "Column generation with dual optimal inequalities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded instance files.
    Gen(GenArgs),
    /// Run column generation on one instance file.
    Run(RunArgs),
    /// Run the seed x stabilization matrix and summarize speedups.
    Bench(BenchArgs),
    /// Fold per-run convergence CSVs into a summary table.
    Summarize(SummarizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Cvrp,
    Sscflp,
}

#[derive(Args)]
struct CapArgs {
    /// Iteration cap per run.
    #[arg(long, default_value_t = 5000)]
    max_iterations: usize,
    /// Wall-time cap per run, in seconds.
    #[arg(long, default_value_t = 600.0)]
    max_time: f64,
    /// Offset added to smoothing costs.
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
}

impl CapArgs {
    fn config(&self, stabilization: Stabilization) -> CgConfig {
        CgConfig {
            stabilization,
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            max_time: Duration::from_secs_f64(self.max_time),
            ..CgConfig::default()
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "cvrp")]
    problem: Problem,
    /// Seeds, e.g. `1-14` or `1,2,5`.
    #[arg(long, default_value = "1-14", value_parser = parse_seeds)]
    seeds: Seeds,
    #[arg(long, default_value_t = 40)]
    n_items: usize,
    #[arg(long, default_value_t = 100)]
    grid: i64,
    #[arg(long, default_value_t = 10)]
    capacity: u32,
    #[arg(long, default_value_t = 5)]
    vehicles: u32,
    /// `unit` or `uniform:LO:HI`.
    #[arg(long, default_value = "unit", value_parser = parse_demand)]
    demand: DemandRule,
    /// Facility count (facility location only).
    #[arg(long, default_value_t = 3)]
    facilities: usize,
    /// Facility capacity range `LO:HI` (facility location only).
    #[arg(long, default_value = "8:15", value_parser = parse_range)]
    facility_capacity: (u64, u64),
    /// Facility opening cost range `LO:HI` (facility location only).
    #[arg(long, default_value = "20:80", value_parser = parse_range)]
    open_cost: (u64, u64),
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "none")]
    stab: Stabilization,
    /// Convergence CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Final column pool as JSON lines.
    #[arg(long)]
    pool_out: Option<PathBuf>,
    #[command(flatten)]
    caps: CapArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "1-14", value_parser = parse_seeds)]
    seeds: Seeds,
    #[arg(long, default_value_t = 40)]
    n_items: usize,
    #[arg(long, default_value_t = 100)]
    grid: i64,
    #[arg(long, default_value_t = 10)]
    capacity: u32,
    #[arg(long, default_value_t = 5)]
    vehicles: u32,
    #[arg(long, default_value = "unit", value_parser = parse_demand)]
    demand: DemandRule,
    /// Comma-separated stabilizations.
    #[arg(long, default_value = "none,dtdoi_reduced,sdoi", value_delimiter = ',')]
    stabs: Vec<Stabilization>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Run one CG at a time for clean wall-clock measurements.
    #[arg(long)]
    sequential_timing: bool,
    #[command(flatten)]
    caps: CapArgs,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value = "markdown")]
    format: SummaryFormat,
    /// Reduced-cost tolerance for deciding a run terminated optimally.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

/// Parses `1-14`, `3` or `1,4,7-9`.
fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.parse().map_err(|e| format!("{part}: {e}"))?,
                    b.parse().map_err(|e| format!("{part}: {e}"))?,
                );
                if a > b {
                    return Err(format!("empty seed range {part}"));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|e| format!("{part}: {e}"))?),
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(Seeds(seeds))
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    Ok((
        a.parse().map_err(|e| format!("{s}: {e}"))?,
        b.parse().map_err(|e| format!("{s}: {e}"))?,
    ))
}

fn parse_demand(s: &str) -> Result<DemandRule, String> {
    if s == "unit" {
        return Ok(DemandRule::Unit);
    }
    let range = s
        .strip_prefix("uniform:")
        .ok_or_else(|| format!("expected `unit` or `uniform:LO:HI`, got {s:?}"))?;
    let (lo, hi) = parse_range(range)?;
    let lo = u32::try_from(lo).map_err(|e| e.to_string())?;
    let hi = u32::try_from(hi).map_err(|e| e.to_string())?;
    Ok(DemandRule::Uniform { lo, hi })
}

fn gen(args: GenArgs) -> Result<()> {
    fs::create_dir_all(&args.out_dir)?;
    for &seed in &args.seeds.0 {
        let inst: Instance = match args.problem {
            Problem::Cvrp => generate_cvrp(&CvrpParams {
                seed,
                n_items: args.n_items,
                grid_size: args.grid,
                capacity: args.capacity,
                vehicles: args.vehicles,
                demand_rule: args.demand,
            })?
            .into(),
            Problem::Sscflp => {
                let (lo, hi) = match args.demand {
                    DemandRule::Unit => (1, 1),
                    DemandRule::Uniform { lo, hi } => (lo, hi),
                };
                let (cap_lo, cap_hi) = args.facility_capacity;
                generate_sscflp(&SscflpParams {
                    seed,
                    n_customers: args.n_items,
                    n_facilities: args.facilities,
                    grid_size: args.grid,
                    capacity_range: (u32::try_from(cap_lo)?, u32::try_from(cap_hi)?),
                    demand_range: (lo, hi),
                    open_cost_range: args.open_cost,
                })?
                .into()
            }
        };
        let path = args.out_dir.join(format!("seed{seed}.json"));
        save_instance(&path, &inst)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn report(res: &CgResult) {
    println!(
        "{}: {:?} objective {:.6} after {} iterations in {:.3}s (best bound {:.6}, {} columns)",
        res.stabilization,
        res.termination,
        res.objective,
        res.iterations(),
        res.elapsed.as_secs_f64(),
        res.best_bound(),
        res.pool.len()
    );
}

fn run(args: RunArgs) -> Result<bool> {
    let inst = load_instance(&args.instance)
        .with_context(|| format!("loading {}", args.instance.display()))?;
    let config = args.caps.config(args.stab);
    let outcome = match &inst {
        Instance::Cvrp(i) => run_cg(i, &config),
        Instance::Sscflp(i) => run_cg(i, &config),
    };
    let res = match outcome {
        Ok(res) => res,
        Err(e) => {
            if let Some(out) = &args.out {
                cgdoi::cg::write_log_csv(&e.log, fs::File::create(out)?)?;
            }
            return Err(e.into());
        }
    };
    report(&res);
    if let Some(out) = &args.out {
        res.write_log_csv(out)?;
    }
    if let Some(path) = &args.pool_out {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        res.pool.write_jsonl(&mut f)?;
    }
    Ok(res.termination == Termination::Optimal)
}

fn bench(args: BenchArgs) -> Result<bool> {
    if args.stabs.is_empty() {
        bail!("no stabilizations given");
    }
    let config = BenchConfig {
        seeds: args.seeds.0,
        n_items: args.n_items,
        grid_size: args.grid,
        capacity: args.capacity,
        vehicles: args.vehicles,
        demand_rule: args.demand,
        stabilizations: args.stabs,
        out_dir: Some(args.out_dir.clone()),
        sequential: args.sequential_timing,
        cg: args.caps.config(Stabilization::None),
    };
    let report = run_benchmark(&config)?;
    for r in &report.runs {
        if let Some(err) = &r.error {
            eprintln!("{} {}: failed: {err}", r.instance, r.stabilization);
        } else if !r.is_optimal() {
            eprintln!(
                "{} {}: stopped by {:?}",
                r.instance, r.stabilization, r.termination
            );
        }
    }
    for id in &report.mismatches {
        eprintln!("{id}: final objectives disagree across stabilizations");
    }
    match emit_summary(&report.rows, SummaryFormat::Markdown) {
        Ok(md) => {
            fs::write(args.out_dir.join("summary.md"), &md)?;
            fs::write(
                args.out_dir.join("summary.csv"),
                emit_summary(&report.rows, SummaryFormat::Csv)?,
            )?;
            print!("{md}");
        }
        Err(e) => eprintln!("no summary: {e}"),
    }
    Ok(report.all_ok())
}

fn summarize(args: SummarizeArgs) -> Result<()> {
    let rows = summarize_dir(&args.dir, args.tolerance)?;
    print!("{}", emit_summary(&rows, args.format)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a).map(|()| true),
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
        Command::Summarize(a) => summarize(a).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1-3").unwrap().0, vec![1, 2, 3]);
        assert_eq!(parse_seeds("5, 1-2").unwrap().0, vec![5, 1, 2]);
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn command_line_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn demand_rules() {
        assert_eq!(parse_demand("unit").unwrap(), DemandRule::Unit);
        assert_eq!(
            parse_demand("uniform:1:3").unwrap(),
            DemandRule::Uniform { lo: 1, hi: 3 }
        );
        assert!(parse_demand("uniform:1").is_err());
    }
}
