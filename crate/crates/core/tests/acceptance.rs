//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use cgdoi::bench::{run_benchmark, BenchConfig, BenchReport, RunOutcome};
use cgdoi::lp::RowSense;
use cgdoi::{
    generate_cvrp, generate_sscflp, price_cvrp, price_sscflp, run_cg, solve_lp, CgConfig, CgResult,
    Column, ColumnKind, CvrpInstance, CvrpParams, DemandRule, DualSolution, LpModel, LpStatus,
    SscflpInstance, SscflpParams, Stabilization, Termination,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const OBJ_TOL: f64 = 1e-6;
const PRICE_TOL: f64 = 1e-9;
const CLEAN_TOL: f64 = 1e-7;

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn optimal_run<P: cgdoi::cg::CgProblem>(
    inst: &P,
    st: Stabilization,
    what: &str,
) -> Result<CgResult, String> {
    let res = run_cg(inst, &CgConfig::with_stabilization(st))
        .map_err(|e| format!("{what} {st}: {e}: {}", e.source))?;
    if res.termination != Termination::Optimal {
        return Err(format!("{what} {st}: stopped by {:?}", res.termination));
    }
    Ok(res)
}

// ---------------------------------------------------------------------------
// Independent oracles

/// Distance between nodes, with `None` for the depot.
fn dist(inst: &CvrpInstance, a: Option<usize>, b: Option<usize>) -> f64 {
    let p = |x: Option<usize>| x.map_or(inst.depot(), |u| inst.items()[u].location);
    let (pa, pb) = (p(a), p(b));
    let (dx, dy) = ((pa.x - pb.x) as f64, (pa.y - pb.y) as f64);
    (dx * dx + dy * dy).sqrt().ceil()
}

/// Cost of depot → order → depot.
fn tour_cost(inst: &CvrpInstance, order: &[usize]) -> f64 {
    let mut prev = None;
    let mut cost = 0.0;
    for &u in order {
        cost += dist(inst, prev, Some(u));
        prev = Some(u);
    }
    cost + dist(inst, prev, None)
}

/// Cheapest depot-to-depot tour through every item of `mask` (Held-Karp).
fn cheapest_tour(inst: &CvrpInstance, mask: usize) -> f64 {
    let items: Vec<usize> = (0..inst.n_items())
        .filter(|&u| mask >> u & 1 == 1)
        .collect();
    let k = items.len();
    let mut dp = vec![vec![f64::INFINITY; k]; 1 << k];
    for (i, &u) in items.iter().enumerate() {
        dp[1 << i][i] = dist(inst, None, Some(u));
    }
    for s in 1usize..1 << k {
        for last in 0..k {
            let cur = dp[s][last];
            if s >> last & 1 == 0 || cur.is_infinite() {
                continue;
            }
            for next in (0..k).filter(|&j| s >> j & 1 == 0) {
                let t = s | 1 << next;
                let c = cur + dist(inst, Some(items[last]), Some(items[next]));
                if c < dp[t][next] {
                    dp[t][next] = c;
                }
            }
        }
    }
    (0..k)
        .map(|last| dp[(1 << k) - 1][last] + dist(inst, Some(items[last]), None))
        .fold(f64::INFINITY, f64::min)
}

/// Full master over every feasible item set at its cheapest ordering. Any
/// other ordering of the same set is a dominated copy of that column.
fn full_master_objective(inst: &CvrpInstance) -> Result<(f64, usize), String> {
    let n = inst.n_items();
    let mut lp = LpModel::new();
    let cover: Vec<_> = (0..n)
        .map(|u| lp.add_row(format!("c{u}"), RowSense::Ge, 1.0))
        .collect();
    let fleet = lp.add_row("k", RowSense::Le, f64::from(inst.vehicles()));
    let mut count = 0;
    for mask in 1usize..1 << n {
        let load: u32 = (0..n)
            .filter(|&u| mask >> u & 1 == 1)
            .map(|u| inst.demand(u))
            .sum();
        if load > inst.capacity() {
            continue;
        }
        let entries: Vec<_> = (0..n)
            .filter(|&u| mask >> u & 1 == 1)
            .map(|u| (cover[u], 1.0))
            .chain([(fleet, 1.0)])
            .collect();
        lp.add_column(format!("r{mask}"), cheapest_tour(inst, mask), None, entries);
        count += 1;
    }
    let sol = solve_lp(&lp).map_err(|e| e.to_string())?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.objective, count)),
        other => Err(format!("full master is {other:?}")),
    }
}

/// Least reduced cost over every elementary sequence, the empty route included.
fn brute_pricing(inst: &CvrpInstance, d: &DualSolution) -> f64 {
    fn go(inst: &CvrpInstance, d: &DualSolution, seq: &mut Vec<usize>, load: u32, best: &mut f64) {
        let rc = tour_cost(inst, seq) + d.pi_0 - seq.iter().map(|&u| d.pi_u[u]).sum::<f64>();
        *best = best.min(rc);
        for u in 0..inst.n_items() {
            if !seq.contains(&u) && load + inst.demand(u) <= inst.capacity() {
                seq.push(u);
                go(inst, d, seq, load + inst.demand(u), best);
                seq.pop();
            }
        }
    }
    let mut best = f64::INFINITY;
    go(inst, d, &mut Vec::new(), 0, &mut best);
    best
}

/// Reduced cost of a priced route, recomputed from its visit order.
fn route_rc(inst: &CvrpInstance, col: &Column, d: &DualSolution) -> Result<f64, String> {
    let order = &col.visit_order;
    let mut seen = vec![false; inst.n_items()];
    for &u in order {
        if std::mem::replace(&mut seen[u], true) {
            return Err(format!("route {order:?} repeats item {u}"));
        }
    }
    let load: u32 = order.iter().map(|&u| inst.demand(u)).sum();
    if load > inst.capacity() {
        return Err(format!("route {order:?} overloads the vehicle"));
    }
    Ok(tour_cost(inst, order) + d.pi_0 - order.iter().map(|&u| d.pi_u[u]).sum::<f64>())
}

fn assignment_rc(inst: &SscflpInstance, f: usize, set: &[usize], d: &DualSolution) -> f64 {
    inst.facility(f).open_cost as f64
        + d.pi_f[f]
        + set
            .iter()
            .map(|&u| inst.service_cost(f, u) as f64 - d.pi_u[u])
            .sum::<f64>()
}

/// Least reduced cost over every facility and capacity-feasible customer subset.
fn brute_knapsack(inst: &SscflpInstance, d: &DualSolution) -> f64 {
    let n = inst.n_customers();
    let mut best = f64::INFINITY;
    for f in 0..inst.n_facilities() {
        for mask in 0usize..1 << n {
            let set: Vec<usize> = (0..n).filter(|&u| mask >> u & 1 == 1).collect();
            let load: u32 = set.iter().map(|&u| inst.demand(u)).sum();
            if load <= inst.facility(f).capacity {
                best = best.min(assignment_rc(inst, f, &set, d));
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Criteria

fn relaxation_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let (mut done, mut redraws, mut worst) = (0, 0, 0.0f64);
    while done < 20 {
        let params = CvrpParams {
            seed: rng.gen(),
            n_items: rng.gen_range(8..=15),
            grid_size: 100,
            capacity: rng.gen_range(4..=7),
            vehicles: rng.gen_range(2..=3),
            demand_rule: if done % 2 == 0 {
                DemandRule::Unit
            } else {
                DemandRule::Uniform { lo: 1, hi: 2 }
            },
        };
        let Ok(inst) = generate_cvrp(&params) else {
            redraws += 1;
            continue;
        };
        let what = format!("{params:?}");
        let mut objs = Vec::new();
        for st in Stabilization::ALL {
            let res = optimal_run(&inst, st, &what)?;
            if st == Stabilization::None && res.primal.max_artificial(&res.pool) > CLEAN_TOL {
                // the master has no solution without artificial columns
                break;
            }
            objs.push((st, res.objective));
        }
        if objs.len() < Stabilization::ALL.len() {
            redraws += 1;
            continue;
        }
        for &(st, z) in &objs[1..] {
            let gap = rel_gap(objs[0].1, z);
            worst = worst.max(gap);
            if gap > OBJ_TOL {
                return Err(format!(
                    "{what}: none {} vs {st} {z} (gap {gap:.2e})",
                    objs[0].1
                ));
            }
        }
        done += 1;
    }
    Ok(format!("20 instances, 4 masters each ({redraws} parameter redraws); worst relative gap {worst:.1e}"))
}

fn full_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let (mut done, mut worst, mut routes) = (0, 0.0f64, 0);
    while done < 10 {
        let params = CvrpParams {
            seed: rng.gen(),
            n_items: rng.gen_range(5..=10),
            grid_size: 100,
            capacity: rng.gen_range(3..=6),
            vehicles: rng.gen_range(2..=4),
            demand_rule: if done % 2 == 0 {
                DemandRule::Unit
            } else {
                DemandRule::Uniform { lo: 1, hi: 3 }
            },
        };
        let Ok(inst) = generate_cvrp(&params) else {
            continue;
        };
        let Ok((z_full, count)) = full_master_objective(&inst) else {
            continue;
        };
        let res = optimal_run(&inst, Stabilization::None, &format!("{params:?}"))?;
        let gap = rel_gap(z_full, res.objective);
        worst = worst.max(gap);
        if gap > OBJ_TOL {
            return Err(format!(
                "{params:?}: full master {z_full} vs CG {}",
                res.objective
            ));
        }
        routes += count;
        done += 1;
    }
    Ok(format!(
        "10 instances, {routes} enumerated routes; worst relative gap {worst:.1e}"
    ))
}

fn pricing_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let grid = 100;
    let (mut done, mut worst) = (0, 0.0f64);
    while done < 10 {
        let n = rng.gen_range(4..=8);
        let capacity = rng.gen_range(2..=6);
        let params = CvrpParams {
            seed: rng.gen(),
            n_items: n,
            grid_size: grid,
            capacity,
            vehicles: n as u32,
            demand_rule: if done % 2 == 0 {
                DemandRule::Unit
            } else {
                DemandRule::Uniform {
                    lo: 1,
                    hi: capacity.min(3),
                }
            },
        };
        let Ok(inst) = generate_cvrp(&params) else {
            continue;
        };
        for _ in 0..50 {
            let d = DualSolution::cover(
                (0..n)
                    .map(|_| rng.gen_range(0.0..=3.0 * grid as f64))
                    .collect(),
                rng.gen_range(0.0..=grid as f64),
            );
            let priced = price_cvrp(&inst, &d).map_err(|e| e.to_string())?;
            let brute = brute_pricing(&inst, &d);
            let own = route_rc(&inst, &priced.column, &d)?;
            let err = (priced.reduced_cost - brute).abs().max((own - brute).abs());
            worst = worst.max(err);
            if err > PRICE_TOL {
                return Err(format!(
                    "{params:?}: labeling {} (route {:?}, recomputed {own}) vs brute force {brute}",
                    priced.reduced_cost, priced.column.visit_order
                ));
            }
        }
        done += 1;
    }
    Ok(format!(
        "10 instances x 50 dual vectors; worst deviation {worst:.1e}"
    ))
}

fn runs_of(report: &BenchReport, st: Stabilization) -> Vec<&RunOutcome> {
    report
        .runs
        .iter()
        .filter(|r| r.stabilization == st)
        .collect()
}

fn bound_sandwich(report: &BenchReport, vehicles: f64) -> Outcome {
    let (mut iterations, mut max_excess) = (0, f64::NEG_INFINITY);
    for run in &report.runs {
        let tag = format!("{} {}", run.instance, run.stabilization);
        if let Some(e) = &run.error {
            return Err(format!("{tag} failed: {e}"));
        }
        let final_obj = run.objective;
        let mut best = f64::NEG_INFINITY;
        for (i, rec) in run.log.iter().enumerate() {
            let lb = rec.rmp_obj + vehicles * rec.min_reduced_cost.min(0.0);
            if (lb - rec.lagrangian_lb).abs() > 1e-9 * lb.abs().max(1.0) {
                return Err(format!(
                    "{tag} it {}: logged bound {} vs {lb}",
                    rec.iteration, rec.lagrangian_lb
                ));
            }
            let prev_best = best;
            best = best.max(lb);
            if rec.best_lb != best || rec.best_lb < prev_best {
                return Err(format!(
                    "{tag} it {}: best bound {} is not the running maximum",
                    rec.iteration, rec.best_lb
                ));
            }
            if best > final_obj + OBJ_TOL {
                return Err(format!(
                    "{tag} it {}: bound {best} above final objective {final_obj}",
                    rec.iteration
                ));
            }
            max_excess = max_excess.max(best - final_obj);
            if i > 0 {
                let prev = run.log[i - 1].rmp_obj;
                // only solver round-off is forgiven
                if rec.rmp_obj > prev + 1e-9 * prev.abs().max(1.0) {
                    return Err(format!(
                        "{tag} it {}: master objective rose {prev} -> {}",
                        rec.iteration, rec.rmp_obj
                    ));
                }
            }
            iterations += 1;
        }
    }
    Ok(format!(
        "{} runs, {iterations} iterations; max (best bound - final objective) {max_excess:.1e}",
        report.runs.len()
    ))
}

/// Per-seed ratios `none / other` of a run statistic; needs every run optimal
/// and final objectives in agreement.
fn speedups(
    report: &BenchReport,
    other: Stabilization,
    stat: fn(&RunOutcome) -> f64,
) -> Result<Vec<f64>, String> {
    let base = runs_of(report, Stabilization::None);
    let alt = runs_of(report, other);
    if base.len() != alt.len() || base.is_empty() {
        return Err(format!("missing runs for {other}"));
    }
    base.iter()
        .zip(alt)
        .map(|(b, a)| {
            if !b.is_optimal() || !a.is_optimal() || b.seed != a.seed {
                return Err(format!("{} {other}: runs not both optimal", b.instance));
            }
            if rel_gap(b.objective, a.objective) > OBJ_TOL {
                return Err(format!(
                    "{}: none {} vs {other} {}",
                    b.instance, b.objective, a.objective
                ));
            }
            Ok(stat(b) / stat(a))
        })
        .collect()
}

fn describe(name: &str, xs: &[f64]) -> String {
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    format!(
        "{name} median {:.2} (mean {:.2}, min {min:.2})",
        median(xs),
        mean(xs)
    )
}

fn iteration_speedups(report: &BenchReport) -> Outcome {
    let iters = |r: &RunOutcome| r.iterations as f64;
    let dt = speedups(report, Stabilization::DtdoiReduced, iters)?;
    let sd = speedups(report, Stabilization::Sdoi, iters)?;
    let text = format!("{}; {}", describe("DT-DOI", &dt), describe("S-DOI", &sd));
    let (mdt, msd) = (median(&dt), median(&sd));
    if mdt >= 2.0 && msd >= 1.3 && mdt >= msd {
        Ok(text)
    } else {
        Err(format!(
            "{text}; need DT-DOI >= 2.0, S-DOI >= 1.3, DT-DOI >= S-DOI"
        ))
    }
}

fn time_speedups(report: &BenchReport) -> Outcome {
    let time = |r: &RunOutcome| r.time_sec;
    let dt = speedups(report, Stabilization::DtdoiReduced, time)?;
    let sd = speedups(report, Stabilization::Sdoi, time)?;
    let text = format!("{}; {}", describe("DT-DOI", &dt), describe("S-DOI", &sd));
    if median(&dt) > 1.0 && median(&sd) > 1.0 {
        Ok(text)
    } else {
        Err(format!("{text}; need both medians > 1"))
    }
}

fn sdoi_cleanliness(report: &BenchReport) -> Outcome {
    let runs: Vec<_> = runs_of(report, Stabilization::Sdoi)
        .into_iter()
        .filter(|r| r.is_optimal())
        .collect();
    if runs.is_empty() {
        return Err("no optimal S-DOI run".into());
    }
    let omega = runs.iter().map(|r| r.max_omega).fold(0.0, f64::max);
    let art = runs.iter().map(|r| r.max_artificial).fold(0.0, f64::max);
    let text = format!(
        "{} optimal runs; max swap value {omega:.1e}, max artificial value {art:.1e}",
        runs.len()
    );
    if omega <= CLEAN_TOL && art <= CLEAN_TOL {
        Ok(text)
    } else {
        Err(text)
    }
}

fn sscflp_parity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let grid = 50;
    let (mut done, mut redraws, mut worst, mut priced) = (0, 0, 0.0f64, 0);
    while done < 10 {
        let n = rng.gen_range(6..=12);
        let m = rng.gen_range(2..=4);
        let params = SscflpParams {
            seed: rng.gen(),
            n_customers: n,
            n_facilities: m,
            grid_size: grid,
            capacity_range: (6, 16),
            demand_range: (1, 4),
            open_cost_range: (10, 60),
        };
        let Ok(inst) = generate_sscflp(&params) else {
            redraws += 1;
            continue;
        };
        let what = format!("{params:?}");
        let plain = optimal_run(&inst, Stabilization::None, &what)?;
        if plain.primal.max_artificial(&plain.pool) > CLEAN_TOL {
            redraws += 1;
            continue;
        }
        let detour = optimal_run(&inst, Stabilization::DtdoiFull, &what)?;
        let gap = rel_gap(plain.objective, detour.objective);
        worst = worst.max(gap);
        if gap > OBJ_TOL {
            return Err(format!(
                "{what}: set cover {} vs detour {}",
                plain.objective, detour.objective
            ));
        }

        let mut duals = vec![plain.duals.clone(), detour.duals.clone()];
        for _ in 0..50 {
            duals.push(DualSolution {
                pi_u: (0..n)
                    .map(|_| rng.gen_range(0.0..=3.0 * grid as f64))
                    .collect(),
                pi_f: (0..m).map(|_| rng.gen_range(0.0..=grid as f64)).collect(),
                ..DualSolution::default()
            });
        }
        for d in &duals {
            let got = price_sscflp(&inst, d).map_err(|e| e.to_string())?;
            let ColumnKind::FacilityAssignment { facility } = got.column.kind else {
                return Err("knapsack pricing returned a non-assignment column".into());
            };
            let load: u32 = got.column.covers.iter().map(|&u| inst.demand(u)).sum();
            if load > inst.facility(facility).capacity {
                return Err(format!(
                    "{what}: priced column overloads facility {facility}"
                ));
            }
            let own = assignment_rc(&inst, facility, &got.column.covers, d);
            let brute = brute_knapsack(&inst, d);
            if (got.reduced_cost - brute).abs() > PRICE_TOL || (own - brute).abs() > PRICE_TOL {
                return Err(format!(
                    "{what}: knapsack {} (recomputed {own}) vs enumeration {brute}",
                    got.reduced_cost
                ));
            }
            priced += 1;
        }
        done += 1;
    }
    Ok(format!(
        "10 instances ({redraws} redraws); worst objective gap {worst:.1e}; {priced} knapsack prices match enumeration"
    ))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        match &out {
            Ok(msg) => println!("PASS [{id}] {name}: {msg} ({secs:.1}s)"),
            Err(msg) => println!("FAIL [{id}] {name}: {msg} ({secs:.1}s)"),
        }
        results.push((id, name, out));
    };

    record(1, "relaxation equivalence", &relaxation_equivalence);
    record(2, "full enumeration oracle", &full_enumeration);
    record(3, "pricing exactness", &pricing_exactness);

    let config = BenchConfig {
        sequential: true,
        ..BenchConfig::default()
    };
    let t = Instant::now();
    let bench = run_benchmark(&config).map_err(|e| format!("benchmark failed: {e}"));
    println!(
        "      benchmark: {} seeds x {} stabilizations in {:.1}s",
        config.seeds.len(),
        config.stabilizations.len(),
        t.elapsed().as_secs_f64()
    );
    let vehicles = f64::from(config.vehicles);
    let on_bench = |f: fn(&BenchReport, f64) -> Outcome| {
        let bench = &bench;
        move || bench.clone().and_then(|r| f(&r, vehicles))
    };
    record(
        4,
        "bound sandwich and monotonicity",
        &on_bench(bound_sandwich),
    );
    record(
        5,
        "iteration speedups",
        &on_bench(|r, _| iteration_speedups(r)),
    );
    record(6, "wall-clock speedups", &on_bench(|r, _| time_speedups(r)));
    record(
        7,
        "S-DOI termination cleanliness",
        &on_bench(|r, _| sdoi_cleanliness(r)),
    );

    record(8, "SSCFLP parity", &sscflp_parity);

    let failed = results.iter().filter(|(_, _, o)| o.is_err()).count();
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
