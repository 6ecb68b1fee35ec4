use cgdoi::instance::{CvrpItem, Facility, Point};
use cgdoi::{
    generate_cvrp, load_instance, price_cvrp, run_cg, save_instance, CgConfig, CvrpInstance,
    CvrpParams, DemandRule, Instance, SscflpInstance, Stabilization, Termination,
};
use proptest::prelude::*;

fn solve(inst: &CvrpInstance, st: Stabilization) -> f64 {
    let res = run_cg(inst, &CgConfig::with_stabilization(st)).unwrap();
    assert_eq!(res.termination, Termination::Optimal, "{st}");
    res.objective
}

#[test]
fn single_item_is_one_round_trip() {
    // 3-4-5 triangle: 5 out and 5 back
    let inst = CvrpInstance::new(
        Point::new(0, 0),
        4,
        1,
        vec![CvrpItem {
            location: Point::new(3, 4),
            demand: 1,
        }],
    )
    .unwrap();
    for st in Stabilization::ALL {
        assert!((solve(&inst, st) - 10.0).abs() < 1e-9, "{st}");
    }
}

#[test]
fn two_far_items_need_two_routes() {
    let items = [(10, 0), (-10, 0)]
        .map(|(x, y)| CvrpItem {
            location: Point::new(x, y),
            demand: 2,
        })
        .to_vec();
    let inst = CvrpInstance::new(Point::new(0, 0), 3, 2, items).unwrap();
    for st in Stabilization::ALL {
        assert!((solve(&inst, st) - 40.0).abs() < 1e-9, "{st}");
    }
}

#[test]
fn facility_location_picks_cheaper_site() {
    let inst = SscflpInstance::new(
        vec![1, 1],
        vec![
            Facility {
                capacity: 2,
                open_cost: 10,
            },
            Facility {
                capacity: 2,
                open_cost: 30,
            },
        ],
        vec![vec![1, 1], vec![0, 0]],
    )
    .unwrap();
    for st in [Stabilization::None, Stabilization::DtdoiFull] {
        let res = run_cg(&inst, &CgConfig::with_stabilization(st)).unwrap();
        assert!((res.objective - 12.0).abs() < 1e-9, "{st}");
    }
}

#[test]
fn saved_instance_solves_identically() {
    let params = CvrpParams {
        seed: 9,
        n_items: 12,
        grid_size: 100,
        capacity: 4,
        vehicles: 3,
        demand_rule: DemandRule::Unit,
    };
    let inst = generate_cvrp(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i.json");
    save_instance(&path, &Instance::Cvrp(inst.clone())).unwrap();
    let Instance::Cvrp(back) = load_instance(&path).unwrap() else {
        panic!("wrong problem type");
    };
    assert_eq!(
        solve(&inst, Stabilization::Sdoi),
        solve(&back, Stabilization::Sdoi)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stabilized_runs_certify_the_same_bound(
        seed in any::<u64>(),
        n in 6usize..11,
        capacity in 3u32..6,
    ) {
        let params = CvrpParams {
            seed,
            n_items: n,
            grid_size: 60,
            capacity,
            vehicles: n as u32,
            demand_rule: DemandRule::Uniform { lo: 1, hi: 2 },
        };
        let inst = generate_cvrp(&params).unwrap();
        let base = run_cg(&inst, &CgConfig::default()).unwrap();
        for st in Stabilization::ALL {
            let res = run_cg(&inst, &CgConfig::with_stabilization(st)).unwrap();
            prop_assert_eq!(res.termination, Termination::Optimal);
            let gap = (res.objective - base.objective).abs() / base.objective;
            prop_assert!(gap <= 1e-6, "{} {} vs {}", st, res.objective, base.objective);
            // final duals leave no improving route
            let priced = price_cvrp(&inst, &res.duals).unwrap();
            prop_assert!(priced.reduced_cost >= -1e-6);
            prop_assert!(res.best_bound() <= res.objective + 1e-6);
        }
    }
}
