//! Oracle checks of the instance model: worked stage examples, the budget
//! row, complete recourse, capacity forms and generator determinism.

use ddro::bench::patterns::toy_instance;
use ddro::bench::{frozen_stage_value as frozen, stage_value as free};
use ddro::lp::{solve_milp, MipStatus};
use ddro::model::{binary_states, build_stage_block, generate_instance, GenSpec, Instance, StageBlock};

fn two_facility_instance() -> Instance {
    let mut inst = toy_instance(&[30.0], 30.0, 1.0);
    inst.i = 2;
    inst.facility_xy = vec![[0, 0], [1, 0]];
    inst.c = vec![vec![2.0], vec![5.0]];
    inst.f = vec![vec![100.0; 2]; 2];
    inst.h = vec![vec![1000.0; 2]; 2];
    inst.lambda_mu = vec![vec![0.0; 2]];
    inst.lambda_s = vec![vec![0.0; 2]];
    inst.lambda_cov = vec![0.0; 2];
    inst.r = vec![100.0];
    inst
}

#[test]
fn all_open_routes_demand_through_the_cheapest_facility() {
    let inst = two_facility_instance();
    inst.validate().unwrap();
    let blk = build_stage_block(&inst, 2, &[1.0, 1.0], &[30.0]);
    let sol = solve_milp(&blk.model).unwrap();
    assert_eq!(sol.status, MipStatus::Optimal);
    assert!((sol.objective + 2940.0).abs() < 1e-6, "{}", sol.objective);
    let (_, y) = blk.extract(&sol.x);
    assert!((y[0][0] - 30.0).abs() < 1e-6 && y[1][0].abs() < 1e-6, "{y:?}");
}

#[test]
fn zero_demand_gives_zero_cost() {
    let inst = two_facility_instance();
    let blk = build_stage_block(&inst, 2, &[1.0, 1.0], &[0.0]);
    let sol = solve_milp(&blk.model).unwrap();
    assert_eq!(sol.status, MipStatus::Optimal);
    assert!(sol.objective.abs() < 1e-9);
}

#[test]
fn budget_row_admits_a_build_only_when_affordable() {
    let mut inst = toy_instance(&[10.0], 10.0, 1.0);
    inst.n_budget = 100.0;
    let xi = inst.stage_support(1)[0].clone();
    assert!(frozen(&inst, 1, &[0.0], &[0.0], &xi).unwrap().is_some());
    assert!(frozen(&inst, 1, &[0.0], &[1.0], &xi).unwrap().is_some());
    inst.n_budget = 99.0;
    assert!(frozen(&inst, 1, &[0.0], &[0.0], &xi).unwrap().is_some());
    assert!(frozen(&inst, 1, &[0.0], &[1.0], &xi).unwrap().is_none());
}

#[test]
fn monotone_rows_keep_open_facilities_open() {
    let inst = two_facility_instance();
    assert!(frozen(&inst, 2, &[1.0, 0.0], &[0.0, 0.0], &[30.0]).unwrap().is_none());
    assert!(frozen(&inst, 2, &[1.0, 0.0], &[1.0, 0.0], &[30.0]).unwrap().is_some());
}

#[test]
fn complete_recourse_on_generated_instances() {
    for seed in 0..4 {
        let inst = generate_instance(&GenSpec::new(seed, 3, 3, 2, 4));
        inst.validate().unwrap();
        for t in 1..=inst.t {
            for x_prev in binary_states(inst.i) {
                for xi in inst.stage_support(t) {
                    let v = free(&inst, t, &x_prev, xi).unwrap();
                    assert!(v.is_some(), "seed {seed} t {t} x_prev {x_prev:?} xi {xi:?}");
                }
            }
        }
    }
}

/// With capacities far above any demand the capacity row never binds, so
/// the single-indicator and cumulative forms give equal stage values.
#[test]
fn capacity_forms_agree_when_capacity_is_slack() {
    let mut cases = 0;
    for seed in 0..25 {
        let inst = generate_instance(&GenSpec::new(100 + seed, 3, 2, 2, 2));
        for (n, x_prev) in binary_states(inst.i).into_iter().enumerate() {
            let t = 2 + n % 2;
            let xi = &inst.stage_support(t)[0];
            let history: Vec<f64> = x_prev.iter().map(|v| v * (t - 1) as f64).collect();
            let single = solve_milp(&build_stage_block(&inst, t, &x_prev, xi).model).unwrap();
            let cumulative = solve_milp(&StageBlock::with_history(&inst, t, &x_prev, xi, &history).model).unwrap();
            assert_eq!(single.status, MipStatus::Optimal);
            assert_eq!(cumulative.status, MipStatus::Optimal);
            assert!((single.objective - cumulative.objective).abs() <= 1e-7 * single.objective.abs().max(1.0));
            cases += 1;
        }
    }
    assert_eq!(cases, 100);
}

#[test]
fn generator_is_deterministic_and_round_trips() {
    let spec = GenSpec::new(7, 2, 3, 1, 10);
    let a = generate_instance(&spec);
    let b = generate_instance(&spec);
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(Instance::from_json(&a.to_json()).unwrap(), a);
}

#[test]
fn manhattan_cost_formula() {
    let mut spec = GenSpec::new(3, 2, 1, 1, 3);
    spec.cost_mode = ddro::model::CostMode::ManhattanOver4;
    let inst = generate_instance(&spec);
    let [fx, fy] = inst.facility_xy[0];
    let [cx, cy] = inst.customer_xy[0];
    let d = ((fx - cx).abs() + (fy - cy).abs()) as f64;
    assert_eq!(inst.c[0][0], d / 4.0);
}
