//! Oracle checks of the compiled stage models: strong duality against the
//! primal worst-case LP, McCormick exactness, layout bookkeeping and the
//! risk-neutral reduction.

use ddro::ambiguity::{worst_case, AmbiguityType, Risk};
use ddro::bench::patterns::{budget_feasible_first_stage, small_two_stage};
use ddro::lp::{solve_lp, solve_milp, LinearModel, LpStatus, MipStatus, VarKind};
use ddro::misdp::{type3_dual_side_value, PsdHandling, EIGEN_CUT_TOL};
use ddro::model::StateLink;
use ddro::reformulate::{
    build_stage, dual_side_value, fixed_state_build, mccormick_binary_product, mccormick_interval, BuildOptions, DualLayout,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn random_q(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| -(rng.random_range(0.0..3000.0f64)).round()).collect()
}

#[test]
fn strong_duality_types_1_and_2() {
    let opts = BuildOptions::default();
    for ty in [AmbiguityType::Type1, AmbiguityType::Type2] {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for seed in 0..10 {
            let inst = small_two_stage(ty, seed);
            let cands = budget_feasible_first_stage(&inst);
            for _ in 0..10 {
                let x = &cands[rng.random_range(0..cands.len())];
                let q = random_q(&mut rng, inst.stage_k(2));
                let primal = worst_case(&inst, ty, 2, x, &q, None).unwrap().value;
                let dual = dual_side_value(&inst, ty, 1, x, &q, None, &opts).unwrap();
                assert!(rel_close(primal, dual, 1e-6), "{ty:?} seed {seed} x {x:?}: primal {primal} dual {dual}");
                checked += 1;
            }
        }
        assert_eq!(checked, 100);
    }
}

#[test]
fn strong_duality_with_cvar() {
    let opts = BuildOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for ty in [AmbiguityType::Type1, AmbiguityType::Type2] {
        for seed in 0..5 {
            let inst = small_two_stage(ty, seed);
            let cands = budget_feasible_first_stage(&inst);
            let x = &cands[rng.random_range(0..cands.len())];
            let q = random_q(&mut rng, inst.stage_k(2));
            for lambda in [0.25, 0.5, 1.0] {
                let risk = Some(Risk { lambda, alpha: 0.9 });
                let primal = worst_case(&inst, ty, 2, x, &q, risk).unwrap().value;
                let dual = dual_side_value(&inst, ty, 1, x, &q, risk, &opts).unwrap();
                assert!(rel_close(primal, dual, 1e-6), "{ty:?} λ {lambda}: primal {primal} dual {dual}");
            }
        }
    }
}

#[test]
fn zero_risk_weight_matches_risk_neutral() {
    let opts = BuildOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for ty in [AmbiguityType::Type1, AmbiguityType::Type2] {
        for seed in 0..4 {
            let inst = small_two_stage(ty, seed);
            let x = budget_feasible_first_stage(&inst)[1].clone();
            let q = random_q(&mut rng, inst.stage_k(2));
            let neutral = dual_side_value(&inst, ty, 1, &x, &q, None, &opts).unwrap();
            let zero = dual_side_value(&inst, ty, 1, &x, &q, Some(Risk { lambda: 0.0, alpha: 0.95 }), &opts).unwrap();
            assert!((neutral - zero).abs() <= 1e-8 * neutral.abs().max(1.0), "{neutral} vs {zero}");
        }
    }
}

/// Without symmetry rows the antisymmetric part of `Y` has zero cost and
/// may sit at its bound, so the raw optima are compared without the audit.
#[test]
fn symmetry_rows_do_not_change_the_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in [1, 3, 5] {
        let inst = small_two_stage(AmbiguityType::Type2, seed);
        let x = budget_feasible_first_stage(&inst)[2].clone();
        let q = random_q(&mut rng, inst.stage_k(2));
        let value = |symmetry_rows: bool| {
            let b = fixed_state_build(&inst, AmbiguityType::Type2, 1, &x, &q, None, &BuildOptions { symmetry_rows, big_m: None }).unwrap();
            let sol = solve_milp(&b.model).unwrap();
            assert_eq!(sol.status, MipStatus::Optimal);
            sol.objective
        };
        let (on, off) = (value(true), value(false));
        assert!(rel_close(on, off, 1e-7), "{on} vs {off}");
    }
}

#[test]
fn decision_independent_values_ignore_the_state() {
    let opts = BuildOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for ty in [AmbiguityType::Type1, AmbiguityType::Type2] {
        let inst = small_two_stage(ty, 2).decision_independent();
        let q = random_q(&mut rng, inst.stage_k(2));
        let vals: Vec<f64> = budget_feasible_first_stage(&inst)
            .iter()
            .map(|x| dual_side_value(&inst, ty, 1, x, &q, None, &opts).unwrap())
            .collect();
        for v in &vals {
            assert!(rel_close(*v, vals[0], 1e-7), "{vals:?}");
        }
    }
}

#[test]
fn type3_outer_and_inner_bracket_the_exact_value() {
    let opts = BuildOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..3 {
        let inst = small_two_stage(AmbiguityType::Type3, seed);
        let x = budget_feasible_first_stage(&inst)[rng.random_range(0..4)].clone();
        let q = random_q(&mut rng, inst.stage_k(2));
        let exact = worst_case(&inst, AmbiguityType::Type3, 2, &x, &q, None).unwrap().value;
        let lo = type3_dual_side_value(&inst, 1, &x, &q, None, &opts, PsdHandling::Outer, EIGEN_CUT_TOL).unwrap();
        let hi = type3_dual_side_value(&inst, 1, &x, &q, None, &opts, PsdHandling::DdInner, EIGEN_CUT_TOL).unwrap();
        let slack = 1e-6 * exact.abs().max(1.0);
        assert!(lo <= exact + slack && exact <= hi + slack, "seed {seed}: {lo} ≤ {exact} ≤ {hi}");
    }
}

#[test]
fn layout_families_are_disjoint_and_cover_all_columns() {
    let opts = BuildOptions::default();
    for ty in [AmbiguityType::Type1, AmbiguityType::Type2, AmbiguityType::Type3] {
        let inst = small_two_stage(ty, 1).with_risk(0.3, 0.9);
        let xi = inst.stage_support(1)[0].clone();
        for link in [StateLink::Fixed(&[0.0, 0.0, 0.0]), StateLink::Copy] {
            let b = build_stage(&inst, ty, 1, link, &xi, &[], Some(Risk { lambda: 0.3, alpha: 0.9 }), &opts).unwrap();
            let mut owner = vec![0usize; b.model.num_vars()];
            for f in &b.layout.families {
                for c in f.range.clone() {
                    owner[c] += 1;
                }
            }
            assert!(owner.iter().all(|&n| n == 1), "{ty:?}: {:?}", b.layout.families.iter().map(|f| (&f.name, &f.range)).collect::<Vec<_>>());
            let expected = matches!(
                (&b.layout.duals, ty),
                (DualLayout::Type1 { .. }, AmbiguityType::Type1) | (DualLayout::Type2 { .. }, AmbiguityType::Type2) | (DualLayout::Type3 { .. }, AmbiguityType::Type3)
            );
            assert!(expected);
            assert_eq!(b.layout.theta.len(), inst.stage_k(2));
            assert_eq!(b.layout.cvar_pi.len(), inst.stage_k(2));
            assert_eq!(b.psd_blocks.len(), usize::from(ty == AmbiguityType::Type3) * 2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn mccormick_envelope_is_exact_at_binary_points(b in 0u8..=1, lo in -1e6f64..0.0, width in 0.0f64..2e6, t in 0.0f64..=1.0) {
        let hi = lo + width;
        let y = lo + t * width;
        let b = f64::from(b);
        let (l, u) = mccormick_interval(b, y, lo, hi);
        let scale = lo.abs().max(hi.abs()).max(1.0);
        prop_assert!((l - b * y).abs() <= 1e-9 * scale, "lower {l} vs {}", b * y);
        prop_assert!((u - b * y).abs() <= 1e-9 * scale, "upper {u} vs {}", b * y);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn mccormick_rows_pin_the_product(b in 0u8..=1, lo in -100.0f64..0.0, width in 0.0f64..200.0, t in 0.0f64..=1.0, sense in prop::bool::ANY) {
        let hi = lo + width;
        let yv = lo + t * width;
        let bv = f64::from(b);
        let mut m = LinearModel::new();
        let bc = m.add_var("b", bv, bv, VarKind::Continuous, 0.0);
        let yc = m.add_var("y", yv, yv, VarKind::Continuous, 0.0);
        let zc = m.add_var("z", lo.min(0.0) - 1.0, hi.max(0.0) + 1.0, VarKind::Continuous, if sense { 1.0 } else { -1.0 });
        m.upper[yc] = hi;
        m.lower[yc] = lo;
        mccormick_binary_product(&mut m, bc, yc, zc).unwrap();
        m.lower[yc] = yv;
        m.upper[yc] = yv;
        let sol = solve_lp(&m).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!((sol.x[zc] - bv * yv).abs() <= 1e-7 * (1.0 + yv.abs()));
    }
}
