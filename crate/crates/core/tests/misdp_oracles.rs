//! Oracle checks of the Type-3 bounding schemes: PSD compliance of both
//! approximations, the lower/upper sandwich around the enumeration value,
//! monotone outer values and the wide-set limit.

use ddro::ambiguity::{worst_case, AmbiguityType};
use ddro::bench::enumerate_two_stage;
use ddro::bench::patterns::{budget_feasible_first_stage, small_two_stage};
use ddro::linalg::sym_eig;
use ddro::lp::{solve_milp, MipStatus, Relation};
use ddro::misdp::{seed_minor_rows, solve_stage, type3_dual_side_value, PsdHandling, EIGEN_CUT_TOL};
use ddro::reformulate::{fixed_state_build, BuildOptions};
use ddro::sddip::{run_type3_bounds, RunConfig, UbKind, UbMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_q(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| -(rng.random_range(0.0..3000.0f64)).round()).collect()
}

#[test]
fn terminal_blocks_are_psd_within_tolerance() {
    let opts = BuildOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for seed in 0..4 {
        let inst = small_two_stage(AmbiguityType::Type3, seed);
        let cands = budget_feasible_first_stage(&inst);
        let x = &cands[rng.random_range(0..cands.len())];
        let q = random_q(&mut rng, inst.stage_k(2));
        let b = fixed_state_build(&inst, AmbiguityType::Type3, 1, x, &q, None, &opts).unwrap();
        let outer = solve_stage(&b, PsdHandling::Outer, EIGEN_CUT_TOL).unwrap();
        let inner = solve_stage(&b, PsdHandling::DdInner, EIGEN_CUT_TOL).unwrap();
        for blk in &b.psd_blocks {
            let lo = blk.matrix(&outer.solution.x).min_eig().0;
            let hi = blk.matrix(&inner.solution.x).min_eig().0;
            assert!(lo >= -1e-6, "seed {seed} {:?}: outer λ_min {lo}", blk.name);
            assert!(hi >= -1e-9, "seed {seed} {:?}: inner λ_min {hi}", blk.name);
        }
    }
}

#[test]
fn outer_value_grows_with_each_cut_round() {
    let opts = BuildOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inst = small_two_stage(AmbiguityType::Type3, 2);
    let x = budget_feasible_first_stage(&inst)[1].clone();
    let q = random_q(&mut rng, inst.stage_k(2));
    let b = fixed_state_build(&inst, AmbiguityType::Type3, 1, &x, &q, None, &opts).unwrap();
    let mut m = b.model.clone();
    seed_minor_rows(&mut m, &b.psd_blocks);
    let mut values = Vec::new();
    for _ in 0..200 {
        let sol = solve_milp(&m).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        values.push(sol.objective);
        let mut added = false;
        for blk in &b.psd_blocks {
            for (lam, v) in sym_eig(&blk.matrix(&sol.x)) {
                if lam >= -EIGEN_CUT_TOL {
                    break;
                }
                m.add_row("cut", &blk.quad_coeffs(&v), Relation::Ge, 0.0);
                added = true;
            }
        }
        if !added {
            break;
        }
    }
    for w in values.windows(2) {
        assert!(w[1] >= w[0] - 1e-7 * w[0].abs().max(1.0), "{values:?}");
    }
    let exact = worst_case(&inst, AmbiguityType::Type3, 2, &x, &q, None).unwrap().value;
    assert!(*values.last().unwrap() <= exact + 1e-6 * exact.abs().max(1.0));
}

#[test]
fn iterative_bases_never_loosen_the_inner_value() {
    let opts = BuildOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..3 {
        let inst = small_two_stage(AmbiguityType::Type3, seed);
        let x = budget_feasible_first_stage(&inst)[0].clone();
        let q = random_q(&mut rng, inst.stage_k(2));
        let exact = worst_case(&inst, AmbiguityType::Type3, 2, &x, &q, None).unwrap().value;
        let fixed = type3_dual_side_value(&inst, 1, &x, &q, None, &opts, PsdHandling::DdInner, EIGEN_CUT_TOL).unwrap();
        let iter = type3_dual_side_value(&inst, 1, &x, &q, None, &opts, PsdHandling::DdIterative, EIGEN_CUT_TOL).unwrap();
        let slack = 1e-6 * exact.abs().max(1.0);
        assert!(iter <= fixed + slack, "seed {seed}: {iter} > {fixed}");
        assert!(exact <= iter + slack, "seed {seed}: {exact} > {iter}");
    }
}

#[test]
fn bounds_sandwich_the_enumeration_value() {
    for seed in 0..3 {
        let inst = small_two_stage(AmbiguityType::Type3, seed);
        let exact = enumerate_two_stage(&inst, AmbiguityType::Type3, None).unwrap().objective.unwrap();
        let (lo, hi) = run_type3_bounds(&inst, &RunConfig { seed, ..Default::default() }).unwrap();
        let (lb, ub) = (lo.lb.unwrap(), hi.ub.unwrap());
        assert_eq!(hi.ub_kind, UbKind::Exact);
        let slack = 1e-6 * exact.abs().max(1.0);
        assert!(lb <= exact + slack && exact <= ub + slack, "seed {seed}: {lb} ≤ {exact} ≤ {ub}");
        assert!(lo.lb_per_iter.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(lo.eigen_cut_csv().lines().count(), inst.t + 1);
    }
}

#[test]
fn iterative_mode_keeps_the_sandwich() {
    let inst = small_two_stage(AmbiguityType::Type3, 1);
    let exact = enumerate_two_stage(&inst, AmbiguityType::Type3, None).unwrap().objective.unwrap();
    let cfg = RunConfig { ub_mode: UbMode::Iterative, ..Default::default() };
    let (lo, hi) = run_type3_bounds(&inst, &cfg).unwrap();
    let slack = 1e-6 * exact.abs().max(1.0);
    assert!(lo.lb.unwrap() <= exact + slack && exact <= hi.ub.unwrap() + slack);
}

#[test]
fn wide_sets_close_the_gap() {
    let mut inst = small_two_stage(AmbiguityType::Type3, 0);
    inst.gamma = 1e6;
    inst.eta_cov = 1e6;
    let (lo, hi) = run_type3_bounds(&inst, &RunConfig::default()).unwrap();
    let (lb, ub) = (lo.lb.unwrap(), hi.ub.unwrap());
    let gap = (ub - lb) / ub.abs().max(1.0);
    assert!(gap < 1e-3, "{lb} vs {ub}: gap {gap}");
}
