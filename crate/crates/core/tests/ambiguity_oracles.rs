//! Oracle checks of the moment maps, the worst-case programs and the
//! nonemptiness test.

mod common;

use common::{brute_force_nonempty, random_config, rel_close};
use ddro::ambiguity::{decision_mean, decision_moments_type23, is_nonempty, type1_bounds, worst_case, AmbiguityType};
use ddro::bench::patterns::{budget_feasible_first_stage, pattern_cases, pattern_instance, small_two_stage, toy_instance};
use ddro::linalg::{sym_eig, SymMatrix};
use ddro::model::{binary_states, generate_instance, Distribution, GenSpec, Instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALL_TYPES: [AmbiguityType; 3] = [AmbiguityType::Type1, AmbiguityType::Type2, AmbiguityType::Type3];

#[test]
fn type1_windows_without_decisions() {
    let inst = small_two_stage(AmbiguityType::Type1, 3);
    let (l, u) = type1_bounds(&inst, &[0.0; 3]);
    assert_eq!(l.len(), 2 * inst.j + 1);
    assert_eq!((l[0], u[0]), (1.0, 1.0));
    for j in 0..inst.j {
        assert_eq!(l[1 + j], inst.mu_bar[j] - inst.eps_mu[j]);
        assert_eq!(u[1 + j], inst.mu_bar[j] + inst.eps_mu[j]);
        let s = inst.mu_bar[j].powi(2) + inst.sigma_bar[j].powi(2);
        assert_eq!(l[1 + inst.j + j], s * inst.eps_s_lo[j]);
        assert_eq!(u[1 + inst.j + j], s * inst.eps_s_hi[j]);
    }
}

#[test]
fn pattern_one_one_mean_window() {
    let case = &pattern_cases(AmbiguityType::Type1)[0];
    let inst = pattern_instance(case, 0, 20);
    let (l, u) = type1_bounds(&inst, &[1.0, 0.0, 0.0]);
    assert!((l[1] - 14.0).abs() < 1e-12 && (u[1] - 24.0).abs() < 1e-12, "[{}, {}]", l[1], u[1]);
}

#[test]
fn normalized_coefficients_double_the_moments_when_all_open() {
    let inst = generate_instance(&GenSpec::new(4, 2, 4, 3, 5));
    let ones = vec![1.0; inst.i];
    let mu = decision_mean(&inst, &ones);
    for j in 0..inst.j {
        assert!(rel_close(mu[j], 2.0 * inst.mu_bar[j], 1e-12));
    }
    let (_, sig) = decision_moments_type23(&inst, &ones);
    for a in 0..inst.j {
        for b in 0..inst.j {
            assert!(rel_close(sig.get(a, b), 2.0 * inst.sigma_mat.get(a, b), 1e-12));
        }
    }
}

#[test]
fn covariance_eigenvalues_scale_with_a_single_facility() {
    let inst = generate_instance(&GenSpec::new(5, 2, 3, 3, 8));
    let (mu0, sig0) = decision_moments_type23(&inst, &[0.0; 3]);
    assert_eq!(mu0, inst.mu_bar);
    assert_eq!(sig0, inst.sigma_mat);
    let base = sym_eig(&sig0);
    for i in 0..3 {
        let mut e = vec![0.0; 3];
        e[i] = 1.0;
        let (_, sig) = decision_moments_type23(&inst, &e);
        for ((lam, _), (lam0, _)) in sym_eig(&sig).iter().zip(&base) {
            assert!((lam - (1.0 + inst.lambda_cov[i]) * lam0).abs() <= 1e-9 * lam0.abs().max(1.0));
        }
    }
}

#[test]
fn constant_stage_values_are_returned_unchanged() {
    for ty in ALL_TYPES {
        let inst = small_two_stage(ty, 1);
        for x in budget_feasible_first_stage(&inst) {
            let q = vec![-1234.5; inst.stage_k(2)];
            let w = worst_case(&inst, ty, 2, &x, &q, None).unwrap();
            assert!(rel_close(w.value, -1234.5, 1e-6), "{ty:?}: {}", w.value);
            assert!((w.p.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
            assert!(w.p.iter().all(|&p| p >= -1e-12));
        }
    }
}

#[test]
fn singleton_support_at_the_mean() {
    let mut inst = toy_instance(&[10.0], 10.0, 1.0);
    inst.sigma_mat = SymMatrix::from_diag(&[0.0]);
    let w = worst_case(&inst, AmbiguityType::Type2, 2, &[0.0], &[-7.0], None).unwrap();
    assert!((w.p[0] - 1.0).abs() < 1e-9 && (w.value + 7.0).abs() < 1e-9);
}

#[test]
fn worst_case_is_monotone_in_the_stage_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for ty in ALL_TYPES {
        for seed in 0..4 {
            let inst = small_two_stage(ty, seed);
            let cands = budget_feasible_first_stage(&inst);
            let x = &cands[rng.random_range(0..cands.len())];
            let k = inst.stage_k(2);
            let q: Vec<f64> = (0..k).map(|_| -rng.random_range(0.0..3000.0f64)).collect();
            let base = worst_case(&inst, ty, 2, x, &q, None).unwrap().value;
            let mut up = q.clone();
            up[rng.random_range(0..k)] += rng.random_range(1.0..500.0);
            let raised = worst_case(&inst, ty, 2, x, &up, None).unwrap().value;
            assert!(raised >= base - 1e-6 * base.abs().max(1.0), "{ty:?} seed {seed}: {raised} < {base}");
        }
    }
}

#[test]
fn type2_feasibility_implies_type3_feasibility() {
    let mut checked = 0;
    for seed in 0..8 {
        let inst = small_two_stage(AmbiguityType::Type2, seed);
        assert!(inst.gamma > 0.0 && inst.eta_cov >= 1.0);
        for x in binary_states(inst.i) {
            if is_nonempty(&inst, AmbiguityType::Type2, 2, &x) {
                assert!(is_nonempty(&inst, AmbiguityType::Type3, 2, &x), "seed {seed} x {x:?}");
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn decision_independent_worst_case_ignores_the_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for ty in ALL_TYPES {
        let inst = small_two_stage(ty, 2).decision_independent();
        let q: Vec<f64> = (0..inst.stage_k(2)).map(|_| -rng.random_range(0.0..3000.0f64)).collect();
        let vals: Vec<f64> =
            binary_states(inst.i).iter().map(|x| worst_case(&inst, ty, 2, x, &q, None).unwrap().value).collect();
        for v in &vals {
            assert!(rel_close(*v, vals[0], 1e-6), "{ty:?}: {vals:?}");
        }
    }
}

#[test]
fn separated_support_is_empty() {
    let inst = toy_instance(&[20.0, 21.0, 25.0], 10.0, 1.0);
    assert!(!is_nonempty(&inst, AmbiguityType::Type1, 2, &[0.0]));
    let inside = toy_instance(&[10.0, 10.0, 10.0], 10.0, 1.0);
    assert!(is_nonempty(&inside, AmbiguityType::Type1, 2, &[0.0]));
}

#[test]
fn nonemptiness_matches_the_slack_program() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (ty, n) in [(AmbiguityType::Type1, 1000), (AmbiguityType::Type2, 300)] {
        let (mut yes, mut no) = (0, 0);
        for case in 0..n {
            let (inst, x) = random_config(&mut rng, ty);
            let fast = is_nonempty(&inst, ty, 2, &x);
            assert_eq!(fast, brute_force_nonempty(&inst, ty, &x), "{ty:?} case {case} x {x:?}");
            if fast {
                yes += 1;
            } else {
                no += 1;
            }
        }
        assert!(yes > 0 && no > 0, "{ty:?}: {yes} nonempty, {no} empty");
    }
}

/// First state (most facilities open first) with an empty stage-2 set.
fn first_empty_state(inst: &Instance) -> Option<Vec<f64>> {
    let mut states = binary_states(inst.i);
    states.sort_by(|a, b| b.iter().sum::<f64>().total_cmp(&a.iter().sum::<f64>()));
    states.into_iter().find(|x| !is_nonempty(inst, AmbiguityType::Type1, 2, x))
}

#[test]
fn low_variation_normal_supports_give_empty_sets() {
    for rho in [0.2, 0.5] {
        let mut spec = GenSpec::new(0, 3, 10, 20, 100);
        spec.rho_bar = rho;
        spec.distribution = Distribution::Normal;
        let inst = generate_instance(&spec);
        assert!(first_empty_state(&inst).is_some(), "rho {rho}");
    }
}
