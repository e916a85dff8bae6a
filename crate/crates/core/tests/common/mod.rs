//! Helpers shared by the integration test binaries.

#![allow(dead_code)]

use ddro::ambiguity::{decision_moments_type23, type1_bounds, AmbiguityType};
use ddro::bench::patterns::small_two_stage;
use ddro::lp::{solve_lp, LinearModel, LpStatus, Relation, VarKind};
use ddro::model::Instance;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Relative closeness with a floor of one on the scale.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Feasibility of the stage-2 moment rows decided by minimising scaled
/// violation slacks over the simplex.
pub fn brute_force_nonempty(inst: &Instance, ty: AmbiguityType, x: &[f64]) -> bool {
    let support = inst.stage_support(2);
    let k = support.len();
    let mut m = LinearModel::new();
    for kk in 0..k {
        m.add_var(format!("p_{kk}"), 0.0, f64::INFINITY, VarKind::Continuous, 0.0);
    }
    let ones: Vec<(usize, f64)> = (0..k).map(|kk| (kk, 1.0)).collect();
    m.add_row("sum", &ones, Relation::Eq, 1.0);
    let slacked = |m: &mut LinearModel, coeffs: Vec<(usize, f64)>, lo: f64, hi: f64| {
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let s_lo = m.add_var("s_lo", 0.0, f64::INFINITY, VarKind::Continuous, 1.0 / scale);
        let s_hi = m.add_var("s_hi", 0.0, f64::INFINITY, VarKind::Continuous, 1.0 / scale);
        let mut c = coeffs.clone();
        c.push((s_lo, 1.0));
        m.add_row("lo", &c, Relation::Ge, lo);
        let mut c = coeffs;
        c.push((s_hi, -1.0));
        m.add_row("hi", &c, Relation::Le, hi);
    };
    match ty {
        AmbiguityType::Type1 => {
            let (l, u) = type1_bounds(inst, x);
            for j in 0..inst.j {
                slacked(&mut m, (0..k).map(|kk| (kk, support[kk][j])).collect(), l[1 + j], u[1 + j]);
                let l2 = l[1 + inst.j + j];
                let u2 = u[1 + inst.j + j];
                slacked(&mut m, (0..k).map(|kk| (kk, support[kk][j] * support[kk][j])).collect(), l2, u2);
            }
        }
        AmbiguityType::Type2 => {
            let (mu, sig) = decision_moments_type23(inst, x);
            for j in 0..inst.j {
                slacked(&mut m, (0..k).map(|kk| (kk, support[kk][j])).collect(), mu[j], mu[j]);
            }
            for a in 0..inst.j {
                for b in a..inst.j {
                    let c = (0..k).map(|kk| (kk, (support[kk][a] - mu[a]) * (support[kk][b] - mu[b]))).collect();
                    slacked(&mut m, c, sig.get(a, b), sig.get(a, b));
                }
            }
        }
        AmbiguityType::Type3 => panic!("type 3 has no linear feasibility program"),
    }
    let sol = solve_lp(&m).expect("solver runs");
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.objective <= 1e-9
}

/// Random `(instance, x)` configuration with perturbed radii and moments.
pub fn random_config(rng: &mut ChaCha8Rng, ty: AmbiguityType) -> (Instance, Vec<f64>) {
    let mut inst = small_two_stage(ty, rng.random_range(0..6));
    for j in 0..inst.j {
        inst.eps_mu[j] = rng.random_range(0.0..8.0);
        inst.eps_s_lo[j] = rng.random_range(0.3..1.0);
        inst.eps_s_hi[j] = rng.random_range(1.0..1.6);
        inst.mu_bar[j] *= rng.random_range(0.8..1.2);
    }
    inst.sigma_mat = inst.sigma_mat.scaled(rng.random_range(0.2..1.6));
    let x = (0..inst.i).map(|_| f64::from(rng.random_range(0..=1u8))).collect();
    (inst, x)
}
