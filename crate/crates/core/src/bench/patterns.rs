//! Two-stage pattern instances and small seeded suites.
//!
//! The pattern parameters (moments, radii and decision-dependency
//! coefficients) follow the benchmark tables; the discrete supports behind
//! the published numbers were never released, so supports are regenerated
//! here from a seed. Generation is deterministic: candidate supports are
//! drawn from a seeded stream and the first one whose ambiguity sets are
//! nonempty at every budget-feasible first-stage decision is kept.

use crate::ambiguity::{is_nonempty, AmbiguityType};
use crate::linalg::SymMatrix;
use crate::model::{binary_states, CapacityForm, Instance, YIntegrality, INSTANCE_VERSION};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Objective values printed in the benchmark tables, for orientation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedValues {
    /// Enumeration values for the first-stage candidates e1, e2, e3.
    pub candidates: [f64; 3],
    pub dddr: f64,
    pub didr: f64,
}

/// One row of a pattern table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCase {
    pub id: String,
    pub ty: AmbiguityType,
    /// `J × I`.
    pub lambda_mu: Vec<Vec<f64>>,
    /// `J × I`.
    pub lambda_s: Vec<Vec<f64>>,
    pub lambda_cov: Vec<f64>,
    pub published: PublishedValues,
}

/// Pattern table for one ambiguity type.
pub fn pattern_cases(ty: AmbiguityType) -> Vec<PatternCase> {
    let case = |id: &str, lm: Vec<Vec<f64>>, ls: Vec<Vec<f64>>, lc: Vec<f64>, cand: [f64; 3], dddr: f64, didr: f64| PatternCase {
        id: id.to_string(),
        ty,
        lambda_mu: lm,
        lambda_s: ls,
        lambda_cov: lc,
        published: PublishedValues { candidates: cand, dddr, didr },
    };
    match ty {
        AmbiguityType::Type1 => {
            let z = vec![0.0; 3];
            vec![
                case("1-1", vec![vec![0.9, 0.5, 0.1]], vec![vec![0.5, 0.5, 0.5]], z.clone(), [-2160.0, -1800.0, -1575.0], -2160.0, -1463.0),
                case("1-2", vec![vec![0.5, 0.5, 0.5]], vec![vec![0.9, 0.5, 0.1]], z.clone(), [-1800.0, -1800.0, -1800.0], -1800.0, -1463.0),
                case("1-3", vec![vec![0.1, 0.1, 0.1]], vec![vec![0.9, 0.5, 0.1]], z.clone(), [-1665.0, -1575.0, -1485.0], -1665.0, -1463.0),
                case("1-4", vec![vec![0.5, 0.9, 0.1]], vec![vec![0.9, 0.5, 0.1]], z, [-1800.0, -2160.0, -1485.0], -2160.0, -1463.0),
            ]
        }
        AmbiguityType::Type2 => {
            let zs = vec![vec![0.0; 3]; 2];
            let both = |v: [f64; 3]| vec![v.to_vec(), v.to_vec()];
            vec![
                case("2-1", both([0.1, 0.2, 0.3]), zs.clone(), vec![0.5, 0.5, 0.5], [-3780.0, -3960.0, -4140.0], -4140.0, -3600.0),
                case("2-2", both([0.1, 0.2, 0.3]), zs.clone(), vec![0.9, 0.5, 0.1], [-3780.0, -3960.0, -4140.0], -4140.0, -3600.0),
                case("2-3", both([0.3, 0.3, 0.3]), zs, vec![0.9, 0.5, 0.1], [-4140.0, -4140.0, -4140.0], -4140.0, -3600.0),
            ]
        }
        AmbiguityType::Type3 => {
            let zs = vec![vec![0.0; 3]; 2];
            let a = vec![0.1, 0.5, 0.9];
            vec![
                case("3-1", vec![a.clone(), a.clone()], zs.clone(), vec![0.5, 0.5, 0.5], [-2700.0, -3150.0, -3856.2], -3856.2, -2701.0),
                case("3-2", vec![vec![0.5; 3], vec![0.5; 3]], zs.clone(), vec![0.9, 0.5, 0.1], [-2950.0, -3150.0, -3350.0], -3350.0, -2701.0),
                case("3-3", vec![a.clone(), a.clone()], zs.clone(), vec![0.1, 0.5, 0.9], [-2700.0, -3150.0, -3625.4], -3625.4, -2701.0),
                case("3-4", vec![a.clone(), vec![0.9, 0.5, 0.1]], zs, vec![0.5, 0.5, 0.5], [-2700.0, -3150.0, -4201.8], -4201.8, -2701.0),
            ]
        }
    }
}

/// Skeleton of a two-stage, three-facility instance with flat transport
/// cost 10 and the benchmark budget, capacity and revenue.
fn skeleton(j: usize, mu_bar: Vec<f64>, sigma_bar: Vec<f64>, sigma_mat: SymMatrix) -> Instance {
    let (t, i) = (2, 3);
    Instance {
        version: INSTANCE_VERSION.to_string(),
        t,
        i,
        j,
        k: 1,
        facility_xy: vec![[0, 0]; i],
        customer_xy: vec![[0, 0]; j],
        c: vec![vec![10.0; j]; i],
        f: vec![vec![100.0; i]; t],
        h: vec![vec![1000.0; i]; t],
        n_budget: 100.0,
        r: vec![100.0; j],
        support: vec![vec![mu_bar.clone()], vec![]],
        mu_bar,
        sigma_bar,
        rho_bar: 0.0,
        sigma_mat,
        lambda_mu: vec![vec![0.0; i]; j],
        lambda_s: vec![vec![0.0; i]; j],
        lambda_cov: vec![0.0; i],
        eps_mu: vec![0.0; j],
        eps_s_lo: vec![1.0; j],
        eps_s_hi: vec![1.0; j],
        gamma: 0.0,
        eta_cov: 1.0,
        risk_lambda: vec![0.0; t],
        risk_alpha: vec![0.95; t],
        y_integrality: YIntegrality::Integer,
        capacity_form: CapacityForm::SingleIndicator,
    }
}

/// First-stage decisions allowed by the budget row at stage 1.
pub fn budget_feasible_first_stage(inst: &Instance) -> Vec<Vec<f64>> {
    binary_states(inst.i)
        .into_iter()
        .filter(|x| (0..inst.i).map(|i| inst.f[0][i] * x[i]).sum::<f64>() <= inst.n_budget + 1e-9)
        .collect()
}

/// True if the stage-2 ambiguity set is nonempty for every budget-feasible
/// first-stage decision.
pub fn nonempty_at_all_candidates(inst: &Instance, ty: AmbiguityType) -> bool {
    budget_feasible_first_stage(inst).iter().all(|x| is_nonempty(inst, ty, 2, x))
}

fn integer_points(rng: &mut ChaCha8Rng, k: usize, dims: usize, hi: i64) -> Vec<Vec<f64>> {
    (0..k).map(|_| (0..dims).map(|_| rng.random_range(0..=hi) as f64).collect()).collect()
}

const MAX_SUPPORT_ATTEMPTS: u64 = 2000;

/// Instance for a pattern row with a regenerated support of size `k`.
///
/// Type 1 uses integer demands on `[0, 30]`; Type 2 places integer points
/// on the diagonal `ξ_1 = ξ_2` (the nominal covariance has rank one, so any
/// matching distribution lives on that line); Type 3 uses integer points on
/// `[0, 30]²`.
pub fn pattern_instance(case: &PatternCase, seed: u64, k: usize) -> Instance {
    let mut inst = match case.ty {
        AmbiguityType::Type1 => {
            let mut s = skeleton(1, vec![10.0], vec![0.1], SymMatrix::from_diag(&[0.01]));
            s.eps_mu = vec![5.0];
            s.eps_s_lo = vec![0.5];
            s.eps_s_hi = vec![1.5];
            s
        }
        AmbiguityType::Type2 => {
            let sig = SymMatrix::from_rows(&[vec![10.0, 10.0], vec![10.0, 10.0]]).expect("symmetric");
            skeleton(2, vec![10.0, 10.0], vec![10f64.sqrt(); 2], sig)
        }
        AmbiguityType::Type3 => {
            let sig = SymMatrix::from_rows(&[vec![0.1, 0.2], vec![0.2, 0.9]]).expect("symmetric");
            let mut s = skeleton(2, vec![10.0, 10.0], vec![0.1f64.sqrt(), 0.9f64.sqrt()], sig);
            s.gamma = 1000.0;
            s.eta_cov = 500.0;
            s
        }
    };
    inst.lambda_mu = case.lambda_mu.clone();
    inst.lambda_s = case.lambda_s.clone();
    inst.lambda_cov = case.lambda_cov.clone();
    inst.k = k;
    for attempt in 0..MAX_SUPPORT_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(attempt));
        inst.support[1] = match case.ty {
            AmbiguityType::Type1 => integer_points(&mut rng, k, 1, 30),
            AmbiguityType::Type2 => integer_points(&mut rng, k, 1, 30).into_iter().map(|v| vec![v[0], v[0]]).collect(),
            AmbiguityType::Type3 => integer_points(&mut rng, k, 2, 30),
        };
        if nonempty_at_all_candidates(&inst, case.ty) && nonempty_at_all_candidates(&inst.decision_independent(), case.ty) {
            return inst;
        }
    }
    panic!("no support with nonempty ambiguity sets found for pattern {}", case.id);
}

/// Small random two-stage instance (`T = 2`, `I = 3`, `J ∈ {1, 2}`,
/// `K ∈ [10, 20]`) with nonempty ambiguity sets at every budget-feasible
/// first-stage decision.
pub fn small_two_stage(ty: AmbiguityType, seed: u64) -> Instance {
    let j = 1 + (seed % 2) as usize;
    let k = 10 + (seed % 11) as usize;
    for attempt in 0..MAX_SUPPORT_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7_919).wrapping_add(attempt).wrapping_add(17));
        let support = integer_points(&mut rng, k, j, 30);
        let mean: Vec<f64> = (0..j).map(|a| support.iter().map(|r| r[a]).sum::<f64>() / k as f64).collect();
        let mut cov = SymMatrix::zeros(j);
        for a in 0..j {
            for b in 0..=a {
                cov.set(a, b, support.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / k as f64);
            }
        }
        let mu_bar: Vec<f64> = mean.iter().map(|m| (m * rng.random_range(0.7..0.95) * 100.0).round() / 100.0).collect();
        let sigma_mat = cov.scaled(rng.random_range(0.3..0.6));
        let sigma_bar: Vec<f64> = (0..j).map(|a| sigma_mat.get(a, a).sqrt()).collect();
        let mut inst = skeleton(j, mu_bar, sigma_bar, sigma_mat);
        inst.k = k;
        inst.c = (0..3).map(|_| (0..j).map(|_| rng.random_range(1..=20) as f64).collect()).collect();
        inst.lambda_mu = (0..j).map(|_| (0..3).map(|_| (rng.random_range(0.0..0.4f64) * 100.0).round() / 100.0).collect()).collect();
        inst.lambda_s = (0..j).map(|_| (0..3).map(|_| (rng.random_range(0.0..0.4f64) * 100.0).round() / 100.0).collect()).collect();
        inst.lambda_cov = (0..3).map(|_| (rng.random_range(0.0..0.4f64) * 100.0).round() / 100.0).collect();
        inst.eps_mu = vec![5.0; j];
        inst.eps_s_lo = vec![0.5; j];
        inst.eps_s_hi = vec![1.5; j];
        inst.gamma = 4.0;
        inst.eta_cov = 2.0;
        inst.support[1] = support;
        if nonempty_at_all_candidates(&inst, ty) && nonempty_at_all_candidates(&inst.decision_independent(), ty) {
            return inst;
        }
    }
    panic!("no nonempty instance found for seed {seed}");
}

/// One-facility, one-customer, two-stage instance with the given stage-2
/// support, nominal mean `mu_bar`, mean radius `eps_mu` and a very wide
/// second-moment window.
pub fn toy_instance(support: &[f64], mu_bar: f64, eps_mu: f64) -> Instance {
    let mut inst = skeleton(1, vec![mu_bar], vec![0.0], SymMatrix::from_diag(&[0.0]));
    inst.i = 1;
    inst.c = vec![vec![10.0]];
    inst.f = vec![vec![100.0]; 2];
    inst.h = vec![vec![1000.0]; 2];
    inst.facility_xy = vec![[0, 0]];
    inst.lambda_mu = vec![vec![0.0]];
    inst.lambda_s = vec![vec![0.0]];
    inst.lambda_cov = vec![0.0];
    inst.eps_mu = vec![eps_mu];
    inst.eps_s_lo = vec![0.0];
    inst.eps_s_hi = vec![1e6];
    inst.k = support.len();
    inst.support[1] = support.iter().map(|&v| vec![v]).collect();
    inst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_instances_are_valid_and_deterministic() {
        for ty in [AmbiguityType::Type1, AmbiguityType::Type2, AmbiguityType::Type3] {
            for case in pattern_cases(ty) {
                let a = pattern_instance(&case, 1, 20);
                a.validate().unwrap();
                assert_eq!(a, pattern_instance(&case, 1, 20));
            }
        }
    }

    #[test]
    fn small_suite_valid() {
        for ty in [AmbiguityType::Type1, AmbiguityType::Type2] {
            for seed in 0..4 {
                small_two_stage(ty, seed).validate().unwrap();
            }
        }
    }
}
