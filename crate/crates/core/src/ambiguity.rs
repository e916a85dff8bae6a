//! Decision-dependent moment maps and worst-case distribution oracles.
//!
//! * Type 1 bounds the first and second moments of each demand component
//!   between decision-dependent limits.
//! * Type 2 matches the mean vector and covariance matrix exactly.
//! * Type 3 keeps the mean inside an ellipsoid around `μ(x)` and bounds the
//!   centred second-moment matrix by `η·Σ(x)`.
//!
//! All sets live on the finite support of the next stage, so a distribution
//! is a probability vector `p` of length `K`.

use crate::linalg::{sym_eig, SymMatrix};
use crate::lp::{solve_lp, LinearModel, LpStatus, Relation, SolverError, VarKind};
use crate::model::Instance;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative eigenvalue tolerance of the Type-3 cutting-plane oracle.
pub const TYPE3_EIG_TOL: f64 = 1e-7;
/// Relative slack accepted by the Type-3 nonemptiness test.
pub const TYPE3_SLATER_TOL: f64 = 1e-9;
/// Maximum cutting-plane rounds of the Type-3 oracle.
pub const TYPE3_MAX_ROUNDS: usize = 500;

/// Ambiguity set family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AmbiguityType {
    Type1,
    Type2,
    Type3,
}

impl AmbiguityType {
    /// Parses `1`, `2`, `3`, `type1`, … (case-insensitive).
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().trim_start_matches("type") {
            "1" => Some(Self::Type1),
            "2" => Some(Self::Type2),
            "3" => Some(Self::Type3),
            _ => None,
        }
    }

    /// Numeric tag.
    pub fn number(self) -> u8 {
        match self {
            Self::Type1 => 1,
            Self::Type2 => 2,
            Self::Type3 => 3,
        }
    }
}

/// Mean-CVaR blend `(1−λ)·E + λ·CVaR_α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Risk {
    pub lambda: f64,
    pub alpha: f64,
}

/// Errors raised by the oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmbiguityError {
    #[error("ambiguity set of stage {stage} is empty at x = {x:?}")]
    EmptyAmbiguity { stage: usize, x: Vec<f64> },
    #[error("type-3 cutting-plane oracle did not converge in {rounds} rounds")]
    NonConvergence { rounds: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Worst-case distribution and the value it attains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub value: f64,
    pub p: Vec<f64>,
}

/// `μ_j(x) = μ̄_j (1 + Σ_i λ^μ_ji x_i)`.
pub fn decision_mean(inst: &Instance, x: &[f64]) -> Vec<f64> {
    (0..inst.j)
        .map(|j| inst.mu_bar[j] * (1.0 + (0..inst.i).map(|i| inst.lambda_mu[j][i] * x[i]).sum::<f64>()))
        .collect()
}

/// `S_j(x) = (μ̄_j² + σ̄_j²)(1 + Σ_i λ^S_ji x_i)`.
pub fn decision_second_moment(inst: &Instance, x: &[f64]) -> Vec<f64> {
    (0..inst.j)
        .map(|j| {
            let base = inst.mu_bar[j].powi(2) + inst.sigma_bar[j].powi(2);
            base * (1.0 + (0..inst.i).map(|i| inst.lambda_s[j][i] * x[i]).sum::<f64>())
        })
        .collect()
}

/// Lower and upper moment bounds `(l, u)` of the Type-1 set, each of length
/// `2J+1`: normalization, means, second moments.
pub fn type1_bounds(inst: &Instance, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mu = decision_mean(inst, x);
    let s = decision_second_moment(inst, x);
    let mut l = vec![1.0];
    let mut u = vec![1.0];
    for j in 0..inst.j {
        l.push(mu[j] - inst.eps_mu[j]);
        u.push(mu[j] + inst.eps_mu[j]);
    }
    for j in 0..inst.j {
        l.push(s[j] * inst.eps_s_lo[j]);
        u.push(s[j] * inst.eps_s_hi[j]);
    }
    (l, u)
}

/// Decision-dependent mean and covariance `(μ(x), Σ(x))` with
/// `Σ(x) = Σ̄ (1 + Σ_i λ^cov_i x_i)`.
pub fn decision_moments_type23(inst: &Instance, x: &[f64]) -> (Vec<f64>, SymMatrix) {
    let scale = 1.0 + (0..inst.i).map(|i| inst.lambda_cov[i] * x[i]).sum::<f64>();
    (decision_mean(inst, x), inst.sigma_mat.scaled(scale))
}

/// Builds the inner maximization as a minimization LP over `p` (columns
/// `0..K`) and, with risk, the CVaR weights `w` (columns `K..2K`).
fn base_lp(q: &[f64], risk: Option<Risk>) -> LinearModel {
    let k = q.len();
    let mut m = LinearModel::new();
    let w_scale = risk.map_or(1.0, |r| 1.0 - r.lambda);
    for (kk, qk) in q.iter().enumerate() {
        m.add_var(format!("p_{}", kk + 1), 0.0, f64::INFINITY, VarKind::Continuous, -w_scale * qk);
    }
    let ones: Vec<(usize, f64)> = (0..k).map(|kk| (kk, 1.0)).collect();
    m.add_row("normalization", &ones, Relation::Eq, 1.0);
    if let Some(r) = risk {
        let cap = r.lambda / (1.0 - r.alpha);
        for (kk, qk) in q.iter().enumerate() {
            let w = m.add_var(format!("w_{}", kk + 1), 0.0, f64::INFINITY, VarKind::Continuous, -qk);
            m.add_row(format!("cvar_cap_{}", kk + 1), &[(w, 1.0), (kk, -cap)], Relation::Le, 0.0);
        }
        let ws: Vec<(usize, f64)> = (0..k).map(|kk| (k + kk, 1.0)).collect();
        m.add_row("cvar_mass", &ws, Relation::Eq, r.lambda);
    }
    m
}

fn add_moment_rows(m: &mut LinearModel, inst: &Instance, ty: AmbiguityType, support: &[Vec<f64>], x: &[f64]) {
    let k = support.len();
    match ty {
        AmbiguityType::Type1 => {
            let (l, u) = type1_bounds(inst, x);
            for j in 0..inst.j {
                let c1: Vec<(usize, f64)> = (0..k).map(|kk| (kk, support[kk][j])).collect();
                m.add_row(format!("mean_lo_{}", j + 1), &c1, Relation::Ge, l[1 + j]);
                m.add_row(format!("mean_hi_{}", j + 1), &c1, Relation::Le, u[1 + j]);
                let c2: Vec<(usize, f64)> = (0..k).map(|kk| (kk, support[kk][j].powi(2))).collect();
                m.add_row(format!("second_lo_{}", j + 1), &c2, Relation::Ge, l[1 + inst.j + j]);
                m.add_row(format!("second_hi_{}", j + 1), &c2, Relation::Le, u[1 + inst.j + j]);
            }
        }
        AmbiguityType::Type2 => {
            let (mu, sig) = decision_moments_type23(inst, x);
            for j in 0..inst.j {
                let c1: Vec<(usize, f64)> = (0..k).map(|kk| (kk, support[kk][j])).collect();
                m.add_row(format!("mean_{}", j + 1), &c1, Relation::Eq, mu[j]);
            }
            for a in 0..inst.j {
                for b in a..inst.j {
                    let c: Vec<(usize, f64)> =
                        (0..k).map(|kk| (kk, (support[kk][a] - mu[a]) * (support[kk][b] - mu[b]))).collect();
                    m.add_row(format!("cov_{}_{}", a + 1, b + 1), &c, Relation::Eq, sig.get(a, b));
                }
            }
        }
        AmbiguityType::Type3 => {}
    }
}

/// Per-realization matrices of the two Type-3 constraints, written so that
/// both constraints are homogeneous in `p` (using `Σ p = 1`):
/// `Σ_k p_k A_k ⪰ 0` with `A_k = [[Σ, d_k], [d_kᵀ, γ]]`, and
/// `Σ_k p_k B_k ⪰ 0` with `B_k = ηΣ − d_k d_kᵀ`, where `d_k = ξ^k − μ(x)`.
pub struct Type3Matrices {
    pub a: Vec<SymMatrix>,
    pub b: Vec<SymMatrix>,
}

impl Type3Matrices {
    pub fn new(inst: &Instance, support: &[Vec<f64>], x: &[f64]) -> Self {
        let (mu, sig) = decision_moments_type23(inst, x);
        let j = inst.j;
        let mut a = Vec::with_capacity(support.len());
        let mut b = Vec::with_capacity(support.len());
        for xi in support {
            let d: Vec<f64> = (0..j).map(|jj| xi[jj] - mu[jj]).collect();
            let mut ak = SymMatrix::zeros(j + 1);
            let mut bk = SymMatrix::zeros(j);
            for r in 0..j {
                for c in 0..=r {
                    ak.set(r, c, sig.get(r, c));
                    bk.set(r, c, inst.eta_cov * sig.get(r, c) - d[r] * d[c]);
                }
                ak.set(j, r, d[r]);
            }
            ak.set(j, j, inst.gamma);
            a.push(ak);
            b.push(bk);
        }
        Self { a, b }
    }

    fn combine(mats: &[SymMatrix], p: &[f64]) -> SymMatrix {
        let n = mats[0].n();
        let mut out = SymMatrix::zeros(n);
        for r in 0..n {
            for c in 0..=r {
                out.set(r, c, mats.iter().zip(p).map(|(m, pk)| pk * m.get(r, c)).sum());
            }
        }
        out
    }

    /// `A(p)` (ellipsoid constraint in Schur form).
    pub fn ellipsoid(&self, p: &[f64]) -> SymMatrix {
        Self::combine(&self.a, p)
    }

    /// `B(p) = ηΣ − Σ_k p_k d_k d_kᵀ`.
    pub fn covariance(&self, p: &[f64]) -> SymMatrix {
        Self::combine(&self.b, p)
    }

    /// Cut coefficients `vᵀ M_k v` for either family.
    fn cut(mats: &[SymMatrix], v: &[f64]) -> Vec<f64> {
        mats.iter().map(|m| m.quad_form(v)).collect()
    }
}

fn eig_tol(m: &SymMatrix, rel: f64) -> f64 {
    rel * m.norm_inf().max(1.0)
}

/// Worst-case expectation (or mean-CVaR blend with `risk`) of the stage
/// values `q` over the ambiguity set of stage `stage` induced by `x`.
pub fn worst_case(
    inst: &Instance,
    ty: AmbiguityType,
    stage: usize,
    x: &[f64],
    q: &[f64],
    risk: Option<Risk>,
) -> Result<WorstCase, AmbiguityError> {
    let support = inst.stage_support(stage);
    assert_eq!(q.len(), support.len(), "one stage value per realization");
    let k = support.len();
    let empty = || AmbiguityError::EmptyAmbiguity { stage, x: x.to_vec() };
    let mut m = base_lp(q, risk);
    add_moment_rows(&mut m, inst, ty, support, x);

    if ty != AmbiguityType::Type3 {
        let sol = solve_lp(&m)?;
        return match sol.status {
            LpStatus::Optimal => Ok(WorstCase { value: -sol.objective, p: sol.x[..k].to_vec() }),
            LpStatus::Infeasible => Err(empty()),
            LpStatus::Unbounded => unreachable!("the probability simplex is bounded"),
        };
    }

    if !is_nonempty(inst, ty, stage, x) {
        return Err(empty());
    }
    let mats = Type3Matrices::new(inst, support, x);
    for round in 0..TYPE3_MAX_ROUNDS {
        let sol = solve_lp(&m)?;
        if sol.status != LpStatus::Optimal {
            return Err(empty());
        }
        let p = &sol.x[..k];
        let mut added = false;
        for (fam, mat) in [(&mats.a, mats.ellipsoid(p)), (&mats.b, mats.covariance(p))] {
            let tol = eig_tol(&mat, TYPE3_EIG_TOL);
            for (lam, v) in sym_eig(&mat) {
                if lam >= -tol {
                    break;
                }
                let coeffs: Vec<(usize, f64)> = Type3Matrices::cut(fam, &v).into_iter().enumerate().collect();
                m.add_row(format!("eigcut_{round}"), &coeffs, Relation::Ge, 0.0);
                added = true;
            }
        }
        if !added {
            return Ok(WorstCase { value: -sol.objective, p: p.to_vec() });
        }
    }
    Err(AmbiguityError::NonConvergence { rounds: TYPE3_MAX_ROUNDS })
}

/// True iff the ambiguity set of stage `stage` at `x` contains a
/// distribution. Type 3 accepts a relative eigenvalue slack of `1e-9`.
pub fn is_nonempty(inst: &Instance, ty: AmbiguityType, stage: usize, x: &[f64]) -> bool {
    let support = inst.stage_support(stage);
    let k = support.len();
    if ty != AmbiguityType::Type3 {
        let mut m = base_lp(&vec![0.0; k], None);
        add_moment_rows(&mut m, inst, ty, support, x);
        return matches!(solve_lp(&m), Ok(s) if s.status == LpStatus::Optimal);
    }
    type3_max_min_eig(inst, support, x) >= 0.0
}

/// Largest achievable minimum eigenvalue over `p` of both Type-3 matrices,
/// each shifted by its relative slack tolerance; nonnegative iff the set
/// is nonempty within tolerance.
fn type3_max_min_eig(inst: &Instance, support: &[Vec<f64>], x: &[f64]) -> f64 {
    let k = support.len();
    let mats = Type3Matrices::new(inst, support, x);
    let mut m = base_lp(&vec![0.0; k], None);
    let s = m.add_var("slack", f64::NEG_INFINITY, 1.0, VarKind::Continuous, -1.0);
    // Scale-free comparison: each family's eigenvalues are measured relative
    // to the magnitude of its matrices.
    let scale_a = mats.a.iter().map(|a| a.norm_inf()).fold(1.0, f64::max);
    let scale_b = mats.b.iter().map(|b| b.norm_inf()).fold(1.0, f64::max);
    let mut best_achieved = f64::NEG_INFINITY;
    for round in 0..TYPE3_MAX_ROUNDS {
        let sol = match solve_lp(&m) {
            Ok(s) if s.status == LpStatus::Optimal => s,
            _ => return f64::NEG_INFINITY,
        };
        let p = &sol.x[..k];
        let bound = sol.x[s];
        let (la, va) = mats.ellipsoid(p).min_eig();
        let (lb, vb) = mats.covariance(p).min_eig();
        let achieved = (la / scale_a).min(lb / scale_b);
        best_achieved = best_achieved.max(achieved);
        if best_achieved >= -TYPE3_SLATER_TOL {
            return 0.0;
        }
        if bound < -TYPE3_SLATER_TOL {
            return bound;
        }
        let mut added = false;
        for (fam, lam, v, scale) in [(&mats.a, la, va, scale_a), (&mats.b, lb, vb, scale_b)] {
            if lam / scale < bound - 1e-12 {
                let mut coeffs: Vec<(usize, f64)> =
                    Type3Matrices::cut(fam, &v).into_iter().map(|c| c / scale).enumerate().collect();
                coeffs.push((s, -1.0));
                m.add_row(format!("slater_{round}"), &coeffs, Relation::Ge, 0.0);
                added = true;
            }
        }
        if !added {
            return best_achieved;
        }
    }
    best_achieved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::patterns::toy_instance;

    #[test]
    fn parse_tags() {
        assert_eq!(AmbiguityType::parse("Type2"), Some(AmbiguityType::Type2));
        assert_eq!(AmbiguityType::parse("3"), Some(AmbiguityType::Type3));
        assert_eq!(AmbiguityType::parse("4"), None);
    }

    #[test]
    fn three_point_type1_example() {
        // Supports {8, 10, 12}, mean window [9, 11], wide second moments.
        // Checked against a brute-force grid over the 2-simplex.
        let inst = toy_instance(&[8.0, 10.0, 12.0], 10.0, 1.0);
        let wc = worst_case(&inst, AmbiguityType::Type1, 2, &[0.0], &[0.0, 0.0, 1.0], None).unwrap();
        let mut grid_best = 0.0f64;
        let steps = 1000;
        for a in 0..=steps {
            for b in 0..=steps - a {
                let (p1, p3) = (a as f64 / steps as f64, b as f64 / steps as f64);
                let p2 = 1.0 - p1 - p3;
                let mean = 8.0 * p1 + 10.0 * p2 + 12.0 * p3;
                if (9.0 - 1e-12..=11.0 + 1e-12).contains(&mean) {
                    grid_best = grid_best.max(p3);
                }
            }
        }
        assert!((wc.value - grid_best).abs() <= 1e-3);
        assert!((wc.value - 0.75).abs() < 1e-9);
        let mean: f64 = wc.p.iter().zip([8.0, 10.0, 12.0]).map(|(p, v)| p * v).sum();
        assert!(mean <= 11.0 + 1e-9);
    }
}
