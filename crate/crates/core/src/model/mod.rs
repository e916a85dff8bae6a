//! The multistage facility-location instance and its per-stage feasible
//! sets.
//!
//! Stages are numbered `1..=T` in the public API. Stage 1 carries a single
//! deterministic realization; stages `2..=T` carry `K` realizations each.

mod generate;
mod stage;

pub use generate::{decision_coefficients, generate_instance, CostMode, Distribution, GenSpec};
pub use stage::{
    append_stage_block, build_stage_block, stage_cost, StageBlock, StageCols, StateLink,
};

use crate::linalg::{sym_eig, SymMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version tag written into every serialized instance.
pub const INSTANCE_VERSION: &str = "ddro-instance-v1";

/// Validation failures for instance data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("unsupported instance version {0:?}")]
    Version(String),
}

/// Integrality of the flow variables `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YIntegrality {
    Integer,
    Continuous,
}

/// Form of the capacity row.
///
/// `SingleIndicator` uses `Σ_j y_tij ≤ h_ti·x_ti`, which is exact because the
/// state is monotone. `Cumulative` multiplies the capacity by the number of
/// stages the facility has been open, which is the literal reading of the
/// history sum; it needs the opening history and is only available for
/// stand-alone stage blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityForm {
    #[default]
    SingleIndicator,
    Cumulative,
}

/// A multistage facility-location instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub version: String,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub facility_xy: Vec<[i64; 2]>,
    pub customer_xy: Vec<[i64; 2]>,
    /// Unit transport costs, `I × J`.
    pub c: Vec<Vec<f64>>,
    /// Building costs, `T × I`.
    pub f: Vec<Vec<f64>>,
    /// Capacities, `T × I`.
    pub h: Vec<Vec<f64>>,
    /// Per-stage budget.
    #[serde(rename = "N")]
    pub n_budget: f64,
    /// Unit revenues, length `J`.
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    pub mu_bar: Vec<f64>,
    pub sigma_bar: Vec<f64>,
    pub rho_bar: f64,
    #[serde(rename = "Sigma_bar")]
    pub sigma_mat: SymMatrix,
    /// Realizations `support[t-1][k][j]`; stage 1 has exactly one row.
    pub support: Vec<Vec<Vec<f64>>>,
    /// `λ^μ_{ji}`, `J × I`.
    pub lambda_mu: Vec<Vec<f64>>,
    /// `λ^S_{ji}`, `J × I`.
    #[serde(rename = "lambda_S")]
    pub lambda_s: Vec<Vec<f64>>,
    /// `λ^cov_i`, length `I`.
    pub lambda_cov: Vec<f64>,
    pub eps_mu: Vec<f64>,
    #[serde(rename = "eps_S_lo")]
    pub eps_s_lo: Vec<f64>,
    #[serde(rename = "eps_S_hi")]
    pub eps_s_hi: Vec<f64>,
    pub gamma: f64,
    pub eta_cov: f64,
    /// `λ_t` per stage (index `t-1`); entry 0 is unused.
    pub risk_lambda: Vec<f64>,
    /// `α_t` per stage (index `t-1`); entry 0 is unused.
    pub risk_alpha: Vec<f64>,
    pub y_integrality: YIntegrality,
    #[serde(default)]
    pub capacity_form: CapacityForm,
}

impl Instance {
    /// Realizations of stage `t` (1-based).
    pub fn stage_support(&self, t: usize) -> &[Vec<f64>] {
        &self.support[t - 1]
    }

    /// Number of realizations of stage `t`.
    pub fn stage_k(&self, t: usize) -> usize {
        self.support[t - 1].len()
    }

    /// Risk weight `λ_t` of stage `t` (1-based).
    pub fn risk_lambda_at(&self, t: usize) -> f64 {
        self.risk_lambda.get(t - 1).copied().unwrap_or(0.0)
    }

    /// Risk level `α_t` of stage `t` (1-based).
    pub fn risk_alpha_at(&self, t: usize) -> f64 {
        self.risk_alpha.get(t - 1).copied().unwrap_or(0.95)
    }

    /// True if every decision-dependency coefficient is zero.
    pub fn is_decision_independent(&self) -> bool {
        self.lambda_mu.iter().flatten().all(|&v| v == 0.0)
            && self.lambda_s.iter().flatten().all(|&v| v == 0.0)
            && self.lambda_cov.iter().all(|&v| v == 0.0)
    }

    /// Copy with every λ family zeroed (the decision-independent baseline).
    pub fn decision_independent(&self) -> Self {
        let mut out = self.clone();
        for row in out.lambda_mu.iter_mut().chain(out.lambda_s.iter_mut()) {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        out.lambda_cov.iter_mut().for_each(|v| *v = 0.0);
        out
    }

    /// Copy with uniform risk parameters on stages `2..=T`.
    pub fn with_risk(&self, lambda: f64, alpha: f64) -> Self {
        let mut out = self.clone();
        out.risk_lambda = (0..self.t).map(|t| if t == 0 { 0.0 } else { lambda }).collect();
        out.risk_alpha = vec![alpha; self.t];
        out
    }

    /// Upper bound on the revenue collectable in stage `t`:
    /// `max_k Σ_j R_j ξ_tj^k`.
    pub fn stage_revenue_bound(&self, t: usize) -> f64 {
        self.stage_support(t)
            .iter()
            .map(|xi| xi.iter().zip(&self.r).map(|(x, r)| x * r.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Lower bound on the cost-to-go from stage `t` onwards (inclusive).
    pub fn value_lower_bound_from(&self, t: usize) -> f64 {
        -(t..=self.t).map(|s| self.stage_revenue_bound(s)).sum::<f64>()
    }

    /// Checks dimensions and the data invariants.
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Invalid(m));
        if self.version != INSTANCE_VERSION {
            return Err(ModelError::Version(self.version.clone()));
        }
        let (t, i, j) = (self.t, self.i, self.j);
        if t < 1 || i < 1 || j < 1 || self.k < 1 {
            return bad("dimensions must be at least 1".into());
        }
        let dims_ok = self.c.len() == i
            && self.c.iter().all(|r| r.len() == j)
            && self.f.len() == t
            && self.f.iter().all(|r| r.len() == i)
            && self.h.len() == t
            && self.h.iter().all(|r| r.len() == i)
            && self.r.len() == j
            && self.mu_bar.len() == j
            && self.sigma_bar.len() == j
            && self.sigma_mat.n() == j
            && self.lambda_mu.len() == j
            && self.lambda_mu.iter().all(|r| r.len() == i)
            && self.lambda_s.len() == j
            && self.lambda_s.iter().all(|r| r.len() == i)
            && self.lambda_cov.len() == i
            && self.eps_mu.len() == j
            && self.eps_s_lo.len() == j
            && self.eps_s_hi.len() == j
            && self.risk_lambda.len() == t
            && self.risk_alpha.len() == t
            && self.support.len() == t;
        if !dims_ok {
            return bad("array dimensions do not match (T, I, J)".into());
        }
        if self.support[0].len() != 1 {
            return bad("stage 1 must have exactly one realization".into());
        }
        for (s, st) in self.support.iter().enumerate() {
            if st.is_empty() || st.iter().any(|xi| xi.len() != j) {
                return bad(format!("support of stage {} has wrong shape", s + 1));
            }
            if st.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return bad(format!("support of stage {} has negative or non-finite entries", s + 1));
            }
        }
        let lambdas = self.lambda_mu.iter().flatten().chain(self.lambda_s.iter().flatten()).chain(&self.lambda_cov);
        if lambdas.into_iter().any(|&v| !(v >= 0.0)) {
            return bad("decision-dependency coefficients must be nonnegative".into());
        }
        for jj in 0..j {
            if !(self.eps_mu[jj] >= 0.0) {
                return bad("eps_mu must be nonnegative".into());
            }
            if !(0.0 <= self.eps_s_lo[jj] && self.eps_s_lo[jj] <= 1.0 && 1.0 <= self.eps_s_hi[jj]) {
                return bad("second-moment radii must satisfy 0 <= lo <= 1 <= hi".into());
            }
        }
        let lmin = sym_eig(&self.sigma_mat)[0].0;
        if lmin < -1e-9 * self.sigma_mat.norm_inf().max(1.0) {
            return bad(format!("Sigma_bar is not PSD (min eigenvalue {lmin:.3e})"));
        }
        for s in 0..t {
            let (l, a) = (self.risk_lambda[s], self.risk_alpha[s]);
            if !(0.0..=1.0).contains(&l) || !(a > 0.0 && a < 1.0) {
                return bad(format!("risk parameters of stage {} out of range", s + 1));
            }
        }
        if !(self.gamma >= 0.0 && self.eta_cov >= 0.0) {
            return bad("gamma and eta_cov must be nonnegative".into());
        }
        let finite = self.c.iter().flatten().chain(self.f.iter().flatten()).chain(self.h.iter().flatten()).chain(&self.r);
        if finite.into_iter().any(|v| !v.is_finite()) || !self.n_budget.is_finite() {
            return bad("costs, capacities and budget must be finite".into());
        }
        Ok(())
    }

    /// Serializes to the JSON interchange format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }

    /// Parses and validates the JSON interchange format.
    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let inst: Instance = serde_json::from_str(s).map_err(|e| ModelError::Invalid(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }
}

/// All binary vectors of length `n` in lexicographic order of their bit
/// patterns (`0…0`, `0…01`, …), with the first component as the most
/// significant bit.
pub fn binary_states(n: usize) -> Vec<Vec<f64>> {
    (0..1u64 << n)
        .map(|mask| (0..n).map(|i| ((mask >> (n - 1 - i)) & 1) as f64).collect())
        .collect()
}
