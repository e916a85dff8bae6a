//! Run configuration and run reports.

use super::lagrangian::LagrangianConfig;
use crate::ambiguity::AmbiguityType;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Which side of the Type-3 sandwich a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// Types 1/2: exact; Type 3: lower bound.
    Auto,
    /// Eigen-cut outer approximation of the PSD blocks.
    Lb,
    /// Diagonally dominant inner approximation of the PSD blocks.
    Ub,
}

/// Basis policy of the inner PSD approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UbMode {
    /// Identity bases.
    Identity,
    /// Bases refreshed from Cholesky factors of the previous solution.
    Iterative,
}

/// Run configuration (the JSON run file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(rename = "type")]
    pub ty: AmbiguityType,
    pub max_iters: usize,
    /// Forward paths per iteration.
    pub num_paths: usize,
    /// Relative tolerance of the stopping tests.
    pub tol: f64,
    /// Overrides the instance risk weight on stages `2..=T`.
    pub risk_lambda: Option<f64>,
    /// Overrides the instance CVaR level on stages `2..=T`.
    pub risk_alpha: Option<f64>,
    pub seed: u64,
    pub bound_mode: BoundMode,
    pub ub_mode: UbMode,
    pub lagrangian: LagrangianConfig,
    /// Initial dual bound; `None` uses the instance default.
    pub big_m: Option<f64>,
    /// Times the dual bound may be multiplied by 10 after a bound hit.
    pub max_escalations: usize,
    /// Eigenvalue tolerance of the outer PSD loop.
    pub eigen_tol: f64,
    /// Paths of the sampled upper-bound estimate (deep trees only).
    pub ub_samples: usize,
    /// Largest scenario tree evaluated exactly for the upper bound.
    pub exact_tree_limit: usize,
    /// Iterations over which the lower bound must stall before stopping.
    pub stall_window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ty: AmbiguityType::Type1,
            max_iters: 50,
            num_paths: 1,
            tol: 1e-6,
            risk_lambda: None,
            risk_alpha: None,
            seed: 0,
            bound_mode: BoundMode::Auto,
            ub_mode: UbMode::Identity,
            lagrangian: LagrangianConfig::default(),
            big_m: None,
            max_escalations: 3,
            eigen_tol: crate::misdp::EIGEN_CUT_TOL,
            ub_samples: 200,
            exact_tree_limit: 100_000,
            stall_window: 5,
        }
    }
}

/// Terminal state of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Gap closed or lower bound stalled.
    Converged,
    IterationLimit,
    /// Some reachable state has an empty ambiguity set.
    Unbounded,
}

/// How the upper bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UbKind {
    /// Policy evaluated on the full scenario tree.
    Exact,
    /// Monte-Carlo estimate under worst-case sampling (not a bound).
    Sampled,
}

/// Location of an empty ambiguity set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyAmbiguityInfo {
    pub stage: usize,
    pub x: Vec<f64>,
}

/// Result of an SDDiP run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub ambiguity: AmbiguityType,
    pub bound_mode: BoundMode,
    pub status: RunStatus,
    pub iterations: usize,
    /// Running maximum of the stage-1 bound, per iteration.
    pub lb_per_iter: Vec<f64>,
    /// Best exact upper bound so far, per iteration (`None` when sampled).
    pub ub_per_iter: Vec<Option<f64>>,
    pub lb: Option<f64>,
    pub ub: Option<f64>,
    pub ub_kind: UbKind,
    pub ub_std_error: Option<f64>,
    /// `(ub − lb)/max(1, |ub|)`.
    pub gap: Option<f64>,
    pub first_stage_x: Vec<f64>,
    pub cuts: usize,
    pub stage_solves: usize,
    pub lagrangian_solves: usize,
    /// Eigen-cut rows added per stage (outer PSD path).
    pub eigen_cuts_per_stage: Vec<usize>,
    pub big_m: f64,
    pub escalations: usize,
    /// Forward sampling law.
    pub sampling: String,
    pub empty_ambiguity: Option<EmptyAmbiguityInfo>,
    pub iteration_seconds: Vec<f64>,
    pub wall_seconds: f64,
}

impl SolveReport {
    /// Copy with every timing field zeroed, for reproducibility checks.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        out.iteration_seconds.iter_mut().for_each(|s| *s = 0.0);
        out.wall_seconds = 0.0;
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Per-iteration CSV `iter,lb,ub,gap,seconds`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,lb,ub,gap,seconds\n");
        for (i, lb) in self.lb_per_iter.iter().enumerate() {
            let ub = self.ub_per_iter.get(i).copied().flatten();
            let gap = ub.map(|u| (u - lb) / u.abs().max(1.0));
            let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.10e}"));
            let secs = self.iteration_seconds.get(i).copied().unwrap_or(0.0);
            let _ = writeln!(s, "{},{lb:.10e},{},{},{secs:.6}", i + 1, fmt(ub), fmt(gap));
        }
        s
    }

    /// CSV `stage,eigen_cuts`.
    pub fn eigen_cut_csv(&self) -> String {
        let mut s = String::from("stage,eigen_cuts\n");
        for (t, n) in self.eigen_cuts_per_stage.iter().enumerate() {
            let _ = writeln!(s, "{},{n}", t + 1);
        }
        s
    }
}
