//! Lagrangian dual of the state-copy constraint `z = x̂`.
//!
//! The stage problem with copy columns `z` is relaxed to
//! `L(π) = min f(z, ·) − πᵀz`, and the dual maximises
//! `g(π) = L(π) + πᵀx̂` over a box. Every `π` yields the valid cut
//! `Q(x) ≥ L(π) + πᵀx`.

use crate::lp::{solve_lp, LinearModel, LpStatus, Relation, SolverError, VarKind};
use serde::{Deserialize, Serialize};

/// Dual ascent method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMethod {
    /// Kelley cutting planes on the concave dual function.
    Kelley,
    /// Projected subgradient ascent with step `a/(b+m)`.
    Subgradient,
}

/// Lagrangian dual settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LagrangianConfig {
    pub method: DualMethod,
    pub max_iters: usize,
    /// Relative optimality tolerance of the Kelley master.
    pub tol: f64,
    /// Offset `b` of the subgradient step `a/(b+m)`.
    pub step_offset: f64,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        Self { method: DualMethod::Kelley, max_iters: 100, tol: 1e-9, step_offset: 10.0 }
    }
}

/// One evaluation of the relaxed problem at a multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianEval {
    /// Valid lower bound on `L(π)`.
    pub lower: f64,
    /// Objective `f − πᵀz` of the returned feasible point (at least `L(π)`).
    pub upper: f64,
    /// Copy values of the returned point.
    pub z: Vec<f64>,
}

/// Outcome of the dual ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianResult {
    pub pi: Vec<f64>,
    /// Valid lower bound on `L(pi)`: the cut intercept.
    pub value: f64,
    /// `value + piᵀx̂`.
    pub at_trial: f64,
    /// Upper bound on `max g` from the Kelley master (subgradient: `+∞`).
    pub dual_upper: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximises `g(π) = L(π) + πᵀx̂` over `π ∈ [−radius, radius]^n`, with
/// `eval(π)` solving the relaxed problem.
pub fn lagrangian_dual<E, F>(mut eval: F, x_hat: &[f64], radius: f64, cfg: &LagrangianConfig) -> Result<LagrangianResult, E>
where
    F: FnMut(&[f64]) -> Result<LagrangianEval, E>,
    E: From<SolverError>,
{
    match cfg.method {
        DualMethod::Kelley => kelley(&mut eval, x_hat, radius, cfg),
        DualMethod::Subgradient => subgradient(&mut eval, x_hat, radius, cfg),
    }
}

fn kelley<E, F>(eval: &mut F, x_hat: &[f64], radius: f64, cfg: &LagrangianConfig) -> Result<LagrangianResult, E>
where
    F: FnMut(&[f64]) -> Result<LagrangianEval, E>,
    E: From<SolverError>,
{
    let n = x_hat.len();
    let mut master = LinearModel::new();
    let pcols: Vec<usize> = (0..n).map(|i| master.add_var(format!("pi_{}", i + 1), -radius, radius, VarKind::Continuous, 0.0)).collect();
    let tau = master.add_var("tau", f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous, -1.0);
    let mut pi = vec![0.0; n];
    let mut best: Option<LagrangianResult> = None;
    let mut dual_upper = f64::INFINITY;
    for it in 1..=cfg.max_iters.max(1) {
        let ev = eval(&pi)?;
        let g = ev.lower + dot(&pi, x_hat);
        if best.as_ref().is_none_or(|b| g > b.at_trial) {
            best = Some(LagrangianResult { pi: pi.clone(), value: ev.lower, at_trial: g, dual_upper, iterations: it });
        }
        // g(π') ≤ f(point) − π'ᵀz + π'ᵀx̂ with f(point) = upper + πᵀz.
        let f_point = ev.upper + dot(&pi, &ev.z);
        let mut coeffs = vec![(tau, 1.0)];
        coeffs.extend((0..n).map(|i| (pcols[i], -(x_hat[i] - ev.z[i]))));
        master.add_row(format!("kelley_{it}"), &coeffs, Relation::Le, f_point);
        let sol = solve_lp(&master)?;
        if sol.status != LpStatus::Optimal {
            break;
        }
        dual_upper = -sol.objective;
        let b = best.as_mut().expect("set above");
        b.dual_upper = dual_upper;
        b.iterations = it;
        if dual_upper - b.at_trial <= cfg.tol * b.at_trial.abs().max(1.0) {
            break;
        }
        pi = pcols.iter().map(|&c| sol.x[c]).collect();
    }
    Ok(best.expect("at least one evaluation"))
}

fn subgradient<E, F>(eval: &mut F, x_hat: &[f64], radius: f64, cfg: &LagrangianConfig) -> Result<LagrangianResult, E>
where
    F: FnMut(&[f64]) -> Result<LagrangianEval, E>,
{
    let n = x_hat.len();
    let mut pi = vec![0.0; n];
    let mut best: Option<LagrangianResult> = None;
    let mut scale = 1.0;
    for m in 0..cfg.max_iters.max(1) {
        let ev = eval(&pi)?;
        let g = ev.lower + dot(&pi, x_hat);
        if m == 0 {
            scale = ev.lower.abs().max(1.0) / n.max(1) as f64;
        }
        if best.as_ref().is_none_or(|b| g > b.at_trial) {
            best = Some(LagrangianResult { pi: pi.clone(), value: ev.lower, at_trial: g, dual_upper: f64::INFINITY, iterations: m + 1 });
        }
        let grad: Vec<f64> = (0..n).map(|i| x_hat[i] - ev.z[i]).collect();
        if grad.iter().all(|v| v.abs() < 1e-9) {
            break;
        }
        let step = scale / (cfg.step_offset + m as f64);
        for i in 0..n {
            pi[i] = (pi[i] + step * grad[i]).clamp(-radius, radius);
        }
    }
    let mut out = best.expect("at least one evaluation");
    out.iterations = cfg.max_iters.max(1);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(z) = 3 − 2 z1 + z2 over binary z; L(π) = min_z f(z) − πᵀz.
    fn toy(pi: &[f64]) -> Result<LagrangianEval, SolverError> {
        let mut best = (f64::INFINITY, vec![]);
        for z1 in [0.0, 1.0] {
            for z2 in [0.0, 1.0] {
                let v = 3.0 - 2.0 * z1 + z2 - pi[0] * z1 - pi[1] * z2;
                if v < best.0 {
                    best = (v, vec![z1, z2]);
                }
            }
        }
        Ok(LagrangianEval { lower: best.0, upper: best.0, z: best.1 })
    }

    #[test]
    fn kelley_closes_duality_gap_at_binary_trial() {
        for xh in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let r = lagrangian_dual(toy, &xh, 10.0, &LagrangianConfig::default()).unwrap();
            let f = 3.0 - 2.0 * xh[0] + xh[1];
            assert!((r.at_trial - f).abs() < 1e-7, "{xh:?}: {} vs {f}", r.at_trial);
        }
    }

    #[test]
    fn subgradient_cut_is_valid() {
        let cfg = LagrangianConfig { method: DualMethod::Subgradient, max_iters: 50, ..Default::default() };
        let r = lagrangian_dual(toy, &[1.0, 1.0], 10.0, &cfg).unwrap();
        for z1 in [0.0, 1.0] {
            for z2 in [0.0, 1.0] {
                let f = 3.0 - 2.0 * z1 + z2;
                assert!(r.value + r.pi[0] * z1 + r.pi[1] * z2 <= f + 1e-9);
            }
        }
        assert!(r.at_trial > 1.0);
    }
}
