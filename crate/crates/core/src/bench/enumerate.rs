//! Two-stage enumeration oracle.
//!
//! Every budget-feasible first-stage decision `x1` is scored as the optimal
//! first-stage flow cost plus the worst-case expectation (or mean-CVaR
//! blend) of the exact stage-2 MILP values over the stage-2 ambiguity set.

use super::patterns::budget_feasible_first_stage;
use crate::ambiguity::{worst_case, AmbiguityError, AmbiguityType, Risk};
use crate::lp::{solve_milp, MipStatus, SolverError};
use crate::model::{binary_states, build_stage_block, Instance};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Largest number of facilities the oracle enumerates.
pub const MAX_ENUM_FACILITIES: usize = 12;

/// Errors of the oracle.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnumError {
    #[error("enumeration needs T = 2, got T = {0}")]
    NotTwoStage(usize),
    #[error("enumeration supports at most {MAX_ENUM_FACILITIES} facilities, got {0}")]
    TooManyFacilities(usize),
    #[error("no budget-feasible first-stage decision")]
    NoCandidate,
    #[error("stage {t} MILP at x1 = {x:?} is {status:?}")]
    Stage { t: usize, x: Vec<f64>, status: MipStatus },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Ambiguity(#[from] AmbiguityError),
}

/// One row of the per-candidate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub x1: Vec<f64>,
    /// Optimal first-stage flow cost at `x1`.
    pub stage1_cost: f64,
    /// Exact stage-2 values per realization.
    pub q: Vec<f64>,
    /// Worst-case term; `None` if the ambiguity set is empty (unbounded).
    pub worst_case: Option<f64>,
    /// `stage1_cost + worst_case`; `None` if unbounded.
    pub value: Option<f64>,
}

/// Oracle output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    /// Optimal value; `None` if some candidate is unbounded.
    pub objective: Option<f64>,
    /// Minimizer (lexicographically smallest among ties within `1e-9`
    /// relative); `None` if unbounded.
    pub best_x1: Option<Vec<f64>>,
    pub candidates: Vec<Candidate>,
}

impl Enumeration {
    /// True if some candidate has an empty ambiguity set.
    pub fn is_unbounded(&self) -> bool {
        self.candidates.iter().any(|c| c.value.is_none())
    }

    /// Per-candidate CSV `x1,stage1_cost,worst_case,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,stage1_cost,worst_case,value\n");
        for c in &self.candidates {
            let x: Vec<String> = c.x1.iter().map(|v| format!("{v:.0}")).collect();
            let opt = |v: Option<f64>| v.map_or("unbounded".to_string(), |v| format!("{v:.10e}"));
            s.push_str(&format!("{},{:.10e},{},{}\n", x.join(""), c.stage1_cost, opt(c.worst_case), opt(c.value)));
        }
        s
    }
}

/// Optimal stage-`t` flow cost with the stage state frozen at `x` (and the
/// previous state at `x_prev`).
pub fn frozen_stage_value(inst: &Instance, t: usize, x_prev: &[f64], x: &[f64], xi: &[f64]) -> Result<Option<f64>, SolverError> {
    let mut blk = build_stage_block(inst, t, x_prev, xi);
    for (i, &c) in blk.cols.x.iter().enumerate() {
        blk.model.lower[c] = x[i];
        blk.model.upper[c] = x[i];
    }
    let sol = solve_milp(&blk.model)?;
    Ok((sol.status == MipStatus::Optimal).then_some(sol.objective))
}

/// Optimal stage-`t` value at the previous state `x_prev` (the stage state
/// is free).
pub fn stage_value(inst: &Instance, t: usize, x_prev: &[f64], xi: &[f64]) -> Result<Option<f64>, SolverError> {
    let blk = build_stage_block(inst, t, x_prev, xi);
    let sol = solve_milp(&blk.model)?;
    Ok((sol.status == MipStatus::Optimal).then_some(sol.objective))
}

/// Enumerates every budget-feasible first-stage decision of a two-stage
/// instance.
pub fn enumerate_two_stage(inst: &Instance, ty: AmbiguityType, risk: Option<Risk>) -> Result<Enumeration, EnumError> {
    if inst.t != 2 {
        return Err(EnumError::NotTwoStage(inst.t));
    }
    if inst.i > MAX_ENUM_FACILITIES {
        return Err(EnumError::TooManyFacilities(inst.i));
    }
    let risk = risk.filter(|r| r.lambda != 0.0);
    let zeros = vec![0.0; inst.i];
    let xi1 = &inst.stage_support(1)[0];
    let mut candidates = Vec::new();
    for x1 in budget_feasible_first_stage(inst) {
        let stage1_cost = frozen_stage_value(inst, 1, &zeros, &x1, xi1)?
            .ok_or_else(|| EnumError::Stage { t: 1, x: x1.clone(), status: MipStatus::Infeasible })?;
        let mut q = Vec::with_capacity(inst.stage_k(2));
        for xi in inst.stage_support(2) {
            q.push(stage_value(inst, 2, &x1, xi)?.ok_or_else(|| EnumError::Stage { t: 2, x: x1.clone(), status: MipStatus::Infeasible })?);
        }
        let wc = match worst_case(inst, ty, 2, &x1, &q, risk) {
            Ok(w) => Some(w.value),
            Err(AmbiguityError::EmptyAmbiguity { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        candidates.push(Candidate { value: wc.map(|w| stage1_cost + w), x1, stage1_cost, q, worst_case: wc });
    }
    if candidates.is_empty() {
        return Err(EnumError::NoCandidate);
    }
    let mut out = Enumeration { objective: None, best_x1: None, candidates };
    if !out.is_unbounded() {
        let best = out.candidates.iter().filter_map(|c| c.value).fold(f64::INFINITY, f64::min);
        let thr = best + 1e-9 * best.abs().max(1.0);
        out.objective = Some(best);
        out.best_x1 = out
            .candidates
            .iter()
            .filter(|c| c.value.is_some_and(|v| v <= thr))
            .map(|c| c.x1.clone())
            .min_by(|a, b| a.partial_cmp(b).expect("binary vectors"));
    }
    Ok(out)
}

/// Risk measure applied at stage `t` to the stage-`t+1` values.
fn successor_risk(inst: &Instance, t: usize) -> Option<Risk> {
    let lambda = inst.risk_lambda_at(t + 1);
    (t < inst.t && lambda != 0.0).then(|| Risk { lambda, alpha: inst.risk_alpha_at(t + 1) })
}

/// Exact value functions of a small multistage instance by nested
/// enumeration of the binary states, memoized on `(t, x_prev, k)`.
pub struct NestedOracle<'a> {
    inst: &'a Instance,
    ty: AmbiguityType,
    memo: BTreeMap<(usize, Vec<u8>, usize), Option<f64>>,
}

impl<'a> NestedOracle<'a> {
    pub fn new(inst: &'a Instance, ty: AmbiguityType) -> Self {
        Self { inst, ty, memo: BTreeMap::new() }
    }

    /// `Q_t(x_prev, ξ_t^k)`; `None` if some reachable ambiguity set is
    /// empty (the value is unbounded below).
    pub fn value(&mut self, t: usize, x_prev: &[f64], k: usize) -> Result<Option<f64>, EnumError> {
        let key = (t, x_prev.iter().map(|&v| u8::from(v > 0.5)).collect::<Vec<_>>(), k);
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let inst = self.inst;
        let xi = inst.stage_support(t)[k].clone();
        let v = if t == inst.t {
            stage_value(inst, t, x_prev, &xi)?
        } else {
            let mut best: Option<f64> = None;
            let mut unbounded = false;
            for x in binary_states(inst.i) {
                let monotone = (0..inst.i).all(|i| x[i] >= x_prev[i]);
                let spent: f64 = (0..inst.i).map(|i| inst.f[t - 1][i] * (x[i] - x_prev[i])).sum();
                if !monotone || spent > inst.n_budget + 1e-9 {
                    continue;
                }
                let Some(g) = frozen_stage_value(inst, t, x_prev, &x, &xi)? else { continue };
                match self.continuation(t + 1, &x)? {
                    Some(w) => best = Some(best.map_or(g + w, |b: f64| b.min(g + w))),
                    None => unbounded = true,
                }
            }
            if unbounded { None } else { best }
        };
        self.memo.insert(key, v);
        Ok(v)
    }

    /// Worst-case value of the stage-`t` values at the state `x` chosen in
    /// stage `t-1`.
    pub fn continuation(&mut self, t: usize, x: &[f64]) -> Result<Option<f64>, EnumError> {
        let mut q = Vec::with_capacity(self.inst.stage_k(t));
        for k in 0..self.inst.stage_k(t) {
            match self.value(t, x, k)? {
                Some(v) => q.push(v),
                None => return Ok(None),
            }
        }
        match worst_case(self.inst, self.ty, t, x, &q, successor_risk(self.inst, t - 1)) {
            Ok(w) => Ok(Some(w.value)),
            Err(AmbiguityError::EmptyAmbiguity { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Optimal value of the whole instance.
    pub fn objective(&mut self) -> Result<Option<f64>, EnumError> {
        let zeros = vec![0.0; self.inst.i];
        self.value(1, &zeros, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::patterns::toy_instance;

    #[test]
    fn single_candidate_when_one_facility() {
        let mut inst = toy_instance(&[8.0, 10.0, 12.0], 10.0, 1.0);
        inst.n_budget = 1e6;
        let e = enumerate_two_stage(&inst, AmbiguityType::Type1, None).unwrap();
        assert_eq!(e.candidates.len(), 2);
        assert!(e.objective.is_some());
    }
}
