//! Per-stage feasible set `X_t(x_{t-1}, ξ_t)`: demand, capacity, budget and
//! monotonicity rows over the opening variables `x_t` and the flows `y_t`.

use super::{Instance, YIntegrality};
use crate::lp::{LinearModel, Relation, VarKind};
use serde::{Deserialize, Serialize};

/// Branching class of the state columns (branched on first).
pub const STATE_PRIORITY: u8 = 2;
/// Branching class of the flow columns.
pub const FLOW_PRIORITY: u8 = 1;

/// How the previous state enters the stage rows.
#[derive(Debug, Clone, Copy)]
pub enum StateLink<'a> {
    /// `x_{t-1}` is data.
    Fixed(&'a [f64]),
    /// `x_{t-1}` is replaced by free binary copy columns `z` (used by the
    /// Lagrangian relaxation of the state coupling).
    Copy,
}

/// Column indices of the stage variables inside a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCols {
    /// Opening decisions `x_ti`.
    pub x: Vec<usize>,
    /// Flows `y_tij`, indexed `[i][j]`.
    pub y: Vec<Vec<usize>>,
    /// Copies of the previous state, present for [`StateLink::Copy`].
    pub z: Option<Vec<usize>>,
}

/// A stand-alone stage model with the stage cost `g_t` as its objective.
#[derive(Debug, Clone)]
pub struct StageBlock {
    pub model: LinearModel,
    pub cols: StageCols,
}

/// Stage cost `g_t = Σ_ij (c_ij − R_j) y_ij` of a flow matrix.
pub fn stage_cost(inst: &Instance, y: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (i, row) in y.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            s += (inst.c[i][j] - inst.r[j]) * v;
        }
    }
    s
}

/// Demand right-hand side: integral flows can never exceed `⌊ξ⌋`, so the
/// rounded value is an equivalent and tighter row.
fn demand_rhs(inst: &Instance, xi: f64) -> f64 {
    match inst.y_integrality {
        YIntegrality::Integer => (xi + 1e-9).floor(),
        YIntegrality::Continuous => xi,
    }
}

/// Appends the stage-`t` variables and rows (with `g_t` added to the
/// objective) to `model`.
///
/// `history[i]`, when given, is the number of earlier stages in which
/// facility `i` was open; the capacity row then uses the cumulative form
/// `h_ti·(x_ti + history_i)`.
pub fn append_stage_block(
    model: &mut LinearModel,
    inst: &Instance,
    t: usize,
    link: StateLink<'_>,
    xi: &[f64],
    history: Option<&[f64]>,
) -> StageCols {
    let (ni, nj) = (inst.i, inst.j);
    let h = &inst.h[t - 1];
    let f = &inst.f[t - 1];
    let ykind = match inst.y_integrality {
        YIntegrality::Integer => VarKind::Integer,
        YIntegrality::Continuous => VarKind::Continuous,
    };

    let x: Vec<usize> = (0..ni)
        .map(|i| {
            let c = model.add_var(format!("x_{}", i + 1), 0.0, 1.0, VarKind::Binary, 0.0);
            model.priority[c] = STATE_PRIORITY;
            c
        })
        .collect();
    let y: Vec<Vec<usize>> = (0..ni)
        .map(|i| {
            let cap = h[i] * (1.0 + history.map_or(0.0, |hs| hs[i]));
            (0..nj)
                .map(|j| {
                    let c = model.add_var(format!("y_{}_{}", i + 1, j + 1), 0.0, cap, ykind, inst.c[i][j] - inst.r[j]);
                    model.priority[c] = FLOW_PRIORITY;
                    c
                })
                .collect()
        })
        .collect();
    let z = match link {
        StateLink::Copy => Some(
            (0..ni)
                .map(|i| {
                    let c = model.add_var(format!("zc_{}", i + 1), 0.0, 1.0, VarKind::Binary, 0.0);
                    model.priority[c] = STATE_PRIORITY;
                    c
                })
                .collect::<Vec<_>>(),
        ),
        StateLink::Fixed(_) => None,
    };

    // Demand.
    for j in 0..nj {
        let coeffs: Vec<(usize, f64)> = (0..ni).map(|i| (y[i][j], 1.0)).collect();
        model.add_row(format!("demand_{}", j + 1), &coeffs, Relation::Le, demand_rhs(inst, xi[j]));
    }
    // Capacity.
    for i in 0..ni {
        let mut coeffs: Vec<(usize, f64)> = (0..nj).map(|j| (y[i][j], 1.0)).collect();
        coeffs.push((x[i], -h[i]));
        let rhs = h[i] * history.map_or(0.0, |hs| hs[i]);
        model.add_row(format!("capacity_{}", i + 1), &coeffs, Relation::Le, rhs);
    }
    // Budget and monotonicity.
    let mut budget: Vec<(usize, f64)> = (0..ni).map(|i| (x[i], f[i])).collect();
    match (link, &z) {
        (StateLink::Fixed(prev), _) => {
            let spent: f64 = (0..ni).map(|i| f[i] * prev[i]).sum();
            model.add_row("budget", &budget, Relation::Le, inst.n_budget + spent);
            for i in 0..ni {
                model.add_row(format!("monotone_{}", i + 1), &[(x[i], 1.0)], Relation::Ge, prev[i]);
            }
        }
        (StateLink::Copy, Some(zc)) => {
            budget.extend((0..ni).map(|i| (zc[i], -f[i])));
            model.add_row("budget", &budget, Relation::Le, inst.n_budget);
            for i in 0..ni {
                model.add_row(format!("monotone_{}", i + 1), &[(x[i], 1.0), (zc[i], -1.0)], Relation::Ge, 0.0);
            }
        }
        (StateLink::Copy, None) => unreachable!("copy columns are created for copy links"),
    }
    StageCols { x, y, z }
}

/// Builds the stand-alone stage-`t` model for a fixed previous state.
pub fn build_stage_block(inst: &Instance, t: usize, x_prev: &[f64], xi: &[f64]) -> StageBlock {
    let mut model = LinearModel::new();
    let cols = append_stage_block(&mut model, inst, t, StateLink::Fixed(x_prev), xi, None);
    StageBlock { model, cols }
}

impl StageBlock {
    /// Builds the stage model with the cumulative capacity form.
    pub fn with_history(inst: &Instance, t: usize, x_prev: &[f64], xi: &[f64], history: &[f64]) -> Self {
        let mut model = LinearModel::new();
        let cols = append_stage_block(&mut model, inst, t, StateLink::Fixed(x_prev), xi, Some(history));
        StageBlock { model, cols }
    }

    /// Extracts `(x, y)` from a solution vector.
    pub fn extract(&self, sol: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        extract_stage(&self.cols, sol)
    }
}

/// Extracts `(x, y)` from a solution vector.
pub(crate) fn extract_stage(cols: &StageCols, sol: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let x = cols.x.iter().map(|&c| sol[c].round()).collect();
    let y = cols.y.iter().map(|r| r.iter().map(|&c| sol[c]).collect()).collect();
    (x, y)
}
