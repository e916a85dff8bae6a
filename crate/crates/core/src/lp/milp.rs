//! Deterministic best-bound branch-and-bound over the simplex relaxation.
//!
//! Node selection takes the smallest LP bound, breaking ties in creation
//! order. Branching picks the most fractional column within the highest
//! priority class, breaking ties by the lowest column index. Child LPs are
//! solved when the children are created, so every queued node carries its
//! own bound.

use super::simplex::solve_with_bounds;
use super::{LinearModel, LpStatus, SolverConfig, SolverError, VarKind};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Termination status of a MILP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node limit reached; the incumbent (if any) and bound are reported.
    GapLimit,
}

/// Result of a MILP solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipSolution {
    pub status: MipStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub nodes: usize,
}

impl MipSolution {
    /// True when an incumbent is available.
    pub fn has_incumbent(&self) -> bool {
        self.objective.is_finite()
    }
}

/// Solves `m` with default tolerances.
pub fn solve_milp(m: &LinearModel) -> Result<MipSolution, SolverError> {
    solve_milp_with(m, &SolverConfig::default())
}

struct Node {
    bound: f64,
    seq: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: invert so the smallest bound, then the
    // oldest node, comes out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

/// Solves `m` by branch-and-bound.
pub fn solve_milp_with(m: &LinearModel, cfg: &SolverConfig) -> Result<MipSolution, SolverError> {
    m.validate()?;
    let n = m.num_vars();
    let mut lower = m.lower.clone();
    let mut upper = m.upper.clone();
    for j in 0..n {
        if m.kind[j] != VarKind::Continuous {
            lower[j] = lower[j].ceil();
            upper[j] = upper[j].floor();
        }
    }

    let root = solve_with_bounds(m, &lower, &upper, cfg)?;
    let mut nodes = 1usize;
    match root.status {
        LpStatus::Infeasible => {
            return Ok(MipSolution { status: MipStatus::Infeasible, x: vec![], objective: f64::INFINITY, best_bound: f64::INFINITY, nodes })
        }
        LpStatus::Unbounded => {
            return Ok(MipSolution {
                status: MipStatus::Unbounded,
                x: vec![],
                objective: f64::NEG_INFINITY,
                best_bound: f64::NEG_INFINITY,
                nodes,
            })
        }
        LpStatus::Optimal => {}
    }

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let prune_level = |inc: &Option<(f64, Vec<f64>)>| -> f64 {
        match inc {
            Some((v, _)) => v - cfg.mip_gap_abs.max(cfg.mip_gap_rel * v.abs()),
            None => f64::INFINITY,
        }
    };

    // Integral leaves are polished: integer columns are fixed at their
    // rounded values and the LP is re-solved, so the incumbent value never
    // profits from sub-tolerance fractionality.
    let polish = |bound: f64, x: Vec<f64>, lo: &[f64], up: &[f64]| -> Result<(f64, Vec<f64>), SolverError> {
        let x = round_integers(m, x);
        let mut flo = lo.to_vec();
        let mut fup = up.to_vec();
        for j in 0..n {
            if m.kind[j] != VarKind::Continuous {
                flo[j] = x[j];
                fup[j] = x[j];
            }
        }
        let sol = solve_with_bounds(m, &flo, &fup, cfg)?;
        if sol.status == LpStatus::Optimal {
            Ok((sol.objective.max(bound), round_integers(m, sol.x)))
        } else {
            Ok((bound, x))
        }
    };

    let mut consider = |bound: f64,
                        x: Vec<f64>,
                        lo: Vec<f64>,
                        up: Vec<f64>,
                        inc: &mut Option<(f64, Vec<f64>)>,
                        heap: &mut BinaryHeap<Node>|
     -> Result<(), SolverError> {
        if branch_column(m, &x, cfg.int_tol).is_none() {
            if inc.as_ref().is_none_or(|(v, _)| bound < *v) {
                let (val, xr) = polish(bound, x, &lo, &up)?;
                if inc.as_ref().is_none_or(|(v, _)| val < *v) {
                    *inc = Some((val, xr));
                }
            }
        } else if bound < prune_level(inc) {
            seq += 1;
            heap.push(Node { bound, seq, lower: lo, upper: up, x });
        }
        Ok(())
    };
    consider(root.objective, root.x, lower, upper, &mut incumbent, &mut heap)?;

    let mut hit_limit = false;
    while let Some(node) = heap.pop() {
        if node.bound >= prune_level(&incumbent) {
            heap.clear();
            break;
        }
        if nodes >= cfg.node_limit {
            heap.push(node);
            hit_limit = true;
            break;
        }
        let j = branch_column(m, &node.x, cfg.int_tol).expect("queued nodes are fractional");
        let v = node.x[j];
        let children = [
            (node.lower[j], v.floor()),
            (v.ceil(), node.upper[j]),
        ];
        for (lo_j, up_j) in children {
            let mut lo = node.lower.clone();
            let mut up = node.upper.clone();
            lo[j] = lo_j;
            up[j] = up_j;
            let sol = solve_with_bounds(m, &lo, &up, cfg)?;
            nodes += 1;
            match sol.status {
                LpStatus::Infeasible => {}
                LpStatus::Unbounded => {
                    return Ok(MipSolution {
                        status: MipStatus::Unbounded,
                        x: vec![],
                        objective: f64::NEG_INFINITY,
                        best_bound: f64::NEG_INFINITY,
                        nodes,
                    })
                }
                LpStatus::Optimal => {
                    // A child can never be better than its parent.
                    let bound = sol.objective.max(node.bound);
                    consider(bound, sol.x, lo, up, &mut incumbent, &mut heap)?;
                }
            }
        }
    }

    let open_bound = heap.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
    match incumbent {
        Some((obj, x)) => {
            let best_bound = open_bound.min(obj);
            let status = if hit_limit && open_bound < prune_level(&Some((obj, vec![]))) {
                MipStatus::GapLimit
            } else {
                MipStatus::Optimal
            };
            Ok(MipSolution { status, objective: m.objective_value(&x), x, best_bound, nodes })
        }
        None if hit_limit => Ok(MipSolution { status: MipStatus::GapLimit, x: vec![], objective: f64::INFINITY, best_bound: open_bound, nodes }),
        None => Ok(MipSolution { status: MipStatus::Infeasible, x: vec![], objective: f64::INFINITY, best_bound: f64::INFINITY, nodes }),
    }
}

fn round_integers(m: &LinearModel, mut x: Vec<f64>) -> Vec<f64> {
    for j in 0..x.len() {
        if m.kind[j] != VarKind::Continuous {
            x[j] = x[j].round();
        }
    }
    x
}

/// Column to branch on, or `None` if the point is integral.
fn branch_column(m: &LinearModel, x: &[f64], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, u8, f64)> = None;
    for j in 0..x.len() {
        if m.kind[j] == VarKind::Continuous {
            continue;
        }
        let f = x[j] - x[j].floor();
        let frac = f.min(1.0 - f);
        if frac <= tol {
            continue;
        }
        let pr = m.priority[j];
        let better = match best {
            None => true,
            Some((_, bp, bf)) => pr > bp || (pr == bp && frac > bf),
        };
        if better {
            best = Some((j, pr, frac));
        }
    }
    best.map(|(j, _, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Relation;

    #[test]
    fn integer_round_up() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, 10.0, VarKind::Integer, 1.0);
        m.add_row("r", &[(x, 1.0)], Relation::Ge, 0.5);
        let s = solve_milp(&m).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        assert_eq!(s.x[0], 1.0);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_binaries() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, 1.0, VarKind::Binary, -1.0);
        let y = m.add_var("y", 0.0, 1.0, VarKind::Binary, -1.0);
        m.add_row("r", &[(x, 1.0), (y, 1.0)], Relation::Le, 1.5);
        let s = solve_milp(&m).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        assert!((s.objective + 1.0).abs() < 1e-12);
        assert!(s.best_bound <= s.objective + 1e-9);
    }

    #[test]
    fn infeasible_integer() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, 10.0, VarKind::Integer, 1.0);
        m.add_row("a", &[(x, 2.0)], Relation::Eq, 3.0);
        assert_eq!(solve_milp(&m).unwrap().status, MipStatus::Infeasible);
    }
}
