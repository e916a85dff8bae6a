//! Positive-semidefinite blocks of the Type-3 stage models.
//!
//! * The outer path keeps the blocks PSD lazily: it solves the MILP, finds
//!   negative eigenpairs of the block iterates and appends the valid linear
//!   rows `vᵀ M v ≥ 0` until every block is PSD within tolerance. Its value
//!   is a lower bound on the stage MISDP.
//! * The inner path restricts every block to `DD(U) = {UᵀQU : Q dd}`, a
//!   polyhedral subset of the PSD cone. Its value is an upper bound.

mod blocks;

pub use blocks::{PsdBlockName, PsdBlockRef};

use crate::ambiguity::{AmbiguityType, Risk};
use crate::linalg::{cholesky, sym_eig, SquareMatrix};
use crate::lp::{solve_lp, solve_milp, LinearModel, LpStatus, MipSolution, MipStatus, Relation, SolverError, VarKind};
use crate::model::Instance;
use crate::reformulate::{fixed_state_build, BuildOptions, ReformError, StageBuild};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Eigenvalue tolerance of the outer cut loop.
pub const EIGEN_CUT_TOL: f64 = 1e-6;
/// Maximum rounds of the outer cut loop.
pub const CUT_LOOP_LIMIT: usize = 1000;
/// Cut rounds on the continuous relaxation before the integer rounds start.
pub const RELAXATION_CUT_ROUNDS: usize = 100;
/// Condition-number limit for the inner-approximation bases.
pub const MAX_BASIS_CONDITION: f64 = 1e12;
/// Basis refreshes of [`PsdHandling::DdIterative`].
pub const DD_ITERATIVE_ROUNDS: usize = 3;
/// Relative slack of the lower/upper bound sandwich assertion.
pub const SANDWICH_REL_TOL: f64 = 1e-6;

/// Errors of the PSD handling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MisdpError {
    #[error("eigen-cut loop hit {rounds} rounds (best relaxation {best:.6e})")]
    CutLoopLimit { rounds: usize, best: f64 },
    #[error("inner-approximation basis is numerically singular (condition {condition:.3e})")]
    SingularBasis { condition: f64 },
    #[error("basis dimension {got} does not match block dimension {want}")]
    Dimension { got: usize, want: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Reform(#[from] ReformError),
    #[error("stage model is {0:?}")]
    Status(MipStatus),
}

/// How the PSD blocks of a stage model are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdHandling {
    /// Eigen-cut outer approximation (lower bound).
    Outer,
    /// Diagonally dominant inner approximation with identity bases (upper
    /// bound).
    DdInner,
    /// Diagonally dominant inner approximation whose bases are refreshed
    /// from the Cholesky factors of the previous solution (upper bound).
    DdIterative,
}

/// Result of an outer-approximation solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterSolution {
    pub solution: MipSolution,
    /// MILP solves performed.
    pub rounds: usize,
    /// Eigen-cut rows appended (seed rows excluded).
    pub eigen_cuts: usize,
}

/// Appends the seed rows `e_aᵀMe_a ≥ 0` and `(e_a ± e_b)ᵀM(e_a ± e_b) ≥ 0`
/// for every block.
pub fn seed_minor_rows(model: &mut LinearModel, blocks: &[PsdBlockRef]) {
    for blk in blocks {
        let n = blk.dim;
        for a in 0..n {
            let mut e = vec![0.0; n];
            e[a] = 1.0;
            model.add_row(format!("psd_seed_{:?}_{}", blk.name, a + 1), &blk.quad_coeffs(&e), Relation::Ge, 0.0);
            for b in a + 1..n {
                for sign in [1.0, -1.0] {
                    let mut e = vec![0.0; n];
                    e[a] = 1.0;
                    e[b] = sign;
                    let tag = if sign > 0.0 { "p" } else { "m" };
                    model.add_row(format!("psd_seed_{:?}_{}_{}{tag}", blk.name, a + 1, b + 1), &blk.quad_coeffs(&e), Relation::Ge, 0.0);
                }
            }
        }
    }
}

/// Outer-approximation loop on `model`, appending the eigen-cuts to it so
/// that later solves (e.g. with another objective) reuse them.
pub fn solve_misdp_outer_in_place(model: &mut LinearModel, blocks: &[PsdBlockRef], tol: f64) -> Result<OuterSolution, MisdpError> {
    let mut eigen_cuts = 0;
    if model.kind.iter().any(|k| *k != VarKind::Continuous) {
        for _ in 0..RELAXATION_CUT_ROUNDS {
            let sol = solve_lp(model)?;
            if sol.status != LpStatus::Optimal || !add_eigen_cuts(model, blocks, &sol.x, tol, &mut eigen_cuts) {
                break;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    for round in 1..=CUT_LOOP_LIMIT {
        let sol = solve_milp(model)?;
        if sol.status != MipStatus::Optimal {
            return Ok(OuterSolution { solution: sol, rounds: round, eigen_cuts });
        }
        best = sol.best_bound;
        if !add_eigen_cuts(model, blocks, &sol.x, tol, &mut eigen_cuts) {
            return Ok(OuterSolution { solution: sol, rounds: round, eigen_cuts });
        }
    }
    Err(MisdpError::CutLoopLimit { rounds: CUT_LOOP_LIMIT, best })
}

/// Appends one cut per eigenvector with eigenvalue below `-tol` in each
/// block at `x`; returns whether any cut was added.
fn add_eigen_cuts(model: &mut LinearModel, blocks: &[PsdBlockRef], x: &[f64], tol: f64, eigen_cuts: &mut usize) -> bool {
    let mut added = false;
    for blk in blocks {
        let mat = blk.matrix(x);
        for (lam, v) in sym_eig(&mat) {
            if lam >= -tol {
                break;
            }
            *eigen_cuts += 1;
            model.add_row(format!("eigcut_{:?}_{}", blk.name, eigen_cuts), &blk.quad_coeffs(&v), Relation::Ge, 0.0);
            added = true;
        }
    }
    added
}

/// Outer-approximation solve of `model` with PSD `blocks`. The returned
/// best bound is a lower bound on the MISDP optimum.
pub fn solve_misdp_outer(model: &LinearModel, blocks: &[PsdBlockRef], tol: f64) -> Result<OuterSolution, MisdpError> {
    let mut m = model.clone();
    solve_misdp_outer_in_place(&mut m, blocks, tol)
}

/// Returns `model` with every `Z` block restricted to `DD(U)` and every `Y`
/// block to `DD(V)`: `M = BᵀQB` with `Q_cc ≥ Σ_{d≠c} (q⁺_cd + q⁻_cd)` and
/// `Q_cd = q⁺_cd − q⁻_cd`.
pub fn add_dd_inner(model: &LinearModel, blocks: &[PsdBlockRef], u: &SquareMatrix, v: &SquareMatrix) -> Result<LinearModel, MisdpError> {
    let mut m = model.clone();
    for blk in blocks {
        let basis = match blk.name {
            PsdBlockName::Z => u,
            PsdBlockName::Y => v,
        };
        if basis.n != blk.dim {
            return Err(MisdpError::Dimension { got: basis.n, want: blk.dim });
        }
        let cond = basis.condition_estimate();
        if !(cond <= MAX_BASIS_CONDITION) {
            return Err(MisdpError::SingularBasis { condition: cond });
        }
        append_dd_rows(&mut m, blk, basis);
    }
    Ok(m)
}

fn append_dd_rows(m: &mut LinearModel, blk: &PsdBlockRef, basis: &SquareMatrix) {
    let n = blk.dim;
    let tag = format!("{:?}", blk.name);
    let diag: Vec<usize> = (0..n).map(|c| m.add_var(format!("dd{tag}_q_{}_{}", c + 1, c + 1), 0.0, f64::INFINITY, VarKind::Continuous, 0.0)).collect();
    // Off-diagonal parts q⁺, q⁻ for c < d.
    let mut plus = vec![vec![usize::MAX; n]; n];
    let mut minus = vec![vec![usize::MAX; n]; n];
    for c in 0..n {
        for d in c + 1..n {
            plus[c][d] = m.add_var(format!("dd{tag}_qp_{}_{}", c + 1, d + 1), 0.0, f64::INFINITY, VarKind::Continuous, 0.0);
            minus[c][d] = m.add_var(format!("dd{tag}_qm_{}_{}", c + 1, d + 1), 0.0, f64::INFINITY, VarKind::Continuous, 0.0);
        }
    }
    for c in 0..n {
        let mut coeffs = vec![(diag[c], 1.0)];
        for d in 0..n {
            if d != c {
                let (a, b) = (c.min(d), c.max(d));
                coeffs.push((plus[a][b], -1.0));
                coeffs.push((minus[a][b], -1.0));
            }
        }
        m.add_row(format!("dd{tag}_dominance_{}", c + 1), &coeffs, Relation::Ge, 0.0);
    }
    // M_ab = Σ_c B_ca B_cb Q_cc + Σ_{c<d} (B_ca B_db + B_da B_cb) Q_cd.
    for a in 0..n {
        for b in 0..n {
            if b < a && blk.cols[a][b] == blk.cols[b][a] {
                continue;
            }
            let mut coeffs = vec![(blk.cols[a][b], 1.0)];
            for c in 0..n {
                let w = basis.get(c, a) * basis.get(c, b);
                if w != 0.0 {
                    coeffs.push((diag[c], -w));
                }
                for d in c + 1..n {
                    let w = basis.get(c, a) * basis.get(d, b) + basis.get(d, a) * basis.get(c, b);
                    if w != 0.0 {
                        coeffs.push((plus[c][d], -w));
                        coeffs.push((minus[c][d], w));
                    }
                }
            }
            m.add_row(format!("dd{tag}_link_{}_{}", a + 1, b + 1), &coeffs, Relation::Eq, 0.0);
        }
    }
}

/// Solution of a compiled stage model together with PSD statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub solution: MipSolution,
    pub eigen_cuts: usize,
}

/// Solves a compiled stage model, handling its PSD blocks (if any) as
/// requested.
pub fn solve_stage(build: &StageBuild, handling: PsdHandling, tol: f64) -> Result<StageSolution, MisdpError> {
    let mut model = build.model.clone();
    solve_stage_model(&mut model, &build.psd_blocks, handling, tol)
}

/// As [`solve_stage`] on an explicit model that may already carry eigen-cut
/// rows from earlier solves; new eigen-cuts are appended to `model`.
pub fn solve_stage_model(model: &mut LinearModel, blocks: &[PsdBlockRef], handling: PsdHandling, tol: f64) -> Result<StageSolution, MisdpError> {
    if blocks.is_empty() {
        return Ok(StageSolution { solution: solve_milp(model)?, eigen_cuts: 0 });
    }
    match handling {
        PsdHandling::Outer => {
            let out = solve_misdp_outer_in_place(model, blocks, tol)?;
            Ok(StageSolution { solution: out.solution, eigen_cuts: out.eigen_cuts })
        }
        PsdHandling::DdInner => {
            let inner = add_dd_inner(model, blocks, &SquareMatrix::identity(blocks[0].dim), &SquareMatrix::identity(blocks[1].dim))?;
            Ok(StageSolution { solution: solve_milp(&inner)?, eigen_cuts: 0 })
        }
        PsdHandling::DdIterative => Ok(StageSolution { solution: solve_dd_iterative(model, blocks, DD_ITERATIVE_ROUNDS)?, eigen_cuts: 0 }),
    }
}

/// Inner approximation with bases refreshed `rounds − 1` times: after each
/// solve, every block basis becomes `Lᵀ` for the Cholesky factor `L` of the
/// block at the solution, so that the previous point stays feasible. The
/// best solution over all rounds is returned; each is a valid upper bound.
pub fn solve_dd_iterative(model: &LinearModel, blocks: &[PsdBlockRef], rounds: usize) -> Result<MipSolution, MisdpError> {
    let mut bases: Vec<SquareMatrix> = blocks.iter().map(|b| SquareMatrix::identity(b.dim)).collect();
    let mut best: Option<MipSolution> = None;
    for _ in 0..rounds.max(1) {
        let mut m = model.clone();
        for (blk, basis) in blocks.iter().zip(&bases) {
            let cond = basis.condition_estimate();
            if !(cond <= MAX_BASIS_CONDITION) {
                return best.ok_or(MisdpError::SingularBasis { condition: cond });
            }
            append_dd_rows(&mut m, blk, basis);
        }
        let sol = solve_milp(&m)?;
        if sol.status != MipStatus::Optimal {
            return Ok(best.unwrap_or(sol));
        }
        let mut next = Vec::with_capacity(blocks.len());
        for blk in blocks {
            match cholesky(&blk.matrix(&sol.x)) {
                Ok(l) => next.push(l.transpose()),
                Err(_) => break,
            }
        }
        let improved = best.as_ref().is_none_or(|b| sol.objective < b.objective);
        if improved {
            best = Some(MipSolution { x: sol.x[..model.num_vars()].to_vec(), ..sol });
        }
        if next.len() != blocks.len() {
            break;
        }
        bases = next;
    }
    Ok(best.expect("at least one optimal round"))
}

/// Prepares a stage model for repeated solves: with the outer path the PSD
/// seed rows are added once.
pub fn prepare_stage_model(build: &StageBuild, handling: PsdHandling) -> Result<LinearModel, MisdpError> {
    match handling {
        _ if build.psd_blocks.is_empty() => Ok(build.model.clone()),
        PsdHandling::Outer => {
            let mut m = build.model.clone();
            seed_minor_rows(&mut m, &build.psd_blocks);
            Ok(m)
        }
        PsdHandling::DdIterative => Ok(build.model.clone()),
        PsdHandling::DdInner => {
            let dims: Vec<usize> = build.psd_blocks.iter().map(|b| b.dim).collect();
            add_dd_inner(&build.model, &build.psd_blocks, &SquareMatrix::identity(dims[0]), &SquareMatrix::identity(dims[1]))
        }
    }
}

/// Solves a model produced by [`prepare_stage_model`].
pub fn solve_prepared(model: &mut LinearModel, blocks: &[PsdBlockRef], handling: PsdHandling, tol: f64) -> Result<StageSolution, MisdpError> {
    match handling {
        PsdHandling::Outer if !blocks.is_empty() => {
            let out = solve_misdp_outer_in_place(model, blocks, tol)?;
            Ok(StageSolution { solution: out.solution, eigen_cuts: out.eigen_cuts })
        }
        PsdHandling::DdIterative if !blocks.is_empty() => {
            Ok(StageSolution { solution: solve_dd_iterative(model, blocks, DD_ITERATIVE_ROUNDS)?, eigen_cuts: 0 })
        }
        _ => Ok(StageSolution { solution: solve_milp(model)?, eigen_cuts: 0 }),
    }
}

/// Type-3 dual-side value of the worst-case expectation of `q` at the
/// frozen state `x`, with the PSD blocks handled by `handling`: a lower
/// bound for [`PsdHandling::Outer`], an upper bound for
/// [`PsdHandling::DdInner`].
#[allow(clippy::too_many_arguments)]
pub fn type3_dual_side_value(
    inst: &Instance,
    t: usize,
    x: &[f64],
    q: &[f64],
    risk: Option<Risk>,
    opts: &BuildOptions,
    handling: PsdHandling,
    tol: f64,
) -> Result<f64, MisdpError> {
    let b = fixed_state_build(inst, AmbiguityType::Type3, t, x, q, risk, opts)?;
    let mut m = prepare_stage_model(&b, handling)?;
    let s = solve_prepared(&mut m, &b.psd_blocks, handling, tol)?;
    if s.solution.status != MipStatus::Optimal {
        return Err(MisdpError::Status(s.solution.status));
    }
    b.audit_with_probe(&m, &s.solution.x, s.solution.objective, |mut wide| {
        let w = solve_prepared(&mut wide, &b.psd_blocks, handling, tol)?;
        Ok::<_, MisdpError>((w.solution.status == MipStatus::Optimal).then_some(w.solution.objective))
    })?;
    Ok(match handling {
        PsdHandling::Outer => s.solution.best_bound,
        PsdHandling::DdInner | PsdHandling::DdIterative => s.solution.objective,
    })
}
