//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Every row `r` gets a logical column `s_r` so that the system reads
//! `A x − s = 0` with `lo_r ≤ s_r ≤ hi_r`. The all-logical basis is the
//! starting point. Phase 1 minimizes the sum of bound violations of basic
//! variables (a composite, breakpoint-aware objective); phase 2 minimizes
//! the true cost. Pricing is Dantzig's rule with a switch to Bland's rule
//! after a run of degenerate pivots, and the ratio test is the Harris
//! two-pass variant.

use super::{LinearModel, Relation, SolverConfig, SolverError};
use serde::{Deserialize, Serialize};

/// Termination status of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of an LP solve.
///
/// `duals[r]` is the sensitivity of the optimal objective to the right-hand
/// side of row `r`; `reduced_costs[j]` is `c_j − yᵀA_j`. Both are only
/// meaningful when the status is optimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Solves the continuous relaxation of `m` with default tolerances.
pub fn solve_lp(m: &LinearModel) -> Result<LpSolution, SolverError> {
    solve_lp_with(m, &SolverConfig::default())
}

/// Solves the continuous relaxation of `m`.
pub fn solve_lp_with(m: &LinearModel, cfg: &SolverConfig) -> Result<LpSolution, SolverError> {
    m.validate()?;
    solve_with_bounds(m, &m.lower, &m.upper, cfg)
}

const DEGENERATE_RUN: usize = 50;
const REINVERT_EVERY: usize = 400;
const FEAS_AUDIT: f64 = 1e-7;
/// Relative bound violation accepted as round-off when phase 1 stalls.
const STALL_REL_TOL: f64 = 1e-7;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

struct Simplex {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Column-major `B⁻¹`: entry `(i, r)` lives at `binv[r * m + i]`.
    binv: Vec<f64>,
    tol: f64,
    dtol: f64,
    ptol: f64,
}

/// Solves the LP relaxation of `m` with the column bounds replaced by
/// `lower`/`upper`. A run that hits the iteration cap or loses its basis to
/// round-off is retried with a different refresh period and then without
/// scaling, which changes the pivot sequence.
pub(crate) fn solve_with_bounds(
    m: &LinearModel,
    lower: &[f64],
    upper: &[f64],
    cfg: &SolverConfig,
) -> Result<LpSolution, SolverError> {
    let retries = [
        SolverConfig { refresh_every: cfg.refresh_every.max(2) / 2 + 3, ..cfg.clone() },
        SolverConfig { scaling: !cfg.scaling, ..cfg.clone() },
    ];
    let mut outcome = solve_with_bounds_once(m, lower, upper, cfg);
    for alt in &retries {
        match outcome {
            Err(SolverError::NumericalFailure { .. } | SolverError::SingularBasis) => outcome = solve_with_bounds_once(m, lower, upper, alt),
            _ => break,
        }
    }
    outcome
}

fn solve_with_bounds_once(
    m: &LinearModel,
    lower: &[f64],
    upper: &[f64],
    cfg: &SolverConfig,
) -> Result<LpSolution, SolverError> {
    let n = m.num_vars();
    let rows = m.num_rows();
    if (0..n).any(|j| lower[j] > upper[j]) {
        return Ok(infeasible(n, rows));
    }

    let (rs, cs, osc) = if cfg.scaling { scale_factors(m) } else { (vec![1.0; rows], vec![1.0; n], 1.0) };

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, row) in m.rows.iter().enumerate() {
        for &(j, v) in &row.coeffs {
            cols[j].push((r, v * rs[r] * cs[j]));
        }
    }
    let total = n + rows;
    let mut cost = vec![0.0; total];
    let mut lb = vec![0.0; total];
    let mut ub = vec![0.0; total];
    for j in 0..n {
        cost[j] = m.objective[j] * cs[j] * osc;
        lb[j] = lower[j] / cs[j];
        ub[j] = upper[j] / cs[j];
    }
    for (r, row) in m.rows.iter().enumerate() {
        let (lo, hi) = match row.relation {
            Relation::Le => (f64::NEG_INFINITY, row.rhs),
            Relation::Ge => (row.rhs, f64::INFINITY),
            Relation::Eq => (row.rhs, row.rhs),
        };
        lb[n + r] = lo * rs[r];
        ub[n + r] = hi * rs[r];
    }

    let mut sx = Simplex {
        m: rows,
        n,
        cols,
        cost,
        lb,
        ub,
        x: vec![0.0; total],
        basis: (n..total).collect(),
        is_basic: (0..total).map(|j| j >= n).collect(),
        binv: vec![0.0; rows * rows],
        tol: cfg.primal_tol,
        dtol: cfg.dual_tol,
        ptol: cfg.pivot_tol,
    };
    for r in 0..rows {
        sx.binv[r * rows + r] = -1.0;
    }
    for j in 0..n {
        sx.x[j] = initial_value(sx.lb[j], sx.ub[j]);
    }
    sx.recompute_basic();

    let cap = 10 * (n + rows + 1000);
    let mut iterations = 0usize;
    let mut audits = 0usize;
    let status = loop {
        let st = sx.run(cap, &mut iterations, cfg.refresh_every)?;
        if st != LpStatus::Optimal || audits >= 2 {
            break st;
        }
        // Accuracy audit in the original space; on failure rebuild the
        // inverse from scratch and resume.
        let x = unscale_primal(&sx, &cs);
        let viol = m.rows.iter().enumerate().fold(0.0f64, |w, (r, row)| {
            let a = m.row_activity(r, &x);
            let scale = 1.0 + row.rhs.abs();
            let v = match row.relation {
                Relation::Le => a - row.rhs,
                Relation::Ge => row.rhs - a,
                Relation::Eq => (a - row.rhs).abs(),
            };
            w.max(v / scale)
        });
        if viol <= FEAS_AUDIT {
            break st;
        }
        audits += 1;
        sx.reinvert()?;
        sx.recompute_basic();
    };

    match status {
        LpStatus::Optimal => {
            let x = unscale_primal(&sx, &cs);
            let cb: Vec<f64> = sx.basis.iter().map(|&j| sx.cost[j]).collect();
            let y = sx.btran(&cb);
            let duals: Vec<f64> = (0..rows).map(|r| y[r] * rs[r] / osc).collect();
            let reduced_costs: Vec<f64> = (0..n)
                .map(|j| {
                    let d = sx.cost[j] - sx.cols[j].iter().map(|&(r, v)| y[r] * v).sum::<f64>();
                    d / (cs[j] * osc)
                })
                .collect();
            Ok(LpSolution {
                status,
                objective: m.objective_value(&x),
                x,
                duals,
                reduced_costs,
                iterations,
            })
        }
        LpStatus::Infeasible => Ok(LpSolution { iterations, ..infeasible(n, rows) }),
        LpStatus::Unbounded => Ok(LpSolution {
            status,
            x: unscale_primal(&sx, &cs),
            objective: f64::NEG_INFINITY,
            duals: vec![0.0; rows],
            reduced_costs: vec![0.0; n],
            iterations,
        }),
    }
}

fn infeasible(n: usize, rows: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        x: vec![0.0; n],
        objective: f64::INFINITY,
        duals: vec![0.0; rows],
        reduced_costs: vec![0.0; n],
        iterations: 0,
    }
}

fn initial_value(lb: f64, ub: f64) -> f64 {
    if lb.is_finite() {
        lb
    } else if ub.is_finite() {
        ub
    } else {
        0.0
    }
}

fn unscale_primal(sx: &Simplex, cs: &[f64]) -> Vec<f64> {
    (0..sx.n).map(|j| sx.x[j] * cs[j]).collect()
}

fn pow2_round(s: f64) -> f64 {
    if !s.is_finite() || s <= 0.0 {
        1.0
    } else {
        2f64.powi(s.log2().round().clamp(-60.0, 60.0) as i32)
    }
}

/// Geometric-mean scaling with power-of-two factors (exact in floating
/// point). Returns row factors, column factors and an objective factor.
fn scale_factors(m: &LinearModel) -> (Vec<f64>, Vec<f64>, f64) {
    let n = m.num_vars();
    let rows = m.num_rows();
    let mut rs = vec![1.0; rows];
    let mut cs = vec![1.0; n];
    for _ in 0..6 {
        for (r, row) in m.rows.iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &(j, v) in &row.coeffs {
                let a = (v * cs[j]).abs();
                lo = lo.min(a);
                hi = hi.max(a);
            }
            if hi > 0.0 {
                rs[r] = 1.0 / (lo * hi).sqrt();
            }
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for (r, row) in m.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                let a = (v * rs[r]).abs();
                lo[j] = lo[j].min(a);
                hi[j] = hi[j].max(a);
            }
        }
        for j in 0..n {
            if hi[j] > 0.0 {
                cs[j] = 1.0 / (lo[j] * hi[j]).sqrt();
            }
        }
    }
    for v in rs.iter_mut() {
        *v = pow2_round(*v);
    }
    for v in cs.iter_mut() {
        *v = pow2_round(*v);
    }
    let cmax = (0..n).map(|j| (m.objective[j] * cs[j]).abs()).fold(0.0, f64::max);
    let osc = if cmax > 0.0 { pow2_round(1.0 / cmax) } else { 1.0 };
    (rs, cs, osc)
}

impl Simplex {
    fn column(&self, j: usize) -> std::borrow::Cow<'_, [(usize, f64)]> {
        if j < self.n {
            std::borrow::Cow::Borrowed(&self.cols[j])
        } else {
            std::borrow::Cow::Owned(vec![(j - self.n, -1.0)])
        }
    }

    /// `α = B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(r, v) in self.column(j).iter() {
            let col = &self.binv[r * m..(r + 1) * m];
            for i in 0..m {
                alpha[i] += v * col[i];
            }
        }
        alpha
    }

    /// `y = c_Bᵀ B⁻¹`.
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|r| {
                let col = &self.binv[r * m..(r + 1) * m];
                col.iter().zip(cb).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    fn recompute_basic(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.n + m {
            if self.is_basic[j] || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            for &(r, v) in self.column(j).iter() {
                rhs[r] += v * xj;
            }
        }
        for i in 0..m {
            let mut s = 0.0;
            for r in 0..m {
                s += self.binv[r * m + i] * rhs[r];
            }
            self.x[self.basis[i]] = -s;
        }
    }

    fn reinvert(&mut self) -> Result<(), SolverError> {
        let m = self.m;
        // Dense B in row-major form, then Gauss-Jordan with partial pivoting.
        let mut b = vec![0.0; m * m];
        for (i, &j) in self.basis.iter().enumerate() {
            for &(r, v) in self.column(j).iter() {
                b[r * m + i] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&a, &d| b[a * m + c].abs().total_cmp(&b[d * m + c].abs()))
                .ok_or(SolverError::SingularBasis)?;
            if b[p * m + c].abs() < 1e-13 {
                return Err(SolverError::SingularBasis);
            }
            if p != c {
                for k in 0..m {
                    b.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = b[c * m + c];
            for k in 0..m {
                b[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = b[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    b[r * m + k] -= f * b[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
        // Convert row-major inverse into the column-major store.
        for i in 0..m {
            for r in 0..m {
                self.binv[r * m + i] = inv[i * m + r];
            }
        }
        Ok(())
    }

    fn pivot(&mut self, p: usize, alpha: &[f64]) {
        let m = self.m;
        let ap = alpha[p];
        for r in 0..m {
            let col = &mut self.binv[r * m..(r + 1) * m];
            let e = col[p] / ap;
            if e != 0.0 {
                for i in 0..m {
                    col[i] -= alpha[i] * e;
                }
            }
            col[p] = e;
        }
    }

    /// Largest bound violation of a basic variable and the magnitude of
    /// the bound it violates.
    fn max_basic_violation(&self) -> (f64, f64) {
        let mut out = (0.0f64, 0.0f64);
        for &j in &self.basis {
            let v = self.x[j];
            let (d, b) = if v < self.lb[j] { (self.lb[j] - v, self.lb[j]) } else if v > self.ub[j] { (v - self.ub[j], self.ub[j]) } else { (0.0, 0.0) };
            if d > out.0 {
                out = (d, b.abs());
            }
        }
        out
    }

    fn run(&mut self, cap: usize, iterations: &mut usize, refresh: usize) -> Result<LpStatus, SolverError> {
        let m = self.m;
        let total = self.n + m;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut pivots_since_inv = 0usize;
        let mut last_phase = Phase::One;
        let mut refreshed = false;
        loop {
            *iterations += 1;
            if *iterations > cap {
                return Err(SolverError::NumericalFailure { cap });
            }
            if *iterations % refresh.max(1) == 0 {
                self.recompute_basic();
            }

            let mut cb = vec![0.0; m];
            let mut phase = Phase::Two;
            for i in 0..m {
                let j = self.basis[i];
                let v = self.x[j];
                if v < self.lb[j] - self.tol {
                    cb[i] = -1.0;
                    phase = Phase::One;
                } else if v > self.ub[j] + self.tol {
                    cb[i] = 1.0;
                    phase = Phase::One;
                }
            }
            if phase == Phase::Two {
                for i in 0..m {
                    cb[i] = self.cost[self.basis[i]];
                }
            }
            if phase != last_phase {
                bland = false;
                degenerate = 0;
                last_phase = phase;
            }
            let y = self.btran(&cb);

            // Pricing.
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..total {
                if self.is_basic[j] || self.lb[j] == self.ub[j] {
                    continue;
                }
                let cj = if phase == Phase::Two { self.cost[j] } else { 0.0 };
                let d = if j < self.n {
                    cj - self.cols[j].iter().map(|&(r, v)| y[r] * v).sum::<f64>()
                } else {
                    cj + y[j - self.n]
                };
                let xj = self.x[j];
                let can_up = xj < self.ub[j];
                let can_down = xj > self.lb[j];
                let dir = if d < -self.dtol && can_up {
                    1.0
                } else if d > self.dtol && can_down {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    enter = Some((j, d, dir));
                    break;
                }
                if enter.is_none_or(|(_, bd, _)| d.abs() > bd.abs()) {
                    enter = Some((j, d, dir));
                }
            }
            let Some((q, _, dir)) = enter else {
                if phase == Phase::One {
                    // Phase 1 stalled: refresh the iterate once, then accept
                    // residual violations that are pure round-off.
                    if !refreshed {
                        refreshed = true;
                        self.reinvert()?;
                        self.recompute_basic();
                        continue;
                    }
                    let (viol, size) = self.max_basic_violation();
                    if viol <= STALL_REL_TOL * (1.0 + size) {
                        self.tol = self.tol.max(1.5 * viol);
                        continue;
                    }
                }
                return Ok(if phase == Phase::One { LpStatus::Infeasible } else { LpStatus::Optimal });
            };

            let alpha = self.ftran(q);
            let flip = self.ub[q] - self.lb[q];

            // Harris ratio test, pass 1: relaxed step bound.
            let mut relaxed = f64::INFINITY;
            let mut limits: Vec<(usize, f64, f64)> = Vec::new();
            for i in 0..m {
                let a = alpha[i];
                if a.abs() < self.ptol {
                    continue;
                }
                let rate = -dir * a;
                let j = self.basis[i];
                let (v, l, u) = (self.x[j], self.lb[j], self.ub[j]);
                let target = if rate < 0.0 {
                    if v > u + self.tol {
                        u
                    } else if v >= l - self.tol {
                        l
                    } else {
                        continue;
                    }
                } else if v < l - self.tol {
                    l
                } else if v <= u + self.tol {
                    u
                } else {
                    continue;
                };
                if !target.is_finite() {
                    continue;
                }
                let lim = (target - v) / rate;
                relaxed = relaxed.min(lim + self.tol / rate.abs());
                limits.push((i, lim, target));
            }

            // Pass 2: largest pivot among admissible candidates.
            let mut leave: Option<(usize, f64, f64)> = None;
            if bland {
                let mut best = f64::INFINITY;
                for &(i, lim, target) in &limits {
                    let better = lim < best - 1e-12
                        || (lim <= best + 1e-12 && leave.is_some_and(|(li, _, _)| self.basis[i] < self.basis[li]));
                    if better {
                        best = best.min(lim);
                        leave = Some((i, lim, target));
                    }
                }
            } else {
                for &(i, lim, target) in &limits {
                    if lim <= relaxed && leave.is_none_or(|(li, _, _)| alpha[i].abs() > alpha[li].abs()) {
                        leave = Some((i, lim, target));
                    }
                }
            }

            let step_leave = leave.map(|(_, lim, _)| lim.max(0.0)).unwrap_or(f64::INFINITY);
            if flip <= step_leave {
                if !flip.is_finite() {
                    if phase == Phase::Two {
                        return Ok(LpStatus::Unbounded);
                    }
                    return Err(SolverError::NumericalFailure { cap });
                }
                // Bound flip: the entering column moves to its other bound.
                for i in 0..m {
                    if alpha[i] != 0.0 {
                        let j = self.basis[i];
                        self.x[j] -= dir * alpha[i] * flip;
                    }
                }
                self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                degenerate = 0;
                continue;
            }

            let (p, _, target) = leave.expect("finite step implies a leaving row");
            let t = step_leave;
            for i in 0..m {
                if alpha[i] != 0.0 {
                    let j = self.basis[i];
                    self.x[j] -= dir * alpha[i] * t;
                }
            }
            self.x[q] += dir * t;
            let out = self.basis[p];
            self.x[out] = target;
            self.is_basic[out] = false;
            self.is_basic[q] = true;
            self.basis[p] = q;
            self.pivot(p, &alpha);
            pivots_since_inv += 1;

            if t <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            if pivots_since_inv >= REINVERT_EVERY {
                self.reinvert()?;
                self.recompute_basic();
                pivots_since_inv = 0;
            }
        }
    }
}
