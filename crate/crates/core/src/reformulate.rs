//! Stage subproblems compiled into mixed-integer linear models.
//!
//! The worst-case expectation over the next stage is replaced by the dual
//! of the inner maximization, so each stage becomes a single minimization
//! over the stage decisions and the dual variables. Products between the
//! binary state `x_t` and the dual variables are linearized exactly with
//! McCormick envelopes, and the next-stage value functions are replaced by
//! the cut variables `θ_t^k`.
//!
//! Column order inside a compiled model: stage block (`x`, `y`, copies),
//! `θ`, CVaR columns, then the dual families of the ambiguity type. Each
//! contiguous group is recorded as a named [`Family`].

use crate::ambiguity::{type1_bounds, AmbiguityType, Risk};
use crate::lp::{solve_milp, LinearModel, MipStatus, Relation, SolverError, VarKind};
use crate::misdp::{PsdBlockName, PsdBlockRef};
use crate::model::{append_stage_block, Instance, StageCols, StateLink};
use crate::sddip::Cut;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

/// Relative distance to the big-M bound at which a dual value is reported
/// as sitting at its bound.
pub const DUAL_BOUND_REL_TOL: f64 = 1e-6;
/// Widening factor of the re-solve that tells a binding dual bound from
/// one that only caps a zero-cost direction of the dual face.
pub const DUAL_BOUND_PROBE_FACTOR: f64 = 10.0;
/// Relative objective change above which a probed dual bound counts as
/// binding.
pub const DUAL_BOUND_PROBE_TOL: f64 = 1e-7;

/// Errors raised while compiling or auditing stage models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReformError {
    #[error("McCormick factor {name:?} needs finite bounds")]
    UnboundedFactor { name: String },
    #[error("stage {t} has no successor in a {stages}-stage instance")]
    NoSuccessor { t: usize, stages: usize },
    #[error("dual column {name} = {value:.6e} sits at its bound {bound:.3e}; rerun with a larger bound")]
    DualAtBound { name: String, value: f64, bound: f64 },
    #[error("fixed-state dual model is {0:?}")]
    DualStatus(MipStatus),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Compilation options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Bound on the magnitude of every dual variable that enters a
    /// McCormick product; `None` uses [`default_big_m`].
    pub big_m: Option<f64>,
    /// Adds `Y_jj' = Y_j'j` (and the same for `z1`) rows.
    pub symmetry_rows: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { big_m: None, symmetry_rows: true }
    }
}

/// Default dual bound `10⁴·(1 + max|R_j| + max|c_ij|)`.
pub fn default_big_m(inst: &Instance) -> f64 {
    let r = inst.r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let c = inst.c.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    1e4 * (1.0 + r + c)
}

/// A named contiguous column range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Family {
    pub name: String,
    pub range: Range<usize>,
}

/// Dual columns of the ambiguity type. Matrices are indexed `[j][j']`,
/// product families `[i][j]`, `[i][j][j']` or `[i][i'][j][j']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DualLayout {
    /// Last stage: no successor, no dual block.
    None,
    Type1 {
        /// `α_1, α_{2,1..J}, α_{3,1..J}`.
        alpha: Vec<usize>,
        beta: Vec<usize>,
        /// Products `α_{2j}·x_i`, indexed `[j][i]` (likewise below).
        z_alpha2: Vec<Vec<usize>>,
        z_alpha3: Vec<Vec<usize>>,
        z_beta2: Vec<Vec<usize>>,
        z_beta3: Vec<Vec<usize>>,
    },
    Type2 {
        s: usize,
        u: Vec<usize>,
        y: Vec<Vec<usize>>,
        /// `x_i·u_j`.
        w: Vec<Vec<usize>>,
        /// `x_i·Y_jj'`.
        z: Vec<Vec<Vec<usize>>>,
        /// `x_i'·x_i·Y_jj'`.
        v: Vec<Vec<Vec<Vec<usize>>>>,
    },
    Type3 {
        s: usize,
        z1: Vec<Vec<usize>>,
        z2: Vec<usize>,
        z3: usize,
        y: Vec<Vec<usize>>,
        /// `x_i·z1_jj'`.
        w: Vec<Vec<Vec<usize>>>,
        /// `x_i·z2_j`.
        u: Vec<Vec<usize>>,
        /// `x_i·Y_jj'`.
        r: Vec<Vec<Vec<usize>>>,
        /// `x_i'·x_i·Y_jj'`.
        v: Vec<Vec<Vec<Vec<usize>>>>,
    },
}

/// Map from model columns back to the symbols of the reformulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarLayout {
    pub families: Vec<Family>,
    pub stage: StageCols,
    /// `θ_t^k`, one per realization of stage `t+1`.
    pub theta: Vec<usize>,
    /// CVaR shift (the free dual of the CVaR mass row).
    pub cvar_shift: Option<usize>,
    /// CVaR duals `π_k ≥ 0`.
    pub cvar_pi: Vec<usize>,
    /// Dual columns carrying a big-M bound.
    pub bounded_duals: Vec<usize>,
    pub duals: DualLayout,
}

/// A compiled stage subproblem.
#[derive(Debug, Clone)]
pub struct StageBuild {
    pub model: LinearModel,
    pub layout: VarLayout,
    /// PSD blocks (Type 3 only); not encoded in `model`.
    pub psd_blocks: Vec<PsdBlockRef>,
    pub big_m: f64,
}

impl StageBuild {
    /// Errors if a bounded dual column is within `DUAL_BOUND_REL_TOL·M` of
    /// its big-M bound at the solution `x`.
    pub fn audit_dual_bounds(&self, x: &[f64]) -> Result<(), ReformError> {
        let lim = self.big_m * (1.0 - DUAL_BOUND_REL_TOL);
        for &c in &self.layout.bounded_duals {
            if x[c].abs() >= lim {
                return Err(ReformError::DualAtBound { name: self.model.names[c].clone(), value: x[c], bound: self.big_m });
            }
        }
        Ok(())
    }

    /// Copy of `model` with every big-M dual bound widened by `factor`.
    /// Columns appended after the compiled ones are left untouched.
    pub fn widen_dual_bounds(&self, model: &LinearModel, factor: f64) -> LinearModel {
        let mut m = model.clone();
        for &c in &self.layout.bounded_duals {
            m.lower[c] = m.lower[c] * factor;
            m.upper[c] = m.upper[c] * factor;
        }
        m
    }

    /// Audits `x` and, if a dual column sits at its bound, re-solves the
    /// widened model through `resolve`. Equal objectives mean the column
    /// rests on a flat direction of the dual face (as happens with
    /// linearly dependent moment rows) and the solution stands.
    pub fn audit_with_probe<E: From<ReformError>>(
        &self,
        model: &LinearModel,
        x: &[f64],
        objective: f64,
        resolve: impl FnOnce(LinearModel) -> Result<Option<f64>, E>,
    ) -> Result<(), E> {
        let Err(e) = self.audit_dual_bounds(x) else { return Ok(()) };
        match resolve(self.widen_dual_bounds(model, DUAL_BOUND_PROBE_FACTOR))? {
            Some(wide) if (wide - objective).abs() <= DUAL_BOUND_PROBE_TOL * objective.abs().max(1.0) => Ok(()),
            _ => Err(e.into()),
        }
    }

    /// `θ` values at a solution.
    pub fn theta_values(&self, x: &[f64]) -> Vec<f64> {
        self.layout.theta.iter().map(|&c| x[c]).collect()
    }
}

/// Feasible interval of `z` under the McCormick envelope of `z = b·y` at
/// fixed `(b, y)` with `y ∈ [lo, hi]`: returns `(max of lower rows, min of
/// upper rows)`.
pub fn mccormick_interval(b: f64, y: f64, lo: f64, hi: f64) -> (f64, f64) {
    let lower = (lo * b).max(y - hi * (1.0 - b));
    let upper = (hi * b).min(y - lo * (1.0 - b));
    (lower, upper)
}

/// Appends the four envelope rows of `z = b·y` for a binary column `b` and
/// a column `y` with finite bounds `[L, U]`:
/// `z ≤ U·b`, `z ≥ L·b`, `z ≤ y − L·(1−b)`, `z ≥ y − U·(1−b)`.
pub fn mccormick_binary_product(m: &mut LinearModel, b: usize, y: usize, z: usize) -> Result<[usize; 4], ReformError> {
    let (lo, hi) = (m.lower[y], m.upper[y]);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(ReformError::UnboundedFactor { name: m.names[y].clone() });
    }
    let n = m.names[z].clone();
    Ok([
        m.add_row(format!("mc_ub_{n}"), &[(z, 1.0), (b, -hi)], Relation::Le, 0.0),
        m.add_row(format!("mc_lb_{n}"), &[(z, 1.0), (b, -lo)], Relation::Ge, 0.0),
        m.add_row(format!("mc_yu_{n}"), &[(z, 1.0), (y, -1.0), (b, -lo)], Relation::Le, -lo),
        m.add_row(format!("mc_yl_{n}"), &[(z, 1.0), (y, -1.0), (b, -hi)], Relation::Ge, -hi),
    ])
}

/// Incremental column bookkeeping.
struct Builder {
    m: LinearModel,
    families: Vec<Family>,
    bounded: Vec<usize>,
}

impl Builder {
    fn family(&mut self, name: &str, count: usize, lb: f64, ub: f64, bounded: bool) -> Vec<usize> {
        let start = self.m.num_vars();
        let cols: Vec<usize> = (0..count)
            .map(|i| self.m.add_var(format!("{name}_{}", i + 1), lb, ub, VarKind::Continuous, 0.0))
            .collect();
        if bounded {
            self.bounded.extend(&cols);
        }
        self.families.push(Family { name: name.to_string(), range: start..self.m.num_vars() });
        cols
    }

    fn matrix(&mut self, name: &str, n: usize, diag: (f64, f64), off: (f64, f64)) -> Vec<Vec<usize>> {
        let start = self.m.num_vars();
        let mut out = vec![vec![0; n]; n];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                let (lb, ub) = if a == b { diag } else { off };
                *cell = self.m.add_var(format!("{name}_{}_{}", a + 1, b + 1), lb, ub, VarKind::Continuous, 0.0);
                self.bounded.push(*cell);
            }
        }
        self.families.push(Family { name: name.to_string(), range: start..self.m.num_vars() });
        out
    }

    /// Product column `x_col · f_col` with its envelope.
    fn product(&mut self, name: String, x_col: usize, f_col: usize) -> Result<usize, ReformError> {
        let (lo, hi) = (self.m.lower[f_col], self.m.upper[f_col]);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(ReformError::UnboundedFactor { name: self.m.names[f_col].clone() });
        }
        let z = self.m.add_var(name, lo.min(0.0), hi.max(0.0), VarKind::Continuous, 0.0);
        mccormick_binary_product(&mut self.m, x_col, f_col, z)?;
        Ok(z)
    }

    fn close_family(&mut self, name: &str, start: usize) {
        self.families.push(Family { name: name.to_string(), range: start..self.m.num_vars() });
    }

    fn obj(&mut self, c: usize, v: f64) {
        self.m.objective[c] += v;
    }
}

/// Stage block, `θ`, cut rows and CVaR columns shared by all types.
struct Skeleton {
    b: Builder,
    stage: StageCols,
    theta: Vec<usize>,
    cvar_shift: Option<usize>,
    cvar_pi: Vec<usize>,
}

fn skeleton(
    inst: &Instance,
    t: usize,
    link: StateLink<'_>,
    xi: &[f64],
    cuts: &[Vec<Cut>],
    risk: Option<Risk>,
) -> Result<Skeleton, ReformError> {
    if t >= inst.t {
        return Err(ReformError::NoSuccessor { t, stages: inst.t });
    }
    let mut m = LinearModel::new();
    let stage = append_stage_block(&mut m, inst, t, link, xi, None);
    let mut families = vec![Family { name: "x".into(), range: stage.x[0]..stage.x[inst.i - 1] + 1 }];
    families.push(Family { name: "y".into(), range: stage.y[0][0]..stage.y[inst.i - 1][inst.j - 1] + 1 });
    if let Some(z) = &stage.z {
        families.push(Family { name: "z_copy".into(), range: z[0]..z[inst.i - 1] + 1 });
    }
    let mut b = Builder { m, families, bounded: Vec::new() };
    let k_next = inst.stage_k(t + 1);
    let theta = b.family("theta", k_next, inst.value_lower_bound_from(t + 1), f64::INFINITY, false);
    for (k, list) in cuts.iter().enumerate().take(k_next) {
        for (l, cut) in list.iter().enumerate() {
            let mut coeffs = vec![(theta[k], 1.0)];
            coeffs.extend(stage.x.iter().zip(&cut.pi).map(|(&c, &p)| (c, -p)));
            b.m.add_row(format!("cut_{}_{}", k + 1, l + 1), &coeffs, Relation::Ge, cut.v);
        }
    }
    let (cvar_shift, cvar_pi) = match risk {
        Some(r) => {
            let shift = b.family("cvar_shift", 1, f64::NEG_INFINITY, f64::INFINITY, false)[0];
            b.obj(shift, r.lambda);
            let pi = b.family("cvar_pi", k_next, 0.0, f64::INFINITY, false);
            for k in 0..k_next {
                b.m.add_row(format!("cvar_tail_{}", k + 1), &[(pi[k], 1.0), (shift, 1.0), (theta[k], -1.0)], Relation::Ge, 0.0);
            }
            (Some(shift), pi)
        }
        None => (None, Vec::new()),
    };
    Ok(Skeleton { b, stage, theta, cvar_shift, cvar_pi })
}

/// Appends the value rows `LHS_k − c·π_k − (1−λ)θ_k ≥ 0` (risk) or
/// `LHS_k − θ_k ≥ 0`.
fn value_rows(sk: &mut Skeleton, lhs: Vec<Vec<(usize, f64)>>, risk: Option<Risk>) {
    for (k, mut coeffs) in lhs.into_iter().enumerate() {
        match risk {
            Some(r) => {
                coeffs.push((sk.cvar_pi[k], -r.lambda / (1.0 - r.alpha)));
                coeffs.push((sk.theta[k], -(1.0 - r.lambda)));
            }
            None => coeffs.push((sk.theta[k], -1.0)),
        }
        sk.b.m.add_row(format!("value_{}", k + 1), &coeffs, Relation::Ge, 0.0);
    }
}

fn finish(sk: Skeleton, duals: DualLayout, psd_blocks: Vec<PsdBlockRef>, big_m: f64) -> StageBuild {
    let layout = VarLayout {
        families: sk.b.families,
        stage: sk.stage,
        theta: sk.theta,
        cvar_shift: sk.cvar_shift,
        cvar_pi: sk.cvar_pi,
        bounded_duals: sk.b.bounded,
        duals,
    };
    StageBuild { model: sk.b.m, layout, psd_blocks, big_m }
}

/// Stage model under the Type-1 (moment bounds) set.
pub fn build_type1_stage(
    inst: &Instance,
    t: usize,
    link: StateLink<'_>,
    xi: &[f64],
    cuts: &[Vec<Cut>],
    risk: Option<Risk>,
    opts: &BuildOptions,
) -> Result<StageBuild, ReformError> {
    let big_m = opts.big_m.unwrap_or_else(|| default_big_m(inst));
    let mut sk = skeleton(inst, t, link, xi, cuts, risk)?;
    let (ni, nj) = (inst.i, inst.j);
    let x = sk.stage.x.clone();
    let alpha = sk.b.family("alpha", 1 + 2 * nj, 0.0, big_m, true);
    let beta = sk.b.family("beta", 1 + 2 * nj, 0.0, big_m, true);

    // Constant parts: −αᵀl(0) + βᵀu(0).
    let (l0, u0) = type1_bounds(inst, &vec![0.0; ni]);
    for r in 0..1 + 2 * nj {
        sk.b.obj(alpha[r], -l0[r]);
        sk.b.obj(beta[r], u0[r]);
    }
    // Decision-dependent parts through the products with x.
    let mut fams: Vec<Vec<Vec<usize>>> = Vec::new();
    for (fname, src, offset) in [("z_alpha2", &alpha, 1), ("z_alpha3", &alpha, 1 + nj), ("z_beta2", &beta, 1), ("z_beta3", &beta, 1 + nj)] {
        let start = sk.b.m.num_vars();
        let mut fam = vec![vec![0; ni]; nj];
        for j in 0..nj {
            for i in 0..ni {
                fam[j][i] = sk.b.product(format!("{fname}_{}_{}", j + 1, i + 1), x[i], src[offset + j])?;
            }
        }
        sk.b.close_family(fname, start);
        fams.push(fam);
    }
    for j in 0..nj {
        let s_bar = inst.mu_bar[j].powi(2) + inst.sigma_bar[j].powi(2);
        for i in 0..ni {
            let mean_slope = inst.mu_bar[j] * inst.lambda_mu[j][i];
            let second_slope = s_bar * inst.lambda_s[j][i];
            sk.b.obj(fams[0][j][i], -mean_slope);
            sk.b.obj(fams[1][j][i], -second_slope * inst.eps_s_lo[j]);
            sk.b.obj(fams[2][j][i], mean_slope);
            sk.b.obj(fams[3][j][i], second_slope * inst.eps_s_hi[j]);
        }
    }

    let lhs = inst
        .stage_support(t + 1)
        .iter()
        .map(|xk| {
            let mut c = vec![(alpha[0], -1.0), (beta[0], 1.0)];
            for j in 0..nj {
                c.push((alpha[1 + j], -xk[j]));
                c.push((beta[1 + j], xk[j]));
                c.push((alpha[1 + nj + j], -xk[j] * xk[j]));
                c.push((beta[1 + nj + j], xk[j] * xk[j]));
            }
            c
        })
        .collect();
    value_rows(&mut sk, lhs, risk);
    let [z_alpha2, z_alpha3, z_beta2, z_beta3]: [Vec<Vec<usize>>; 4] = fams.try_into().expect("four families");
    Ok(finish(sk, DualLayout::Type1 { alpha, beta, z_alpha2, z_alpha3, z_beta2, z_beta3 }, Vec::new(), big_m))
}

/// Product families `x_i·M_jj'` and `x_i'·(x_i·M_jj')` of a matrix block.
type Products = (Vec<Vec<Vec<usize>>>, Vec<Vec<Vec<Vec<usize>>>>);

fn matrix_products(b: &mut Builder, x: &[usize], mat: &[Vec<usize>], first: &str, second: Option<&str>) -> Result<Products, ReformError> {
    let (ni, nj) = (x.len(), mat.len());
    let start = b.m.num_vars();
    let mut z = vec![vec![vec![0; nj]; nj]; ni];
    for i in 0..ni {
        for a in 0..nj {
            for c in 0..nj {
                z[i][a][c] = b.product(format!("{first}_{}_{}_{}", i + 1, a + 1, c + 1), x[i], mat[a][c])?;
            }
        }
    }
    b.close_family(first, start);
    let mut v = Vec::new();
    if let Some(name) = second {
        let start = b.m.num_vars();
        v = vec![vec![vec![vec![0; nj]; nj]; ni]; ni];
        for i in 0..ni {
            for i2 in 0..ni {
                for a in 0..nj {
                    for c in 0..nj {
                        v[i][i2][a][c] = b.product(format!("{name}_{}_{}_{}_{}", i + 1, i2 + 1, a + 1, c + 1), x[i2], z[i][a][c])?;
                    }
                }
            }
        }
        b.close_family(name, start);
    }
    Ok((z, v))
}

/// Coefficients of `(ξ − μ(x))ᵀ Y (ξ − μ(x))` in the columns `Y`, `x_i·Y`
/// and `x_i'·x_i·Y`.
fn centred_quadratic(inst: &Instance, xi: &[f64], y: &[Vec<usize>], z: &[Vec<Vec<usize>>], v: &[Vec<Vec<Vec<usize>>>]) -> Vec<(usize, f64)> {
    let (ni, nj) = (inst.i, inst.j);
    let mb = &inst.mu_bar;
    let lam = &inst.lambda_mu;
    let mut c = Vec::new();
    for j in 0..nj {
        for jp in 0..nj {
            c.push((y[j][jp], xi[j] * xi[jp]));
            // −ξ_j μ_j'(x) (Y_jj' + Y_j'j)
            c.push((y[j][jp], -xi[j] * mb[jp]));
            c.push((y[jp][j], -xi[j] * mb[jp]));
            for i in 0..ni {
                c.push((z[i][jp][j], -xi[j] * mb[jp] * lam[jp][i]));
                c.push((z[i][j][jp], -xi[j] * mb[jp] * lam[jp][i]));
            }
            // μ_j(x) μ_j'(x) Y_jj'
            let mm = mb[j] * mb[jp];
            c.push((y[j][jp], mm));
            for i in 0..ni {
                c.push((z[i][j][jp], mm * (lam[j][i] + lam[jp][i])));
                for ip in 0..ni {
                    c.push((v[i][ip][j][jp], mm * lam[j][i] * lam[jp][ip]));
                }
            }
        }
    }
    c.retain(|&(_, a)| a != 0.0);
    c
}

fn symmetry_rows(m: &mut LinearModel, name: &str, mat: &[Vec<usize>]) {
    for a in 0..mat.len() {
        for b in a + 1..mat.len() {
            m.add_row(format!("sym_{name}_{}_{}", a + 1, b + 1), &[(mat[a][b], 1.0), (mat[b][a], -1.0)], Relation::Eq, 0.0);
        }
    }
}

/// Stage model under the Type-2 (exact mean and covariance) set.
pub fn build_type2_stage(
    inst: &Instance,
    t: usize,
    link: StateLink<'_>,
    xi: &[f64],
    cuts: &[Vec<Cut>],
    risk: Option<Risk>,
    opts: &BuildOptions,
) -> Result<StageBuild, ReformError> {
    let big_m = opts.big_m.unwrap_or_else(|| default_big_m(inst));
    let mut sk = skeleton(inst, t, link, xi, cuts, risk)?;
    let (ni, nj) = (inst.i, inst.j);
    let x = sk.stage.x.clone();
    let s = sk.b.family("s", 1, f64::NEG_INFINITY, f64::INFINITY, false)[0];
    let u = sk.b.family("u", nj, -big_m, big_m, true);
    let y = sk.b.matrix("Y", nj, (-big_m, big_m), (-big_m, big_m));
    let start = sk.b.m.num_vars();
    let mut w = vec![vec![0; nj]; ni];
    for i in 0..ni {
        for j in 0..nj {
            w[i][j] = sk.b.product(format!("w_{}_{}", i + 1, j + 1), x[i], u[j])?;
        }
    }
    sk.b.close_family("w", start);
    let (z, v) = matrix_products(&mut sk.b, &x, &y, "z", Some("v"))?;
    if opts.symmetry_rows {
        symmetry_rows(&mut sk.b.m, "Y", &y);
    }

    // s + uᵀμ(x) + Σ(x)•Y
    sk.b.obj(s, 1.0);
    for j in 0..nj {
        sk.b.obj(u[j], inst.mu_bar[j]);
        for i in 0..ni {
            sk.b.obj(w[i][j], inst.mu_bar[j] * inst.lambda_mu[j][i]);
        }
        for jp in 0..nj {
            let sig = inst.sigma_mat.get(j, jp);
            sk.b.obj(y[j][jp], sig);
            for i in 0..ni {
                sk.b.obj(z[i][j][jp], sig * inst.lambda_cov[i]);
            }
        }
    }

    let lhs = inst
        .stage_support(t + 1)
        .iter()
        .map(|xk| {
            let mut c = vec![(s, 1.0)];
            c.extend((0..nj).map(|j| (u[j], xk[j])));
            c.extend(centred_quadratic(inst, xk, &y, &z, &v));
            c
        })
        .collect();
    value_rows(&mut sk, lhs, risk);
    Ok(finish(sk, DualLayout::Type2 { s, u, y, w, z, v }, Vec::new(), big_m))
}

/// Stage model under the Type-3 (mean ellipsoid, covariance bound) set.
/// The returned blocks `Z` and `Y` must be kept positive semidefinite by
/// the caller.
pub fn build_type3_stage(
    inst: &Instance,
    t: usize,
    link: StateLink<'_>,
    xi: &[f64],
    cuts: &[Vec<Cut>],
    risk: Option<Risk>,
    opts: &BuildOptions,
) -> Result<StageBuild, ReformError> {
    let big_m = opts.big_m.unwrap_or_else(|| default_big_m(inst));
    let mut sk = skeleton(inst, t, link, xi, cuts, risk)?;
    let (ni, nj) = (inst.i, inst.j);
    let x = sk.stage.x.clone();
    let s = sk.b.family("s", 1, f64::NEG_INFINITY, f64::INFINITY, false)[0];
    // Diagonals of PSD matrices are nonnegative.
    let z1 = sk.b.matrix("z1", nj, (0.0, big_m), (-big_m, big_m));
    let z2 = sk.b.family("z2", nj, -big_m, big_m, true);
    let z3 = sk.b.family("z3", 1, 0.0, big_m, true)[0];
    let y = sk.b.matrix("Y", nj, (0.0, big_m), (-big_m, big_m));
    let (w, _) = matrix_products(&mut sk.b, &x, &z1, "w", None)?;
    let start = sk.b.m.num_vars();
    let mut u = vec![vec![0; nj]; ni];
    for i in 0..ni {
        for j in 0..nj {
            u[i][j] = sk.b.product(format!("u_{}_{}", i + 1, j + 1), x[i], z2[j])?;
        }
    }
    sk.b.close_family("u", start);
    let (r, v) = matrix_products(&mut sk.b, &x, &y, "R", Some("v"))?;
    if opts.symmetry_rows {
        symmetry_rows(&mut sk.b.m, "z1", &z1);
        symmetry_rows(&mut sk.b.m, "Y", &y);
    }

    // s + Σ(x)•z1 − 2μ(x)ᵀz2 + γ z3 + η Σ(x)•Y
    sk.b.obj(s, 1.0);
    sk.b.obj(z3, inst.gamma);
    for j in 0..nj {
        sk.b.obj(z2[j], -2.0 * inst.mu_bar[j]);
        for i in 0..ni {
            sk.b.obj(u[i][j], -2.0 * inst.mu_bar[j] * inst.lambda_mu[j][i]);
        }
        for jp in 0..nj {
            let sig = inst.sigma_mat.get(j, jp);
            sk.b.obj(z1[j][jp], sig);
            sk.b.obj(y[j][jp], inst.eta_cov * sig);
            for i in 0..ni {
                sk.b.obj(w[i][j][jp], sig * inst.lambda_cov[i]);
                sk.b.obj(r[i][j][jp], inst.eta_cov * sig * inst.lambda_cov[i]);
            }
        }
    }

    let lhs = inst
        .stage_support(t + 1)
        .iter()
        .map(|xk| {
            let mut c = vec![(s, 1.0)];
            c.extend((0..nj).map(|j| (z2[j], -2.0 * xk[j])));
            c.extend(centred_quadratic(inst, xk, &y, &r, &v));
            c
        })
        .collect();
    value_rows(&mut sk, lhs, risk);

    let mut zcols = vec![vec![0; nj + 1]; nj + 1];
    for a in 0..nj {
        for b in 0..nj {
            zcols[a][b] = z1[a][b];
        }
        zcols[a][nj] = z2[a];
        zcols[nj][a] = z2[a];
    }
    zcols[nj][nj] = z3;
    let blocks = vec![
        PsdBlockRef { name: PsdBlockName::Z, dim: nj + 1, cols: zcols },
        PsdBlockRef { name: PsdBlockName::Y, dim: nj, cols: y.clone() },
    ];
    Ok(finish(sk, DualLayout::Type3 { s, z1, z2, z3, y, w, u, r, v }, blocks, big_m))
}

/// Compiles stage `t` for the given ambiguity type. The last stage has no
/// successor and compiles to the plain stage block.
#[allow(clippy::too_many_arguments)]
pub fn build_stage(
    inst: &Instance,
    ty: AmbiguityType,
    t: usize,
    link: StateLink<'_>,
    xi: &[f64],
    cuts: &[Vec<Cut>],
    risk: Option<Risk>,
    opts: &BuildOptions,
) -> Result<StageBuild, ReformError> {
    if t == inst.t {
        let mut m = LinearModel::new();
        let stage = append_stage_block(&mut m, inst, t, link, xi, None);
        let mut families = vec![
            Family { name: "x".into(), range: stage.x[0]..stage.x[inst.i - 1] + 1 },
            Family { name: "y".into(), range: stage.y[0][0]..stage.y[inst.i - 1][inst.j - 1] + 1 },
        ];
        if let Some(z) = &stage.z {
            families.push(Family { name: "z_copy".into(), range: z[0]..z[inst.i - 1] + 1 });
        }
        let layout = VarLayout {
            families,
            stage,
            theta: Vec::new(),
            cvar_shift: None,
            cvar_pi: Vec::new(),
            bounded_duals: Vec::new(),
            duals: DualLayout::None,
        };
        return Ok(StageBuild { model: m, layout, psd_blocks: Vec::new(), big_m: 0.0 });
    }
    match ty {
        AmbiguityType::Type1 => build_type1_stage(inst, t, link, xi, cuts, risk, opts),
        AmbiguityType::Type2 => build_type2_stage(inst, t, link, xi, cuts, risk, opts),
        AmbiguityType::Type3 => build_type3_stage(inst, t, link, xi, cuts, risk, opts),
    }
}

/// Stage-`t` model with the state frozen at `x`, the flows at zero and
/// `θ = q`, so that its optimum is the dual-side value of the worst-case
/// expectation of `q` at `x`.
pub fn fixed_state_build(
    inst: &Instance,
    ty: AmbiguityType,
    t: usize,
    x: &[f64],
    q: &[f64],
    risk: Option<Risk>,
    opts: &BuildOptions,
) -> Result<StageBuild, ReformError> {
    let zeros = vec![0.0; inst.j];
    let mut b = build_stage(inst, ty, t, StateLink::Fixed(x), &zeros, &[], risk, opts)?;
    for (i, &c) in b.layout.stage.x.iter().enumerate() {
        b.model.lower[c] = x[i];
        b.model.upper[c] = x[i];
    }
    for &c in b.layout.stage.y.iter().flatten() {
        b.model.upper[c] = 0.0;
    }
    for (k, &c) in b.layout.theta.iter().enumerate() {
        b.model.lower[c] = q[k];
        b.model.upper[c] = q[k];
    }
    Ok(b)
}

/// Dual-side value of the worst-case expectation of `q` at the frozen
/// state `x` (Types 1 and 2; Type 3 needs the PSD handling of
/// [`crate::misdp`]).
pub fn dual_side_value(
    inst: &Instance,
    ty: AmbiguityType,
    t: usize,
    x: &[f64],
    q: &[f64],
    risk: Option<Risk>,
    opts: &BuildOptions,
) -> Result<f64, ReformError> {
    assert!(ty != AmbiguityType::Type3, "Type 3 dual values need PSD handling");
    let b = fixed_state_build(inst, ty, t, x, q, risk, opts)?;
    let sol = solve_milp(&b.model)?;
    if sol.status != MipStatus::Optimal {
        return Err(ReformError::DualStatus(sol.status));
    }
    b.audit_with_probe(&b.model, &sol.x, sol.objective, |wide| {
        let w = solve_milp(&wide)?;
        Ok::<_, ReformError>((w.status == MipStatus::Optimal).then_some(w.objective))
    })?;
    Ok(sol.objective)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_examples() {
        assert_eq!(mccormick_interval(1.0, 3.7, 0.0, 10.0), (3.7, 3.7));
        let (lo, hi) = mccormick_interval(0.0, 2.5, -5.0, 5.0);
        assert_eq!((lo, hi), (0.0, 0.0));
    }

    #[test]
    fn unbounded_factor_rejected() {
        let mut m = LinearModel::new();
        let b = m.add_var("b", 0.0, 1.0, VarKind::Binary, 0.0);
        let y = m.add_var("y", 0.0, f64::INFINITY, VarKind::Continuous, 0.0);
        let z = m.add_var("z", 0.0, 10.0, VarKind::Continuous, 0.0);
        assert!(matches!(mccormick_binary_product(&mut m, b, y, z), Err(ReformError::UnboundedFactor { .. })));
    }
}
