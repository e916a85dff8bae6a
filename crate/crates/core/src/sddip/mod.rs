//! Stochastic dual dynamic integer programming over the compiled stage
//! models.
//!
//! Each iteration runs a forward pass (stage 1 once, then sampled paths
//! whose next realization is drawn from the worst-case distribution of the
//! current stage model), evaluates an upper bound and, unless a stopping
//! test fires, a backward pass that adds one Lagrangian cut per distinct
//! trial state and realization.

mod cuts;
mod lagrangian;
mod report;

pub use cuts::{Cut, CutOrigin, CutPool};
pub use lagrangian::{lagrangian_dual, DualMethod, LagrangianConfig, LagrangianEval, LagrangianResult};
pub use report::{BoundMode, EmptyAmbiguityInfo, RunConfig, RunStatus, SolveReport, UbKind, UbMode};

use crate::ambiguity::{is_nonempty, worst_case, AmbiguityError, AmbiguityType, Risk};
use crate::lp::{LinearModel, MipSolution, MipStatus, SolverError};
use crate::misdp::{prepare_stage_model, solve_prepared, type3_dual_side_value, MisdpError, PsdHandling};
use crate::model::{stage_cost, CapacityForm, Instance, ModelError, StateLink};
use crate::reformulate::{build_stage, default_big_m, BuildOptions, ReformError, StageBuild};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;
use thiserror::Error;

/// Errors of an SDDiP run.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SddipError {
    #[error("invalid run: {0}")]
    Invalid(String),
    #[error("ambiguity set of stage {stage} is empty at x = {x:?}")]
    EmptyAmbiguity { stage: usize, x: Vec<f64> },
    #[error("stage {t} model is {status:?}")]
    StageStatus { t: usize, status: MipStatus },
    #[error("lower bound {lb} exceeds upper bound {ub}")]
    Sandwich { lb: f64, ub: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reform(#[from] ReformError),
    #[error(transparent)]
    Misdp(#[from] MisdpError),
    #[error(transparent)]
    Ambiguity(#[from] AmbiguityError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl SddipError {
    fn is_dual_at_bound(&self) -> bool {
        matches!(self, SddipError::Reform(ReformError::DualAtBound { .. }) | SddipError::Misdp(MisdpError::Reform(ReformError::DualAtBound { .. })))
    }
}

/// Risk measure applied by the stage-`t` model to the stage-`t+1` values.
pub fn successor_risk(inst: &Instance, t: usize) -> Option<Risk> {
    if t >= inst.t {
        return None;
    }
    let lambda = inst.risk_lambda_at(t + 1);
    (lambda != 0.0).then(|| Risk { lambda, alpha: inst.risk_alpha_at(t + 1) })
}

fn state_key(x: &[f64]) -> Vec<u8> {
    x.iter().map(|&v| u8::from(v > 0.5)).collect()
}

fn rounded(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect()
}

/// Solution of one stage model at a fixed previous state.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    /// Rounded state `x_t`.
    pub x: Vec<f64>,
    /// Stage cost `g_t(y_t)`.
    pub cost: f64,
    /// `θ_t^k` values.
    pub theta: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub eigen_cuts: usize,
}

/// Stage-model factory and solver shared by the passes.
#[derive(Debug, Clone)]
pub struct Engine {
    pub inst: Instance,
    pub ty: AmbiguityType,
    pub handling: PsdHandling,
    pub opts: BuildOptions,
    pub eigen_tol: f64,
    pub lagrangian: LagrangianConfig,
}

impl Engine {
    pub fn new(inst: Instance, ty: AmbiguityType, mode: BoundMode, big_m: f64) -> Self {
        let handling = if ty == AmbiguityType::Type3 && mode == BoundMode::Ub { PsdHandling::DdInner } else { PsdHandling::Outer };
        Self {
            inst,
            ty,
            handling,
            opts: BuildOptions { big_m: Some(big_m), symmetry_rows: true },
            eigen_tol: crate::misdp::EIGEN_CUT_TOL,
            lagrangian: LagrangianConfig::default(),
        }
    }

    fn build(&self, t: usize, link: StateLink<'_>, k: usize, pool: &CutPool) -> Result<StageBuild, SddipError> {
        let xi = &self.inst.stage_support(t)[k];
        let cuts = if t < self.inst.t { pool.stage(t + 1) } else { &[] };
        Ok(build_stage(&self.inst, self.ty, t, link, xi, cuts, successor_risk(&self.inst, t), &self.opts)?)
    }

    fn solve(&self, t: usize, b: &StageBuild, model: &mut LinearModel) -> Result<(MipSolution, usize), SddipError> {
        let s = solve_prepared(model, &b.psd_blocks, self.handling, self.eigen_tol)?;
        if s.solution.status != MipStatus::Optimal {
            return Err(SddipError::StageStatus { t, status: s.solution.status });
        }
        let probe = b.audit_with_probe(model, &s.solution.x, s.solution.objective, |mut wide| {
            let w = solve_prepared(&mut wide, &b.psd_blocks, self.handling, self.eigen_tol)?;
            Ok::<_, SddipError>((w.solution.status == MipStatus::Optimal).then_some(w.solution.objective))
        });
        if let Err(e) = probe {
            if !e.is_dual_at_bound() {
                return Err(e);
            }
            let x = rounded(&b.layout.stage.x.iter().map(|&c| s.solution.x[c]).collect::<Vec<_>>());
            if t < self.inst.t && !is_nonempty(&self.inst, self.ty, t + 1, &x) {
                return Err(SddipError::EmptyAmbiguity { stage: t + 1, x });
            }
            return Err(e);
        }
        Ok((s.solution, s.eigen_cuts))
    }

    /// Solves stage `t` at the previous state `x_prev` and realization `k`.
    pub fn solve_fixed(&self, t: usize, x_prev: &[f64], k: usize, pool: &CutPool) -> Result<StageOutcome, SddipError> {
        let b = self.build(t, StateLink::Fixed(x_prev), k, pool)?;
        let mut m = prepare_stage_model(&b, self.handling)?;
        let (sol, eigen_cuts) = self.solve(t, &b, &mut m)?;
        let x = rounded(&b.layout.stage.x.iter().map(|&c| sol.x[c]).collect::<Vec<_>>());
        let y: Vec<Vec<f64>> = b.layout.stage.y.iter().map(|row| row.iter().map(|&c| sol.x[c]).collect()).collect();
        Ok(StageOutcome { x, cost: stage_cost(&self.inst, &y), theta: b.theta_values(&sol.x), objective: sol.objective, bound: sol.best_bound, eigen_cuts })
    }

    /// Lagrangian cut of stage `t`, realization `k`, at the trial state
    /// `x_hat`. Returns the cut, the MILP solves used and the eigen-cuts
    /// added.
    pub fn lagrangian_cut(&self, t: usize, k: usize, x_hat: &[f64], pool: &CutPool) -> Result<(Cut, usize, usize), SddipError> {
        let b = self.build(t, StateLink::Copy, k, pool)?;
        let mut m = prepare_stage_model(&b, self.handling)?;
        let zc = b.layout.stage.z.clone().expect("copy link");
        let base: Vec<f64> = zc.iter().map(|&c| m.objective[c]).collect();
        let radius = 1.0 + self.inst.value_lower_bound_from(t).abs();
        let mut solves = 0;
        let mut eig = 0;
        let res = lagrangian_dual(
            |pi: &[f64]| -> Result<LagrangianEval, SddipError> {
                for (i, &c) in zc.iter().enumerate() {
                    m.objective[c] = base[i] - pi[i];
                }
                let (sol, e) = self.solve(t, &b, &mut m)?;
                solves += 1;
                eig += e;
                Ok(LagrangianEval { lower: sol.best_bound, upper: sol.objective, z: rounded(&zc.iter().map(|&c| sol.x[c]).collect::<Vec<_>>()) })
            },
            x_hat,
            radius,
            &self.lagrangian,
        )?;
        let origin = if !b.psd_blocks.is_empty() && self.handling == PsdHandling::Outer { CutOrigin::RelaxedLagrangian } else { CutOrigin::Lagrangian };
        Ok((Cut { v: res.value, pi: res.pi, origin }, solves, eig))
    }

    /// Worst-case value of `q` over the stage-`t` ambiguity set at `x`,
    /// matching the PSD handling of the run.
    pub fn worst_case_value(&self, t: usize, x: &[f64], q: &[f64]) -> Result<f64, SddipError> {
        let risk = successor_risk(&self.inst, t - 1);
        if self.ty == AmbiguityType::Type3 && self.handling != PsdHandling::Outer {
            if !is_nonempty(&self.inst, self.ty, t, x) {
                return Err(SddipError::EmptyAmbiguity { stage: t, x: x.to_vec() });
            }
            return Ok(type3_dual_side_value(&self.inst, t - 1, x, q, risk, &self.opts, self.handling, self.eigen_tol)?);
        }
        Ok(self.worst_case(t, x, q)?.value)
    }

    fn worst_case(&self, t: usize, x: &[f64], q: &[f64]) -> Result<crate::ambiguity::WorstCase, SddipError> {
        worst_case(&self.inst, self.ty, t, x, q, successor_risk(&self.inst, t - 1)).map_err(|e| match e {
            AmbiguityError::EmptyAmbiguity { stage, x } => SddipError::EmptyAmbiguity { stage, x },
            other => other.into(),
        })
    }

    /// Number of scenario-tree leaves below stage 1.
    pub fn tree_size(&self) -> f64 {
        (2..=self.inst.t).map(|t| self.inst.stage_k(t) as f64).product()
    }

    /// Value of the current policy from the first-stage outcome, evaluated
    /// on the full scenario tree.
    pub fn policy_value(&self, pool: &CutPool, first: &StageOutcome) -> Result<f64, SddipError> {
        let mut memo = BTreeMap::new();
        Ok(first.cost + self.continuation(2, &first.x, pool, &mut memo)?)
    }

    fn continuation(&self, t: usize, x_prev: &[f64], pool: &CutPool, memo: &mut BTreeMap<(usize, Vec<u8>), f64>) -> Result<f64, SddipError> {
        let key = (t, state_key(x_prev));
        if let Some(&v) = memo.get(&key) {
            return Ok(v);
        }
        let mut q = Vec::with_capacity(self.inst.stage_k(t));
        for k in 0..self.inst.stage_k(t) {
            let out = self.solve_fixed(t, x_prev, k, pool)?;
            let tail = if t < self.inst.t { self.continuation(t + 1, &out.x, pool, memo)? } else { 0.0 };
            q.push(out.cost + tail);
        }
        let v = self.worst_case_value(t, x_prev, &q)?;
        memo.insert(key, v);
        Ok(v)
    }

    fn sample(&self, t: usize, x: &[f64], theta: &[f64], rng: &mut ChaCha8Rng) -> Result<usize, SddipError> {
        let p = self.worst_case(t, x, theta)?.p;
        let w: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
        Ok(match WeightedIndex::new(&w) {
            Ok(d) => d.sample(rng),
            Err(_) => 0,
        })
    }
}

/// Forward-pass output.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    pub first: StageOutcome,
    /// Per path, the states `x_1..x_{T-1}`.
    pub trial_states: Vec<Vec<Vec<f64>>>,
    /// Per path, the realized cost `Σ_t g_t`.
    pub path_costs: Vec<f64>,
    pub stage_solves: usize,
    pub eigen_cuts_per_stage: Vec<usize>,
}

/// Solves stage 1 once and simulates `num_paths` paths, sampling each next
/// realization from the worst-case distribution of the current stage model.
pub fn forward_pass(engine: &Engine, pool: &CutPool, num_paths: usize, rng: &mut ChaCha8Rng) -> Result<ForwardResult, SddipError> {
    let inst = &engine.inst;
    let mut eig = vec![0; inst.t];
    let first = engine.solve_fixed(1, &vec![0.0; inst.i], 0, pool)?;
    eig[0] += first.eigen_cuts;
    let mut solves = 1;
    let mut trial_states = Vec::with_capacity(num_paths);
    let mut path_costs = Vec::with_capacity(num_paths);
    for _ in 0..num_paths {
        let mut states = vec![first.x.clone()];
        let mut cost = first.cost;
        let (mut x, mut theta) = (first.x.clone(), first.theta.clone());
        for t in 2..=inst.t {
            let k = engine.sample(t, &x, &theta, rng)?;
            let out = engine.solve_fixed(t, &x, k, pool)?;
            solves += 1;
            eig[t - 1] += out.eigen_cuts;
            cost += out.cost;
            if t < inst.t {
                states.push(out.x.clone());
            }
            x = out.x;
            theta = out.theta;
        }
        trial_states.push(states);
        path_costs.push(cost);
    }
    Ok(ForwardResult { first, trial_states, path_costs, stage_solves: solves, eigen_cuts_per_stage: eig })
}

/// Backward-pass statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BackwardStats {
    pub cuts_added: usize,
    pub lagrangian_solves: usize,
}

/// Adds one cut per distinct trial state and realization, stage `T` down to
/// stage 2. Realizations are processed in parallel and collected in order.
pub fn backward_pass(engine: &Engine, pool: &mut CutPool, trial_states: &[Vec<Vec<f64>>], eigen_cuts: &mut [usize]) -> Result<BackwardStats, SddipError> {
    let mut stats = BackwardStats::default();
    for t in (2..=engine.inst.t).rev() {
        let mut seen = BTreeSet::new();
        let states: Vec<&Vec<f64>> = trial_states.iter().map(|p| &p[t - 2]).filter(|x| seen.insert(state_key(x))).collect();
        let jobs: Vec<(usize, usize)> = (0..states.len()).flat_map(|s| (0..engine.inst.stage_k(t)).map(move |k| (s, k))).collect();
        let snapshot = &*pool;
        let results: Vec<(usize, (Cut, usize, usize))> = jobs
            .par_iter()
            .map(|&(s, k)| engine.lagrangian_cut(t, k, states[s], snapshot).map(|r| (k, r)))
            .collect::<Result<_, _>>()?;
        for (k, (cut, solves, eig)) in results {
            stats.lagrangian_solves += solves;
            eigen_cuts[t - 1] += eig;
            let dup = pool.stage(t)[k].iter().any(|c| (c.v - cut.v).abs() <= 1e-12 && c.pi.iter().zip(&cut.pi).all(|(a, b)| (a - b).abs() <= 1e-12));
            if !dup {
                pool.add(t, k, cut);
                stats.cuts_added += 1;
            }
        }
    }
    Ok(stats)
}

fn validate(inst: &Instance, cfg: &RunConfig) -> Result<(), SddipError> {
    inst.validate()?;
    if inst.capacity_form == CapacityForm::Cumulative {
        return Err(SddipError::Invalid("the cumulative capacity form is not supported by SDDiP".into()));
    }
    if inst.t < 2 {
        return Err(SddipError::Invalid("SDDiP needs at least two stages".into()));
    }
    if cfg.max_iters == 0 || cfg.num_paths == 0 {
        return Err(SddipError::Invalid("max_iters and num_paths must be positive".into()));
    }
    if !(cfg.tol > 0.0) {
        return Err(SddipError::Invalid(format!("tol must be positive, got {}", cfg.tol)));
    }
    if let Some(l) = cfg.risk_lambda {
        if !(0.0..=1.0).contains(&l) {
            return Err(SddipError::Invalid(format!("risk_lambda must lie in [0, 1], got {l}")));
        }
    }
    if let Some(a) = cfg.risk_alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(SddipError::Invalid(format!("risk_alpha must lie in (0, 1), got {a}")));
        }
    }
    if cfg.bound_mode == BoundMode::Ub && cfg.ty != AmbiguityType::Type3 {
        return Err(SddipError::Invalid("bound_mode ub applies to Type 3 only".into()));
    }
    Ok(())
}

/// Runs SDDiP on `inst` with `cfg`. A dual bound hit at a state with a
/// nonempty ambiguity set restarts the run with a ten times larger bound,
/// up to `cfg.max_escalations` times. An empty ambiguity set yields a
/// report with status [`RunStatus::Unbounded`].
pub fn run(inst: &Instance, cfg: &RunConfig) -> Result<SolveReport, SddipError> {
    validate(inst, cfg)?;
    let mut inst = inst.clone();
    if cfg.risk_lambda.is_some() || cfg.risk_alpha.is_some() {
        let lambda = cfg.risk_lambda.unwrap_or_else(|| inst.risk_lambda_at(2));
        let alpha = cfg.risk_alpha.unwrap_or_else(|| inst.risk_alpha_at(2));
        inst = inst.with_risk(lambda, alpha);
    }
    let mut big_m = cfg.big_m.unwrap_or_else(|| default_big_m(&inst));
    let mut escalations = 0;
    loop {
        match run_once(&inst, cfg, big_m, escalations) {
            Err(e) if e.is_dual_at_bound() && escalations < cfg.max_escalations => {
                escalations += 1;
                big_m *= 10.0;
            }
            other => return other,
        }
    }
}

fn resolved_mode(cfg: &RunConfig) -> BoundMode {
    match (cfg.ty, cfg.bound_mode) {
        (AmbiguityType::Type3, BoundMode::Auto) => BoundMode::Lb,
        (AmbiguityType::Type3, m) => m,
        _ => BoundMode::Auto,
    }
}

fn run_once(inst: &Instance, cfg: &RunConfig, big_m: f64, escalations: usize) -> Result<SolveReport, SddipError> {
    let start = Instant::now();
    let mode = resolved_mode(cfg);
    let mut engine = Engine::new(inst.clone(), cfg.ty, mode, big_m);
    engine.eigen_tol = cfg.eigen_tol;
    if engine.handling == PsdHandling::DdInner && cfg.ub_mode == UbMode::Iterative {
        engine.handling = PsdHandling::DdIterative;
    }
    engine.lagrangian = cfg.lagrangian;
    let exact_ub = engine.tree_size() <= cfg.exact_tree_limit as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pool = CutPool::new(inst);
    let mut report = SolveReport {
        ambiguity: cfg.ty,
        bound_mode: mode,
        status: RunStatus::IterationLimit,
        iterations: 0,
        lb_per_iter: Vec::new(),
        ub_per_iter: Vec::new(),
        lb: None,
        ub: None,
        ub_kind: if exact_ub { UbKind::Exact } else { UbKind::Sampled },
        ub_std_error: None,
        gap: None,
        first_stage_x: Vec::new(),
        cuts: 0,
        stage_solves: 0,
        lagrangian_solves: 0,
        eigen_cuts_per_stage: vec![0; inst.t],
        big_m,
        escalations,
        sampling: "worst_case".into(),
        empty_ambiguity: None,
        iteration_seconds: Vec::new(),
        wall_seconds: 0.0,
    };
    match iterate(&engine, cfg, exact_ub, &mut pool, &mut rng, &mut report) {
        Ok(()) => {}
        Err(SddipError::EmptyAmbiguity { stage, x }) => {
            report.status = RunStatus::Unbounded;
            report.empty_ambiguity = Some(EmptyAmbiguityInfo { stage, x });
            report.lb = None;
            report.ub = None;
            report.gap = None;
        }
        Err(e) => return Err(e),
    }
    report.cuts = pool.len();
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn iterate(engine: &Engine, cfg: &RunConfig, exact_ub: bool, pool: &mut CutPool, rng: &mut ChaCha8Rng, report: &mut SolveReport) -> Result<(), SddipError> {
    let mut visited: BTreeSet<(usize, Vec<u8>)> = BTreeSet::new();
    let mut last_new_state = 0;
    let mut lb = f64::NEG_INFINITY;
    let mut best_ub = f64::INFINITY;
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    for it in 1..=cfg.max_iters {
        let tick = Instant::now();
        report.iterations = it;
        let fw = forward_pass(engine, pool, cfg.num_paths, rng)?;
        report.stage_solves += fw.stage_solves;
        for (acc, e) in report.eigen_cuts_per_stage.iter_mut().zip(&fw.eigen_cuts_per_stage) {
            *acc += e;
        }
        for path in &fw.trial_states {
            for (t, x) in path.iter().enumerate() {
                if visited.insert((t + 1, state_key(x))) {
                    last_new_state = it;
                }
            }
        }
        lb = lb.max(fw.first.bound);
        report.lb_per_iter.push(lb);
        report.lb = Some(lb);
        report.first_stage_x = fw.first.x.clone();
        if exact_ub {
            let ub = engine.policy_value(pool, &fw.first)?;
            candidates.push((ub, fw.first.x.clone()));
            best_ub = best_ub.min(ub);
            report.ub_per_iter.push(Some(best_ub));
            report.ub = Some(best_ub);
            report.gap = Some((best_ub - lb) / best_ub.abs().max(1.0));
        } else {
            report.ub_per_iter.push(None);
        }
        let closed = exact_ub && best_ub - lb <= cfg.tol * best_ub.abs().max(1.0);
        let w = cfg.stall_window;
        let stalled = it > w
            && it - last_new_state >= w
            && report.lb_per_iter[it - 1] - report.lb_per_iter[it - 1 - w] <= cfg.tol * lb.abs().max(1.0);
        if closed || stalled {
            report.status = RunStatus::Converged;
            report.iteration_seconds.push(tick.elapsed().as_secs_f64());
            break;
        }
        let stats = backward_pass(engine, pool, &fw.trial_states, &mut report.eigen_cuts_per_stage)?;
        report.lagrangian_solves += stats.lagrangian_solves;
        report.iteration_seconds.push(tick.elapsed().as_secs_f64());
    }
    if exact_ub {
        let thr = best_ub + cfg.tol * best_ub.abs().max(1.0);
        if let Some(x) = candidates.iter().filter(|(u, _)| *u <= thr).map(|(_, x)| x).min_by(|a, b| a.partial_cmp(b).expect("finite states")) {
            report.first_stage_x = x.clone();
        }
    } else {
        let (mean, se) = sampled_upper_bound(engine, pool, cfg)?;
        report.ub = Some(mean);
        report.ub_std_error = se;
        report.gap = Some((mean - lb) / mean.abs().max(1.0));
    }
    Ok(())
}

/// Monte-Carlo estimate of the policy value under worst-case sampling:
/// `(mean, standard error)`.
fn sampled_upper_bound(engine: &Engine, pool: &CutPool, cfg: &RunConfig) -> Result<(f64, Option<f64>), SddipError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let fw = forward_pass(engine, pool, cfg.ub_samples.max(1), &mut rng)?;
    let n = fw.path_costs.len() as f64;
    let mean = fw.path_costs.iter().sum::<f64>() / n;
    let se = (n > 1.0).then(|| {
        let var = fw.path_costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    Ok((mean, se))
}

/// Lower- and upper-bound runs of a Type-3 instance. Errors with
/// [`SddipError::Sandwich`] if an exactly evaluated upper bound falls below
/// the lower bound by more than the relative slack.
pub fn run_type3_bounds(inst: &Instance, cfg: &RunConfig) -> Result<(SolveReport, SolveReport), SddipError> {
    let lo = run(inst, &RunConfig { ty: AmbiguityType::Type3, bound_mode: BoundMode::Lb, ..cfg.clone() })?;
    let hi = run(inst, &RunConfig { ty: AmbiguityType::Type3, bound_mode: BoundMode::Ub, ..cfg.clone() })?;
    if let (Some(lb), Some(ub), UbKind::Exact) = (lo.lb, hi.ub, hi.ub_kind) {
        if lb > ub + crate::misdp::SANDWICH_REL_TOL * ub.abs().max(1.0) {
            return Err(SddipError::Sandwich { lb, ub });
        }
    }
    Ok((lo, hi))
}
