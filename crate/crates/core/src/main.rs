//! Command-line front door: instance generation, SDDiP solves, the
//! two-stage enumeration oracle, experiment grids, LP dumps and report
//! verification.
//!
//! Exit codes: 0 success, 1 validation error, 2 solver failure, 3 empty
//! ambiguity set (unbounded model).

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddro::ambiguity::{AmbiguityType, Risk};
use ddro::bench::patterns::{pattern_cases, pattern_instance};
use ddro::bench::{enumerate_two_stage, run_experiment, BenchError, EnumError, ExperimentSpec};
use ddro::lp::write_lp_format;
use ddro::model::{generate_instance, CostMode, Distribution, GenSpec, Instance, StateLink};
use ddro::reformulate::{build_stage, BuildOptions};
use ddro::sddip::{run, successor_risk, BoundMode, RunConfig, RunStatus, SddipError, SolveReport, UbMode};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ddro", version, about = "Multistage distributionally robust facility location with decision-dependent ambiguity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance JSON file.
    Gen(GenArgs),
    /// Run SDDiP on an instance.
    Solve(SolveArgs),
    /// Enumerate the first-stage decisions of a two-stage instance.
    Enum(EnumArgs),
    /// Run an experiment grid.
    Bench(BenchArgs),
    /// Dump a compiled stage model in LP format.
    ExportLp(ExportArgs),
    /// Cross-check report files.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Normal,
    Lognormal,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundArg {
    Auto,
    Lb,
    Ub,
}

#[derive(Clone, Copy, ValueEnum)]
enum UbModeArg {
    Identity,
    Iterative,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "T", default_value_t = 2)]
    t: usize,
    #[arg(long = "I", default_value_t = 3)]
    i: usize,
    #[arg(long = "J", default_value_t = 1)]
    j: usize,
    #[arg(long = "K", default_value_t = 10)]
    k: usize,
    /// Demand variation coefficient.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, value_enum, default_value_t = DistArg::Normal)]
    distribution: DistArg,
    /// Per-stage budget.
    #[arg(long, default_value_t = 100.0)]
    budget: f64,
    /// Flat transport cost instead of the Manhattan recipe.
    #[arg(long)]
    flat_cost: Option<f64>,
    /// Emit a pattern instance (e.g. `1-1`, `2-3`, `3-2`) instead.
    #[arg(long)]
    pattern: Option<String>,
    /// Output file (standard output if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Run-configuration JSON file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ambiguity type (1, 2 or 3).
    #[arg(long = "type")]
    ty: Option<u8>,
    /// Type-3 bound: auto and lb use the eigen-cut outer approximation, ub the inner one.
    #[arg(long, value_enum)]
    bound: Option<BoundArg>,
    /// Inner-approximation bases: fixed identity or Cholesky-refreshed.
    #[arg(long, value_enum)]
    ub_mode: Option<UbModeArg>,
    /// Seed of the forward-pass sampler.
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration limit.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Forward paths per iteration.
    #[arg(long)]
    paths: Option<usize>,
    /// CVaR weight λ in [0, 1] applied at every stage after the first.
    #[arg(long)]
    risk_lambda: Option<f64>,
    /// CVaR level α in (0, 1).
    #[arg(long)]
    risk_alpha: Option<f64>,
    /// Directory for report.json, report.csv and eigen_cuts.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EnumArgs {
    /// Two-stage instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Ambiguity type (1, 2 or 3).
    #[arg(long = "type", default_value_t = 1)]
    ty: u8,
    /// CVaR weight λ of the stage-2 risk measure.
    #[arg(long)]
    risk_lambda: Option<f64>,
    /// CVaR level α.
    #[arg(long, default_value_t = 0.95)]
    risk_alpha: f64,
    /// Directory for enum.json and enum.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment-spec JSON file.
    #[arg(long)]
    spec: PathBuf,
    /// Artifact directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Ambiguity type (1, 2 or 3).
    #[arg(long = "type", default_value_t = 1)]
    ty: u8,
    /// Stage to compile.
    #[arg(long, default_value_t = 1)]
    stage: usize,
    /// Previous state as a bit string (all zeros if omitted).
    #[arg(long)]
    x_prev: Option<String>,
    /// Realization index of the stage.
    #[arg(long, default_value_t = 0)]
    realization: usize,
    /// Output file (standard output if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Report whose lower bound is checked.
    #[arg(long)]
    lb_report: Option<PathBuf>,
    /// Report whose upper bound is checked.
    #[arg(long)]
    ub_report: Option<PathBuf>,
    /// Solve report compared with `--enum-report`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Enumeration report (`enum.json`).
    #[arg(long)]
    enum_report: Option<PathBuf>,
    /// Relative tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

/// Command failures, each tied to an exit code.
#[derive(Debug)]
enum CliError {
    Validation(String),
    Solver(String),
    Empty(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::Solver(_) => 2,
            Self::Empty(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Validation(m) | Self::Solver(m) | Self::Empty(m) => m,
        }
    }
}

impl From<SddipError> for CliError {
    fn from(e: SddipError) -> Self {
        match e {
            SddipError::Invalid(_) | SddipError::Model(_) => Self::Validation(e.to_string()),
            SddipError::EmptyAmbiguity { .. } | SddipError::Ambiguity(ddro::ambiguity::AmbiguityError::EmptyAmbiguity { .. }) => {
                Self::Empty(e.to_string())
            }
            _ => Self::Solver(e.to_string()),
        }
    }
}

impl From<EnumError> for CliError {
    fn from(e: EnumError) -> Self {
        match e {
            EnumError::NotTwoStage(_) | EnumError::TooManyFacilities(_) | EnumError::NoCandidate => Self::Validation(e.to_string()),
            _ => Self::Solver(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Validation(_) | BenchError::Json(_) => Self::Validation(e.to_string()),
            _ => Self::Solver(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    Instance::from_json(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn parse_type(n: u8) -> Result<AmbiguityType, CliError> {
    match n {
        1 => Ok(AmbiguityType::Type1),
        2 => Ok(AmbiguityType::Type2),
        3 => Ok(AmbiguityType::Type3),
        _ => Err(CliError::Validation(format!("ambiguity type must be 1, 2 or 3, got {n}"))),
    }
}

fn parse_bits(s: &str, n: usize) -> Result<Vec<f64>, CliError> {
    let bits: Option<Vec<f64>> = s
        .chars()
        .map(|c| match c {
            '0' => Some(0.0),
            '1' => Some(1.0),
            _ => None,
        })
        .collect();
    match bits {
        Some(b) if b.len() == n => Ok(b),
        _ => Err(CliError::Validation(format!("state must be {n} binary digits, got {s:?}"))),
    }
}

fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let inst = match &a.pattern {
        Some(id) => {
            let ty = match id.split('-').next() {
                Some("1") => AmbiguityType::Type1,
                Some("2") => AmbiguityType::Type2,
                Some("3") => AmbiguityType::Type3,
                _ => return Err(CliError::Validation(format!("unknown pattern {id:?}"))),
            };
            let case = pattern_cases(ty)
                .into_iter()
                .find(|c| &c.id == id)
                .ok_or_else(|| CliError::Validation(format!("unknown pattern {id:?}")))?;
            pattern_instance(&case, a.seed, a.k)
        }
        None => {
            if a.t == 0 || a.i == 0 || a.j == 0 || a.k == 0 || !(a.rho > 0.0) {
                return Err(CliError::Validation("T, I, J, K and rho must be positive".into()));
            }
            let mut spec = GenSpec::new(a.seed, a.t, a.i, a.j, a.k);
            spec.rho_bar = a.rho;
            spec.budget = a.budget;
            spec.distribution = match a.distribution {
                DistArg::Normal => Distribution::Normal,
                DistArg::Lognormal => Distribution::LogNormal,
            };
            if let Some(c) = a.flat_cost {
                spec.cost_mode = CostMode::Flat(c);
            }
            generate_instance(&spec)
        }
    };
    inst.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    emit(a.out.as_deref(), &(inst.to_json() + "\n"))
}

fn print_summary(rep: &SolveReport) {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
    let x: String = rep.first_stage_x.iter().map(|v| if *v > 0.5 { '1' } else { '0' }).collect();
    println!(
        "type {} bound {:?} status {:?} iterations {} lb {} ub {} ({:?}) gap {} x1 {x}",
        rep.ambiguity.number(),
        rep.bound_mode,
        rep.status,
        rep.iterations,
        f(rep.lb),
        f(rep.ub),
        rep.ub_kind,
        f(rep.gap)
    );
}

fn cmd_solve(a: &SolveArgs) -> Result<(), CliError> {
    let inst = load_instance(&a.instance)?;
    let mut cfg: RunConfig = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if let Some(t) = a.ty {
        cfg.ty = parse_type(t)?;
    }
    if let Some(b) = a.bound {
        cfg.bound_mode = match b {
            BoundArg::Auto => BoundMode::Auto,
            BoundArg::Lb => BoundMode::Lb,
            BoundArg::Ub => BoundMode::Ub,
        };
    }
    if let Some(m) = a.ub_mode {
        cfg.ub_mode = match m {
            UbModeArg::Identity => UbMode::Identity,
            UbModeArg::Iterative => UbMode::Iterative,
        };
    }
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.max_iters = a.max_iters.unwrap_or(cfg.max_iters);
    cfg.num_paths = a.paths.unwrap_or(cfg.num_paths);
    cfg.risk_lambda = a.risk_lambda.or(cfg.risk_lambda);
    cfg.risk_alpha = a.risk_alpha.or(cfg.risk_alpha);
    let rep = run(&inst, &cfg)?;
    if let Some(dir) = &a.out_dir {
        write(&dir.join("report.json"), &(rep.to_json() + "\n"))?;
        write(&dir.join("report.csv"), &rep.to_csv())?;
        write(&dir.join("eigen_cuts.csv"), &rep.eigen_cut_csv())?;
    }
    print_summary(&rep);
    if rep.status == RunStatus::Unbounded {
        let at = rep.empty_ambiguity.as_ref().map_or(String::new(), |e| format!(" at stage {} x = {:?}", e.stage, e.x));
        return Err(CliError::Empty(format!("model is unbounded: empty ambiguity set{at}")));
    }
    Ok(())
}

fn cmd_enum(a: &EnumArgs) -> Result<(), CliError> {
    let inst = load_instance(&a.instance)?;
    let ty = parse_type(a.ty)?;
    let risk = a.risk_lambda.map(|lambda| Risk { lambda, alpha: a.risk_alpha }).or_else(|| successor_risk(&inst, 1));
    let e = enumerate_two_stage(&inst, ty, risk)?;
    if let Some(dir) = &a.out_dir {
        let json = serde_json::to_string_pretty(&e).expect("enumerations serialize");
        write(&dir.join("enum.json"), &(json + "\n"))?;
        write(&dir.join("enum.csv"), &e.to_csv())?;
    }
    match (&e.objective, &e.best_x1) {
        (Some(v), Some(x)) => {
            let bits: String = x.iter().map(|v| if *v > 0.5 { '1' } else { '0' }).collect();
            println!("type {} objective {v:.6} x1 {bits} candidates {}", ty.number(), e.candidates.len());
            Ok(())
        }
        _ => Err(CliError::Empty("model is unbounded: some candidate has an empty ambiguity set".into())),
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    let spec: ExperimentSpec =
        serde_json::from_str(&read(&a.spec)?).map_err(|e| CliError::Validation(format!("{}: {e}", a.spec.display())))?;
    let out = run_experiment(&spec)?;
    out.write_artifacts(&a.out)?;
    let failed = out.rows.iter().filter(|r| r.status == "error").count();
    let unbounded = out.rows.iter().filter(|r| r.status == "unbounded").count();
    println!("{} cells ({failed} failed, {unbounded} unbounded) written to {}", out.rows.len(), a.out.display());
    Ok(())
}

fn cmd_export(a: &ExportArgs) -> Result<(), CliError> {
    let inst = load_instance(&a.instance)?;
    let ty = parse_type(a.ty)?;
    if a.stage == 0 || a.stage > inst.t {
        return Err(CliError::Validation(format!("stage must lie in 1..={}", inst.t)));
    }
    let x_prev = match &a.x_prev {
        Some(s) => parse_bits(s, inst.i)?,
        None => vec![0.0; inst.i],
    };
    let xi = inst
        .stage_support(a.stage)
        .get(a.realization)
        .ok_or_else(|| CliError::Validation(format!("stage {} has {} realizations", a.stage, inst.stage_k(a.stage))))?
        .clone();
    let b = build_stage(&inst, ty, a.stage, StateLink::Fixed(&x_prev), &xi, &[], successor_risk(&inst, a.stage), &BuildOptions::default())
        .map_err(|e| CliError::Solver(e.to_string()))?;
    emit(a.out.as_deref(), &write_lp_format(&b.model))
}

fn load_report(path: &Path) -> Result<SolveReport, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), CliError> {
    let mut checked = 0;
    if let (Some(lp), Some(up)) = (&a.lb_report, &a.ub_report) {
        let lo = load_report(lp)?;
        let hi = load_report(up)?;
        let (Some(lb), Some(ub)) = (lo.lb, hi.ub) else {
            return Err(CliError::Validation("reports lack the bounds to compare".into()));
        };
        if lb > ub + a.tol * ub.abs().max(1.0) {
            return Err(CliError::Validation(format!("sandwich violated: lb {lb} > ub {ub}")));
        }
        println!("sandwich ok: lb {lb:.6} <= ub {ub:.6}");
        checked += 1;
    }
    if let (Some(rp), Some(ep)) = (&a.report, &a.enum_report) {
        let rep = load_report(rp)?;
        let e: serde_json::Value = serde_json::from_str(&read(ep)?).map_err(|e| CliError::Validation(e.to_string()))?;
        let (Some(v), Some(o)) = (rep.ub.or(rep.lb), e["objective"].as_f64()) else {
            return Err(CliError::Validation("reports lack the objectives to compare".into()));
        };
        if (v - o).abs() > a.tol * v.abs().max(o.abs()).max(1.0) {
            return Err(CliError::Validation(format!("objectives differ: solve {v} vs enumeration {o}")));
        }
        println!("objectives agree: {v:.6} vs {o:.6}");
        checked += 1;
    }
    if checked == 0 {
        return Err(CliError::Validation("give --lb-report with --ub-report, or --report with --enum-report".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Enum(a) => cmd_enum(a),
        Command::Bench(a) => cmd_bench(a),
        Command::ExportLp(a) => cmd_export(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
