//! Experiment grids: pattern tables, support/variance/budget sweeps and
//! timing curves, with per-cell rows and plot-data series.

use super::enumerate::{enumerate_two_stage, EnumError};
use super::patterns::{pattern_cases, pattern_instance};
use crate::ambiguity::AmbiguityType;
use crate::model::{generate_instance, Distribution, GenSpec, Instance};
use crate::sddip::{run, run_type3_bounds, RunConfig, RunStatus, SddipError, SolveReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

/// Errors of the experiment runner. Cell failures are recorded in the rows
/// and never surface here.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Experiment family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    PatternsType1,
    PatternsType2,
    PatternsType3,
    SupportSweep,
    VarianceSweep,
    BudgetSweep,
    TimingSweep,
}

/// Which model a cell solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Decision-dependent ambiguity sets.
    Dddr,
    /// Every decision-dependency coefficient zeroed.
    Didr,
}

impl ModelKind {
    /// The instance this model solves.
    pub fn apply(self, inst: &Instance) -> Instance {
        match self {
            Self::Dddr => inst.clone(),
            Self::Didr => inst.decision_independent(),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Self::Dddr => "dddr",
            Self::Didr => "didr",
        }
    }
}

/// Experiment description (the JSON spec file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub table: Table,
    pub seeds: Vec<u64>,
    /// Support sizes `K`.
    pub k_values: Vec<usize>,
    /// Demand variation coefficients `ρ̄`.
    pub rho_values: Vec<f64>,
    /// Per-stage budgets `N`.
    pub budgets: Vec<f64>,
    pub distributions: Vec<Distribution>,
    pub models: Vec<ModelKind>,
    /// Generated-instance sizes for the sweeps.
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "J")]
    pub j: usize,
    /// Defaults of the sweeps when a grid is not swept.
    pub default_k: usize,
    pub default_rho: f64,
    pub default_budget: f64,
    /// Ambiguity type of the sweeps.
    #[serde(rename = "type")]
    pub ty: AmbiguityType,
    pub run: RunConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            table: Table::SupportSweep,
            seeds: vec![0],
            k_values: vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
            rho_values: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            budgets: vec![100.0, 300.0, 500.0],
            distributions: vec![Distribution::Normal, Distribution::LogNormal],
            models: vec![ModelKind::Dddr, ModelKind::Didr],
            t: 3,
            i: 4,
            j: 3,
            default_k: 30,
            default_rho: 0.8,
            default_budget: 100.0,
            ty: AmbiguityType::Type1,
            run: RunConfig::default(),
        }
    }
}

impl ExperimentSpec {
    /// Rejects empty grids and degenerate sizes before any solve.
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Validation(m.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must be listed explicitly");
        }
        if self.models.is_empty() {
            return bad("models grid is empty");
        }
        match self.table {
            Table::SupportSweep | Table::TimingSweep if self.k_values.is_empty() => return bad("k_values grid is empty"),
            Table::VarianceSweep if self.rho_values.is_empty() => return bad("rho_values grid is empty"),
            Table::VarianceSweep if self.distributions.is_empty() => return bad("distributions grid is empty"),
            Table::BudgetSweep if self.budgets.is_empty() => return bad("budgets grid is empty"),
            _ => {}
        }
        if self.k_values.contains(&0) || self.default_k == 0 {
            return bad("support sizes must be positive");
        }
        if self.rho_values.iter().chain([&self.default_rho]).any(|r| !(*r > 0.0)) {
            return bad("variation coefficients must be positive");
        }
        if self.t < 2 || self.i == 0 || self.j == 0 {
            return bad("sweeps need T ≥ 2, I ≥ 1 and J ≥ 1");
        }
        Ok(())
    }
}

/// Parameters of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub model: ModelKind,
    pub seed: u64,
    pub case_id: Option<String>,
    pub k: usize,
    pub rho: f64,
    pub distribution: Distribution,
    pub budget: f64,
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub cell: usize,
    pub model: ModelKind,
    pub seed: u64,
    pub case_id: String,
    pub k: usize,
    pub rho: f64,
    pub distribution: Distribution,
    pub budget: f64,
    pub lb: Option<f64>,
    pub ub: Option<f64>,
    pub gap: Option<f64>,
    /// First-stage decision as a bit string.
    pub x1: String,
    /// `converged`, `iteration_limit`, `unbounded` or `error`.
    pub status: String,
    pub seconds: f64,
    /// Published value for orientation, or the failure message.
    pub note: String,
}

impl CellRow {
    /// Best available objective estimate: the upper bound if known,
    /// otherwise the lower bound.
    pub fn objective(&self) -> Option<f64> {
        self.ub.or(self.lb)
    }
}

/// One plot-data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

/// Rows and plot data of a finished experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub rows: Vec<CellRow>,
    pub plot: Vec<PlotPoint>,
}

impl ExperimentOutput {
    /// Cell rows as CSV.
    pub fn rows_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8"))
    }

    /// Plot data as CSV `series,x,y`.
    pub fn plot_csv(&self) -> String {
        let mut s = String::from("series,x,y\n");
        for p in &self.plot {
            let _ = writeln!(s, "{},{},{:.10e}", p.series, p.x, p.y);
        }
        s
    }

    /// Writes `cells/cell_NNNN.json`, `cells.csv`, `plot.csv` and finally
    /// `index.json` (through a temporary file and a rename).
    pub fn write_artifacts(&self, dir: &Path) -> Result<(), BenchError> {
        let cells = dir.join("cells");
        std::fs::create_dir_all(&cells)?;
        for r in &self.rows {
            std::fs::write(cells.join(format!("cell_{:04}.json", r.cell)), serde_json::to_string_pretty(r)?)?;
        }
        std::fs::write(dir.join("cells.csv"), self.rows_csv()?)?;
        std::fs::write(dir.join("plot.csv"), self.plot_csv())?;
        let index = serde_json::json!({
            "spec": self.spec,
            "cells": self.rows.len(),
            "files": ["cells.csv", "plot.csv"],
        });
        let tmp = dir.join("index.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&index)?)?;
        std::fs::rename(tmp, dir.join("index.json"))?;
        Ok(())
    }
}

fn bits(x: &[f64]) -> String {
    x.iter().map(|v| if *v > 0.5 { '1' } else { '0' }).collect()
}

fn status_tag(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Converged => "converged",
        RunStatus::IterationLimit => "iteration_limit",
        RunStatus::Unbounded => "unbounded",
    }
}

/// Grid cells of `spec`, in output order.
pub fn expand_cells(spec: &ExperimentSpec) -> Vec<CellParams> {
    let base = |model, seed| CellParams {
        model,
        seed,
        case_id: None,
        k: spec.default_k,
        rho: spec.default_rho,
        distribution: spec.distributions.first().copied().unwrap_or(Distribution::Normal),
        budget: spec.default_budget,
    };
    let mut out = Vec::new();
    for &seed in &spec.seeds {
        match spec.table {
            Table::PatternsType1 | Table::PatternsType2 | Table::PatternsType3 => {
                for case in pattern_cases(pattern_type(spec.table)) {
                    for &model in &spec.models {
                        out.push(CellParams { case_id: Some(case.id.clone()), k: spec.default_k, ..base(model, seed) });
                    }
                }
            }
            Table::SupportSweep | Table::TimingSweep => {
                for &k in &spec.k_values {
                    for &model in &spec.models {
                        out.push(CellParams { k, ..base(model, seed) });
                    }
                }
            }
            Table::VarianceSweep => {
                for &distribution in &spec.distributions {
                    for &rho in &spec.rho_values {
                        for &model in &spec.models {
                            out.push(CellParams { rho, distribution, ..base(model, seed) });
                        }
                    }
                }
            }
            Table::BudgetSweep => {
                for &budget in &spec.budgets {
                    for &model in &spec.models {
                        out.push(CellParams { budget, ..base(model, seed) });
                    }
                }
            }
        }
    }
    out
}

fn pattern_type(table: Table) -> AmbiguityType {
    match table {
        Table::PatternsType2 => AmbiguityType::Type2,
        Table::PatternsType3 => AmbiguityType::Type3,
        _ => AmbiguityType::Type1,
    }
}

/// Instance of a cell (before the model transformation).
pub fn cell_instance(spec: &ExperimentSpec, cell: &CellParams) -> Instance {
    match &cell.case_id {
        Some(id) => {
            let case = pattern_cases(pattern_type(spec.table)).into_iter().find(|c| &c.id == id).expect("case ids come from the table");
            pattern_instance(&case, cell.seed, cell.k)
        }
        None => {
            let mut g = GenSpec::new(cell.seed, spec.t, spec.i, spec.j, cell.k);
            g.rho_bar = cell.rho;
            g.distribution = cell.distribution;
            g.budget = cell.budget;
            generate_instance(&g)
        }
    }
}

fn run_cell(spec: &ExperimentSpec, index: usize, cell: &CellParams) -> CellRow {
    let start = Instant::now();
    let mut row = CellRow {
        cell: index,
        model: cell.model,
        seed: cell.seed,
        case_id: cell.case_id.clone().unwrap_or_default(),
        k: cell.k,
        rho: cell.rho,
        distribution: cell.distribution,
        budget: cell.budget,
        lb: None,
        ub: None,
        gap: None,
        x1: String::new(),
        status: String::new(),
        seconds: 0.0,
        note: String::new(),
    };
    let inst = cell.model.apply(&cell_instance(spec, cell));
    let ty = if cell.case_id.is_some() { pattern_type(spec.table) } else { spec.ty };
    let cfg = RunConfig { ty, seed: spec.run.seed.wrapping_add(cell.seed), ..spec.run.clone() };
    let outcome: Result<(SolveReport, Option<SolveReport>), SddipError> = if ty == AmbiguityType::Type3 {
        run_type3_bounds(&inst, &cfg).map(|(lo, hi)| (lo, Some(hi)))
    } else {
        run(&inst, &cfg).map(|r| (r, None))
    };
    match outcome {
        Ok((rep, upper)) => {
            row.lb = rep.lb;
            row.ub = upper.as_ref().map_or(rep.ub, |u| u.ub);
            row.gap = match (row.lb, row.ub) {
                (Some(l), Some(u)) => Some((u - l) / u.abs().max(1.0)),
                _ => None,
            };
            row.x1 = bits(&rep.first_stage_x);
            let worst = upper.as_ref().filter(|u| u.status == RunStatus::Unbounded).map_or(rep.status, |u| u.status);
            row.status = status_tag(worst).to_string();
        }
        Err(e) => {
            row.status = "error".to_string();
            row.note = e.to_string();
        }
    }
    if let Some(id) = &cell.case_id {
        if row.note.is_empty() {
            let case = pattern_cases(ty).into_iter().find(|c| &c.id == id).expect("known case");
            let published = match cell.model {
                ModelKind::Dddr => case.published.dddr,
                ModelKind::Didr => case.published.didr,
            };
            row.note = format!("published {published} (regenerated supports, orientation only)");
        }
    }
    row.seconds = start.elapsed().as_secs_f64();
    row
}

fn plot_points(spec: &ExperimentSpec, cells: &[CellParams], rows: &[CellRow]) -> Vec<PlotPoint> {
    let mut out = Vec::new();
    for (cell, row) in cells.iter().zip(rows) {
        let tag = cell.model.tag();
        let (series, x, y) = match spec.table {
            Table::PatternsType1 | Table::PatternsType2 | Table::PatternsType3 => {
                let ordinal = cell.case_id.as_deref().and_then(|id| id.rsplit('-').next()).and_then(|v| v.parse().ok()).unwrap_or(0.0);
                (format!("{tag}/seed{}", cell.seed), ordinal, row.objective())
            }
            Table::SupportSweep => (format!("{tag}/seed{}", cell.seed), cell.k as f64, row.objective()),
            Table::TimingSweep => (format!("{tag}/seed{}", cell.seed), cell.k as f64, Some(row.seconds)),
            Table::VarianceSweep => {
                let dist = match cell.distribution {
                    Distribution::Normal => "normal",
                    Distribution::LogNormal => "lognormal",
                };
                (format!("{dist}/{tag}/seed{}", cell.seed), cell.rho, row.objective())
            }
            Table::BudgetSweep => (format!("{tag}/seed{}", cell.seed), cell.budget, row.objective()),
        };
        // Unbounded and failed cells are dropped from the plots.
        if let (Some(y), true) = (y, row.status == "converged" || row.status == "iteration_limit" || spec.table == Table::TimingSweep) {
            out.push(PlotPoint { series, x, y });
        }
    }
    out
}

/// Runs every cell of `spec` (in parallel, collected in grid order).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput, BenchError> {
    spec.validate()?;
    let cells = expand_cells(spec);
    let rows: Vec<CellRow> = cells.par_iter().enumerate().map(|(n, c)| run_cell(spec, n, c)).collect();
    let plot = plot_points(spec, &cells, &rows);
    Ok(ExperimentOutput { spec: spec.clone(), rows, plot })
}

/// Enumeration values of every pattern case for both models, as
/// `(case id, DDDR objective, DIDR objective)`; `None` marks an unbounded
/// model.
pub fn pattern_enumeration(ty: AmbiguityType, seed: u64, k: usize) -> Result<Vec<(String, Option<f64>, Option<f64>)>, EnumError> {
    pattern_cases(ty)
        .iter()
        .map(|case| {
            let inst = pattern_instance(case, seed, k);
            let dddr = enumerate_two_stage(&inst, ty, None)?.objective;
            let didr = enumerate_two_stage(&inst.decision_independent(), ty, None)?.objective;
            Ok((case.id.clone(), dddr, didr))
        })
        .collect()
}
