//! Benchmark front door: pattern instances, the two-stage enumeration
//! oracle, experiment grids and the command-line interface.

pub mod patterns;
pub mod enumerate;
pub mod experiment;

pub use enumerate::{enumerate_two_stage, frozen_stage_value, stage_value, Candidate, EnumError, Enumeration, NestedOracle};
pub use experiment::{pattern_enumeration, run_experiment, BenchError, CellRow, ExperimentOutput, ExperimentSpec, ModelKind, PlotPoint, Table};
