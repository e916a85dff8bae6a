//! Experiment runner and command-line checks: grid validation, artifact
//! layout, the decision-independent reduction, relabeling symmetry, exit
//! codes and byte-identical generation.

use ddro::ambiguity::AmbiguityType;
use ddro::bench::patterns::small_two_stage;
use ddro::bench::{enumerate_two_stage, run_experiment, BenchError, ExperimentSpec, ModelKind, Table};
use ddro::model::Instance;
use ddro::sddip::{run, RunConfig};
use std::path::Path;
use std::process::Command;

fn tiny_spec() -> ExperimentSpec {
    ExperimentSpec {
        table: Table::SupportSweep,
        seeds: vec![0],
        k_values: vec![3, 4],
        t: 2,
        i: 2,
        j: 1,
        run: RunConfig { max_iters: 20, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn empty_grids_are_rejected_before_solving() {
    let mut spec = tiny_spec();
    spec.k_values.clear();
    assert!(matches!(run_experiment(&spec), Err(BenchError::Validation(_))));
    let mut spec = tiny_spec();
    spec.seeds.clear();
    assert!(matches!(run_experiment(&spec), Err(BenchError::Validation(_))));
    let spec = ExperimentSpec { table: Table::BudgetSweep, budgets: vec![], ..tiny_spec() };
    assert!(matches!(spec.validate(), Err(BenchError::Validation(_))));
}

#[test]
fn tiny_support_sweep_writes_every_artifact() {
    let out = run_experiment(&tiny_spec()).unwrap();
    assert_eq!(out.rows.len(), 2 * 2);
    assert!(out.rows.iter().all(|r| r.status != "error"), "{:?}", out.rows);
    let dir = tempfile::tempdir().unwrap();
    out.write_artifacts(dir.path()).unwrap();
    for name in ["cells.csv", "plot.csv", "index.json"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let cells = std::fs::read_dir(dir.path().join("cells")).unwrap().count();
    assert_eq!(cells, out.rows.len());
    let csv = std::fs::read_to_string(dir.path().join("cells.csv")).unwrap();
    assert_eq!(csv.lines().count(), out.rows.len() + 1);
    assert!(out.plot_csv().starts_with("series,x,y\n"));
}

#[test]
fn zeroed_coefficients_reproduce_the_independent_model() {
    for ty in [AmbiguityType::Type1, AmbiguityType::Type2] {
        let inst = small_two_stage(ty, 5);
        let cfg = RunConfig { ty, ..Default::default() };
        let mut zeroed = inst.clone();
        zeroed.lambda_mu.iter_mut().flatten().for_each(|v| *v = 0.0);
        zeroed.lambda_s.iter_mut().flatten().for_each(|v| *v = 0.0);
        zeroed.lambda_cov.iter_mut().for_each(|v| *v = 0.0);
        let a = run(&zeroed, &cfg).unwrap().canonical().to_json();
        let b = run(&ModelKind::Didr.apply(&inst), &cfg).unwrap().canonical().to_json();
        assert_eq!(a, b);
    }
}

/// Applies the facility permutation `perm` (new index `n` takes old `perm[n]`).
fn relabel(inst: &Instance, perm: &[usize]) -> Instance {
    let mut out = inst.clone();
    out.facility_xy = perm.iter().map(|&p| inst.facility_xy[p]).collect();
    out.c = perm.iter().map(|&p| inst.c[p].clone()).collect();
    out.f = inst.f.iter().map(|row| perm.iter().map(|&p| row[p]).collect()).collect();
    out.h = inst.h.iter().map(|row| perm.iter().map(|&p| row[p]).collect()).collect();
    out.lambda_mu = inst.lambda_mu.iter().map(|row| perm.iter().map(|&p| row[p]).collect()).collect();
    out.lambda_s = inst.lambda_s.iter().map(|row| perm.iter().map(|&p| row[p]).collect()).collect();
    out.lambda_cov = perm.iter().map(|&p| inst.lambda_cov[p]).collect();
    out
}

#[test]
fn facility_relabeling_leaves_the_optimum_unchanged() {
    for ty in [AmbiguityType::Type1, AmbiguityType::Type2, AmbiguityType::Type3] {
        let inst = small_two_stage(ty, 2);
        let base = enumerate_two_stage(&inst, ty, None).unwrap().objective.unwrap();
        for perm in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
            let v = enumerate_two_stage(&relabel(&inst, &perm), ty, None).unwrap().objective.unwrap();
            assert!((v - base).abs() <= 1e-7 * base.abs().max(1.0), "{ty:?} {perm:?}: {v} vs {base}");
        }
    }
}

fn ddro(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ddro")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generation_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let out = ddro(&["gen", "--seed", "4", "--T", "3", "--I", "3", "--J", "2", "--K", "5", "-o", path(p)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    Instance::from_json(&std::fs::read_to_string(&a).unwrap()).unwrap().validate().unwrap();
}

#[test]
fn exit_codes_follow_the_failure_class() {
    assert_eq!(ddro(&["--help"]).status.code(), Some(0));
    assert_eq!(ddro(&["solve", "--bogus-flag"]).status.code(), Some(1));
    assert_eq!(ddro(&["solve", "--instance", "/nonexistent/instance.json"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"table": "support_sweep", "seeds": [], "k_values": [3]}"#).unwrap();
    let out = ddro(&["bench", "--spec", path(&spec), "--out", path(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    let inst = dir.path().join("inst.json");
    assert!(ddro(&["gen", "--seed", "1", "--K", "6", "-o", path(&inst)]).status.success());
    let out_dir = dir.path().join("solve");
    let out = ddro(&["solve", "--instance", path(&inst), "--type", "1", "--out-dir", path(&out_dir)]);
    assert!(matches!(out.status.code(), Some(0) | Some(3)), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("report.json").is_file());
}
