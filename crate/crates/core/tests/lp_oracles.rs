//! Oracle tests for the LP and MILP core: LP duality gaps on random
//! instances and exhaustive enumeration for small binary programs.

use ddro::lp::{solve_lp, solve_milp, write_lp_format, LinearModel, LpStatus, MipStatus, Relation, VarKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dual objective built only from the reported duals and reduced costs,
/// together with a dual-feasibility residual.
fn dual_objective(m: &LinearModel, y: &[f64], d: &[f64]) -> (f64, f64) {
    let mut val = m.obj_constant;
    let mut infeas = 0.0f64;
    for (r, row) in m.rows.iter().enumerate() {
        val += y[r] * row.rhs;
        match row.relation {
            Relation::Le => infeas = infeas.max(y[r]),
            Relation::Ge => infeas = infeas.max(-y[r]),
            Relation::Eq => {}
        }
    }
    for j in 0..m.num_vars() {
        // Reduced costs must be recomputed from the duals to be a real check.
        let col: f64 = m.rows.iter().enumerate().map(|(r, row)| {
            row.coeffs.iter().filter(|(c, _)| *c == j).map(|(_, a)| a * y[r]).sum::<f64>()
        }).sum();
        let dj = m.objective[j] - col;
        infeas = infeas.max((dj - d[j]).abs());
        if dj > 0.0 {
            if m.lower[j].is_finite() { val += dj * m.lower[j]; } else { infeas = infeas.max(dj); }
        } else if dj < 0.0 {
            if m.upper[j].is_finite() { val += dj * m.upper[j]; } else { infeas = infeas.max(-dj); }
        }
    }
    (val, infeas)
}

fn random_lp(rng: &mut ChaCha8Rng) -> LinearModel {
    let n = rng.random_range(1..=20);
    let rows = rng.random_range(1..=15);
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
    let mut m = LinearModel::new();
    for j in 0..n {
        let free = rng.random_bool(0.1);
        let (lb, ub) = if free { (-50.0, 50.0) } else { (0.0, rng.random_range(5.0..20.0)) };
        m.add_var(format!("x{j}"), lb, ub, VarKind::Continuous, rng.random_range(-10.0..10.0));
    }
    for r in 0..rows {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                coeffs.push((j, rng.random_range(-5.0..5.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let (rel, rhs) = match rng.random_range(0..3) {
            0 => (Relation::Le, act + rng.random_range(0.0..3.0)),
            1 => (Relation::Ge, act - rng.random_range(0.0..3.0)),
            _ => (Relation::Eq, act),
        };
        m.add_row(format!("r{r}"), &coeffs, rel, rhs);
    }
    m
}

#[test]
fn random_lps_close_the_duality_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..400 {
        let m = random_lp(&mut rng);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal, "case {case}");
        assert!(m.max_violation(&s.x) <= 1e-7, "case {case}: primal residual {}", m.max_violation(&s.x));
        let (dual, infeas) = dual_objective(&m, &s.duals, &s.reduced_costs);
        assert!(infeas <= 1e-6, "case {case}: dual infeasibility {infeas}");
        assert!((dual - s.objective).abs() <= 1e-6 * s.objective.abs().max(1.0), "case {case}: primal {} dual {dual}", s.objective);
    }
}

#[test]
fn complementary_slackness_on_random_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let m = random_lp(&mut rng);
        let s = solve_lp(&m).unwrap();
        for (r, row) in m.rows.iter().enumerate() {
            let slack = (m.row_activity(r, &s.x) - row.rhs).abs();
            assert!((s.duals[r] * slack).abs() <= 1e-6 * (1.0 + s.objective.abs()));
        }
    }
}

#[test]
fn infeasible_random_systems_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let mut m = random_lp(&mut rng);
        // Add a pair of contradictory rows on a random combination.
        let n = m.num_vars();
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(0.5..2.0))).collect();
        m.add_row("lo", &coeffs, Relation::Ge, 10.0);
        m.add_row("hi", &coeffs, Relation::Le, 9.0);
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);
    }
}

#[test]
fn knapsacks_match_exhaustive_enumeration() {
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 12;
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(1..30) as f64).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(1..40) as f64).collect();
        let cap = (w.iter().sum::<f64>() * rng.random_range(0.2..0.7)).floor();
        let mut m = LinearModel::new();
        for j in 0..n {
            m.add_var(format!("b{j}"), 0.0, 1.0, VarKind::Binary, -v[j]);
        }
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, w[j])).collect();
        m.add_row("cap", &coeffs, Relation::Le, cap);
        let s = solve_milp(&m).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let (mut tw, mut tv) = (0.0, 0.0);
            for j in 0..n {
                if mask >> j & 1 == 1 {
                    tw += w[j];
                    tv += v[j];
                }
            }
            if tw <= cap {
                best = best.max(tv);
            }
        }
        assert!((s.objective + best).abs() <= 1e-6, "seed {seed}: {} vs {}", s.objective, -best);
        assert!(s.best_bound <= s.objective + 1e-6 * s.objective.abs().max(1.0));
    }
}

#[test]
fn general_binary_programs_match_enumeration() {
    // Multi-row binary programs with up to 16 binaries and a continuous
    // column, checked against enumeration of the binaries plus an LP in the
    // continuous part (which here has a closed form).
    for seed in 0..60u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(4..=16);
        let rows = rng.random_range(1..=4);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let a: Vec<Vec<f64>> = (0..rows).map(|_| (0..n).map(|_| rng.random_range(-3.0..6.0)).collect()).collect();
        let b: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..10.0)).collect();
        let mut m = LinearModel::new();
        for j in 0..n {
            m.add_var(format!("b{j}"), 0.0, 1.0, VarKind::Binary, c[j]);
        }
        for r in 0..rows {
            let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, a[r][j])).collect();
            m.add_row(format!("r{r}"), &coeffs, Relation::Le, b[r]);
        }
        let s = solve_milp(&m).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let feasible = (0..rows).all(|r| (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| a[r][j]).sum::<f64>() <= b[r] + 1e-12);
            if feasible {
                best = best.min((0..n).filter(|&j| mask >> j & 1 == 1).map(|j| c[j]).sum());
            }
        }
        assert_eq!(s.status, MipStatus::Optimal);
        assert!((s.objective - best).abs() <= 1e-6, "seed {seed}: {} vs {best}", s.objective);
    }
}

#[test]
fn milp_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 14;
    let mut m = LinearModel::new();
    for j in 0..n {
        m.add_var(format!("b{j}"), 0.0, 1.0, VarKind::Binary, -rng.random_range(1.0..5.0));
    }
    for r in 0..3 {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(1.0..4.0))).collect();
        m.add_row(format!("r{r}"), &coeffs, Relation::Le, 12.0);
    }
    let a = solve_milp(&m).unwrap();
    let b = solve_milp(&m).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lp_export_round_trips_names() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = random_lp(&mut rng);
    let s = write_lp_format(&m);
    for name in &m.names {
        assert!(s.contains(name.as_str()));
    }
}
