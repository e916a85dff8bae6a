//! CPLEX LP-format export for debugging against external solvers.

use super::{LinearModel, Relation, VarKind};
use std::fmt::Write;

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.()".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert(0, 'v');
    }
    s
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn linear_terms(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names.first().cloned().unwrap_or_else(|| "v0".into()));
        return;
    }
    for (k, &(j, v)) in terms.iter().enumerate() {
        let sign = if v < 0.0 { "-" } else if k == 0 { "" } else { "+" };
        if sign.is_empty() {
            let _ = write!(out, " {} {}", num(v.abs()), names[j]);
        } else {
            let _ = write!(out, " {sign} {} {}", num(v.abs()), names[j]);
        }
    }
}

/// Renders `m` in CPLEX LP format. Column and row names are sanitized to
/// the LP character set; the objective constant is recorded as a comment.
pub fn write_lp_format(m: &LinearModel) -> String {
    let names: Vec<String> = m.names.iter().map(|n| sanitize(n)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ objective constant: {}", num(m.obj_constant));
    out.push_str("Minimize\n obj:");
    let obj: Vec<(usize, f64)> = m.objective.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect();
    linear_terms(&mut out, &obj, &names);
    out.push_str("\nSubject To\n");
    for (r, row) in m.rows.iter().enumerate() {
        let rn = if row.name.is_empty() { format!("r{r}") } else { format!("{}_r{r}", sanitize(&row.name)) };
        let _ = write!(out, " {rn}:");
        linear_terms(&mut out, &row.coeffs, &names);
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", num(row.rhs));
    }
    out.push_str("Bounds\n");
    for j in 0..m.num_vars() {
        let (l, u) = (m.lower[j], m.upper[j]);
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            let _ = writeln!(out, " {} free", names[j]);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(l), names[j], num(u));
        }
    }
    let generals: Vec<&String> = (0..m.num_vars()).filter(|&j| m.kind[j] == VarKind::Integer).map(|j| &names[j]).collect();
    let binaries: Vec<&String> = (0..m.num_vars()).filter(|&j| m.kind[j] == VarKind::Binary).map(|j| &names[j]).collect();
    if !generals.is_empty() {
        out.push_str("Generals\n");
        for g in generals {
            let _ = writeln!(out, " {g}");
        }
    }
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for b in binaries {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_present() {
        let mut m = LinearModel::new();
        let x = m.add_var("x[1]", 0.0, 1.0, VarKind::Binary, -1.0);
        let y = m.add_var("y", f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous, 2.0);
        let z = m.add_var("z", 0.0, 5.0, VarKind::Integer, 0.0);
        m.add_row("cap", &[(x, 1.0), (y, -2.5), (z, 1.0)], Relation::Le, 3.0);
        let s = write_lp_format(&m);
        assert!(s.contains("Minimize\n obj: - 1 x_1_ + 2 y"));
        assert!(s.contains("cap_r0: 1 x_1_ - 2.5 y + 1 z <= 3"));
        assert!(s.contains(" y free"));
        assert!(s.contains("Generals\n z\n"));
        assert!(s.contains("Binaries\n x_1_\n"));
        assert!(s.ends_with("End\n"));
    }
}
