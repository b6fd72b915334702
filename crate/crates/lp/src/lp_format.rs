//! CPLEX LP text output, for cross-checking models with external solvers.

use std::fmt::Write;

use crate::model::{MipProblem, Relation};

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {}", -coef, name);
    } else if first {
        let _ = write!(out, " {} {}", coef, name);
    } else {
        let _ = write!(out, " + {} {}", coef, name);
    }
}

fn bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn write_lp_format(mip: &MipProblem) -> String {
    let lp = &mip.lp;
    let names: Vec<String> = (0..lp.num_vars()).map(|j| sanitize(&lp.var_name(j))).collect();
    let mut out = String::from("\\ generated by otswitch\nMinimize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, first, c, &names[j]);
            first = false;
        }
    }
    if first {
        out.push_str(" 0 ");
        out.push_str(names.first().map_or("x0", |s| s.as_str()));
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.constraints.iter().enumerate() {
        let _ = write!(out, " c{i}:");
        if row.coeffs.is_empty() {
            out.push_str(" 0 ");
            out.push_str(names.first().map_or("x0", |s| s.as_str()));
        }
        for (k, &(j, a)) in row.coeffs.iter().enumerate() {
            term(&mut out, k == 0, a, &names[j]);
        }
        let op = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " {} free", names[j]);
        } else if lo == hi {
            let _ = writeln!(out, " {} = {}", names[j], lo);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", bound(lo), names[j], bound(hi));
        }
    }
    if !mip.integer_vars.is_empty() {
        out.push_str("Binaries\n");
        for &j in &mip.integer_vars {
            let _ = writeln!(out, " {}", names[j]);
        }
    }
    out.push_str("End\n");
    out
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.".contains(c) { c } else { '_' })
        .collect()
}
