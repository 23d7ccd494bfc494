//! CPLEX-style LP text export, for cross-checking models in other solvers.

use std::fmt::Write as _;

use crate::lp::Sense;
use crate::mip::MixedIntegerProgram;

fn var_name(mip: &MixedIntegerProgram, j: usize) -> String {
    match mip.lp.name(j) {
        Some(n) => n.replace(|c: char| !c.is_ascii_alphanumeric() && c != '_', "_"),
        None => format!("v{j}"),
    }
}

fn term(out: &mut String, first: &mut bool, coef: f64, name: &str) {
    if coef >= 0.0 && !*first {
        out.push_str(" + ");
    } else if coef < 0.0 {
        out.push_str(if *first { "-" } else { " - " });
    }
    let _ = write!(out, "{} {}", coef.abs(), name);
    *first = false;
}

pub fn write_lp_format(mip: &MixedIntegerProgram) -> String {
    let lp = &mip.lp;
    let mut out = String::from("Minimize\n obj: ");
    let mut first = true;
    for (j, &c) in lp.objective().iter().enumerate() {
        if c != 0.0 {
            term(&mut out, &mut first, c, &var_name(mip, j));
        }
    }
    if first {
        out.push('0');
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.rows().iter().enumerate() {
        let _ = write!(out, " r{i}: ");
        let mut first = true;
        for &(j, a) in &row.coeffs {
            term(&mut out, &mut first, a, &var_name(mip, j));
        }
        if first {
            out.push_str("0 v0");
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.lower()[j], lp.upper()[j]);
        let name = var_name(mip, j);
        if u.is_infinite() {
            let _ = writeln!(out, " {name} >= {l}");
        } else {
            let _ = writeln!(out, " {l} <= {name} <= {u}");
        }
    }
    let general: Vec<String> = mip
        .integer_vars()
        .filter(|&j| !mip.is_binary(j))
        .map(|j| var_name(mip, j))
        .collect();
    if !general.is_empty() {
        let _ = writeln!(out, "General\n {}", general.join(" "));
    }
    let binary: Vec<String> =
        mip.integer_vars().filter(|&j| mip.is_binary(j)).map(|j| var_name(mip, j)).collect();
    if !binary.is_empty() {
        let _ = writeln!(out, "Binary\n {}", binary.join(" "));
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LinearProgram;

    #[test]
    fn exports_sections() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 2.0);
        lp.set_name(0, "y[s1,t53]");
        lp.add_row(vec![(0, 50.0), (1, -1.0)], Sense::Ge, 0.0);
        let mut mip = MixedIntegerProgram::new(lp);
        mip.set_integer(0);
        let text = write_lp_format(&mip);
        assert!(text.starts_with("Minimize\n obj: 2 y_s1_t53_"));
        assert!(text.contains(" r0: 50 y_s1_t53_ - 1 v1 >= 0"));
        assert!(text.contains("General\n y_s1_t53_"));
        assert!(text.ends_with("End\n"));
    }
}
