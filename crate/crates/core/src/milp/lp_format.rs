//! CPLEX LP text export.
//!
//! Section order: objective, `Subject To`, `Bounds`, `Generals`,
//! `Binaries`, `End`. Variables and rows appear in declaration order.

use std::fmt::Write as _;

use super::{MipModel, ObjectiveSense, VarId, VarKind};

const TERMS_PER_LINE: usize = 8;

/// Integral values print without a decimal point; others use the shortest
/// representation that round-trips.
pub(crate) fn fmt_num(value: f64) -> String {
    if value == f64::INFINITY {
        "+inf".into()
    } else if value == f64::NEG_INFINITY {
        "-inf".into()
    } else if value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

fn write_terms(out: &mut String, model: &MipModel, terms: &[(VarId, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (idx, &(v, c)) in terms.iter().enumerate() {
        if idx > 0 && idx % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        if idx == 0 && c >= 0.0 {
            let _ = write!(out, " {} {}", fmt_num(c), model.variable(v).name);
        } else {
            let _ = write!(out, " {sign} {} {}", fmt_num(c.abs()), model.variable(v).name);
        }
    }
}

pub fn write_lp(model: &MipModel) -> String {
    let mut out = String::new();
    if !model.name.is_empty() {
        let _ = writeln!(out, "\\ {}", model.name);
    }
    out.push_str(match model.objective_sense() {
        ObjectiveSense::Minimize => "Minimize\n",
        ObjectiveSense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, model, model.objective());
    out.push('\n');

    out.push_str("Subject To\n");
    for c in model.constraints() {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), fmt_num(c.rhs));
    }

    out.push_str("Bounds\n");
    for v in model.variables() {
        let default = match v.kind {
            VarKind::Binary => (0.0, 1.0),
            _ => (0.0, f64::INFINITY),
        };
        if (v.lower, v.upper) == default {
            continue;
        }
        if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, fmt_num(v.lower));
        } else if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else if v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} >= {}", v.name, fmt_num(v.lower));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper));
        }
    }

    for (header, kind) in [("Generals", VarKind::Integer), ("Binaries", VarKind::Binary)] {
        out.push_str(header);
        out.push('\n');
        let names: Vec<&str> = model.variables().iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
        for chunk in names.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
