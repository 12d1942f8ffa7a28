use std::fmt::Write;

use super::ast::{CohortQueryAst, Literal, Window};

/// Canonical text with the minimum parentheses needed for
/// `parse(print(ast)) == ast`. A nested And inside And (or Or inside Or) keeps
/// its parentheses so the tree shape survives.
pub fn print(ast: &CohortQueryAst) -> String {
    let mut out = String::new();
    write_or(&mut out, ast);
    out
}

fn write_literal(out: &mut String, lit: &Literal) {
    match lit {
        Literal::Number(v) => write!(out, "{v}").expect("string write"),
        Literal::Text(s) => {
            out.push('"');
            for ch in s.chars() {
                if ch == '"' || ch == '\\' {
                    out.push('\\');
                }
                out.push(ch);
            }
            out.push('"');
        }
    }
}

fn write_window(out: &mut String, w: &Window) {
    write!(out, "hours({},{})", w.lo, w.hi).expect("string write");
}

fn write_parens(out: &mut String, ast: &CohortQueryAst) {
    out.push('(');
    write_or(out, ast);
    out.push(')');
}

fn write_or(out: &mut String, ast: &CohortQueryAst) {
    match ast {
        CohortQueryAst::Or { children } => {
            for (i, c) in children.iter().enumerate() {
                if i > 0 {
                    out.push_str(" or ");
                }
                match c {
                    CohortQueryAst::Or { .. } => write_parens(out, c),
                    _ => write_and(out, c),
                }
            }
        }
        _ => write_and(out, ast),
    }
}

fn write_and(out: &mut String, ast: &CohortQueryAst) {
    match ast {
        CohortQueryAst::And { children } => {
            for (i, c) in children.iter().enumerate() {
                if i > 0 {
                    out.push_str(" and ");
                }
                match c {
                    CohortQueryAst::And { .. } | CohortQueryAst::Or { .. } => write_parens(out, c),
                    _ => write_unary(out, c),
                }
            }
        }
        CohortQueryAst::Or { .. } => write_parens(out, ast),
        _ => write_unary(out, ast),
    }
}

fn write_unary(out: &mut String, ast: &CohortQueryAst) {
    match ast {
        CohortQueryAst::Not { child } => {
            out.push_str("not ");
            match child.as_ref() {
                CohortQueryAst::And { .. } | CohortQueryAst::Or { .. } => write_parens(out, child),
                c => write_unary(out, c),
            }
        }
        CohortQueryAst::And { .. } | CohortQueryAst::Or { .. } => write_parens(out, ast),
        CohortQueryAst::BoolLit { value } => out.push_str(if *value { "true" } else { "false" }),
        CohortQueryAst::Compare { field, op, value } => {
            write!(out, "{field} {} ", op.symbol()).expect("string write");
            write_literal(out, value);
        }
        CohortQueryAst::In { field, values } => {
            write!(out, "{field} in [").expect("string write");
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_literal(out, v);
            }
            out.push(']');
        }
        CohortQueryAst::ExistsBp { series, window, op, threshold } => {
            write!(out, "exists(bp.{}, ", series.as_str()).expect("string write");
            write_window(out, window);
            write!(out, ", value {} {threshold})", op.symbol()).expect("string write");
        }
        CohortQueryAst::HasEvent { kind, window } => {
            write!(out, "has_event({kind}").expect("string write");
            if let Some(w) = window {
                out.push_str(", ");
                write_window(out, w);
            }
            out.push(')');
        }
    }
}
