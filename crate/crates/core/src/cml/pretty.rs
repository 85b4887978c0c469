//! Canonical source form of a syntax tree. Reparsing the output yields a
//! structurally identical tree.

use std::fmt::Write;

use super::ast::*;
use crate::engine::ir::{BinOp, UnOp};

pub fn pretty(m: &ModelAst) -> String {
    let mut out = format!("model {} {{\n", m.name.name);
    for item in &m.items {
        item_str(&mut out, item);
    }
    out.push_str("}\n");
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn item_str(out: &mut String, item: &Item) {
    match item {
        Item::Const { name, ty, value } => {
            let _ = writeln!(out, "    const {}: {} = {};", name.name, type_str(ty), expr_str(value));
        }
        Item::Extern { name, ty } => {
            let _ = writeln!(out, "    extern const {}: {};", name.name, type_str(ty));
        }
        Item::Record { name, fields } => {
            let _ = writeln!(out, "    record {} {{", name.name);
            for (f, t) in fields {
                let _ = writeln!(out, "        {}: {};", f.name, type_str(t));
            }
            out.push_str("    }\n");
        }
        Item::State { fields, time, .. } => {
            out.push_str("    state {\n");
            for f in fields {
                let _ = write!(out, "        {}: {}", f.name.name, type_str(&f.ty));
                match &f.domain {
                    Some(DomainAst::Interval(lo, hi)) => {
                        let _ = write!(out, " in [{}, {}]", expr_str(lo), expr_str(hi));
                    }
                    Some(DomainAst::Set(items)) => {
                        let _ = write!(out, " in {{{}}}", list_str(items));
                    }
                    None => {}
                }
                out.push_str(";\n");
            }
            if let Some((lo, hi)) = time {
                let _ = writeln!(out, "        time in [{}, {}];", expr_str(lo), expr_str(hi));
            }
            out.push_str("    }\n");
        }
        Item::Init { body, .. } => {
            out.push_str("    init ");
            block_str(out, body, 1);
            out.push('\n');
        }
        Item::Halt { cond, .. } => {
            let _ = writeln!(out, "    halt when {};", expr_str(cond));
        }
        Item::Timestep { value, .. } => {
            let _ = writeln!(out, "    timestep {};", expr_str(value));
        }
        Item::Law(l) => {
            let _ = writeln!(out, "    law {} {{", l.name.name);
            let _ = writeln!(out, "        when {};", expr_str(&l.guard));
            out.push_str("        then ");
            block_str(out, &l.body, 2);
            out.push_str("\n    }\n");
        }
    }
}

fn block_str(out: &mut String, stmts: &[StmtAst], depth: usize) {
    out.push_str("{\n");
    for s in stmts {
        stmt_str(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn stmt_str(out: &mut String, s: &StmtAst, depth: usize) {
    indent(out, depth);
    match s {
        StmtAst::Assign { target, value, .. } => {
            let _ = writeln!(out, "{} = {};", expr_str(target), expr_str(value));
        }
        StmtAst::Let { name, value } => {
            let _ = writeln!(out, "let {} = {};", name.name, expr_str(value));
        }
        StmtAst::If {
            cond,
            then,
            otherwise,
            ..
        } => {
            let _ = write!(out, "if {} ", head_str(cond));
            block_str(out, then, depth);
            if !otherwise.is_empty() {
                out.push_str(" else ");
                block_str(out, otherwise, depth);
            }
            out.push('\n');
        }
        StmtAst::For {
            var, source, body, ..
        } => {
            let _ = write!(out, "for {} in {} ", var.name, head_str(source));
            block_str(out, body, depth);
            out.push('\n');
        }
    }
}

/// Record literals in `if`/`for` heads need parentheses.
fn head_str(e: &ExprAst) -> String {
    let s = expr_str(e);
    if contains_record(e) {
        format!("({s})")
    } else {
        s
    }
}

fn contains_record(e: &ExprAst) -> bool {
    match &e.kind {
        ExprAstKind::Record(..) => true,
        ExprAstKind::Member(a, _) | ExprAstKind::Unary(_, a) | ExprAstKind::Lambda(_, a) => {
            contains_record(a)
        }
        ExprAstKind::Index(a, _) => contains_record(a),
        ExprAstKind::Binary(_, a, b) => contains_record(a) || contains_record(b),
        _ => false,
    }
}

pub fn type_str(t: &TypeAst) -> String {
    match &t.kind {
        TypeAstKind::Real => "real".into(),
        TypeAstKind::Int => "int".into(),
        TypeAstKind::Bool => "bool".into(),
        TypeAstKind::Complex => "complex".into(),
        TypeAstKind::Vector(n) => format!("vector[{}]", expr_str(n)),
        TypeAstKind::Cgrid(n, dx) => format!("cgrid[{}, {}]", expr_str(n), expr_str(dx)),
        TypeAstKind::List(e, None) => format!("list<{}>", type_str(e)),
        TypeAstKind::List(e, Some(n)) => format!("list<{}, {}>", type_str(e), prec_str(n, ADD)),
        TypeAstKind::Pw(attrs) => format!(
            "pw{{{}}}",
            attrs
                .iter()
                .map(|(a, t)| format!("{}: {}", a.name, type_str(t)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        TypeAstKind::Named(n) => n.clone(),
    }
}

const OR: u8 = 1;
const AND: u8 = 2;
const CMP: u8 = 3;
const ADD: u8 = 4;
const MUL: u8 = 5;
const UNARY: u8 = 6;
const POW: u8 = 7;
const POSTFIX: u8 = 8;

fn bin_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => OR,
        BinOp::And => AND,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => CMP,
        BinOp::Add | BinOp::Sub => ADD,
        BinOp::Mul | BinOp::Div => MUL,
        BinOp::Pow => POW,
    }
}

fn prec(e: &ExprAst) -> u8 {
    match &e.kind {
        ExprAstKind::Binary(op, ..) => bin_prec(*op),
        ExprAstKind::Unary(..) => UNARY,
        ExprAstKind::Lambda(..) => 0,
        _ => POSTFIX,
    }
}

/// Prints `e`, parenthesized when its precedence is below `min`.
fn prec_str(e: &ExprAst, min: u8) -> String {
    let s = expr_str(e);
    if prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

fn list_str(items: &[ExprAst]) -> String {
    items.iter().map(expr_str).collect::<Vec<_>>().join(", ")
}

fn real_str(x: f64) -> String {
    // Debug output is the shortest string that parses back to `x`.
    let s = format!("{x:?}");
    if s.contains(['.', 'e']) {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn expr_str(e: &ExprAst) -> String {
    match &e.kind {
        ExprAstKind::Int(n) => n.to_string(),
        ExprAstKind::Real(x) => real_str(*x),
        ExprAstKind::Imag(x) => format!("{}i", real_str(*x)),
        ExprAstKind::Bool(b) => b.to_string(),
        ExprAstKind::Str(s) => format!("\"{s}\""),
        ExprAstKind::Name(n) => n.clone(),
        ExprAstKind::Member(a, m) => format!("{}.{}", prec_str(a, POSTFIX), m.name),
        ExprAstKind::Index(a, i) => format!("{}[{}]", prec_str(a, POSTFIX), expr_str(i)),
        ExprAstKind::Unary(op, a) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            format!("{sym}{}", prec_str(a, UNARY))
        }
        ExprAstKind::Binary(op, a, b) => {
            let p = bin_prec(*op);
            let (lmin, rmin) = match p {
                POW => (POSTFIX, UNARY),
                CMP => (p + 1, p + 1),
                _ => (p, p + 1),
            };
            format!("{} {} {}", prec_str(a, lmin), op.symbol(), prec_str(b, rmin))
        }
        ExprAstKind::Call(f, args) => format!("{}({})", f.name, list_str(args)),
        ExprAstKind::Lambda(v, body) => format!("|{}| {}", v.name, expr_str(body)),
        ExprAstKind::Random { range, dist, params } => {
            let r = match range {
                RangeAst::Unbounded => String::new(),
                RangeAst::Interval(lo, hi) => format!("[{}, {}], ", expr_str(lo), expr_str(hi)),
                RangeAst::Set(items) => format!("{{{}}}, ", list_str(items)),
            };
            if params.is_empty() {
                format!("random({r}{})", dist.name)
            } else {
                format!("random({r}{}({}))", dist.name, list_str(params))
            }
        }
        ExprAstKind::List(items) => format!("[{}]", list_str(items)),
        ExprAstKind::Record(n, fields) => format!(
            "{} {{ {} }}",
            n.name,
            fields
                .iter()
                .map(|(f, v)| format!("{}: {}", f.name, expr_str(v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        ExprAstKind::Comprehension { body, var, source } => {
            format!("[{} for {} in {}]", expr_str(body), var.name, expr_str(source))
        }
    }
}
