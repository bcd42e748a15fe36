//! Canonical text rendering of models.
//!
//! `parse(pretty(m))` yields a model structurally equal to `m`; the printer
//! inserts parentheses only where the precedence ladder requires them.

use crate::ast::*;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

fn level(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq
        | BinOp::Ne
        | BinOp::Lt
        | BinOp::Le
        | BinOp::Gt
        | BinOp::Ge
        | BinOp::In
        | BinOp::NotIn
        | BinOp::Subset => 3,
        BinOp::RangeRestrict | BinOp::DomSubtract | BinOp::Override => 4,
        BinOp::MapsTo => 5,
        BinOp::Interval => 6,
        BinOp::Add | BinOp::Sub => 7,
        BinOp::Mul | BinOp::Div | BinOp::Mod => 8,
    }
}

fn left_assoc(op: BinOp) -> bool {
    !matches!(
        op,
        BinOp::Eq
            | BinOp::Ne
            | BinOp::Lt
            | BinOp::Le
            | BinOp::Gt
            | BinOp::Ge
            | BinOp::In
            | BinOp::NotIn
            | BinOp::Subset
            | BinOp::MapsTo
            | BinOp::Interval
    )
}

fn op_text(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "div",
        BinOp::Mod => "mod",
        BinOp::Eq => "=",
        BinOp::Ne => "/=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::And => "/\\",
        BinOp::Or => "\\/",
        BinOp::MapsTo => "|->",
        BinOp::Interval => "..",
        BinOp::RangeRestrict => "|>",
        BinOp::DomSubtract => "<<|",
        BinOp::Override => "<+",
        BinOp::In => "in",
        BinOp::NotIn => "notin",
        BinOp::Subset => "subset",
    }
}

fn write_expr(out: &mut String, e: &Expr, min_level: u8) {
    match &e.kind {
        ExprKind::Int(i) => out.push_str(&format!("{i}")),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Str(s) => out.push_str(&format!("\"{s}\"")),
        ExprKind::Ident(name) => out.push_str(name),
        ExprKind::Unary(op, operand) => {
            let needs_parens = 9 < min_level;
            if needs_parens {
                out.push('(');
            }
            out.push_str(match op {
                UnOp::Neg => "-",
                UnOp::Not => "not ",
            });
            write_expr(out, operand, 9);
            if needs_parens {
                out.push(')');
            }
        }
        ExprKind::Binary(op, lhs, rhs) => {
            let lv = level(*op);
            let needs_parens = lv < min_level;
            if needs_parens {
                out.push('(');
            }
            let (lmin, rmin) = if left_assoc(*op) { (lv, lv + 1) } else { (lv + 1, lv + 1) };
            write_expr(out, lhs, lmin);
            out.push(' ');
            out.push_str(op_text(*op));
            out.push(' ');
            write_expr(out, rhs, rmin);
            if needs_parens {
                out.push(')');
            }
        }
        ExprKind::SetLit(elems) => {
            out.push('{');
            for (i, e) in elems.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, e, 0);
            }
            out.push('}');
        }
        ExprKind::Comprehension { binder, domain, body } => {
            out.push('{');
            out.push_str(binder);
            out.push_str(" . ");
            write_expr(out, domain, 0);
            out.push_str(" | ");
            write_expr(out, body, 0);
            out.push('}');
        }
        ExprKind::Call(builtin, arg) => {
            out.push_str(match builtin {
                Builtin::Card => "card",
                Builtin::Dom => "dom",
                Builtin::Ran => "ran",
            });
            out.push('(');
            write_expr(out, arg, 0);
            out.push(')');
        }
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

fn write_type(out: &mut String, t: &TypeExpr) {
    match &t.kind {
        TypeKind::Nat => out.push_str("Nat"),
        TypeKind::Int => out.push_str("Int"),
        TypeKind::Bool => out.push_str("Bool"),
        TypeKind::Named(n) => out.push_str(n),
        TypeKind::Pow(inner) => {
            out.push_str("POW(");
            write_type(out, inner);
            out.push(')');
        }
        TypeKind::Prod(a, b) => {
            let atom = |out: &mut String, t: &TypeExpr| {
                if matches!(t.kind, TypeKind::Prod(..)) {
                    out.push('(');
                    write_type(out, t);
                    out.push(')');
                } else {
                    write_type(out, t);
                }
            };
            atom(out, a);
            out.push_str(" * ");
            atom(out, b);
        }
    }
}

/// Renders a probability as an exact finite decimal. Parsed probabilities
/// always have denominators of the form `2^a * 5^b`, so this never loses
/// precision.
pub fn prob_to_string(p: &Prob) -> String {
    let (mut num, mut den) = (*p.numer() as i128, *p.denom() as i128);
    let mut k = 0u32;
    while den % 2 == 0 {
        den /= 2;
        num *= 5;
        k += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        num *= 2;
        k += 1;
    }
    assert_eq!(den, 1, "probability denominator must be of the form 2^a*5^b");
    while k > 0 && num % 10 == 0 {
        num /= 10;
        k -= 1;
    }
    if k == 0 {
        return format!("{num}.0");
    }
    let scale = 10i128.pow(k);
    format!("{}.{:0width$}", num / scale, num % scale, width = k as usize)
}

fn write_rhs(out: &mut String, rhs: &AssignRhs) {
    match rhs {
        AssignRhs::Deterministic(e) => {
            out.push_str(":= ");
            out.push_str(&expr_to_string(e));
        }
        AssignRhs::UniformSet(e) => {
            out.push_str(":in ");
            out.push_str(&expr_to_string(e));
        }
        AssignRhs::UniformList(es) => {
            out.push_str(":= {");
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&expr_to_string(e));
            }
            out.push('}');
        }
        AssignRhs::Enumerated(branches) => {
            out.push_str(":= {");
            for (i, (e, p)) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&expr_to_string(e));
                out.push_str(" @ ");
                out.push_str(&prob_to_string(p));
            }
            out.push('}');
        }
    }
}

pub fn model_to_string(m: &Model) -> String {
    let mut out = String::new();
    let c = &m.context;
    out.push_str(&format!("CONTEXT {}\n", c.name.name));
    if !c.sets.is_empty() {
        out.push_str("  SETS\n");
        for s in &c.sets {
            match &s.def {
                SetDef::Elems(elems) => {
                    let names: Vec<&str> = elems.iter().map(|e| e.name.as_str()).collect();
                    out.push_str(&format!("    {} : {{ {} }}\n", s.name.name, names.join(", ")));
                }
                SetDef::Card(n) => out.push_str(&format!("    {} : {}\n", s.name.name, n)),
            }
        }
    }
    if !c.constants.is_empty() {
        out.push_str("  CONSTANTS\n");
        for cd in &c.constants {
            let mut ty = String::new();
            write_type(&mut ty, &cd.ty);
            out.push_str(&format!(
                "    {} : {} := {}\n",
                cd.name.name,
                ty,
                expr_to_string(&cd.init)
            ));
        }
    }
    out.push_str("END\n\n");

    let ma = &m.machine;
    out.push_str(&format!("MACHINE {} SEES {}\n", ma.name.name, ma.sees.name));
    if !ma.variables.is_empty() {
        let names: Vec<&str> = ma.variables.iter().map(|v| v.name.as_str()).collect();
        out.push_str(&format!("  VARIABLES {}\n", names.join(" ")));
    }
    if !ma.invariants.is_empty() {
        out.push_str("  INVARIANTS\n");
        for (v, t) in &ma.invariants {
            let mut ty = String::new();
            write_type(&mut ty, t);
            out.push_str(&format!("    {} : {}\n", v.name, ty));
        }
    }
    if !ma.init.is_empty() {
        out.push_str("  INITIALISATION\n");
        for (v, e) in &ma.init {
            out.push_str(&format!("    {} := {}\n", v.name, expr_to_string(e)));
        }
    }
    for ev in &ma.events {
        out.push_str(&format!("\n  EVENT {}\n", ev.name.name));
        out.push_str(&format!("    WEIGHT {}\n", expr_to_string(&ev.weight)));
        if !ev.params.is_empty() {
            out.push_str("    ANY");
            for (i, (p, d)) in ev.params.iter().enumerate() {
                if i > 0 {
                    out.push_str("       ");
                }
                out.push_str(&format!(" {} :in {}\n", p.name, expr_to_string(d)));
            }
        }
        out.push_str(&format!("    WHERE {}\n", expr_to_string(&ev.guard)));
        out.push_str("    THEN\n");
        for a in &ev.actions {
            let mut rhs = String::new();
            write_rhs(&mut rhs, &a.rhs);
            out.push_str(&format!("      {} {}\n", a.target.name, rhs));
        }
        out.push_str("  END\n");
    }
    if !ma.properties.is_empty() {
        out.push_str("\n  PROPERTIES\n");
        for (name, e) in &ma.properties {
            out.push_str(&format!("    {} := {}\n", name.name, expr_to_string(e)));
        }
    }
    out.push_str("END\n");
    out
}
