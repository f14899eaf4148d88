//! Pretty printers: a re-parseable fully parenthesized form for surface
//! programs (round-trip tested) and a readable rendering of core programs for
//! `--emit-transformed`.

use crate::ast::*;
use crate::core::{self, rational_to_string, CoreProgram, Expr, ExprKind, TagNames};

// ---- surface ----

pub fn print_surface(p: &SurfaceProgram) -> String {
    let mut out = String::new();
    for item in &p.items {
        match item {
            Item::Data(d) => {
                out.push_str(&format!("data {} = ", d.name));
                for (i, c) in d.ctors.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" | ");
                    }
                    out.push_str(&c.name);
                    for a in &c.args {
                        out.push(' ');
                        out.push_str(&print_stype_atom(a));
                    }
                }
                out.push_str(";\n");
            }
            Item::Define(d) => {
                out.push_str(&format!("define {}", d.name));
                for (p, ann) in &d.params {
                    match ann {
                        Some(t) => out.push_str(&format!(" ({p}: {})", print_stype(t))),
                        None => out.push_str(&format!(" {p}")),
                    }
                }
                if let Some(r) = &d.ret {
                    out.push_str(&format!(" : {}", print_stype(r)));
                }
                out.push_str(&format!(" = {};\n", print_sexpr(&d.body)));
            }
        }
    }
    out.push_str(&print_sexpr(&p.main));
    out.push('\n');
    out
}

pub fn print_stype(t: &SType) -> String {
    match t {
        SType::Name(n, _) => n.clone(),
        SType::Arrow(a, b) => format!("({} -> {})", print_stype(a), print_stype(b)),
        SType::Tensor(ts) if ts.is_empty() => "()".into(),
        SType::Tensor(ts) => join_types(ts, " * "),
        SType::With(ts) => join_types(ts, " & "),
        SType::Sum(ts) => join_types(ts, " + "),
    }
}

fn join_types(ts: &[SType], sep: &str) -> String {
    let parts: Vec<String> = ts.iter().map(print_stype).collect();
    format!("({})", parts.join(sep))
}

fn print_stype_atom(t: &SType) -> String {
    match t {
        SType::Name(n, _) => n.clone(),
        _ => print_stype(t),
    }
}

/// Fully parenthesized; re-parses to a structurally identical AST.
pub fn print_sexpr(e: &SExpr) -> String {
    match &e.kind {
        SExprKind::Var(x) => x.clone(),
        SExprKind::Lam { param, ann, body } => match ann {
            Some(t) => format!("(\\{param}: {}. {})", print_stype(t), print_sexpr(body)),
            None => format!("(\\{param}. {})", print_sexpr(body)),
        },
        SExprKind::App(f, a) => format!("({} {})", print_satom(f), print_satom(a)),
        SExprKind::Amb(a, b) => format!("(amb {} {})", print_satom(a), print_satom(b)),
        SExprKind::Fail => "fail".into(),
        SExprKind::Factor(w, body) => {
            format!("(factor {} in {})", rational_to_string(w), print_sexpr(body))
        }
        SExprKind::Tuple(es) => {
            let parts: Vec<String> = es.iter().map(print_sexpr).collect();
            format!("({})", parts.join(", "))
        }
        SExprKind::AddTuple(es) => {
            let parts: Vec<String> = es.iter().map(print_sexpr).collect();
            format!("<{}>", parts.join(", "))
        }
        SExprKind::Proj(x, i) => format!("{}.{i}", print_satom(x)),
        SExprKind::Let { pat, rhs, body } => {
            let pat = match pat {
                LetPat::Var(x) => x.clone(),
                LetPat::Tuple(xs) => format!("({})", xs.join(", ")),
            };
            format!("(let {pat} = {} in {})", print_sexpr(rhs), print_sexpr(body))
        }
        SExprKind::If { cond, then, els } => format!(
            "(if {} then {} else {})",
            print_sexpr(cond),
            print_sexpr(then),
            print_sexpr(els)
        ),
        SExprKind::Case {
            scrutinee,
            explicit_unfold,
            arms,
        } => {
            let mut out = format!(
                "(case {}{} of ",
                if *explicit_unfold { "unfold " } else { "" },
                print_sexpr(scrutinee)
            );
            for (i, arm) in arms.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                out.push_str(&arm.ctor);
                for v in &arm.vars {
                    out.push(' ');
                    out.push_str(v);
                }
                out.push_str(&format!(" => {}", print_satom_forced(&arm.body)));
            }
            out.push(')');
            out
        }
        SExprKind::Eq(a, b) => format!("({} == {})", print_satom(a), print_satom(b)),
        SExprKind::And(a, b) => format!("({} and {})", print_satom(a), print_satom(b)),
    }
}

/// Print in a position that must be an application atom.
fn print_satom(e: &SExpr) -> String {
    match &e.kind {
        SExprKind::Var(_)
        | SExprKind::Fail
        | SExprKind::Tuple(_)
        | SExprKind::AddTuple(_)
        | SExprKind::Proj(..) => print_sexpr(e),
        _ => print_sexpr(e), // already parenthesized by print_sexpr
    }
}

/// Arm bodies: parenthesize anything that could swallow following arms.
fn print_satom_forced(e: &SExpr) -> String {
    match &e.kind {
        SExprKind::Var(_) | SExprKind::Fail => print_sexpr(e),
        _ => format!("({})", print_sexpr(e)),
    }
}

// ---- core ----

pub fn print_program(p: &CoreProgram) -> String {
    let mut out = String::new();
    for g in &p.globals {
        out.push_str(&format!(
            "define {} : {} =\n  {};\n\n",
            g.name,
            core::render_type(&g.ty, &p.tag_names),
            print_expr(&g.body, &p.tag_names)
        ));
    }
    out.push_str(&print_expr(&p.main, &p.tag_names));
    out.push('\n');
    out
}

pub fn print_expr(e: &Expr, names: &TagNames) -> String {
    match &e.kind {
        ExprKind::Var(x) => x.clone(),
        ExprKind::Lam { param, dom, body } => format!(
            "(\\{param}: {}. {})",
            core::render_type(dom, names),
            print_expr(body, names)
        ),
        ExprKind::App(f, a) => format!("({} {})", print_expr(f, names), print_expr(a, names)),
        ExprKind::Amb(a, b) => {
            format!("(amb {} {})", print_expr(a, names), print_expr(b, names))
        }
        ExprKind::Fail => "fail".into(),
        ExprKind::Factor(w, body) => format!(
            "(factor {} in {})",
            rational_to_string(w),
            print_expr(body, names)
        ),
        ExprKind::Tuple(es) => {
            let parts: Vec<String> = es.iter().map(|x| print_expr(x, names)).collect();
            format!("({})", parts.join(", "))
        }
        ExprKind::AddTuple(es) => {
            let parts: Vec<String> = es.iter().map(|x| print_expr(x, names)).collect();
            format!("<{}>", parts.join(", "))
        }
        ExprKind::LetTuple { params, rhs, body } => format!(
            "(let ({}) = {} in {})",
            params.join(", "),
            print_expr(rhs, names),
            print_expr(body, names)
        ),
        ExprKind::Proj(x, i) => format!("{}.{i}", print_expr(x, names)),
        ExprKind::Inj { index, payload, .. } => {
            format!("(in{index} {})", print_expr(payload, names))
        }
        ExprKind::Case { scrutinee, arms } => {
            let mut out = format!("(case {} of ", print_expr(scrutinee, names));
            for (i, arm) in arms.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                out.push_str(&format!(
                    "in{} {} => {}",
                    i + 1,
                    arm.binder,
                    print_expr(&arm.body, names)
                ));
            }
            out.push(')');
            out
        }
        ExprKind::Fold { mu, body } => format!(
            "(fold[{}] {})",
            core::render_type(mu, names),
            print_expr(body, names)
        ),
        ExprKind::Unfold {
            mu,
            binder,
            rhs,
            body,
        } => format!(
            "(unfold[{}] {binder} = {} in {})",
            core::render_type(mu, names),
            print_expr(rhs, names),
            print_expr(body, names)
        ),
        ExprKind::Eq(a, b) => format!("({} == {})", print_expr(a, names), print_expr(b, names)),
    }
}
