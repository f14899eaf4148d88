//! Affine-to-linear rewriting.
//!
//! Every nonpositive type gains an explicit way to be discarded: functions and
//! additive tuples are wrapped as `(...) & Unit` pairs whose second component
//! is "discard my captured context", and recursive types get a generated
//! global discarder that unfolds and discards structurally. After this pass
//! the program checks in strict linear mode.
//!
//! On types:
//!   L(a -> b)    = (L(a) -> L(b)) & Unit
//!   L(a1 & ... ) = (L(a1) & ...) & Unit
//!   L maps componentwise over products, sums, and recursive types.
//!
//! On terms, abstractions become pairs of the abstraction and the discard code
//! for their captured linear context; applications and projections select
//! component 1. Variables dropped by affine usage get explicit discard code at
//! their binder or in the additive branches that ignore them.

use crate::core::*;
use crate::typecheck::{EnvEntry, Mode, TypedProgram};
use std::collections::{BTreeMap, BTreeSet};

/// Rewrite an affine-checked program into one that checks strictly linearly.
pub fn linearize(tp: &TypedProgram) -> crate::diag::Result<TypedProgram> {
    let mut lz = Linearizer {
        tp,
        discards: BTreeMap::new(),
        discard_order: Vec::new(),
        fresh: 0,
    };
    let mut globals = Vec::new();
    for g in &tp.program.globals {
        let body = lz.expr(&g.body);
        globals.push(Global {
            name: g.name.clone(),
            ty: l_type(&g.ty),
            body,
        });
    }
    let main = lz.expr(&tp.program.main);
    for name in &lz.discard_order {
        globals.push(lz.discards[name].clone());
    }
    let mut prog = CoreProgram {
        globals,
        main,
        tag_names: tp.program.tag_names.clone(),
    };
    prog.gc_globals();
    prog.renumber();
    crate::typecheck::recheck(prog, Mode::Linear)
}

/// The type-level affine-to-linear map.
pub fn l_type(t: &Type) -> Type {
    match t {
        Type::Arrow(a, b) => Type::With(vec![
            Type::Arrow(Box::new(l_type(a)), Box::new(l_type(b))),
            Type::unit(),
        ]),
        Type::With(ts) => Type::With(vec![
            Type::With(ts.iter().map(l_type).collect()),
            Type::unit(),
        ]),
        Type::Tensor(ts) => Type::Tensor(ts.iter().map(l_type).collect()),
        Type::Sum(ts) => Type::Sum(ts.iter().map(l_type).collect()),
        Type::Mu { tag, body } => Type::Mu {
            tag: *tag,
            body: Box::new(l_type(body)),
        },
        Type::Var(i) => Type::Var(*i),
        Type::Meta(m) => Type::Meta(*m),
    }
}

struct Linearizer<'a> {
    tp: &'a TypedProgram,
    discards: BTreeMap<String, Global>,
    discard_order: Vec<String>,
    fresh: usize,
}

impl Linearizer<'_> {
    fn fresh_name(&mut self, hint: &str) -> String {
        self.fresh += 1;
        format!("$z_{hint}{}", self.fresh)
    }

    fn linear_env(&self, id: NodeId) -> Vec<EnvEntry> {
        self.tp
            .env(id)
            .iter()
            .filter(|e| !e.classical)
            .cloned()
            .collect()
    }

    /// Wrap `body` with discard code for `var : ty` (a pre-rewrite type).
    fn wrap_discard(&mut self, var: &str, ty: &Type, body: Expr) -> Expr {
        let z = self.z_var(var, ty);
        Expr::seq_unit(z, body)
    }

    /// Discard code of type Unit consuming `var : ty` (pre-rewrite type; the
    /// emitted code is valid against the rewritten types).
    fn z_var(&mut self, var: &str, ty: &Type) -> Expr {
        match ty {
            Type::Arrow(..) | Type::With(_) => {
                Expr::new(ExprKind::Proj(Box::new(Expr::var(var)), 2))
            }
            Type::Mu { .. } => {
                let name = self.discard_global(ty);
                Expr::new(ExprKind::App(
                    Box::new(Expr::var(name)),
                    Box::new(Expr::var(var)),
                ))
            }
            Type::Tensor(ts) => {
                let names: Vec<String> = ts.iter().map(|_| self.fresh_name("t")).collect();
                let mut body = Expr::unit_value();
                for (n, t) in names.iter().zip(ts).rev() {
                    if !t.is_positive() {
                        let z = self.z_var(n, t);
                        body = Expr::seq_unit(z, body);
                    }
                }
                Expr::new(ExprKind::LetTuple {
                    params: names,
                    rhs: Box::new(Expr::var(var)),
                    body: Box::new(body),
                })
            }
            Type::Sum(ts) => {
                let arms = ts
                    .iter()
                    .map(|t| {
                        let x = self.fresh_name("s");
                        let body = if t.is_positive() {
                            Expr::unit_value()
                        } else {
                            self.z_var(&x, t)
                        };
                        Arm { binder: x, body }
                    })
                    .collect();
                Expr::new(ExprKind::Case {
                    scrutinee: Box::new(Expr::var(var)),
                    arms,
                })
            }
            Type::Var(_) | Type::Meta(_) => unreachable!("discard at open type"),
        }
    }

    /// The generated global discarder for a recursive type, created once per
    /// tag on demand.
    fn discard_global(&mut self, mu: &Type) -> String {
        let Type::Mu { tag, .. } = mu else {
            unreachable!()
        };
        let base = self
            .tp
            .program
            .tag_names
            .get(tag)
            .cloned()
            .unwrap_or_else(|| format!("rec{tag}"));
        let name = format!(
            "$discard_{}",
            base.replace(['[', ']'], "_").replace("__", "_")
        );
        if self.discards.contains_key(&name) {
            return name;
        }
        // Reserve the name first so the structural recursion below can refer
        // back to it for self-referential types.
        self.discards.insert(
            name.clone(),
            Global {
                name: name.clone(),
                ty: Type::unit(),
                body: Expr::unit_value(),
            },
        );
        self.discard_order.push(name.clone());
        let lmu = l_type(mu);
        let f = self.fresh_name("f");
        let u = self.fresh_name("u");
        let z = self.z_var(&u, &mu.unfold_mu());
        let body = Expr::new(ExprKind::Lam {
            param: f.clone(),
            dom: lmu.clone(),
            body: Box::new(Expr::new(ExprKind::Unfold {
                mu: lmu.clone(),
                binder: u,
                rhs: Box::new(Expr::var(f)),
                body: Box::new(z),
            })),
        });
        let g = Global {
            name: name.clone(),
            ty: Type::Arrow(Box::new(lmu), Box::new(Type::unit())),
            body,
        };
        self.discards.insert(name.clone(), g);
        name
    }

    /// Unit-typed sequence discarding each environment entry in order.
    fn z_env(&mut self, env: &[EnvEntry]) -> Expr {
        let mut body = Expr::unit_value();
        for e in env.iter().rev() {
            let z = self.z_var(&e.name, &e.ty);
            body = Expr::seq_unit(z, body);
        }
        // Collapse the common empty case to a bare unit.
        if env.is_empty() {
            Expr::unit_value()
        } else if env.len() == 1 {
            // let () = Z(x) in ()  — keep as-is for uniformity.
            body
        } else {
            body
        }
    }

    /// Discards an additive branch must perform for linear variables the
    /// sibling branches consume but this one ignores.
    fn patch_branch(&mut self, branch: &Expr, target: &[EnvEntry], rewritten: Expr) -> Expr {
        if self.tp.node_flexible[branch.id] {
            return rewritten;
        }
        let have: BTreeSet<&str> = self
            .tp
            .env(branch.id)
            .iter()
            .map(|e| e.name.as_str())
            .collect();
        let mut out = rewritten;
        for e in target.iter().rev() {
            if !have.contains(e.name.as_str()) {
                out = self.wrap_discard(&e.name, &e.ty, out);
            }
        }
        out
    }

    /// Discard an unused nonpositive binder at its binding site.
    fn patch_binder(&mut self, binder: &str, ty: &Type, body_node: &Expr, rewritten: Expr) -> Expr {
        if ty.is_positive() || self.tp.node_flexible[body_node.id] {
            return rewritten;
        }
        let used = self
            .tp
            .env(body_node.id)
            .iter()
            .any(|e| e.name == binder);
        if used {
            rewritten
        } else {
            self.wrap_discard(binder, ty, rewritten)
        }
    }

    fn expr(&mut self, e: &Expr) -> Expr {
        let span = e.span;
        let kind = match &e.kind {
            ExprKind::Var(x) => ExprKind::Var(x.clone()),
            ExprKind::Lam { param, dom, body } => {
                let inner = self.expr(body);
                let inner = self.patch_binder(param, dom, body, inner);
                let lam = Expr::with_span(
                    ExprKind::Lam {
                        param: param.clone(),
                        dom: l_type(dom),
                        body: Box::new(inner),
                    },
                    span,
                );
                let captured = self.linear_env(e.id);
                let z = self.z_env(&captured);
                ExprKind::AddTuple(vec![lam, z])
            }
            ExprKind::App(f, a) => {
                let f1 = self.expr(f);
                let a1 = self.expr(a);
                ExprKind::App(
                    Box::new(Expr::new(ExprKind::Proj(Box::new(f1), 1))),
                    Box::new(a1),
                )
            }
            ExprKind::Amb(a, b) => {
                let target = self.linear_env(e.id);
                let a1 = self.expr(a);
                let a1 = self.patch_branch(a, &target, a1);
                let b1 = self.expr(b);
                let b1 = self.patch_branch(b, &target, b1);
                ExprKind::Amb(Box::new(a1), Box::new(b1))
            }
            ExprKind::Fail => ExprKind::Fail,
            ExprKind::Factor(w, body) => {
                ExprKind::Factor(w.clone(), Box::new(self.expr(body)))
            }
            ExprKind::Tuple(es) => {
                ExprKind::Tuple(es.iter().map(|x| self.expr(x)).collect())
            }
            ExprKind::AddTuple(es) => {
                let target = self.linear_env(e.id);
                let comps: Vec<Expr> = es
                    .iter()
                    .map(|x| {
                        let r = self.expr(x);
                        self.patch_branch(x, &target, r)
                    })
                    .collect();
                let z = self.z_env(&target);
                ExprKind::AddTuple(vec![
                    Expr::with_span(ExprKind::AddTuple(comps), span),
                    z,
                ])
            }
            ExprKind::LetTuple { params, rhs, body } => {
                let comps = match self.tp.ty(rhs.id) {
                    Type::Tensor(ts) => ts.clone(),
                    _ => unreachable!("let-tuple over non-product"),
                };
                let rhs1 = self.expr(rhs);
                let mut body1 = self.expr(body);
                for (p, t) in params.iter().zip(&comps).rev() {
                    body1 = self.patch_binder(p, t, body, body1);
                }
                ExprKind::LetTuple {
                    params: params.clone(),
                    rhs: Box::new(rhs1),
                    body: Box::new(body1),
                }
            }
            ExprKind::Proj(x, i) => {
                let x1 = self.expr(x);
                ExprKind::Proj(
                    Box::new(Expr::new(ExprKind::Proj(Box::new(x1), 1))),
                    *i,
                )
            }
            ExprKind::Inj { index, sum, payload } => ExprKind::Inj {
                index: *index,
                sum: l_type(sum),
                payload: Box::new(self.expr(payload)),
            },
            ExprKind::Case { scrutinee, arms } => {
                let scrut_used: BTreeSet<&str> = self
                    .tp
                    .env(scrutinee.id)
                    .iter()
                    .map(|x| x.name.as_str())
                    .collect();
                let target: Vec<EnvEntry> = self
                    .linear_env(e.id)
                    .into_iter()
                    .filter(|x| !scrut_used.contains(x.name.as_str()))
                    .collect();
                let alts = match self.tp.ty(scrutinee.id) {
                    Type::Sum(ts) => ts.clone(),
                    _ => unreachable!("case over non-sum"),
                };
                let scrut1 = self.expr(scrutinee);
                let arms1 = arms
                    .iter()
                    .zip(&alts)
                    .map(|(arm, alt)| {
                        let b = self.expr(&arm.body);
                        let b = self.patch_binder(&arm.binder, alt, &arm.body, b);
                        let b = self.patch_branch(&arm.body, &target, b);
                        Arm {
                            binder: arm.binder.clone(),
                            body: b,
                        }
                    })
                    .collect();
                ExprKind::Case {
                    scrutinee: Box::new(scrut1),
                    arms: arms1,
                }
            }
            ExprKind::Fold { mu, body } => ExprKind::Fold {
                mu: l_type(mu),
                body: Box::new(self.expr(body)),
            },
            ExprKind::Unfold { mu, binder, rhs, body } => {
                let inner_ty = mu.unfold_mu();
                let rhs1 = self.expr(rhs);
                let body1 = self.expr(body);
                let body1 = self.patch_binder(binder, &inner_ty, body, body1);
                ExprKind::Unfold {
                    mu: l_type(mu),
                    binder: binder.clone(),
                    rhs: Box::new(rhs1),
                    body: Box::new(body1),
                }
            }
            ExprKind::Eq(..) => unreachable!("`==` survives past typechecking"),
        };
        Expr::with_span(kind, span)
    }
}
