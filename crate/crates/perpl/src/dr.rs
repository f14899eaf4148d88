//! Recursive-type elimination by defunctionalization (D) and
//! refunctionalization (R), scheduled greedily over the DR-graph.
//!
//! For a recursive type `sigma`:
//! - D replaces `sigma` by a sum `phi` with one alternative per `fold_sigma`
//!   site, carrying that site's tuple of nonglobal free variables. The folds'
//!   bodies move into a generated global `u_sigma : phi -> sigma_body{phi}`
//!   applied at each unfold.
//! - R replaces `sigma` by an additive product `phi` with one function per
//!   `unfold_sigma` site, abstracting that site's scope over its free
//!   variables. The scopes move into a generated global
//!   `f_sigma : sigma_body{phi} -> phi` applied at each fold.
//!
//! A step only applies when its `phi` mentions no recursive type (otherwise
//! the replacement would regress). The DR-graph records, per type and label,
//! which recursive types block it; a successful elimination order exists iff
//! some choice of labels induces an acyclic subgraph, and the greedy loop
//! below finds one whenever it exists.

use crate::core::*;
use crate::diag::{Diagnostic, Diagnostics};
use crate::typecheck::{recheck, Mode, TypedProgram};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Label {
    D,
    R,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::D => write!(f, "D"),
            Label::R => write!(f, "R"),
        }
    }
}

/// One fold or unfold site of a recursive type, in program order.
#[derive(Debug, Clone)]
pub struct Site {
    /// Node id of the fold/unfold expression.
    pub node: NodeId,
    /// Free-variable names of the site body/scope, in first-use order.
    pub vars: Vec<String>,
    /// Their types (current program types).
    pub var_tys: Vec<Type>,
    /// For unfold sites: the scope's type and the unfold binder.
    pub scope_ty: Type,
    pub binder: String,
}

/// Site tables and replacement types for one recursive type.
#[derive(Debug, Clone)]
pub struct TagInfo {
    pub tag: Tag,
    /// A representative `Mu` type with this tag.
    pub mu: Type,
    pub fold_sites: Vec<Site>,
    pub unfold_sites: Vec<Site>,
}

impl TagInfo {
    /// D's replacement type: the sum of fold-site free-variable tuples.
    pub fn phi_d(&self) -> Type {
        Type::Sum(
            self.fold_sites
                .iter()
                .map(|s| Type::Tensor(s.var_tys.clone()))
                .collect(),
        )
    }

    /// R's replacement type: the additive product of per-unfold-site
    /// functions from free-variable tuples to scope types.
    pub fn phi_r(&self) -> Type {
        Type::With(
            self.unfold_sites
                .iter()
                .map(|s| {
                    Type::Arrow(
                        Box::new(Type::Tensor(s.var_tys.clone())),
                        Box::new(s.scope_ty.clone()),
                    )
                })
                .collect(),
        )
    }
}

/// Collect fold/unfold site tables for every live recursive type.
pub fn collect_sites(tp: &TypedProgram) -> BTreeMap<Tag, TagInfo> {
    let mut out: BTreeMap<Tag, TagInfo> = BTreeMap::new();
    for tag in tp.program.live_tags() {
        out.insert(
            tag,
            TagInfo {
                tag,
                mu: Type::unit(),
                fold_sites: Vec::new(),
                unfold_sites: Vec::new(),
            },
        );
    }
    let mut visit = |e: &Expr| {
        e.visit(&mut |n| match &n.kind {
            ExprKind::Fold { mu, body } => {
                if let Type::Mu { tag, .. } = mu {
                    let info = out.get_mut(tag).expect("fold at unknown tag");
                    info.mu = mu.clone();
                    let env = tp.env(body.id);
                    info.fold_sites.push(Site {
                        node: n.id,
                        vars: env.iter().map(|x| x.name.clone()).collect(),
                        var_tys: env.iter().map(|x| x.ty.clone()).collect(),
                        scope_ty: Type::unit(),
                        binder: String::new(),
                    });
                }
            }
            ExprKind::Unfold { mu, binder, body, .. } => {
                if let Type::Mu { tag, .. } = mu {
                    let info = out.get_mut(tag).expect("unfold at unknown tag");
                    info.mu = mu.clone();
                    let env: Vec<_> = tp
                        .env(body.id)
                        .iter()
                        .filter(|x| x.name != *binder)
                        .cloned()
                        .collect();
                    info.unfold_sites.push(Site {
                        node: n.id,
                        vars: env.iter().map(|x| x.name.clone()).collect(),
                        var_tys: env.iter().map(|x| x.ty.clone()).collect(),
                        scope_ty: tp.ty(body.id).clone(),
                        binder: binder.clone(),
                    });
                }
            }
            _ => {}
        })
    };
    for g in &tp.program.globals {
        visit(&g.body);
    }
    visit(&tp.program.main);
    // A tag can be live in signatures yet have no sites; synthesize its mu
    // representative from any annotation so phi computation stays total.
    let missing: Vec<Tag> = out
        .iter()
        .filter(|(_, i)| i.mu == Type::unit())
        .map(|(t, _)| *t)
        .collect();
    if !missing.is_empty() {
        let mut reps: BTreeMap<Tag, Type> = BTreeMap::new();
        let mut grab = |t: &Type| {
            fn go(t: &Type, reps: &mut BTreeMap<Tag, Type>) {
                match t {
                    Type::Mu { tag, body } => {
                        reps.entry(*tag).or_insert_with(|| t.clone());
                        go(body, reps);
                    }
                    Type::Arrow(a, b) => {
                        go(a, reps);
                        go(b, reps);
                    }
                    Type::Tensor(ts) | Type::With(ts) | Type::Sum(ts) => {
                        for t in ts {
                            go(t, reps);
                        }
                    }
                    _ => {}
                }
            }
            go(t, &mut reps)
        };
        for g in &tp.program.globals {
            grab(&g.ty);
        }
        let mut prog_tys = Vec::new();
        let mut collect_tys = |e: &Expr| {
            e.visit(&mut |n| match &n.kind {
                ExprKind::Lam { dom, .. } => prog_tys.push(dom.clone()),
                ExprKind::Inj { sum, .. } => prog_tys.push(sum.clone()),
                ExprKind::Fold { mu, .. } | ExprKind::Unfold { mu, .. } => {
                    prog_tys.push(mu.clone())
                }
                _ => {}
            })
        };
        for g in &tp.program.globals {
            collect_tys(&g.body);
        }
        collect_tys(&tp.program.main);
        for t in &prog_tys {
            grab(t);
        }
        for tag in missing {
            if let Some(mu) = reps.get(&tag) {
                out.get_mut(&tag).unwrap().mu = mu.clone();
            }
        }
    }
    out
}

fn sanitize(name: &str) -> String {
    name.replace(['[', ']'], "_").replace("__", "_")
}

fn mu_blockers(phi: &Type) -> BTreeSet<Tag> {
    let mut tags = BTreeSet::new();
    phi.collect_tags(&mut tags);
    tags
}

// ---------------------------------------------------------------------------
// Defunctionalization
// ---------------------------------------------------------------------------

/// Apply D to the recursive type `tag`. Precondition: its `phi` mentions no
/// recursive type.
pub fn defunctionalize(tp: &TypedProgram, tag: Tag) -> Result<TypedProgram, Diagnostics> {
    let sites = collect_sites(tp);
    let info = sites
        .get(&tag)
        .ok_or_else(|| Diagnostics::from(Diagnostic::new(None, "unknown recursive type")))?;
    let phi = info.phi_d();
    let blockers = mu_blockers(&phi);
    if !blockers.is_empty() {
        return Err(precondition_error(tp, info, Label::D, &blockers));
    }
    let tag_name = name_of(tp, tag);
    let u_name = format!("$u_{}", sanitize(&tag_name));
    let unfolded = info.mu.unfold_mu().replace_tag(tag, &phi);

    let site_index: BTreeMap<NodeId, usize> = info
        .fold_sites
        .iter()
        .enumerate()
        .map(|(i, s)| (s.node, i + 1))
        .collect();

    struct Dx<'a> {
        tag: Tag,
        phi: Type,
        unfolded: Type,
        u_name: String,
        site_index: &'a BTreeMap<NodeId, usize>,
        sites: &'a [Site],
    }
    impl Dx<'_> {
        fn ty(&self, t: &Type) -> Type {
            t.replace_tag(self.tag, &self.phi)
        }
        fn go(&self, e: &Expr) -> Expr {
            let span = e.span;
            let kind = match &e.kind {
                ExprKind::Fold { mu, body } if is_tag(mu, self.tag) => {
                    let i = self.site_index[&e.id];
                    let site = &self.sites[i - 1];
                    let payload = Expr::new(ExprKind::Tuple(
                        site.vars.iter().map(Expr::var).collect(),
                    ));
                    let _ = body;
                    ExprKind::Inj {
                        index: i,
                        sum: self.phi.clone(),
                        payload: Box::new(payload),
                    }
                }
                ExprKind::Unfold { mu, binder, rhs, body } if is_tag(mu, self.tag) => {
                    let call = Expr::new(ExprKind::App(
                        Box::new(Expr::var(&self.u_name)),
                        Box::new(self.go(rhs)),
                    ));
                    let lam = Expr::new(ExprKind::Lam {
                        param: binder.clone(),
                        dom: self.unfolded.clone(),
                        body: Box::new(self.go(body)),
                    });
                    ExprKind::App(Box::new(lam), Box::new(call))
                }
                other => return self.map_structural(other, span),
            };
            Expr::with_span(kind, span)
        }
        fn map_structural(&self, kind: &ExprKind, span: Option<crate::diag::Span>) -> Expr {
            let kind = match kind {
                ExprKind::Var(x) => ExprKind::Var(x.clone()),
                ExprKind::Lam { param, dom, body } => ExprKind::Lam {
                    param: param.clone(),
                    dom: self.ty(dom),
                    body: Box::new(self.go(body)),
                },
                ExprKind::App(a, b) => ExprKind::App(Box::new(self.go(a)), Box::new(self.go(b))),
                ExprKind::Amb(a, b) => ExprKind::Amb(Box::new(self.go(a)), Box::new(self.go(b))),
                ExprKind::Fail => ExprKind::Fail,
                ExprKind::Factor(w, e) => ExprKind::Factor(w.clone(), Box::new(self.go(e))),
                ExprKind::Tuple(es) => ExprKind::Tuple(es.iter().map(|x| self.go(x)).collect()),
                ExprKind::AddTuple(es) => {
                    ExprKind::AddTuple(es.iter().map(|x| self.go(x)).collect())
                }
                ExprKind::LetTuple { params, rhs, body } => ExprKind::LetTuple {
                    params: params.clone(),
                    rhs: Box::new(self.go(rhs)),
                    body: Box::new(self.go(body)),
                },
                ExprKind::Proj(x, i) => ExprKind::Proj(Box::new(self.go(x)), *i),
                ExprKind::Inj { index, sum, payload } => ExprKind::Inj {
                    index: *index,
                    sum: self.ty(sum),
                    payload: Box::new(self.go(payload)),
                },
                ExprKind::Case { scrutinee, arms } => ExprKind::Case {
                    scrutinee: Box::new(self.go(scrutinee)),
                    arms: arms
                        .iter()
                        .map(|a| Arm {
                            binder: a.binder.clone(),
                            body: self.go(&a.body),
                        })
                        .collect(),
                },
                ExprKind::Fold { mu, body } => ExprKind::Fold {
                    mu: self.ty(mu),
                    body: Box::new(self.go(body)),
                },
                ExprKind::Unfold { mu, binder, rhs, body } => ExprKind::Unfold {
                    mu: self.ty(mu),
                    binder: binder.clone(),
                    rhs: Box::new(self.go(rhs)),
                    body: Box::new(self.go(body)),
                },
                ExprKind::Eq(..) => unreachable!("== past typechecking"),
            };
            Expr::with_span(kind, span)
        }
    }

    let dx = Dx {
        tag,
        phi: phi.clone(),
        unfolded: unfolded.clone(),
        u_name: u_name.clone(),
        site_index: &site_index,
        sites: &info.fold_sites,
    };

    // The original fold bodies, D-translated, become the arms of u.
    let mut fold_bodies: BTreeMap<NodeId, Expr> = BTreeMap::new();
    let mut grab = |e: &Expr| {
        e.visit(&mut |n| {
            if let ExprKind::Fold { mu, body } = &n.kind {
                if is_tag(mu, tag) {
                    fold_bodies.insert(n.id, dx.go(body));
                }
            }
        })
    };
    for g in &tp.program.globals {
        grab(&g.body);
    }
    grab(&tp.program.main);

    let mut fresh = 0usize;
    let arms: Vec<Arm> = info
        .fold_sites
        .iter()
        .map(|s| {
            fresh += 1;
            let p = format!("$d_p{fresh}");
            Arm {
                binder: p.clone(),
                body: Expr::new(ExprKind::LetTuple {
                    params: s.vars.clone(),
                    rhs: Box::new(Expr::var(p)),
                    body: Box::new(fold_bodies[&s.node].clone()),
                }),
            }
        })
        .collect();
    let x = "$d_x".to_string();
    let u_global = Global {
        name: u_name.clone(),
        ty: Type::Arrow(Box::new(phi.clone()), Box::new(unfolded.clone())),
        body: Expr::new(ExprKind::Lam {
            param: x.clone(),
            dom: phi.clone(),
            body: Box::new(Expr::new(ExprKind::Case {
                scrutinee: Box::new(Expr::var(x)),
                arms,
            })),
        }),
    };

    let mut globals: Vec<Global> = tp
        .program
        .globals
        .iter()
        .map(|g| Global {
            name: g.name.clone(),
            ty: g.ty.replace_tag(tag, &phi),
            body: dx.go(&g.body),
        })
        .collect();
    globals.push(u_global);
    let main = dx.go(&tp.program.main);
    finish(tp, globals, main, tag)
}

// ---------------------------------------------------------------------------
// Refunctionalization
// ---------------------------------------------------------------------------

/// Apply R to the recursive type `tag`. Precondition: its `phi` mentions no
/// recursive type.
pub fn refunctionalize(tp: &TypedProgram, tag: Tag) -> Result<TypedProgram, Diagnostics> {
    let sites = collect_sites(tp);
    let info = sites
        .get(&tag)
        .ok_or_else(|| Diagnostics::from(Diagnostic::new(None, "unknown recursive type")))?;
    let phi = info.phi_r();
    let blockers = mu_blockers(&phi);
    if !blockers.is_empty() {
        return Err(precondition_error(tp, info, Label::R, &blockers));
    }
    let tag_name = name_of(tp, tag);
    let f_name = format!("$f_{}", sanitize(&tag_name));
    let canon = format!("$r_{}", sanitize(&tag_name));
    let unfolded = info.mu.unfold_mu().replace_tag(tag, &phi);

    let site_index: BTreeMap<NodeId, usize> = info
        .unfold_sites
        .iter()
        .enumerate()
        .map(|(i, s)| (s.node, i + 1))
        .collect();

    struct Rx<'a> {
        tag: Tag,
        phi: Type,
        f_name: String,
        site_index: &'a BTreeMap<NodeId, usize>,
        sites: &'a [Site],
    }
    impl Rx<'_> {
        fn ty(&self, t: &Type) -> Type {
            t.replace_tag(self.tag, &self.phi)
        }
        fn go(&self, e: &Expr) -> Expr {
            let span = e.span;
            let kind = match &e.kind {
                ExprKind::Fold { mu, body } if is_tag(mu, self.tag) => ExprKind::App(
                    Box::new(Expr::var(&self.f_name)),
                    Box::new(self.go(body)),
                ),
                ExprKind::Unfold { mu, rhs, .. } if is_tag(mu, self.tag) => {
                    let i = self.site_index[&e.id];
                    let site = &self.sites[i - 1];
                    let args = Expr::new(ExprKind::Tuple(
                        site.vars.iter().map(Expr::var).collect(),
                    ));
                    ExprKind::App(
                        Box::new(Expr::new(ExprKind::Proj(Box::new(self.go(rhs)), i))),
                        Box::new(args),
                    )
                }
                other => return self.map_structural(other, span),
            };
            Expr::with_span(kind, span)
        }
        fn map_structural(&self, kind: &ExprKind, span: Option<crate::diag::Span>) -> Expr {
            let kind = match kind {
                ExprKind::Var(x) => ExprKind::Var(x.clone()),
                ExprKind::Lam { param, dom, body } => ExprKind::Lam {
                    param: param.clone(),
                    dom: self.ty(dom),
                    body: Box::new(self.go(body)),
                },
                ExprKind::App(a, b) => ExprKind::App(Box::new(self.go(a)), Box::new(self.go(b))),
                ExprKind::Amb(a, b) => ExprKind::Amb(Box::new(self.go(a)), Box::new(self.go(b))),
                ExprKind::Fail => ExprKind::Fail,
                ExprKind::Factor(w, e) => ExprKind::Factor(w.clone(), Box::new(self.go(e))),
                ExprKind::Tuple(es) => ExprKind::Tuple(es.iter().map(|x| self.go(x)).collect()),
                ExprKind::AddTuple(es) => {
                    ExprKind::AddTuple(es.iter().map(|x| self.go(x)).collect())
                }
                ExprKind::LetTuple { params, rhs, body } => ExprKind::LetTuple {
                    params: params.clone(),
                    rhs: Box::new(self.go(rhs)),
                    body: Box::new(self.go(body)),
                },
                ExprKind::Proj(x, i) => ExprKind::Proj(Box::new(self.go(x)), *i),
                ExprKind::Inj { index, sum, payload } => ExprKind::Inj {
                    index: *index,
                    sum: self.ty(sum),
                    payload: Box::new(self.go(payload)),
                },
                ExprKind::Case { scrutinee, arms } => ExprKind::Case {
                    scrutinee: Box::new(self.go(scrutinee)),
                    arms: arms
                        .iter()
                        .map(|a| Arm {
                            binder: a.binder.clone(),
                            body: self.go(&a.body),
                        })
                        .collect(),
                },
                ExprKind::Fold { mu, body } => ExprKind::Fold {
                    mu: self.ty(mu),
                    body: Box::new(self.go(body)),
                },
                ExprKind::Unfold { mu, binder, rhs, body } => ExprKind::Unfold {
                    mu: self.ty(mu),
                    binder: binder.clone(),
                    rhs: Box::new(self.go(rhs)),
                    body: Box::new(self.go(body)),
                },
                ExprKind::Eq(..) => unreachable!("== past typechecking"),
            };
            Expr::with_span(kind, span)
        }
    }

    let rx = Rx {
        tag,
        phi: phi.clone(),
        f_name: f_name.clone(),
        site_index: &site_index,
        sites: &info.unfold_sites,
    };

    // Unfold scopes, R-translated with the binder renamed to f's parameter,
    // become the components of f's additive tuple.
    let mut scopes: BTreeMap<NodeId, Expr> = BTreeMap::new();
    let mut grab = |e: &Expr| {
        e.visit(&mut |n| {
            if let ExprKind::Unfold { mu, binder, body, .. } = &n.kind {
                if is_tag(mu, tag) {
                    let mut scope = rx.go(body);
                    rename_free(&mut scope, binder, &canon);
                    scopes.insert(n.id, scope);
                }
            }
        })
    };
    for g in &tp.program.globals {
        grab(&g.body);
    }
    grab(&tp.program.main);

    let mut fresh = 0usize;
    let comps: Vec<Expr> = info
        .unfold_sites
        .iter()
        .map(|s| {
            fresh += 1;
            let t = format!("$r_t{fresh}");
            let dom = Type::Tensor(
                s.var_tys
                    .iter()
                    .map(|ty| ty.replace_tag(tag, &phi))
                    .collect(),
            );
            Expr::new(ExprKind::Lam {
                param: t.clone(),
                dom,
                body: Box::new(Expr::new(ExprKind::LetTuple {
                    params: s.vars.clone(),
                    rhs: Box::new(Expr::var(t)),
                    body: Box::new(scopes[&s.node].clone()),
                })),
            })
        })
        .collect();
    let f_global = Global {
        name: f_name.clone(),
        ty: Type::Arrow(Box::new(unfolded.clone()), Box::new(phi.clone())),
        body: Expr::new(ExprKind::Lam {
            param: canon.clone(),
            dom: unfolded,
            body: Box::new(Expr::new(ExprKind::AddTuple(comps))),
        }),
    };

    let mut globals: Vec<Global> = tp
        .program
        .globals
        .iter()
        .map(|g| Global {
            name: g.name.clone(),
            ty: g.ty.replace_tag(tag, &phi),
            body: rx.go(&g.body),
        })
        .collect();
    globals.push(f_global);
    let main = rx.go(&tp.program.main);
    finish(tp, globals, main, tag)
}

fn is_tag(t: &Type, tag: Tag) -> bool {
    matches!(t, Type::Mu { tag: t2, .. } if *t2 == tag)
}

fn name_of(tp: &TypedProgram, tag: Tag) -> String {
    tp.program
        .tag_names
        .get(&tag)
        .cloned()
        .unwrap_or_else(|| format!("rec{tag}"))
}

/// Rename free occurrences of a variable, respecting shadowing.
pub fn rename_free(e: &mut Expr, from: &str, to: &str) {
    fn shadows(names: &[&String], from: &str) -> bool {
        names.iter().any(|n| *n == from)
    }
    match &mut e.kind {
        ExprKind::Var(x) => {
            if x == from {
                *x = to.to_string();
            }
        }
        ExprKind::Lam { param, body, .. } => {
            if param != from {
                rename_free(body, from, to);
            }
        }
        ExprKind::App(a, b) | ExprKind::Amb(a, b) | ExprKind::Eq(a, b) => {
            rename_free(a, from, to);
            rename_free(b, from, to);
        }
        ExprKind::Fail => {}
        ExprKind::Factor(_, x) | ExprKind::Proj(x, _) => rename_free(x, from, to),
        ExprKind::Tuple(es) | ExprKind::AddTuple(es) => {
            for x in es {
                rename_free(x, from, to);
            }
        }
        ExprKind::LetTuple { params, rhs, body } => {
            rename_free(rhs, from, to);
            if !shadows(&params.iter().collect::<Vec<_>>(), from) {
                rename_free(body, from, to);
            }
        }
        ExprKind::Inj { payload, .. } => rename_free(payload, from, to),
        ExprKind::Case { scrutinee, arms } => {
            rename_free(scrutinee, from, to);
            for arm in arms {
                if arm.binder != from {
                    rename_free(&mut arm.body, from, to);
                }
            }
        }
        ExprKind::Fold { body, .. } => rename_free(body, from, to),
        ExprKind::Unfold { binder, rhs, body, .. } => {
            rename_free(rhs, from, to);
            if binder != from {
                rename_free(body, from, to);
            }
        }
    }
}

fn precondition_error(
    tp: &TypedProgram,
    info: &TagInfo,
    label: Label,
    blockers: &BTreeSet<Tag>,
) -> Diagnostics {
    let names = &tp.program.tag_names;
    let blocker_names: Vec<String> = blockers
        .iter()
        .map(|t| names.get(t).cloned().unwrap_or_else(|| format!("rec{t}")))
        .collect();
    let sites = match label {
        Label::D => &info.fold_sites,
        Label::R => &info.unfold_sites,
    };
    let mut offenders = Vec::new();
    for (i, s) in sites.iter().enumerate() {
        for (v, t) in s.vars.iter().zip(&s.var_tys) {
            if t.contains_mu() {
                offenders.push(format!(
                    "site {} has free `{v}` : {}",
                    i + 1,
                    render_type(t, names)
                ));
            }
        }
        if label == Label::R && s.scope_ty.contains_mu() {
            offenders.push(format!(
                "site {} has scope type {}",
                i + 1,
                render_type(&s.scope_ty, names)
            ));
        }
    }
    Diagnostic::new(
        None,
        format!(
            "cannot apply {label} to {}: replacement type still mentions recursive type(s) {} ({})",
            name_of(tp, info.tag),
            blocker_names.join(", "),
            offenders.join("; ")
        ),
    )
    .into()
}

fn finish(
    tp: &TypedProgram,
    globals: Vec<Global>,
    main: Expr,
    _tag: Tag,
) -> Result<TypedProgram, Diagnostics> {
    let mut prog = CoreProgram {
        globals,
        main,
        tag_names: tp.program.tag_names.clone(),
    };
    prog.gc_globals();
    prog.renumber();
    recheck(prog, Mode::Linear)
}

// ---------------------------------------------------------------------------
// DR-graph and greedy elimination
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct DrGraph {
    /// (tag, rendered name) per node.
    pub nodes: Vec<(Tag, String)>,
    pub d_edges: Vec<(Tag, Tag)>,
    pub r_edges: Vec<(Tag, Tag)>,
}

pub fn build_dr_graph(tp: &TypedProgram) -> DrGraph {
    let sites = collect_sites(tp);
    let mut g = DrGraph {
        nodes: sites.keys().map(|t| (*t, name_of(tp, *t))).collect(),
        d_edges: Vec::new(),
        r_edges: Vec::new(),
    };
    for (tag, info) in &sites {
        for t in mu_blockers(&info.phi_d()) {
            g.d_edges.push((*tag, t));
        }
        for t in mu_blockers(&info.phi_r()) {
            g.r_edges.push((*tag, t));
        }
    }
    g
}

pub fn render_dot(g: &DrGraph) -> String {
    let mut out = String::from("digraph dr {\n");
    for (tag, name) in &g.nodes {
        out.push_str(&format!("  n{tag} [label=\"{name}\"];\n"));
    }
    for (a, b) in &g.d_edges {
        out.push_str(&format!("  n{a} -> n{b} [label=\"D\"];\n"));
    }
    for (a, b) in &g.r_edges {
        out.push_str(&format!("  n{a} -> n{b} [label=\"R\", style=dashed];\n"));
    }
    out.push_str("}\n");
    out
}

/// Outcome of the greedy eliminator.
pub struct Elimination {
    pub result: TypedProgram,
    /// Applied steps: (tag, rendered name, label).
    pub sequence: Vec<(Tag, String, Label)>,
    /// The program after each step (`stages.last()` equals `result`).
    pub stages: Vec<TypedProgram>,
    /// The DR-graph of the program before any step.
    pub initial_graph: DrGraph,
}

/// Error carrying the residual graph when no step applies.
pub struct Stuck {
    pub message: String,
    pub residual: DrGraph,
}

/// Greedily eliminate every recursive type: at each step try D then R, lowest
/// tag first, applying the first transform whose replacement type is free of
/// recursive types.
pub fn eliminate_recursive_types(tp: &TypedProgram) -> Result<Elimination, Box<Stuck>> {
    let initial_graph = build_dr_graph(tp);
    let mut current = tp.clone();
    let mut sequence = Vec::new();
    let mut stages = Vec::new();
    loop {
        let sites = collect_sites(&current);
        if sites.is_empty() {
            return Ok(Elimination {
                result: current,
                sequence,
                stages,
                initial_graph,
            });
        }
        let mut applied = false;
        'outer: for label in [Label::D, Label::R] {
            for (tag, info) in &sites {
                let phi = match label {
                    Label::D => info.phi_d(),
                    Label::R => info.phi_r(),
                };
                if !phi.contains_mu() {
                    let name = name_of(&current, *tag);
                    let next = match label {
                        Label::D => defunctionalize(&current, *tag),
                        Label::R => refunctionalize(&current, *tag),
                    }
                    .map_err(|d| {
                        Box::new(Stuck {
                            message: format!("internal: {label} on {name} failed: {d}"),
                            residual: build_dr_graph(&current),
                        })
                    })?;
                    sequence.push((*tag, name, label));
                    current = next;
                    stages.push(current.clone());
                    applied = true;
                    break 'outer;
                }
            }
        }
        if !applied {
            let residual = build_dr_graph(&current);
            let names: Vec<&str> = residual.nodes.iter().map(|(_, n)| n.as_str()).collect();
            return Err(Box::new(Stuck {
                message: format!(
                    "no successful sequence of transformations: recursive type(s) {} cannot be eliminated",
                    names.join(", ")
                ),
                residual,
            }));
        }
    }
}

// ---------------------------------------------------------------------------
// Abstract DR-graphs (for the greedy-completeness property)
// ---------------------------------------------------------------------------

/// A DR-graph in the abstract: n nodes, D- and R-labeled out-edge sets.
#[derive(Debug, Clone)]
pub struct AbstractDrGraph {
    pub n: usize,
    pub d: Vec<BTreeSet<usize>>,
    pub r: Vec<BTreeSet<usize>>,
}

/// Greedy elimination order on an abstract graph: a node is removable with a
/// label once all that label's targets are already removed (their types have
/// become recursion-free).
pub fn greedy_order(g: &AbstractDrGraph) -> Option<Vec<(usize, Label)>> {
    let mut removed = vec![false; g.n];
    let mut order = Vec::new();
    while order.len() < g.n {
        let mut pick = None;
        'outer: for label in [Label::D, Label::R] {
            for i in 0..g.n {
                if removed[i] {
                    continue;
                }
                let out = match label {
                    Label::D => &g.d[i],
                    Label::R => &g.r[i],
                };
                if out.iter().all(|t| removed[*t]) {
                    pick = Some((i, label));
                    break 'outer;
                }
            }
        }
        match pick {
            Some((i, label)) => {
                removed[i] = true;
                order.push((i, label));
            }
            None => return None,
        }
    }
    Some(order)
}

/// Brute force: does any choice of one label per node induce an acyclic
/// subgraph (self-loops are cycles)?
pub fn has_acyclic_labeling(g: &AbstractDrGraph) -> bool {
    let combos = 1usize << g.n;
    for mask in 0..combos {
        // Kahn's algorithm on the selected edges.
        let mut indeg = vec![0usize; g.n];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); g.n];
        for i in 0..g.n {
            let out = if mask & (1 << i) != 0 { &g.r[i] } else { &g.d[i] };
            for t in out {
                succ[i].push(*t);
                indeg[*t] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..g.n).filter(|i| indeg[*i] == 0).collect();
        let mut seen = 0usize;
        while let Some(i) = queue.pop() {
            seen += 1;
            for &t in &succ[i] {
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    queue.push(t);
                }
            }
        }
        if seen == g.n {
            return true;
        }
    }
    false
}
