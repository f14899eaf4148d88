//! Dual-context typechecking.
//!
//! Globals are classical (usable any number of times); locals are linear by
//! default. Positive-typed locals are admitted as classical bindings. Two
//! usage modes exist: affine (default; linear bindings may be dropped) and
//! strict linear (required after linearization).
//!
//! Checking runs in three phases:
//! 1. unification-based inference resolving type metavariables and recursive-
//!    type tags (a union-find over tag variables; each datatype occurrence
//!    starts with a fresh tag);
//! 2. structural expansion of `==` at the now-known operand types;
//! 3. usage analysis computing, per node, the ordered list of nonglobal free
//!    variables it consumes, enforcing the usage mode.

use crate::core::*;
use crate::diag::{err, Diagnostics, Result, Span};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Affine,
    Linear,
}

/// One entry of a node's used-variable environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvEntry {
    pub name: String,
    pub ty: Type,
    /// Positive-typed (classical) local: may be copied and dropped freely.
    pub classical: bool,
}

/// A checked program with per-node annotations.
#[derive(Debug, Clone)]
pub struct TypedProgram {
    pub program: CoreProgram,
    /// Type of each node, indexed by node id.
    pub node_types: Vec<Type>,
    /// Nonglobal free variables each node consumes, in first-use order.
    pub node_env: Vec<Vec<EnvEntry>>,
    /// Whether the subtree can absorb unused linear variables (it has a
    /// `fail` positioned to consume any context).
    pub node_flexible: Vec<bool>,
    pub node_count: usize,
}

impl TypedProgram {
    pub fn ty(&self, id: NodeId) -> &Type {
        &self.node_types[id]
    }

    pub fn env(&self, id: NodeId) -> &[EnvEntry] {
        &self.node_env[id]
    }

    pub fn main_type(&self) -> &Type {
        self.ty(self.program.main.id)
    }
}

/// Typecheck `prog`, resolving tags and metavariables and expanding `==`.
/// The returned program is fully annotated with concrete types.
pub fn typecheck(prog: CoreProgram, mode: Mode) -> Result<TypedProgram> {
    typecheck_inner(prog, mode, false)
}

/// Re-check an already-elaborated program (post-transform). Tags are frozen:
/// unification may not merge two distinct tags.
pub fn recheck(prog: CoreProgram, mode: Mode) -> Result<TypedProgram> {
    typecheck_inner(prog, mode, true)
}

fn typecheck_inner(mut prog: CoreProgram, mode: Mode, frozen: bool) -> Result<TypedProgram> {
    let node_count = prog.renumber();

    // Phase 1: inference.
    let mut ck = Checker::new(&prog, frozen);
    ck.infer_program(&prog, node_count)?;
    ck.apply_solution(&mut prog);
    if !frozen {
        canonicalize_tags(&mut prog, &mut ck);
    }

    // Phase 2: expand `==` using the inferred operand types; repeat inference
    // if anything changed (the expansion introduces new nodes).
    loop {
        let node_count = prog.renumber();
        let mut ck2 = Checker::new(&prog, true);
        ck2.tag_names = prog.tag_names.clone();
        let types = ck2.infer_program(&prog, node_count)?;
        if !has_eq(&prog) {
            // Phase 3: usage analysis.
            let UsageAnalysis { env, flexible, .. } =
                UsageAnalysis::run(&prog, &types, mode)?;
            return Ok(TypedProgram {
                program: prog,
                node_types: types,
                node_env: env,
                node_flexible: flexible,
                node_count,
            });
        }
        let mut exp = EqExpander {
            types: &types,
            tag_names: &prog.tag_names.clone(),
            fresh: 0,
            error: None,
        };
        for g in &mut prog.globals {
            exp.expand(&mut g.body);
        }
        let mut main = std::mem::replace(&mut prog.main, Expr::unit_value());
        exp.expand(&mut main);
        prog.main = main;
        if let Some(e) = exp.error {
            return Err(e);
        }
    }
}

fn has_eq(prog: &CoreProgram) -> bool {
    let mut found = false;
    let mut scan = |e: &Expr| {
        e.visit(&mut |n| {
            if matches!(n.kind, ExprKind::Eq(..)) {
                found = true;
            }
        })
    };
    for g in &prog.globals {
        scan(&g.body);
    }
    scan(&prog.main);
    found
}

// ---------------------------------------------------------------------------
// Phase 1: inference
// ---------------------------------------------------------------------------

struct Checker {
    metas: Vec<Option<Type>>,
    tag_uf: Vec<Tag>,
    frozen: bool,
    globals: BTreeMap<String, Type>,
    tag_names: TagNames,
    /// Node types recorded during inference (unzonked).
    types: Vec<Type>,
}

impl Checker {
    fn new(prog: &CoreProgram, frozen: bool) -> Checker {
        let mut max_meta = 0u32;
        let mut max_tag = 0u32;
        let mut scan_ty = |t: &Type| {
            fn go(t: &Type, mm: &mut u32, mt: &mut u32) {
                match t {
                    Type::Meta(m) => *mm = (*mm).max(m + 1),
                    Type::Mu { tag, body } => {
                        *mt = (*mt).max(tag + 1);
                        go(body, mm, mt);
                    }
                    Type::Arrow(a, b) => {
                        go(a, mm, mt);
                        go(b, mm, mt);
                    }
                    Type::Tensor(ts) | Type::With(ts) | Type::Sum(ts) => {
                        for t in ts {
                            go(t, mm, mt);
                        }
                    }
                    Type::Var(_) => {}
                }
            }
            go(t, &mut max_meta, &mut max_tag)
        };
        let scan_expr = |e: &Expr, scan_ty: &mut dyn FnMut(&Type)| {
            e.visit(&mut |n| match &n.kind {
                ExprKind::Lam { dom, .. } => scan_ty(dom),
                ExprKind::Inj { sum, .. } => scan_ty(sum),
                ExprKind::Fold { mu, .. } | ExprKind::Unfold { mu, .. } => scan_ty(mu),
                _ => {}
            })
        };
        for g in &prog.globals {
            scan_ty(&g.ty);
            scan_expr(&g.body, &mut scan_ty);
        }
        scan_expr(&prog.main, &mut scan_ty);
        Checker {
            metas: vec![None; max_meta as usize],
            tag_uf: (0..max_tag).collect(),
            frozen,
            globals: prog.globals.iter().map(|g| (g.name.clone(), g.ty.clone())).collect(),
            tag_names: prog.tag_names.clone(),
            types: Vec::new(),
        }
    }

    fn fresh_meta(&mut self) -> Type {
        self.metas.push(None);
        Type::Meta((self.metas.len() - 1) as u32)
    }

    fn find_tag(&mut self, t: Tag) -> Tag {
        let mut r = t;
        while self.tag_uf[r as usize] != r {
            r = self.tag_uf[r as usize];
        }
        let mut c = t;
        while self.tag_uf[c as usize] != c {
            let next = self.tag_uf[c as usize];
            self.tag_uf[c as usize] = r;
            c = next;
        }
        r
    }

    fn render(&mut self, t: &Type) -> String {
        let z = self.zonk(t, false);
        render_type(&z, &self.tag_names)
    }

    /// Follow meta bindings at the top level only.
    fn shallow(&self, t: &Type) -> Type {
        let mut t = t.clone();
        while let Type::Meta(m) = t {
            match &self.metas[m as usize] {
                Some(b) => t = b.clone(),
                None => return Type::Meta(m),
            }
        }
        t
    }

    fn occurs(&self, m: u32, t: &Type) -> bool {
        match &self.shallow(t) {
            Type::Meta(m2) => *m2 == m,
            Type::Arrow(a, b) => self.occurs(m, a) || self.occurs(m, b),
            Type::Tensor(ts) | Type::With(ts) | Type::Sum(ts) => {
                ts.iter().any(|t| self.occurs(m, t))
            }
            Type::Mu { body, .. } => self.occurs(m, body),
            Type::Var(_) => false,
        }
    }

    fn unify(&mut self, a: &Type, b: &Type, span: Option<Span>) -> Result<()> {
        let sa = self.shallow(a);
        let sb = self.shallow(b);
        match (&sa, &sb) {
            (Type::Meta(m), _) => {
                if let Type::Meta(m2) = &sb {
                    if m2 == m {
                        return Ok(());
                    }
                }
                if self.occurs(*m, &sb) {
                    return err(span, "cannot construct an infinite type");
                }
                self.metas[*m as usize] = Some(sb);
                Ok(())
            }
            (_, Type::Meta(m)) => {
                if self.occurs(*m, &sa) {
                    return err(span, "cannot construct an infinite type");
                }
                self.metas[*m as usize] = Some(sa);
                Ok(())
            }
            (Type::Arrow(a1, b1), Type::Arrow(a2, b2)) => {
                self.unify(a1, a2, span)?;
                self.unify(b1, b2, span)
            }
            (Type::Tensor(x), Type::Tensor(y))
            | (Type::With(x), Type::With(y))
            | (Type::Sum(x), Type::Sum(y))
                if x.len() == y.len() =>
            {
                for (a, b) in x.iter().zip(y) {
                    self.unify(a, b, span)?;
                }
                Ok(())
            }
            (Type::Var(i), Type::Var(j)) if i == j => Ok(()),
            (Type::Mu { tag: t1, body: b1 }, Type::Mu { tag: t2, body: b2 }) => {
                let r1 = self.find_tag(*t1);
                let r2 = self.find_tag(*t2);
                if r1 != r2 {
                    if self.frozen {
                        let (x, y) = (self.render(&sa), self.render(&sb));
                        return err(
                            span,
                            format!("type mismatch: expected {x}, found {y} (distinct recursive types)"),
                        );
                    }
                    self.tag_uf[r2 as usize] = r1;
                }
                self.unify(b1, b2, span)
            }
            _ => {
                let (x, y) = (self.render(&sa), self.render(&sb));
                err(span, format!("type mismatch: expected {x}, found {y}"))
            }
        }
    }

    /// Fully resolve a type. Unbound metavariables default to Unit when
    /// `default_metas` (after solving, an unconstrained type is arbitrary).
    fn zonk(&mut self, t: &Type, default_metas: bool) -> Type {
        match &self.shallow(t) {
            Type::Meta(m) => {
                if default_metas {
                    Type::unit()
                } else {
                    Type::Meta(*m)
                }
            }
            Type::Arrow(a, b) => Type::Arrow(
                Box::new(self.zonk(a, default_metas)),
                Box::new(self.zonk(b, default_metas)),
            ),
            Type::Tensor(ts) => {
                Type::Tensor(ts.iter().map(|t| self.zonk(t, default_metas)).collect())
            }
            Type::With(ts) => Type::With(ts.iter().map(|t| self.zonk(t, default_metas)).collect()),
            Type::Sum(ts) => Type::Sum(ts.iter().map(|t| self.zonk(t, default_metas)).collect()),
            Type::Mu { tag, body } => Type::Mu {
                tag: self.find_tag(*tag),
                body: Box::new(self.zonk(body, default_metas)),
            },
            Type::Var(i) => Type::Var(*i),
        }
    }

    /// Run inference over the whole program; returns zonked per-node types.
    fn infer_program(&mut self, prog: &CoreProgram, node_count: usize) -> Result<Vec<Type>> {
        self.types = vec![Type::unit(); node_count];
        for g in &prog.globals {
            let mut env = Vec::new();
            let t = self.infer(&g.body, &mut env)?;
            let sig = g.ty.clone();
            self.unify(&t, &sig, g.body.span)?;
        }
        let mut env = Vec::new();
        self.infer(&prog.main, &mut env)?;
        let raw = std::mem::take(&mut self.types);
        Ok(raw.iter().map(|t| self.zonk(t, true)).collect())
    }

    fn infer(&mut self, e: &Expr, env: &mut Vec<(String, Type)>) -> Result<Type> {
        let span = e.span;
        let t = match &e.kind {
            ExprKind::Var(x) => {
                if let Some((_, t)) = env.iter().rev().find(|(n, _)| n == x) {
                    t.clone()
                } else if let Some(t) = self.globals.get(x) {
                    t.clone()
                } else {
                    return err(span, format!("unbound variable `{x}`"));
                }
            }
            ExprKind::Lam { param, dom, body } => {
                env.push((param.clone(), dom.clone()));
                let bt = self.infer(body, env)?;
                env.pop();
                Type::Arrow(Box::new(dom.clone()), Box::new(bt))
            }
            ExprKind::App(f, a) => {
                let tf = self.infer(f, env)?;
                let ta = self.infer(a, env)?;
                let r = self.fresh_meta();
                self.unify(&tf, &Type::Arrow(Box::new(ta), Box::new(r.clone())), span)?;
                r
            }
            ExprKind::Amb(a, b) => {
                let ta = self.infer(a, env)?;
                let tb = self.infer(b, env)?;
                self.unify(&ta, &tb, span)?;
                ta
            }
            ExprKind::Fail => self.fresh_meta(),
            ExprKind::Factor(_, body) => self.infer(body, env)?,
            ExprKind::Tuple(es) => {
                let ts = es
                    .iter()
                    .map(|x| self.infer(x, env))
                    .collect::<Result<Vec<_>>>()?;
                Type::Tensor(ts)
            }
            ExprKind::AddTuple(es) => {
                let ts = es
                    .iter()
                    .map(|x| self.infer(x, env))
                    .collect::<Result<Vec<_>>>()?;
                Type::With(ts)
            }
            ExprKind::LetTuple { params, rhs, body } => {
                let tr = self.infer(rhs, env)?;
                let comps: Vec<Type> = params.iter().map(|_| self.fresh_meta()).collect();
                self.unify(&tr, &Type::Tensor(comps.clone()), span)?;
                for (p, t) in params.iter().zip(&comps) {
                    env.push((p.clone(), t.clone()));
                }
                let bt = self.infer(body, env)?;
                env.truncate(env.len() - params.len());
                bt
            }
            ExprKind::Proj(x, i) => {
                let tx = self.infer(x, env)?;
                match self.shallow(&tx) {
                    Type::With(ts) => {
                        if *i == 0 || *i > ts.len() {
                            return err(
                                span,
                                format!(
                                    "projection index {i} out of range for additive tuple of arity {}",
                                    ts.len()
                                ),
                            );
                        }
                        ts[*i - 1].clone()
                    }
                    Type::Meta(_) => {
                        return err(
                            span,
                            "cannot infer the additive tuple type under this projection; add an annotation",
                        );
                    }
                    other => {
                        let r = self.render(&other);
                        return err(span, format!("projection applied to non-additive type {r}"));
                    }
                }
            }
            ExprKind::Inj { index, sum, payload } => {
                let alts = match self.shallow(sum) {
                    Type::Sum(alts) => alts,
                    _ => return err(span, "injection annotation is not a sum type"),
                };
                if *index == 0 || *index > alts.len() {
                    return err(
                        span,
                        format!("injection index {index} out of range for sum of arity {}", alts.len()),
                    );
                }
                let tp = self.infer(payload, env)?;
                self.unify(&tp, &alts[*index - 1], span)?;
                sum.clone()
            }
            ExprKind::Case { scrutinee, arms } => {
                let ts = self.infer(scrutinee, env)?;
                let alts: Vec<Type> = arms.iter().map(|_| self.fresh_meta()).collect();
                self.unify(&ts, &Type::Sum(alts.clone()), span)?;
                let mut result: Option<Type> = None;
                for (arm, alt) in arms.iter().zip(&alts) {
                    env.push((arm.binder.clone(), alt.clone()));
                    let at = self.infer(&arm.body, env)?;
                    env.pop();
                    match &result {
                        None => result = Some(at),
                        Some(r) => self.unify(r, &at, span)?,
                    }
                }
                result.unwrap_or_else(|| self.fresh_meta())
            }
            ExprKind::Fold { mu, body } => {
                if !matches!(mu, Type::Mu { .. }) {
                    return err(span, "fold annotation is not a recursive type");
                }
                let bt = self.infer(body, env)?;
                let unfolded = mu.unfold_mu();
                self.unify(&bt, &unfolded, span)?;
                mu.clone()
            }
            ExprKind::Unfold { mu, binder, rhs, body } => {
                if !matches!(mu, Type::Mu { .. }) {
                    return err(span, "unfold annotation is not a recursive type");
                }
                let tr = self.infer(rhs, env)?;
                self.unify(&tr, mu, span)?;
                env.push((binder.clone(), mu.unfold_mu()));
                let bt = self.infer(body, env)?;
                env.pop();
                bt
            }
            ExprKind::Eq(a, b) => {
                let ta = self.infer(a, env)?;
                let tb = self.infer(b, env)?;
                self.unify(&ta, &tb, span)?;
                Type::bool()
            }
        };
        self.types[e.id] = t.clone();
        Ok(t)
    }

    /// Rewrite all annotations in the program with the solved types.
    fn apply_solution(&mut self, prog: &mut CoreProgram) {
        let mut zonked: Vec<(String, Type)> = Vec::new();
        for g in &prog.globals {
            zonked.push((g.name.clone(), self.zonk(&g.ty, true)));
        }
        for (g, (_, t)) in prog.globals.iter_mut().zip(zonked) {
            g.ty = t;
        }
        let metas = |this: &mut Self, t: &mut Type| {
            *t = this.zonk(t, true);
        };
        for g in &mut prog.globals {
            g.body.map_types(&mut |t| metas(self, t));
        }
        prog.main.map_types(&mut |t| metas(self, t));
    }
}

/// Renumber tags densely in order of first appearance and rebuild the
/// tag-name table (`Name`, or `Name[1]`, `Name[2]`, ... when a datatype is
/// used at several distinct tags).
fn canonicalize_tags(prog: &mut CoreProgram, ck: &mut Checker) {
    let mut order: Vec<Tag> = Vec::new();
    let collect = |t: &Type, order: &mut Vec<Tag>| {
        fn go(t: &Type, order: &mut Vec<Tag>) {
            match t {
                Type::Mu { tag, body } => {
                    if !order.contains(tag) {
                        order.push(*tag);
                    }
                    go(body, order);
                }
                Type::Arrow(a, b) => {
                    go(a, order);
                    go(b, order);
                }
                Type::Tensor(ts) | Type::With(ts) | Type::Sum(ts) => {
                    for t in ts {
                        go(t, order);
                    }
                }
                Type::Var(_) | Type::Meta(_) => {}
            }
        }
        go(t, order)
    };
    // First map every annotation to its union-find root.
    prog.map_types(&mut |t| {
        *t = ck.zonk(t, true);
    });
    for g in &prog.globals {
        collect(&g.ty, &mut order);
        let mut from_expr = Vec::new();
        g.body.visit(&mut |n| match &n.kind {
            ExprKind::Lam { dom, .. } => from_expr.push(dom.clone()),
            ExprKind::Inj { sum, .. } => from_expr.push(sum.clone()),
            ExprKind::Fold { mu, .. } | ExprKind::Unfold { mu, .. } => from_expr.push(mu.clone()),
            _ => {}
        });
        for t in from_expr {
            collect(&t, &mut order);
        }
    }
    {
        let mut from_expr = Vec::new();
        prog.main.visit(&mut |n| match &n.kind {
            ExprKind::Lam { dom, .. } => from_expr.push(dom.clone()),
            ExprKind::Inj { sum, .. } => from_expr.push(sum.clone()),
            ExprKind::Fold { mu, .. } | ExprKind::Unfold { mu, .. } => from_expr.push(mu.clone()),
            _ => {}
        });
        for t in from_expr {
            collect(&t, &mut order);
        }
    }
    let remap: BTreeMap<Tag, Tag> = order
        .iter()
        .enumerate()
        .map(|(i, t)| (*t, i as Tag))
        .collect();
    prog.map_types(&mut |t| {
        fn go(t: &mut Type, remap: &BTreeMap<Tag, Tag>) {
            match t {
                Type::Mu { tag, body } => {
                    *tag = remap[tag];
                    go(body, remap);
                }
                Type::Arrow(a, b) => {
                    go(a, remap);
                    go(b, remap);
                }
                Type::Tensor(ts) | Type::With(ts) | Type::Sum(ts) => {
                    for t in ts {
                        go(t, remap);
                    }
                }
                Type::Var(_) | Type::Meta(_) => {}
            }
        }
        go(t, &remap)
    });
    // Build names: dense tag -> datatype name, disambiguated with [k].
    // `old` tags are union-find roots; any original tag with the same root
    // shares the datatype name.
    let named: Vec<(Tag, String)> = ck.tag_names.clone().into_iter().collect();
    let rooted: Vec<(Tag, String)> = named
        .into_iter()
        .map(|(t, n)| (ck.find_tag(t), n))
        .collect();
    let mut base: BTreeMap<Tag, String> = BTreeMap::new();
    for (old, new) in &remap {
        let name = rooted
            .iter()
            .find(|(t, _)| t == old)
            .map(|(_, n)| n.clone())
            .unwrap_or_else(|| format!("rec{old}"));
        base.insert(*new, name);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for name in base.values() {
        *counts.entry(name.clone()).or_default() += 1;
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut names = TagNames::new();
    for (tag, name) in &base {
        if counts[name] > 1 {
            let k = seen.entry(name.clone()).or_default();
            *k += 1;
            names.insert(*tag, format!("{name}[{k}]"));
        } else {
            names.insert(*tag, name.clone());
        }
    }
    prog.tag_names = names;
}

// ---------------------------------------------------------------------------
// Phase 2: `==` expansion
// ---------------------------------------------------------------------------

struct EqExpander<'a> {
    types: &'a [Type],
    tag_names: &'a TagNames,
    fresh: usize,
    error: Option<Diagnostics>,
}

impl EqExpander<'_> {
    fn fresh_name(&mut self, hint: &str) -> String {
        self.fresh += 1;
        format!("$eq_{hint}{}", self.fresh)
    }

    fn expand(&mut self, e: &mut Expr) {
        // Bottom-up so nested `==` in operands is expanded first.
        match &mut e.kind {
            ExprKind::Var(_) | ExprKind::Fail => {}
            ExprKind::Lam { body, .. }
            | ExprKind::Factor(_, body)
            | ExprKind::Proj(body, _)
            | ExprKind::Fold { body, .. } => self.expand(body),
            ExprKind::Inj { payload, .. } => self.expand(payload),
            ExprKind::App(a, b) | ExprKind::Amb(a, b) => {
                self.expand(a);
                self.expand(b);
            }
            ExprKind::Tuple(es) | ExprKind::AddTuple(es) => {
                for x in es {
                    self.expand(x);
                }
            }
            ExprKind::LetTuple { rhs, body, .. } | ExprKind::Unfold { rhs, body, .. } => {
                self.expand(rhs);
                self.expand(body);
            }
            ExprKind::Case { scrutinee, arms } => {
                self.expand(scrutinee);
                for arm in arms {
                    self.expand(&mut arm.body);
                }
            }
            ExprKind::Eq(..) => {
                let span = e.span;
                let (a, b, ty) = match std::mem::replace(&mut e.kind, ExprKind::Fail) {
                    ExprKind::Eq(mut a, mut b) => {
                        self.expand(&mut a);
                        self.expand(&mut b);
                        let ty = self.types[a.id].clone();
                        (a, b, ty)
                    }
                    _ => unreachable!(),
                };
                if !ty.is_positive() && self.error.is_none() {
                    self.error = Some(
                        crate::diag::Diagnostic::new(
                            span,
                            format!(
                                "`==` requires a positive non-recursive type, got {}",
                                render_type(&ty, self.tag_names)
                            ),
                        )
                        .into(),
                    );
                    return;
                }
                *e = self.eq_at(*a, *b, &ty, span);
            }
        }
    }

    /// `if c then t else f` over core Bool.
    fn mk_if(&mut self, cond: Expr, then: Expr, els: Expr, span: Option<Span>) -> Expr {
        let mk_arm = |this: &mut Self, body: Expr| {
            let u = this.fresh_name("u");
            Arm {
                binder: u.clone(),
                body: Expr::seq_unit(Expr::var(u), body),
            }
        };
        let arms = vec![mk_arm(self, then), mk_arm(self, els)];
        Expr::with_span(
            ExprKind::Case {
                scrutinee: Box::new(cond),
                arms,
            },
            span,
        )
    }

    fn bool_const(b: bool) -> Expr {
        Expr::new(ExprKind::Inj {
            index: if b { 1 } else { 2 },
            sum: Type::bool(),
            payload: Box::new(Expr::unit_value()),
        })
    }

    /// Structural equality expansion at a positive type: destructure both
    /// sides once and compare componentwise.
    fn eq_at(&mut self, a: Expr, b: Expr, ty: &Type, span: Option<Span>) -> Expr {
        match ty {
            Type::Tensor(ts) => {
                let xs: Vec<String> = ts.iter().map(|_| self.fresh_name("x")).collect();
                let ys: Vec<String> = ts.iter().map(|_| self.fresh_name("y")).collect();
                let mut body = Self::bool_const(true);
                for (i, t) in ts.iter().enumerate().rev() {
                    let cmp = self.eq_at(Expr::var(&xs[i]), Expr::var(&ys[i]), t, span);
                    body = self.mk_if(cmp, body, Self::bool_const(false), span);
                }
                let inner = Expr::with_span(
                    ExprKind::LetTuple {
                        params: ys,
                        rhs: Box::new(b),
                        body: Box::new(body),
                    },
                    span,
                );
                Expr::with_span(
                    ExprKind::LetTuple {
                        params: xs,
                        rhs: Box::new(a),
                        body: Box::new(inner),
                    },
                    span,
                )
            }
            Type::Sum(ts) => {
                let mut outer_arms = Vec::new();
                for (i, ti) in ts.iter().enumerate() {
                    let xi = self.fresh_name("x");
                    let mut inner_arms = Vec::new();
                    for (j, _tj) in ts.iter().enumerate() {
                        let yj = self.fresh_name("y");
                        let body = if i == j {
                            self.eq_at(Expr::var(&xi), Expr::var(&yj), ti, span)
                        } else {
                            Self::bool_const(false)
                        };
                        inner_arms.push(Arm {
                            binder: yj,
                            body,
                        });
                    }
                    outer_arms.push(Arm {
                        binder: xi,
                        body: Expr::with_span(
                            ExprKind::Case {
                                scrutinee: Box::new(b.clone()),
                                arms: inner_arms,
                            },
                            span,
                        ),
                    });
                }
                Expr::with_span(
                    ExprKind::Case {
                        scrutinee: Box::new(a),
                        arms: outer_arms,
                    },
                    span,
                )
            }
            _ => unreachable!("eq_at on non-positive type"),
        }
    }
}

// ---------------------------------------------------------------------------
// Phase 3: usage analysis
// ---------------------------------------------------------------------------

struct Binding {
    name: String,
    ty: Type,
    classical: bool,
}

#[derive(Clone, Default)]
struct Usage {
    /// Indices into the scope stack, in first-use order.
    used: Vec<usize>,
    flexible: bool,
}

struct UsageAnalysis<'a> {
    types: &'a [Type],
    mode: Mode,
    scope: Vec<Binding>,
    env: Vec<Vec<EnvEntry>>,
    flexible: Vec<bool>,
    tag_names: TagNames,
}

impl<'a> UsageAnalysis<'a> {
    fn run(
        prog: &CoreProgram,
        types: &'a [Type],
        mode: Mode,
    ) -> Result<UsageAnalysis<'a>> {
        let mut ua = UsageAnalysis {
            types,
            mode,
            scope: Vec::new(),
            env: vec![Vec::new(); types.len()],
            flexible: vec![false; types.len()],
            tag_names: prog.tag_names.clone(),
        };
        let globals: BTreeMap<&str, ()> =
            prog.globals.iter().map(|g| (g.name.as_str(), ())).collect();
        for g in &prog.globals {
            let u = ua.walk(&g.body, &globals)?;
            debug_assert!(u.used.is_empty());
        }
        let u = ua.walk(&prog.main, &globals)?;
        debug_assert!(u.used.is_empty());
        Ok(ua)
    }

    fn push(&mut self, name: &str, ty: &Type) {
        let classical = ty.is_positive();
        self.scope.push(Binding {
            name: name.to_string(),
            ty: ty.clone(),
            classical,
        });
    }

    /// Pop a binder; drop it from `u.used`, reporting whether it was used and
    /// enforcing the strict-linear drop rule.
    fn pop_binder(&mut self, u: &mut Usage, span: Option<Span>) -> Result<()> {
        let idx = self.scope.len() - 1;
        let b = self.scope.pop().unwrap();
        let was_used = u.used.iter().any(|i| *i == idx);
        u.used.retain(|i| *i != idx);
        if !was_used && !b.classical && self.mode == Mode::Linear && !u.flexible {
            return err(
                span,
                format!(
                    "linear variable `{}` of type {} is never used",
                    b.name,
                    render_type(&b.ty, &self.tag_names)
                ),
            );
        }
        Ok(())
    }

    /// Sequential (multiplicative) combination: linear uses must be disjoint.
    fn combine_seq(&mut self, parts: Vec<Usage>, span: Option<Span>) -> Result<Usage> {
        let mut used: Vec<usize> = Vec::new();
        let mut flexible = false;
        for p in parts {
            for i in p.used {
                if used.contains(&i) {
                    if !self.scope[i].classical {
                        return err(
                            span,
                            format!("linear variable `{}` is used twice", self.scope[i].name),
                        );
                    }
                } else {
                    used.push(i);
                }
            }
            flexible = flexible || p.flexible;
        }
        Ok(Usage { used, flexible })
    }

    /// Additive combination: every branch must consume the same linear
    /// variables (strict mode) unless the branch is flexible. `all_flexible`
    /// tells whether the combined node absorbs extra variables.
    fn combine_additive(
        &mut self,
        parts: &[Usage],
        span: Option<Span>,
    ) -> Result<Usage> {
        let mut used: Vec<usize> = Vec::new();
        for p in parts {
            for i in &p.used {
                if !used.contains(i) {
                    used.push(*i);
                }
            }
        }
        if self.mode == Mode::Linear {
            for p in parts {
                if p.flexible {
                    continue;
                }
                for i in &used {
                    if !self.scope[*i].classical && !p.used.contains(i) {
                        return err(
                            span,
                            format!(
                                "linear variable `{}` is not used in every branch",
                                self.scope[*i].name
                            ),
                        );
                    }
                }
            }
        }
        let flexible = parts.iter().all(|p| p.flexible);
        Ok(Usage { used, flexible })
    }

    fn walk(&mut self, e: &Expr, globals: &BTreeMap<&str, ()>) -> Result<Usage> {
        let span = e.span;
        let u = match &e.kind {
            ExprKind::Var(x) => {
                if let Some(idx) = self.scope.iter().rposition(|b| b.name == *x) {
                    Usage {
                        used: vec![idx],
                        flexible: false,
                    }
                } else if globals.contains_key(x.as_str()) {
                    Usage::default()
                } else {
                    return err(span, format!("unbound variable `{x}`"));
                }
            }
            ExprKind::Lam { param, dom, body } => {
                self.push(param, dom);
                let mut u = self.walk(body, globals)?;
                self.pop_binder(&mut u, span)?;
                u
            }
            ExprKind::App(f, a) => {
                let uf = self.walk(f, globals)?;
                let ua = self.walk(a, globals)?;
                self.combine_seq(vec![uf, ua], span)?
            }
            ExprKind::Amb(a, b) => {
                let ua = self.walk(a, globals)?;
                let ub = self.walk(b, globals)?;
                self.combine_additive(&[ua, ub], span)?
            }
            ExprKind::Fail => Usage {
                used: Vec::new(),
                flexible: true,
            },
            ExprKind::Factor(_, body) => self.walk(body, globals)?,
            ExprKind::Tuple(es) => {
                let parts = es
                    .iter()
                    .map(|x| self.walk(x, globals))
                    .collect::<Result<Vec<_>>>()?;
                let mut u = self.combine_seq(parts, span)?;
                // A tuple is only flexible if some component can absorb.
                u.flexible = es.iter().any(|x| self.flexible[x.id]);
                u
            }
            ExprKind::AddTuple(es) => {
                let parts = es
                    .iter()
                    .map(|x| self.walk(x, globals))
                    .collect::<Result<Vec<_>>>()?;
                self.combine_additive(&parts, span)?
            }
            ExprKind::LetTuple { params, rhs, body } => {
                let ur = self.walk(rhs, globals)?;
                let comps = match &self.types[rhs.id] {
                    Type::Tensor(ts) => ts.clone(),
                    _ => unreachable!("let-tuple over non-product"),
                };
                for (p, t) in params.iter().zip(&comps) {
                    self.push(p, t);
                }
                let mut ub = self.walk(body, globals)?;
                for _ in params {
                    self.pop_binder(&mut ub, span)?;
                }
                self.combine_seq(vec![ur, ub], span)?
            }
            ExprKind::Proj(x, _) => self.walk(x, globals)?,
            ExprKind::Inj { payload, .. } => self.walk(payload, globals)?,
            ExprKind::Case { scrutinee, arms } => {
                let us = self.walk(scrutinee, globals)?;
                let alts = match &self.types[scrutinee.id] {
                    Type::Sum(ts) => ts.clone(),
                    _ => unreachable!("case over non-sum"),
                };
                let mut parts = Vec::new();
                for (arm, alt) in arms.iter().zip(&alts) {
                    self.push(&arm.binder, alt);
                    let mut ua = self.walk(&arm.body, globals)?;
                    self.pop_binder(&mut ua, arm.body.span)?;
                    parts.push(ua);
                }
                let arms_u = self.combine_additive(&parts, span)?;
                let scrut_flex = us.flexible;
                let mut u = self.combine_seq(vec![us, arms_u.clone()], span)?;
                u.flexible = scrut_flex || arms_u.flexible;
                u
            }
            ExprKind::Fold { body, .. } => self.walk(body, globals)?,
            ExprKind::Unfold { mu, binder, rhs, body } => {
                let ur = self.walk(rhs, globals)?;
                let inner = mu.unfold_mu();
                self.push(binder, &inner);
                let mut ub = self.walk(body, globals)?;
                self.pop_binder(&mut ub, span)?;
                self.combine_seq(vec![ur, ub], span)?
            }
            ExprKind::Eq(..) => unreachable!("`==` must be expanded before usage analysis"),
        };
        self.env[e.id] = u
            .used
            .iter()
            .map(|i| EnvEntry {
                name: self.scope[*i].name.clone(),
                ty: self.scope[*i].ty.clone(),
                classical: self.scope[*i].classical,
            })
            .collect();
        self.flexible[e.id] = u.flexible;
        Ok(u)
    }
}
