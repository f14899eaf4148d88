//! Core (desugared) types, expressions, and programs.
//!
//! The core language has explicit sums, multiplicative and additive products,
//! functions, and iso-recursive types with nominal tags introduced by `fold`
//! and eliminated by `unfold`. All surface sugar is gone after desugaring; the
//! only transient construct is [`ExprKind::Eq`], which the typechecker expands
//! structurally once operand types are known.

use crate::diag::Span;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Nominal tag distinguishing otherwise-equal recursive types.
pub type Tag = u32;

/// Core types. Recursive-type binders use de Bruijn indices: `Var(0)` refers
/// to the innermost enclosing `Mu`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    /// Linear function `dom -o cod`.
    Arrow(Box<Type>, Box<Type>),
    /// Multiplicative product of n >= 0 components; `Tensor([])` is Unit.
    Tensor(Vec<Type>),
    /// Additive product.
    With(Vec<Type>),
    /// Sum.
    Sum(Vec<Type>),
    /// Tagged recursive type.
    Mu { tag: Tag, body: Box<Type> },
    /// Bound recursive-type variable (de Bruijn index of the enclosing `Mu`).
    Var(usize),
    /// Inference metavariable; never survives typechecking.
    Meta(u32),
}

impl Type {
    pub fn unit() -> Type {
        Type::Tensor(Vec::new())
    }

    pub fn bool() -> Type {
        Type::Sum(vec![Type::unit(), Type::unit()])
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Type::Tensor(ts) if ts.is_empty())
    }

    /// A type is positive if it contains no function, additive-product, or
    /// recursive component. Values of positive types may be freely copied and
    /// discarded, so positive-typed local bindings become classical.
    pub fn is_positive(&self) -> bool {
        match self {
            Type::Arrow(..) | Type::With(_) | Type::Mu { .. } | Type::Var(_) => false,
            Type::Tensor(ts) | Type::Sum(ts) => ts.iter().all(Type::is_positive),
            Type::Meta(_) => false,
        }
    }

    pub fn contains_mu(&self) -> bool {
        match self {
            Type::Mu { .. } | Type::Var(_) => true,
            Type::Arrow(a, b) => a.contains_mu() || b.contains_mu(),
            Type::Tensor(ts) | Type::With(ts) | Type::Sum(ts) => {
                ts.iter().any(Type::contains_mu)
            }
            Type::Meta(_) => false,
        }
    }

    pub fn contains_meta(&self) -> bool {
        match self {
            Type::Meta(_) => true,
            Type::Arrow(a, b) => a.contains_meta() || b.contains_meta(),
            Type::Tensor(ts) | Type::With(ts) | Type::Sum(ts) => {
                ts.iter().any(Type::contains_meta)
            }
            Type::Mu { body, .. } => body.contains_meta(),
            Type::Var(_) => false,
        }
    }

    /// Collect the tags of all `Mu` nodes in this type.
    pub fn collect_tags(&self, out: &mut BTreeSet<Tag>) {
        match self {
            Type::Mu { tag, body } => {
                out.insert(*tag);
                body.collect_tags(out);
            }
            Type::Arrow(a, b) => {
                a.collect_tags(out);
                b.collect_tags(out);
            }
            Type::Tensor(ts) | Type::With(ts) | Type::Sum(ts) => {
                for t in ts {
                    t.collect_tags(out);
                }
            }
            Type::Var(_) | Type::Meta(_) => {}
        }
    }

    /// Substitute `repl` (a closed type) for the de Bruijn variable bound at
    /// the given depth.
    fn subst_var(&self, depth: usize, repl: &Type) -> Type {
        match self {
            Type::Var(i) if *i == depth => repl.clone(),
            Type::Var(i) if *i > depth => Type::Var(*i - 1),
            Type::Var(i) => Type::Var(*i),
            Type::Arrow(a, b) => Type::Arrow(
                Box::new(a.subst_var(depth, repl)),
                Box::new(b.subst_var(depth, repl)),
            ),
            Type::Tensor(ts) => {
                Type::Tensor(ts.iter().map(|t| t.subst_var(depth, repl)).collect())
            }
            Type::With(ts) => Type::With(ts.iter().map(|t| t.subst_var(depth, repl)).collect()),
            Type::Sum(ts) => Type::Sum(ts.iter().map(|t| t.subst_var(depth, repl)).collect()),
            Type::Mu { tag, body } => Type::Mu {
                tag: *tag,
                body: Box::new(body.subst_var(depth + 1, repl)),
            },
            Type::Meta(m) => Type::Meta(*m),
        }
    }

    /// For a closed `Mu` type, the one-step unfolding `body{alpha := mu}`.
    pub fn unfold_mu(&self) -> Type {
        match self {
            Type::Mu { body, .. } => body.subst_var(0, self),
            _ => panic!("unfold_mu on non-recursive type"),
        }
    }

    /// Replace every `Mu` node carrying `tag` by the closed type `repl`.
    pub fn replace_tag(&self, tag: Tag, repl: &Type) -> Type {
        match self {
            Type::Mu { tag: t, .. } if *t == tag => repl.clone(),
            Type::Mu { tag: t, body } => Type::Mu {
                tag: *t,
                body: Box::new(body.replace_tag(tag, repl)),
            },
            Type::Arrow(a, b) => Type::Arrow(
                Box::new(a.replace_tag(tag, repl)),
                Box::new(b.replace_tag(tag, repl)),
            ),
            Type::Tensor(ts) => {
                Type::Tensor(ts.iter().map(|t| t.replace_tag(tag, repl)).collect())
            }
            Type::With(ts) => Type::With(ts.iter().map(|t| t.replace_tag(tag, repl)).collect()),
            Type::Sum(ts) => Type::Sum(ts.iter().map(|t| t.replace_tag(tag, repl)).collect()),
            Type::Var(i) => Type::Var(*i),
            Type::Meta(m) => Type::Meta(*m),
        }
    }
}

/// Render a rational as an integer or `a/b`.
pub fn rational_to_string(r: &BigRational) -> String {
    if r.denom() == &BigInt::one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse a weight literal: either a nonnegative decimal (`0.25`) or an
/// explicit fraction (`2/3`).
pub fn rational_from_literal(s: &str) -> Option<BigRational> {
    if let Some((a, b)) = s.split_once('/') {
        let numer: BigInt = a.trim().parse().ok()?;
        let denom: BigInt = b.trim().parse().ok()?;
        if denom.is_zero() {
            return None;
        }
        let r = BigRational::new(numer, denom);
        if r.is_negative() {
            return None;
        }
        return Some(r);
    }
    if let Some((int, frac)) = s.split_once('.') {
        let int: BigInt = if int.is_empty() { BigInt::zero() } else { int.parse().ok()? };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_num: BigInt = frac.parse().ok()?;
        return Some(BigRational::new(int * &scale + frac_num, scale));
    }
    let n: BigInt = s.parse().ok()?;
    if n.is_negative() {
        return None;
    }
    Some(BigRational::from_integer(n))
}

/// Names used to render recursive-type tags in messages and traces.
pub type TagNames = BTreeMap<Tag, String>;

/// Render a type, using tag names where available.
pub fn render_type(t: &Type, names: &TagNames) -> String {
    fn go(t: &Type, names: &TagNames, out: &mut String) {
        match t {
            Type::Arrow(a, b) => {
                out.push('(');
                go(a, names, out);
                out.push_str(" -> ");
                go(b, names, out);
                out.push(')');
            }
            Type::Tensor(ts) if ts.is_empty() => out.push_str("Unit"),
            Type::Tensor(ts) => join(ts, " * ", names, out),
            Type::With(ts) => join(ts, " & ", names, out),
            Type::Sum(ts) if t == &Type::bool() => out.push_str("Bool"),
            Type::Sum(ts) if ts.is_empty() => out.push_str("Empty"),
            Type::Sum(ts) => join(ts, " + ", names, out),
            Type::Mu { tag, body: _ } => match names.get(tag) {
                Some(n) => out.push_str(n),
                None => out.push_str(&format!("rec#{tag}")),
            },
            Type::Var(i) => out.push_str(&format!("@{i}")),
            Type::Meta(m) => out.push_str(&format!("?{m}")),
        }
    }
    fn join(ts: &[Type], sep: &str, names: &TagNames, out: &mut String) {
        out.push('(');
        for (i, t) in ts.iter().enumerate() {
            if i > 0 {
                out.push_str(sep);
            }
            go(t, names, out);
        }
        out.push(')');
    }
    let mut s = String::new();
    go(t, names, &mut s);
    s
}

/// Stable node identifier, assigned in preorder over the whole program.
pub type NodeId = usize;

/// One arm of a `case`: the binder receives the injection payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub binder: String,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Var(String),
    Lam {
        param: String,
        dom: Type,
        body: Box<Expr>,
    },
    App(Box<Expr>, Box<Expr>),
    Amb(Box<Expr>, Box<Expr>),
    Fail,
    Factor(BigRational, Box<Expr>),
    /// Multiplicative tuple; `Tuple([])` is the unit value.
    Tuple(Vec<Expr>),
    /// Additive tuple.
    AddTuple(Vec<Expr>),
    LetTuple {
        params: Vec<String>,
        rhs: Box<Expr>,
        body: Box<Expr>,
    },
    /// Additive projection, 1-based.
    Proj(Box<Expr>, usize),
    /// Injection, 1-based, annotated with its full sum type.
    Inj {
        index: usize,
        sum: Type,
        payload: Box<Expr>,
    },
    Case {
        scrutinee: Box<Expr>,
        arms: Vec<Arm>,
    },
    Fold {
        mu: Type,
        body: Box<Expr>,
    },
    Unfold {
        mu: Type,
        binder: String,
        rhs: Box<Expr>,
        body: Box<Expr>,
    },
    /// Structural equality at a positive non-recursive type; expanded away by
    /// the typechecker.
    Eq(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub id: NodeId,
    pub span: Option<Span>,
    pub kind: ExprKind,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr {
            id: 0,
            span: None,
            kind,
        }
    }

    pub fn with_span(kind: ExprKind, span: Option<Span>) -> Expr {
        Expr {
            id: 0,
            span,
            kind,
        }
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::new(ExprKind::Var(name.into()))
    }

    pub fn unit_value() -> Expr {
        Expr::new(ExprKind::Tuple(Vec::new()))
    }

    /// `let () = rhs in body`
    pub fn seq_unit(rhs: Expr, body: Expr) -> Expr {
        Expr::new(ExprKind::LetTuple {
            params: Vec::new(),
            rhs: Box::new(rhs),
            body: Box::new(body),
        })
    }

    /// Visit all nodes in preorder.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Var(_) | ExprKind::Fail => {}
            ExprKind::Lam { body, .. } => body.visit(f),
            ExprKind::App(a, b) | ExprKind::Amb(a, b) | ExprKind::Eq(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            ExprKind::Factor(_, e) | ExprKind::Proj(e, _) => e.visit(f),
            ExprKind::Tuple(es) | ExprKind::AddTuple(es) => {
                for e in es {
                    e.visit(f);
                }
            }
            ExprKind::LetTuple { rhs, body, .. } => {
                rhs.visit(f);
                body.visit(f);
            }
            ExprKind::Inj { payload, .. } => payload.visit(f),
            ExprKind::Case { scrutinee, arms } => {
                scrutinee.visit(f);
                for arm in arms {
                    arm.body.visit(f);
                }
            }
            ExprKind::Fold { body, .. } => body.visit(f),
            ExprKind::Unfold { rhs, body, .. } => {
                rhs.visit(f);
                body.visit(f);
            }
        }
    }

    /// Visit all nodes in preorder, mutably.
    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        f(self);
        match &mut self.kind {
            ExprKind::Var(_) | ExprKind::Fail => {}
            ExprKind::Lam { body, .. } => body.visit_mut(f),
            ExprKind::App(a, b) | ExprKind::Amb(a, b) | ExprKind::Eq(a, b) => {
                a.visit_mut(f);
                b.visit_mut(f);
            }
            ExprKind::Factor(_, e) | ExprKind::Proj(e, _) => e.visit_mut(f),
            ExprKind::Tuple(es) | ExprKind::AddTuple(es) => {
                for e in es {
                    e.visit_mut(f);
                }
            }
            ExprKind::LetTuple { rhs, body, .. } => {
                rhs.visit_mut(f);
                body.visit_mut(f);
            }
            ExprKind::Inj { payload, .. } => payload.visit_mut(f),
            ExprKind::Case { scrutinee, arms } => {
                scrutinee.visit_mut(f);
                for arm in arms {
                    arm.body.visit_mut(f);
                }
            }
            ExprKind::Fold { body, .. } => body.visit_mut(f),
            ExprKind::Unfold { rhs, body, .. } => {
                rhs.visit_mut(f);
                body.visit_mut(f);
            }
        }
    }

    /// Map every type annotation in this expression.
    pub fn map_types(&mut self, f: &mut impl FnMut(&mut Type)) {
        self.visit_mut(&mut |e| match &mut e.kind {
            ExprKind::Lam { dom, .. } => f(dom),
            ExprKind::Inj { sum, .. } => f(sum),
            ExprKind::Fold { mu, .. } => f(mu),
            ExprKind::Unfold { mu, .. } => f(mu),
            _ => {}
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Global {
    pub name: String,
    pub ty: Type,
    pub body: Expr,
}

/// A desugared program: ordered globals plus the main expression.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreProgram {
    pub globals: Vec<Global>,
    pub main: Expr,
    pub tag_names: TagNames,
}

impl CoreProgram {
    /// Assign dense preorder node ids across globals (in order) then main.
    /// Returns the number of nodes.
    pub fn renumber(&mut self) -> usize {
        let mut next = 0usize;
        let mut assign = |e: &mut Expr| {
            e.id = next;
            next += 1;
        };
        for g in &mut self.globals {
            g.body.visit_mut(&mut assign);
        }
        self.main.visit_mut(&mut assign);
        next
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0usize;
        for g in &self.globals {
            g.body.visit(&mut |_| n += 1);
        }
        self.main.visit(&mut |_| n += 1);
        n
    }

    pub fn global(&self, name: &str) -> Option<&Global> {
        self.globals.iter().find(|g| g.name == name)
    }

    pub fn is_global(&self, name: &str) -> bool {
        self.globals.iter().any(|g| g.name == name)
    }

    /// All tags appearing in any type annotation or global signature.
    pub fn live_tags(&self) -> BTreeSet<Tag> {
        let mut tags = BTreeSet::new();
        let mut from_expr = |e: &Expr| {
            e.visit(&mut |n| match &n.kind {
                ExprKind::Lam { dom, .. } => dom.collect_tags(&mut tags),
                ExprKind::Inj { sum, .. } => sum.collect_tags(&mut tags),
                ExprKind::Fold { mu, .. } | ExprKind::Unfold { mu, .. } => {
                    mu.collect_tags(&mut tags)
                }
                _ => {}
            })
        };
        for g in &self.globals {
            from_expr(&g.body);
        }
        from_expr(&self.main);
        let mut sig_tags = BTreeSet::new();
        for g in &self.globals {
            g.ty.collect_tags(&mut sig_tags);
        }
        tags.extend(sig_tags);
        tags
    }

    /// Map every type in the program (annotations and global signatures).
    pub fn map_types(&mut self, f: &mut impl FnMut(&mut Type)) {
        for g in &mut self.globals {
            f(&mut g.ty);
            g.body.map_types(f);
        }
        self.main.map_types(f);
    }

    /// Drop globals unreachable from main via variable references.
    pub fn gc_globals(&mut self) {
        let mut reachable: BTreeSet<String> = BTreeSet::new();
        let mut work: Vec<String> = Vec::new();
        let names: BTreeSet<&str> = self.globals.iter().map(|g| g.name.as_str()).collect();
        let scan = |e: &Expr, work: &mut Vec<String>| {
            e.visit(&mut |n| {
                if let ExprKind::Var(x) = &n.kind {
                    if names.contains(x.as_str()) {
                        work.push(x.clone());
                    }
                }
            })
        };
        scan(&self.main, &mut work);
        while let Some(name) = work.pop() {
            if reachable.insert(name.clone()) {
                if let Some(g) = self.globals.iter().find(|g| g.name == name) {
                    scan(&g.body.clone(), &mut work);
                }
            }
        }
        self.globals.retain(|g| reachable.contains(&g.name));
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", render_type(self, &TagNames::new()))
    }
}
