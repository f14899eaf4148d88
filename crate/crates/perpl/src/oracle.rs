//! Depth-bounded exhaustive interpreter: the independent ground truth.
//!
//! Reduction acts on a weighted multiset of expressions. One step rewrites one
//! non-value element under a fixed leftmost-innermost call-by-value strategy
//! (the choice of position does not affect limits): `amb` splits an element in
//! two, `factor` scales its weight, `fail` deletes it, a global reference
//! expands to its body (and counts as a step, bounding recursion depth), and
//! `unfold` cancels `fold`. Exploring to a step budget yields a lower bound on
//! the program's distribution plus the mass still unreduced.

use crate::core::*;
use crate::domain::SemValue;
use crate::pretty::print_expr;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, HashMap};

/// Lower-bound distribution over rendered values plus unreduced mass.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub support: BTreeMap<String, BigRational>,
    pub residual: BigRational,
}

impl OracleResult {
    pub fn weight_of(&self, value: &str) -> BigRational {
        self.support.get(value).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn total_mass(&self) -> BigRational {
        self.support.values().fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn to_json(&self) -> serde_json::Value {
        use num_traits::ToPrimitive;
        let support: Vec<serde_json::Value> = self
            .support
            .iter()
            .map(|(v, w)| {
                serde_json::json!({
                    "value": v,
                    "weight": w.to_f64().unwrap_or(f64::INFINITY),
                    "weight_exact": rational_to_string(w),
                })
            })
            .collect();
        serde_json::json!({
            "support": support,
            "residual": self.residual.to_f64().unwrap_or(f64::INFINITY),
            "residual_exact": rational_to_string(&self.residual),
        })
    }
}

pub struct Oracle {
    globals: HashMap<String, Expr>,
    main: Expr,
}

impl Oracle {
    /// Prepare a program for reduction: local binders are renamed apart from
    /// each other and from global names, so plain substitution never captures.
    pub fn new(prog: &CoreProgram) -> Oracle {
        let mut fresh = 0usize;
        let mut globals = HashMap::new();
        for g in &prog.globals {
            let mut body = g.body.clone();
            uniquify(&mut body, &mut HashMap::new(), &mut fresh);
            globals.insert(g.name.clone(), body);
        }
        let mut main = prog.main.clone();
        uniquify(&mut main, &mut HashMap::new(), &mut fresh);
        Oracle { globals, main }
    }

    /// One reduction of one element of a weighted multiset.
    pub fn reduce_step(
        &self,
        d: Vec<(BigRational, Expr)>,
    ) -> Vec<(BigRational, Expr)> {
        let mut out = Vec::new();
        let mut done = false;
        for (w, e) in d {
            if done || is_value(&e) {
                out.push((w, e));
                continue;
            }
            let succs = self
                .step(&e)
                .unwrap_or_else(|| panic!("stuck non-value expression: {}", render(&e)));
            for (wi, ei) in succs {
                out.push((&w * wi, ei));
            }
            done = true;
        }
        out
    }

    /// Explore every branch up to `max_steps` reductions, accumulating the
    /// weights of fully reduced values.
    pub fn explore(&self, max_steps: usize) -> OracleResult {
        let mut support: BTreeMap<String, BigRational> = BTreeMap::new();
        let mut residual = BigRational::zero();
        let mut work: Vec<(BigRational, Expr, usize)> =
            vec![(BigRational::one(), self.main.clone(), 0)];
        while let Some((w, e, steps)) = work.pop() {
            if is_value(&e) {
                *support.entry(render(&e)).or_insert_with(BigRational::zero) += w;
                continue;
            }
            if steps >= max_steps {
                residual += w;
                continue;
            }
            let succs = self
                .step(&e)
                .unwrap_or_else(|| panic!("stuck non-value expression: {}", render(&e)));
            for (wi, ei) in succs {
                work.push((&w * &wi, ei, steps + 1));
            }
        }
        OracleResult { support, residual }
    }

    /// The one-step successors of a non-value expression, or None if no
    /// position reduces.
    #[allow(clippy::type_complexity)]
    fn step(&self, e: &Expr) -> Option<Vec<(BigRational, Expr)>> {
        let one = BigRational::one;
        let wrap = |succs: Vec<(BigRational, Expr)>, f: &dyn Fn(Expr) -> ExprKind| {
            succs
                .into_iter()
                .map(|(w, s)| (w, Expr::new(f(s))))
                .collect::<Vec<_>>()
        };
        match &e.kind {
            ExprKind::Var(x) => {
                let body = self.globals.get(x)?;
                Some(vec![(one(), body.clone())])
            }
            ExprKind::Lam { .. } | ExprKind::AddTuple(_) => None,
            ExprKind::App(f, a) => {
                if let Some(s) = self.step_if_nonvalue(f) {
                    let a = a.clone();
                    return Some(wrap(s, &move |fx| ExprKind::App(Box::new(fx), a.clone())));
                }
                if let Some(s) = self.step_if_nonvalue(a) {
                    let f = f.clone();
                    return Some(wrap(s, &move |ax| ExprKind::App(f.clone(), Box::new(ax))));
                }
                if let ExprKind::Lam { param, body, .. } = &f.kind {
                    let mut b = (**body).clone();
                    subst(&mut b, param, a);
                    return Some(vec![(one(), b)]);
                }
                None
            }
            ExprKind::Amb(a, b) => {
                Some(vec![(one(), (**a).clone()), (one(), (**b).clone())])
            }
            ExprKind::Fail => Some(Vec::new()),
            ExprKind::Factor(w, body) => Some(vec![(w.clone(), (**body).clone())]),
            ExprKind::Tuple(es) => {
                for (i, c) in es.iter().enumerate() {
                    if let Some(s) = self.step_if_nonvalue(c) {
                        let es = es.clone();
                        return Some(wrap(s, &move |cx| {
                            let mut es2 = es.clone();
                            es2[i] = cx;
                            ExprKind::Tuple(es2)
                        }));
                    }
                }
                None
            }
            ExprKind::LetTuple { params, rhs, body } => {
                if let Some(s) = self.step_if_nonvalue(rhs) {
                    let (params, body) = (params.clone(), body.clone());
                    return Some(wrap(s, &move |rx| ExprKind::LetTuple {
                        params: params.clone(),
                        rhs: Box::new(rx),
                        body: body.clone(),
                    }));
                }
                if let ExprKind::Tuple(vs) = &rhs.kind {
                    let mut b = (**body).clone();
                    for (x, v) in params.iter().zip(vs) {
                        subst(&mut b, x, v);
                    }
                    return Some(vec![(one(), b)]);
                }
                None
            }
            ExprKind::Proj(subj, i) => {
                if let Some(s) = self.step_if_nonvalue(subj) {
                    let i = *i;
                    return Some(wrap(s, &move |sx| ExprKind::Proj(Box::new(sx), i)));
                }
                if let ExprKind::AddTuple(es) = &subj.kind {
                    return Some(vec![(one(), es[*i - 1].clone())]);
                }
                None
            }
            ExprKind::Inj { index, sum, payload } => {
                let s = self.step_if_nonvalue(payload)?;
                let (index, sum) = (*index, sum.clone());
                Some(wrap(s, &move |px| ExprKind::Inj {
                    index,
                    sum: sum.clone(),
                    payload: Box::new(px),
                }))
            }
            ExprKind::Case { scrutinee, arms } => {
                if let Some(s) = self.step_if_nonvalue(scrutinee) {
                    let arms = arms.clone();
                    return Some(wrap(s, &move |sx| ExprKind::Case {
                        scrutinee: Box::new(sx),
                        arms: arms.clone(),
                    }));
                }
                if let ExprKind::Inj { index, payload, .. } = &scrutinee.kind {
                    let arm = &arms[*index - 1];
                    let mut b = arm.body.clone();
                    subst(&mut b, &arm.binder, payload);
                    return Some(vec![(one(), b)]);
                }
                None
            }
            ExprKind::Fold { mu, body } => {
                let s = self.step_if_nonvalue(body)?;
                let mu = mu.clone();
                Some(wrap(s, &move |bx| ExprKind::Fold {
                    mu: mu.clone(),
                    body: Box::new(bx),
                }))
            }
            ExprKind::Unfold { mu, binder, rhs, body } => {
                if let Some(s) = self.step_if_nonvalue(rhs) {
                    let (mu, binder, body) = (mu.clone(), binder.clone(), body.clone());
                    return Some(wrap(s, &move |rx| ExprKind::Unfold {
                        mu: mu.clone(),
                        binder: binder.clone(),
                        rhs: Box::new(rx),
                        body: body.clone(),
                    }));
                }
                if let ExprKind::Fold { body: v, .. } = &rhs.kind {
                    let mut b = (**body).clone();
                    subst(&mut b, binder, v);
                    return Some(vec![(one(), b)]);
                }
                None
            }
            ExprKind::Eq(..) => unreachable!("== past typechecking"),
        }
    }

    #[allow(clippy::type_complexity)]
    fn step_if_nonvalue(&self, e: &Expr) -> Option<Vec<(BigRational, Expr)>> {
        if is_value(e) {
            None
        } else {
            self.step(e)
        }
    }
}

/// Syntactic values: abstractions and additive tuples (unreduced inside),
/// plus tuples/injections/folds of values.
pub fn is_value(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Lam { .. } | ExprKind::AddTuple(_) => true,
        ExprKind::Tuple(es) => es.iter().all(is_value),
        ExprKind::Inj { payload, .. } => is_value(payload),
        ExprKind::Fold { body, .. } => is_value(body),
        _ => false,
    }
}

/// Render a final value the way the solver renders semantic values when
/// possible (positive values), structurally otherwise.
pub fn render(e: &Expr) -> String {
    match to_sem_value(e) {
        Some(v) => v.to_string(),
        None => print_expr(e, &TagNames::new()),
    }
}

/// Convert a positive syntactic value to its semantic counterpart.
pub fn to_sem_value(e: &Expr) -> Option<SemValue> {
    match &e.kind {
        ExprKind::Tuple(es) => Some(SemValue::Tuple(
            es.iter().map(to_sem_value).collect::<Option<Vec<_>>>()?,
        )),
        ExprKind::Inj { index, payload, .. } => {
            Some(SemValue::Tagged(*index, Box::new(to_sem_value(payload)?)))
        }
        _ => None,
    }
}

/// Capture-free substitution (binders are pre-renamed apart).
fn subst(e: &mut Expr, x: &str, v: &Expr) {
    match &mut e.kind {
        ExprKind::Var(y) => {
            if y == x {
                *e = v.clone();
            }
        }
        ExprKind::Lam { param, body, .. } => {
            if param != x {
                subst(body, x, v);
            }
        }
        ExprKind::App(a, b) | ExprKind::Amb(a, b) | ExprKind::Eq(a, b) => {
            subst(a, x, v);
            subst(b, x, v);
        }
        ExprKind::Fail => {}
        ExprKind::Factor(_, b) | ExprKind::Proj(b, _) => subst(b, x, v),
        ExprKind::Tuple(es) | ExprKind::AddTuple(es) => {
            for c in es {
                subst(c, x, v);
            }
        }
        ExprKind::LetTuple { params, rhs, body } => {
            subst(rhs, x, v);
            if !params.iter().any(|p| p == x) {
                subst(body, x, v);
            }
        }
        ExprKind::Inj { payload, .. } => subst(payload, x, v),
        ExprKind::Case { scrutinee, arms } => {
            subst(scrutinee, x, v);
            for arm in arms {
                if arm.binder != x {
                    subst(&mut arm.body, x, v);
                }
            }
        }
        ExprKind::Fold { body, .. } => subst(body, x, v),
        ExprKind::Unfold { binder, rhs, body, .. } => {
            subst(rhs, x, v);
            if binder != x {
                subst(body, x, v);
            }
        }
    }
}

/// Rename every binder to a fresh name (locals only; free names are globals
/// and left alone).
fn uniquify(e: &mut Expr, scope: &mut HashMap<String, String>, fresh: &mut usize) {
    let bind = |name: &mut String, scope: &mut HashMap<String, String>, fresh: &mut usize| {
        *fresh += 1;
        let new = format!("$o{fresh}");
        let old = scope.insert(name.clone(), new.clone());
        let prev = name.clone();
        *name = new;
        (prev, old)
    };
    let unbind = |prev: String, old: Option<String>, scope: &mut HashMap<String, String>| {
        match old {
            Some(o) => {
                scope.insert(prev, o);
            }
            None => {
                scope.remove(&prev);
            }
        }
    };
    match &mut e.kind {
        ExprKind::Var(x) => {
            if let Some(n) = scope.get(x) {
                *x = n.clone();
            }
        }
        ExprKind::Lam { param, body, .. } => {
            let (p, o) = bind(param, scope, fresh);
            uniquify(body, scope, fresh);
            unbind(p, o, scope);
        }
        ExprKind::App(a, b) | ExprKind::Amb(a, b) | ExprKind::Eq(a, b) => {
            uniquify(a, scope, fresh);
            uniquify(b, scope, fresh);
        }
        ExprKind::Fail => {}
        ExprKind::Factor(_, b) | ExprKind::Proj(b, _) => uniquify(b, scope, fresh),
        ExprKind::Tuple(es) | ExprKind::AddTuple(es) => {
            for c in es {
                uniquify(c, scope, fresh);
            }
        }
        ExprKind::LetTuple { params, rhs, body } => {
            uniquify(rhs, scope, fresh);
            let saved: Vec<_> = params
                .iter_mut()
                .map(|p| bind(p, scope, fresh))
                .collect();
            uniquify(body, scope, fresh);
            for (p, o) in saved.into_iter().rev() {
                unbind(p, o, scope);
            }
        }
        ExprKind::Inj { payload, .. } => uniquify(payload, scope, fresh),
        ExprKind::Case { scrutinee, arms } => {
            uniquify(scrutinee, scope, fresh);
            for arm in arms {
                let (p, o) = bind(&mut arm.binder, scope, fresh);
                uniquify(&mut arm.body, scope, fresh);
                unbind(p, o, scope);
            }
        }
        ExprKind::Fold { body, .. } => uniquify(body, scope, fresh),
        ExprKind::Unfold { binder, rhs, body, .. } => {
            uniquify(rhs, scope, fresh);
            let (p, o) = bind(binder, scope, fresh);
            uniquify(body, scope, fresh);
            unbind(p, o, scope);
        }
    }
}
