//! Desugar the surface language into the core language.
//!
//! Datatypes become sums of multiplicative products, wrapped in a recursive
//! type (with a fresh tag per occurrence) iff the datatype is self-referential
//! (directly or through other datatypes). Constructor applications become
//! injections (plus `fold` for recursive datatypes); `case` over a recursive
//! datatype inserts the matching `unfold`. `if`/`and`/`true`/`false`/`Bool`
//! and `let` expand to the core forms. Structural equality `==` survives as a
//! transient core node, expanded by the typechecker once operand types are
//! known.

use crate::ast::*;
use crate::core::*;
use crate::diag::{err, Diagnostics, Span};
use std::collections::BTreeMap;

struct DataInfo {
    /// Constructor name, argument types (surface), in declaration order.
    ctors: Vec<(String, Vec<SType>)>,
    /// Self-referential, possibly through other datatypes.
    recursive: bool,
}

#[derive(Clone)]
struct CtorInfo {
    data: String,
    index: usize,
    arity: usize,
}

pub struct Desugarer {
    datas: BTreeMap<String, DataInfo>,
    ctors: BTreeMap<String, CtorInfo>,
    next_tag: Tag,
    next_meta: u32,
    fresh: usize,
    tag_names: TagNames,
}

pub fn desugar(p: &SurfaceProgram) -> Result<CoreProgram, Diagnostics> {
    let mut d = Desugarer::new(p)?;
    let mut globals = Vec::new();
    for def in p.defines() {
        globals.push(d.define(def)?);
    }
    let main = d.expr(&p.main)?;
    let mut prog = CoreProgram {
        globals,
        main,
        tag_names: d.tag_names,
    };
    prog.renumber();
    Ok(prog)
}

impl Desugarer {
    fn new(p: &SurfaceProgram) -> Result<Desugarer, Diagnostics> {
        let mut datas = BTreeMap::new();
        let mut ctors: BTreeMap<String, CtorInfo> = BTreeMap::new();
        // Collect declarations.
        for data in p.datas() {
            if data.name == "Unit" || data.name == "Bool" {
                return err(
                    Some(data.span),
                    format!("`{}` is a built-in type", data.name),
                );
            }
            let mut info = DataInfo {
                ctors: Vec::new(),
                recursive: false,
            };
            for (i, c) in data.ctors.iter().enumerate() {
                if c.name == "true" || c.name == "false" || ctors.contains_key(&c.name) {
                    return err(
                        Some(c.span),
                        format!("duplicate constructor name `{}`", c.name),
                    );
                }
                ctors.insert(
                    c.name.clone(),
                    CtorInfo {
                        data: data.name.clone(),
                        index: i + 1,
                        arity: c.args.len(),
                    },
                );
                info.ctors.push((c.name.clone(), c.args.clone()));
            }
            datas.insert(data.name.clone(), info);
        }
        // Mark recursion: a datatype is recursive iff it reaches itself in the
        // datatype reference graph.
        let names: Vec<String> = datas.keys().cloned().collect();
        let refs: BTreeMap<String, Vec<String>> = names
            .iter()
            .map(|n| {
                let mut out = Vec::new();
                for (_, args) in &datas[n].ctors {
                    for a in args {
                        collect_names(a, &mut out);
                    }
                }
                (n.clone(), out)
            })
            .collect();
        for n in &names {
            let mut seen = Vec::new();
            let mut work = refs[n].clone();
            let mut hit = false;
            while let Some(m) = work.pop() {
                if m == *n {
                    hit = true;
                    break;
                }
                if !seen.contains(&m) {
                    seen.push(m.clone());
                    if let Some(r) = refs.get(&m) {
                        work.extend(r.iter().cloned());
                    }
                }
            }
            if hit {
                datas.get_mut(n).unwrap().recursive = true;
            }
        }
        Ok(Desugarer {
            datas,
            ctors,
            next_tag: 0,
            next_meta: 0,
            fresh: 0,
            tag_names: TagNames::new(),
        })
    }

    fn fresh_name(&mut self, hint: &str) -> String {
        self.fresh += 1;
        format!("${hint}{}", self.fresh)
    }

    fn fresh_meta(&mut self) -> Type {
        self.next_meta += 1;
        Type::Meta(self.next_meta - 1)
    }

    // ---- types ----

    /// Convert a surface type. `mu_stack` holds the datatypes whose recursive
    /// binders enclose this position, innermost last.
    fn conv_type(&mut self, t: &SType, mu_stack: &mut Vec<String>) -> Result<Type, Diagnostics> {
        match t {
            SType::Name(n, span) => match n.as_str() {
                "Unit" => Ok(Type::unit()),
                "Bool" => Ok(Type::bool()),
                _ => {
                    if let Some(pos) = mu_stack.iter().rposition(|m| m == n) {
                        return Ok(Type::Var(mu_stack.len() - 1 - pos));
                    }
                    if !self.datas.contains_key(n) {
                        return err(Some(*span), format!("unknown type `{n}`"));
                    }
                    self.instantiate(n, *span, mu_stack)
                }
            },
            SType::Arrow(a, b) => Ok(Type::Arrow(
                Box::new(self.conv_type(a, mu_stack)?),
                Box::new(self.conv_type(b, mu_stack)?),
            )),
            SType::Tensor(ts) => Ok(Type::Tensor(self.conv_types(ts, mu_stack)?)),
            SType::With(ts) => Ok(Type::With(self.conv_types(ts, mu_stack)?)),
            SType::Sum(ts) => Ok(Type::Sum(self.conv_types(ts, mu_stack)?)),
        }
    }

    fn conv_types(
        &mut self,
        ts: &[SType],
        mu_stack: &mut Vec<String>,
    ) -> Result<Vec<Type>, Diagnostics> {
        ts.iter().map(|t| self.conv_type(t, mu_stack)).collect()
    }

    /// Instantiate a datatype occurrence: its sum-of-products body, wrapped in
    /// a fresh-tagged recursive type when self-referential.
    fn instantiate(
        &mut self,
        name: &str,
        span: Span,
        mu_stack: &mut Vec<String>,
    ) -> Result<Type, Diagnostics> {
        let recursive = self.datas[name].recursive;
        let ctors = self.datas[name].ctors.clone();
        let body = |this: &mut Self, mu_stack: &mut Vec<String>| -> Result<Type, Diagnostics> {
            let mut alts = Vec::new();
            for (_, args) in &ctors {
                let mut fields = Vec::new();
                for a in args {
                    fields.push(this.conv_type(a, mu_stack)?);
                }
                alts.push(Type::Tensor(fields));
            }
            Ok(Type::Sum(alts))
        };
        if recursive {
            let tag = self.next_tag;
            self.next_tag += 1;
            self.tag_names.insert(tag, name.to_string());
            mu_stack.push(name.to_string());
            let b = body(self, mu_stack);
            mu_stack.pop();
            Ok(Type::Mu {
                tag,
                body: Box::new(b?),
            })
        } else {
            let _ = span;
            body(self, mu_stack)
        }
    }

    fn conv_opt_type(&mut self, t: &Option<SType>) -> Result<Type, Diagnostics> {
        match t {
            Some(t) => self.conv_type(t, &mut Vec::new()),
            None => Ok(self.fresh_meta()),
        }
    }

    // ---- expressions ----

    fn define(&mut self, def: &DefineDecl) -> Result<Global, Diagnostics> {
        let mut body = self.expr(&def.body)?;
        let mut ty = self.conv_opt_type(&def.ret)?;
        for (param, ann) in def.params.iter().rev() {
            let dom = self.conv_opt_type(ann)?;
            ty = Type::Arrow(Box::new(dom.clone()), Box::new(ty));
            body = Expr::with_span(
                ExprKind::Lam {
                    param: param.clone(),
                    dom,
                    body: Box::new(body),
                },
                Some(def.span),
            );
        }
        Ok(Global {
            name: def.name.clone(),
            ty,
            body,
        })
    }

    fn expr(&mut self, e: &SExpr) -> Result<Expr, Diagnostics> {
        let span = Some(e.span);
        let kind = match &e.kind {
            SExprKind::Var(name) => return self.var_or_ctor(name, e.span, Vec::new()),
            SExprKind::App(..) => {
                // Flatten the application spine to detect constructor heads.
                let mut spine = Vec::new();
                let mut head = e;
                while let SExprKind::App(f, a) = &head.kind {
                    spine.push(a.as_ref());
                    head = f;
                }
                spine.reverse();
                if let SExprKind::Var(name) = &head.kind {
                    if self.is_ctor_name(name) {
                        let args = spine
                            .iter()
                            .map(|a| self.expr(a))
                            .collect::<Result<Vec<_>, _>>()?;
                        return self.var_or_ctor(name, head.span, args);
                    }
                }
                let mut out = self.expr(head)?;
                for a in spine {
                    let arg = self.expr(a)?;
                    out = Expr::with_span(ExprKind::App(Box::new(out), Box::new(arg)), span);
                }
                return Ok(out);
            }
            SExprKind::Lam { param, ann, body } => {
                let dom = self.conv_opt_type(ann)?;
                ExprKind::Lam {
                    param: param.clone(),
                    dom,
                    body: Box::new(self.expr(body)?),
                }
            }
            SExprKind::Amb(a, b) => {
                ExprKind::Amb(Box::new(self.expr(a)?), Box::new(self.expr(b)?))
            }
            SExprKind::Fail => ExprKind::Fail,
            SExprKind::Factor(w, body) => ExprKind::Factor(w.clone(), Box::new(self.expr(body)?)),
            SExprKind::Tuple(es) => ExprKind::Tuple(
                es.iter()
                    .map(|x| self.expr(x))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            SExprKind::AddTuple(es) => ExprKind::AddTuple(
                es.iter()
                    .map(|x| self.expr(x))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            SExprKind::Proj(x, i) => ExprKind::Proj(Box::new(self.expr(x)?), *i),
            SExprKind::Let { pat, rhs, body } => {
                let rhs = self.expr(rhs)?;
                let body = self.expr(body)?;
                match pat {
                    LetPat::Var(x) => {
                        let dom = self.fresh_meta();
                        let lam = Expr::with_span(
                            ExprKind::Lam {
                                param: self.rename_wild(x),
                                dom,
                                body: Box::new(body),
                            },
                            span,
                        );
                        ExprKind::App(Box::new(lam), Box::new(rhs))
                    }
                    LetPat::Tuple(xs) => ExprKind::LetTuple {
                        params: xs.iter().map(|x| self.rename_wild(x)).collect(),
                        rhs: Box::new(rhs),
                        body: Box::new(body),
                    },
                }
            }
            SExprKind::If { cond, then, els } => {
                let cond = self.expr(cond)?;
                let then = self.expr(then)?;
                let els = self.expr(els)?;
                return Ok(self.if_expr(cond, then, els, span));
            }
            SExprKind::And(a, b) => {
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                let f = Expr::with_span(
                    ExprKind::Inj {
                        index: 2,
                        sum: Type::bool(),
                        payload: Box::new(Expr::unit_value()),
                    },
                    span,
                );
                return Ok(self.if_expr(a, b, f, span));
            }
            SExprKind::Eq(a, b) => {
                ExprKind::Eq(Box::new(self.expr(a)?), Box::new(self.expr(b)?))
            }
            SExprKind::Case {
                scrutinee,
                explicit_unfold,
                arms,
            } => return self.case(e.span, scrutinee, *explicit_unfold, arms),
        };
        Ok(Expr::with_span(kind, span))
    }

    fn rename_wild(&mut self, x: &str) -> String {
        if x == "_" {
            self.fresh_name("wild")
        } else {
            x.to_string()
        }
    }

    fn is_ctor_name(&self, name: &str) -> bool {
        name == "true" || name == "false" || self.ctors.contains_key(name)
    }

    /// `if c then t else f` per the standard expansion into a case over Bool.
    fn if_expr(&mut self, cond: Expr, then: Expr, els: Expr, span: Option<Span>) -> Expr {
        let mk_arm = |this: &mut Self, body: Expr| {
            let u = this.fresh_name("u");
            Arm {
                binder: u.clone(),
                body: Expr::with_span(
                    ExprKind::LetTuple {
                        params: Vec::new(),
                        rhs: Box::new(Expr::var(u)),
                        body: Box::new(body),
                    },
                    span,
                ),
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

    fn var_or_ctor(
        &mut self,
        name: &str,
        span: Span,
        args: Vec<Expr>,
    ) -> Result<Expr, Diagnostics> {
        let sp = Some(span);
        if name == "true" || name == "false" {
            if !args.is_empty() {
                return err(Some(span), format!("`{name}` takes no arguments"));
            }
            return Ok(Expr::with_span(
                ExprKind::Inj {
                    index: if name == "true" { 1 } else { 2 },
                    sum: Type::bool(),
                    payload: Box::new(Expr::unit_value()),
                },
                sp,
            ));
        }
        let Some(info) = self.ctors.get(name).cloned() else {
            if !args.is_empty() {
                unreachable!("var_or_ctor called with args on a non-constructor");
            }
            return Ok(Expr::with_span(ExprKind::Var(name.to_string()), sp));
        };
        if args.len() != info.arity {
            return err(
                Some(span),
                format!(
                    "constructor `{name}` expects {} argument(s), got {}",
                    info.arity,
                    args.len()
                ),
            );
        }
        let recursive = self.datas[&info.data].recursive;
        let payload = Expr::with_span(ExprKind::Tuple(args), sp);
        if recursive {
            let mu = self.instantiate(&info.data, span, &mut Vec::new())?;
            let sum = mu.unfold_mu();
            Ok(Expr::with_span(
                ExprKind::Fold {
                    mu,
                    body: Box::new(Expr::with_span(
                        ExprKind::Inj {
                            index: info.index,
                            sum,
                            payload: Box::new(payload),
                        },
                        sp,
                    )),
                },
                sp,
            ))
        } else {
            let sum = self.instantiate(&info.data, span, &mut Vec::new())?;
            Ok(Expr::with_span(
                ExprKind::Inj {
                    index: info.index,
                    sum,
                    payload: Box::new(payload),
                },
                sp,
            ))
        }
    }

    fn case(
        &mut self,
        span: Span,
        scrutinee: &SExpr,
        explicit_unfold: bool,
        arms: &[SArm],
    ) -> Result<Expr, Diagnostics> {
        let sp = Some(span);
        let scrut = self.expr(scrutinee)?;
        // All arms must cover exactly the constructors of one datatype.
        let first = &arms[0];
        let Some(info) = self.ctors.get(&first.ctor).cloned() else {
            return err(
                Some(first.ctor_span),
                format!("unknown constructor `{}`", first.ctor),
            );
        };
        let data_name = info.data.clone();
        let decl = &self.datas[&data_name];
        let n_ctors = decl.ctors.len();
        let recursive = decl.recursive;
        let order: Vec<String> = decl.ctors.iter().map(|(n, _)| n.clone()).collect();
        let mut by_ctor: BTreeMap<String, &SArm> = BTreeMap::new();
        for arm in arms {
            let Some(ai) = self.ctors.get(&arm.ctor) else {
                return err(
                    Some(arm.ctor_span),
                    format!("unknown constructor `{}`", arm.ctor),
                );
            };
            if ai.data != data_name {
                return err(
                    Some(arm.ctor_span),
                    format!(
                        "constructor `{}` belongs to `{}`, not `{}`",
                        arm.ctor, ai.data, data_name
                    ),
                );
            }
            if arm.vars.len() != ai.arity {
                return err(
                    Some(arm.ctor_span),
                    format!(
                        "constructor `{}` has {} field(s), pattern binds {}",
                        arm.ctor,
                        ai.arity,
                        arm.vars.len()
                    ),
                );
            }
            if by_ctor.insert(arm.ctor.clone(), arm).is_some() {
                return err(
                    Some(arm.ctor_span),
                    format!("duplicate case arm for `{}`", arm.ctor),
                );
            }
        }
        if by_ctor.len() != n_ctors {
            let missing: Vec<&str> = order
                .iter()
                .filter(|c| !by_ctor.contains_key(*c))
                .map(|s| s.as_str())
                .collect();
            return err(
                Some(span),
                format!("case does not cover constructor(s): {}", missing.join(", ")),
            );
        }
        if explicit_unfold && !recursive {
            return err(
                Some(span),
                format!("`case unfold` on non-recursive datatype `{data_name}`"),
            );
        }
        let mut core_arms = Vec::new();
        for cname in &order {
            let arm = by_ctor[cname];
            let body = self.expr(&arm.body)?;
            let binder = self.fresh_name("p");
            let params: Vec<String> = arm.vars.iter().map(|v| self.rename_wild(v)).collect();
            core_arms.push(Arm {
                binder: binder.clone(),
                body: Expr::with_span(
                    ExprKind::LetTuple {
                        params,
                        rhs: Box::new(Expr::var(binder)),
                        body: Box::new(body),
                    },
                    Some(arm.ctor_span),
                ),
            });
        }
        if recursive {
            let mu = self.instantiate(&data_name, span, &mut Vec::new())?;
            let u = self.fresh_name("s");
            Ok(Expr::with_span(
                ExprKind::Unfold {
                    mu,
                    binder: u.clone(),
                    rhs: Box::new(scrut),
                    body: Box::new(Expr::with_span(
                        ExprKind::Case {
                            scrutinee: Box::new(Expr::var(u)),
                            arms: core_arms,
                        },
                        sp,
                    )),
                },
                sp,
            ))
        } else {
            Ok(Expr::with_span(
                ExprKind::Case {
                    scrutinee: Box::new(scrut),
                    arms: core_arms,
                },
                sp,
            ))
        }
    }
}

fn collect_names(t: &SType, out: &mut Vec<String>) {
    match t {
        SType::Name(n, _) => out.push(n.clone()),
        SType::Arrow(a, b) => {
            collect_names(a, out);
            collect_names(b, out);
        }
        SType::Tensor(ts) | SType::With(ts) | SType::Sum(ts) => {
            for t in ts {
                collect_names(t, out);
            }
        }
    }
}
