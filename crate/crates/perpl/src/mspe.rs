//! Compilation of a recursion-free, strictly linear program into a monotone
//! system of polynomial equations (MSPE).
//!
//! The system has one weight variable per (expression node, local environment
//! assignment, result value) and one per (global, value). Each syntactic form
//! contributes one equation: variables copy or constrain, abstractions bind
//! the guessed argument, applications and eliminations sum over intermediate
//! values, tuples multiply over the partition of the linear context, `amb`
//! adds, `fail` is zero, `factor` scales. The least solution of the system
//! over [0, oo] is the program's distribution; the root variables are the main
//! expression's variables at the empty environment.

use crate::core::*;
use crate::diag::Diagnostics;
use crate::domain::{domain_size, enumerate_domain, render_env, SemValue};
use crate::typecheck::TypedProgram;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, HashMap};

/// A product of a nonnegative coefficient and weight variables (with
/// multiplicity; indices kept sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: BigRational,
    pub vars: Vec<usize>,
}

impl Monomial {
    fn constant(coef: BigRational) -> Monomial {
        Monomial { coef, vars: Vec::new() }
    }

    fn of_vars(vars: Vec<usize>) -> Monomial {
        let mut m = Monomial { coef: BigRational::one(), vars };
        m.vars.sort_unstable();
        m
    }
}

/// A polynomial: a sum of monomials. The empty sum is zero.
pub type Poly = Vec<Monomial>;

/// Identity of a weight variable, kept compact; rendering recomputes the
/// environment assignment from its index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarInfo {
    Node { node: NodeId, env_idx: usize, val_idx: usize },
    Global { global: usize, val_idx: usize },
}

#[derive(Debug, Clone)]
pub struct Mspe {
    /// One equation per variable: `z_i = eqs[i]`.
    pub eqs: Vec<Poly>,
    pub infos: Vec<VarInfo>,
    /// Roots and globals survive reduction even when otherwise eliminable.
    pub protected: Vec<bool>,
    /// The main expression's distribution: (rendered value, variable).
    pub roots: Vec<(String, usize)>,
    /// Variable count before any reduction.
    pub raw_var_count: usize,
}

#[derive(Debug)]
pub enum MspeError {
    /// The configured variable budget was exceeded; reported with the node
    /// that pushed it over.
    Budget(String),
    Invalid(Diagnostics),
}

impl std::fmt::Display for MspeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MspeError::Budget(m) => write!(f, "{m}"),
            MspeError::Invalid(d) => write!(f, "{d}"),
        }
    }
}

/// Per-node variable block: a dense range of indices laid out as mixed-radix
/// (environment entries outermost, result value innermost).
struct NodeBlock {
    base: usize,
    env_doms: Vec<Vec<SemValue>>,
    env_index: Vec<HashMap<SemValue, usize>>,
    val_dom: Vec<SemValue>,
    val_index: HashMap<SemValue, usize>,
}

impl NodeBlock {
    fn env_count(&self) -> usize {
        self.env_doms.iter().map(Vec::len).product()
    }
}

struct GlobalBlock {
    base: usize,
    val_dom: Vec<SemValue>,
    val_index: HashMap<SemValue, usize>,
}

fn index_of(map: &HashMap<SemValue, usize>, v: &SemValue) -> usize {
    *map.get(v).unwrap_or_else(|| panic!("value {v} outside its domain"))
}

pub fn compile_mspe(tp: &TypedProgram, max_vars: u128) -> Result<Mspe, MspeError> {
    if !tp.program.live_tags().is_empty() {
        return Err(MspeError::Invalid(
            crate::diag::Diagnostic::new(
                None,
                "internal: program still contains recursive types at equation generation",
            )
            .into(),
        ));
    }

    // Allocate variable blocks in program order.
    let mut blocks: HashMap<NodeId, NodeBlock> = HashMap::new();
    let mut next = 0usize;
    let mut total: u128 = 0;
    let mut budget_err: Option<String> = None;
    {
        let mut alloc = |e: &Expr| {
            if budget_err.is_some() {
                return;
            }
            e.visit(&mut |n| {
                if budget_err.is_some() {
                    return;
                }
                let env = tp.env(n.id);
                let ty = tp.ty(n.id);
                let mut count: u128 = match domain_size(ty) {
                    Some(s) => s,
                    None => {
                        budget_err = Some("internal: recursive type in node type".into());
                        return;
                    }
                };
                for entry in env {
                    count = match domain_size(&entry.ty)
                        .and_then(|s| count.checked_mul(s))
                    {
                        Some(c) => c,
                        None => {
                            budget_err =
                                Some("variable budget exceeded: domain size overflow".into());
                            return;
                        }
                    };
                }
                total += count;
                if total > max_vars {
                    let at = n
                        .span
                        .map(|s| format!(" at {s}"))
                        .unwrap_or_default();
                    budget_err = Some(format!(
                        "variable budget exceeded: {total} weight variables (> {max_vars}); node{at} contributes {count}"
                    ));
                    return;
                }
                let env_doms: Vec<Vec<SemValue>> =
                    env.iter().map(|x| enumerate_domain(&x.ty)).collect();
                let env_index = env_doms
                    .iter()
                    .map(|d| d.iter().cloned().zip(0..).collect())
                    .collect();
                let val_dom = enumerate_domain(ty);
                let val_index = val_dom.iter().cloned().zip(0..).collect();
                let block = NodeBlock {
                    base: next,
                    env_doms,
                    env_index,
                    val_dom,
                    val_index,
                };
                next += count as usize;
                blocks.insert(n.id, block);
            });
        };
        for g in &tp.program.globals {
            alloc(&g.body);
        }
        alloc(&tp.program.main);
    }
    if let Some(m) = budget_err {
        return Err(MspeError::Budget(m));
    }

    let mut globals: HashMap<String, GlobalBlock> = HashMap::new();
    let mut global_order: Vec<String> = Vec::new();
    for g in &tp.program.globals {
        let val_dom = enumerate_domain(&g.ty);
        total += val_dom.len() as u128;
        if total > max_vars {
            return Err(MspeError::Budget(format!(
                "variable budget exceeded: {total} weight variables (> {max_vars}) at global {}",
                g.name
            )));
        }
        let val_index = val_dom.iter().cloned().zip(0..).collect();
        globals.insert(
            g.name.clone(),
            GlobalBlock { base: next, val_dom, val_index },
        );
        next += globals[&g.name].val_dom.len();
        global_order.push(g.name.clone());
    }
    let n_vars = next;

    let ctx = Compiler { tp, blocks: &blocks, globals: &globals };
    let mut eqs: Vec<Poly> = vec![Vec::new(); n_vars];
    {
        let mut gen = |e: &Expr| {
            e.visit(&mut |n| ctx.equations_for(n, &mut eqs));
        };
        for g in &tp.program.globals {
            gen(&g.body);
        }
        gen(&tp.program.main);
    }
    // Global fixed point: each global's variable copies its body's variable
    // at the empty environment.
    for g in &tp.program.globals {
        let gb = &globals[&g.name];
        let body = &blocks[&g.body.id];
        debug_assert!(body.env_doms.is_empty());
        for (vi, v) in gb.val_dom.iter().enumerate() {
            let bvi = index_of(&body.val_index, v);
            eqs[gb.base + vi] = vec![Monomial::of_vars(vec![body.base + bvi])];
        }
    }

    let mut infos = vec![VarInfo::Node { node: 0, env_idx: 0, val_idx: 0 }; n_vars];
    for (id, b) in &blocks {
        let envs = b.env_count();
        for e in 0..envs {
            for v in 0..b.val_dom.len() {
                infos[b.base + e * b.val_dom.len() + v] =
                    VarInfo::Node { node: *id, env_idx: e, val_idx: v };
            }
        }
    }
    for (gi, name) in global_order.iter().enumerate() {
        let b = &globals[name];
        for v in 0..b.val_dom.len() {
            infos[b.base + v] = VarInfo::Global { global: gi, val_idx: v };
        }
    }

    let mut protected = vec![false; n_vars];
    for name in &global_order {
        let b = &globals[name];
        for v in 0..b.val_dom.len() {
            protected[b.base + v] = true;
        }
    }
    let main_block = &blocks[&tp.program.main.id];
    let mut roots = Vec::new();
    for (vi, v) in main_block.val_dom.iter().enumerate() {
        let idx = main_block.base + vi;
        protected[idx] = true;
        roots.push((v.to_string(), idx));
    }

    let mut m = Mspe {
        eqs,
        infos,
        protected,
        roots,
        raw_var_count: n_vars,
    };
    for eq in &mut m.eqs {
        merge_monomials(eq);
    }
    Ok(m)
}

struct Compiler<'a> {
    tp: &'a TypedProgram,
    blocks: &'a HashMap<NodeId, NodeBlock>,
    globals: &'a HashMap<String, GlobalBlock>,
}

impl Compiler<'_> {
    /// Variable index of `child` at the environment given by the parent
    /// assignment `delta` extended with `extra` bindings (innermost last).
    fn child_var(
        &self,
        child: &Expr,
        delta: &BTreeMap<&str, &SemValue>,
        extra: &[(&str, &SemValue)],
        value: &SemValue,
    ) -> usize {
        let b = &self.blocks[&child.id];
        let env = self.tp.env(child.id);
        let mut idx = 0usize;
        for (k, entry) in env.iter().enumerate() {
            let v = extra
                .iter()
                .rev()
                .find(|(n, _)| *n == entry.name)
                .map(|(_, v)| *v)
                .or_else(|| delta.get(entry.name.as_str()).copied())
                .unwrap_or_else(|| panic!("unbound variable {} in environment", entry.name));
            idx = idx * b.env_doms[k].len() + index_of(&b.env_index[k], v);
        }
        b.base + idx * b.val_dom.len() + index_of(&b.val_index, value)
    }

    /// Emit the equations of one node: for every environment assignment and
    /// result value, the polynomial given by its syntactic form.
    fn equations_for(&self, n: &Expr, eqs: &mut Vec<Poly>) {
        let b = &self.blocks[&n.id];
        let env = self.tp.env(n.id);
        let envs = b.env_count();
        // Odometer over environment assignments.
        let mut combo = vec![0usize; b.env_doms.len()];
        for e in 0..envs {
            // Decode env index e into per-entry indices (leftmost slowest).
            {
                let mut rem = e;
                for k in (0..b.env_doms.len()).rev() {
                    combo[k] = rem % b.env_doms[k].len();
                    rem /= b.env_doms[k].len();
                }
            }
            let delta: BTreeMap<&str, &SemValue> = env
                .iter()
                .enumerate()
                .map(|(k, entry)| (entry.name.as_str(), &b.env_doms[k][combo[k]]))
                .collect();
            for (vi, v) in b.val_dom.iter().enumerate() {
                let poly = self.poly_for(n, &delta, v);
                eqs[b.base + e * b.val_dom.len() + vi] = poly;
            }
        }
    }

    fn poly_for(
        &self,
        n: &Expr,
        delta: &BTreeMap<&str, &SemValue>,
        v: &SemValue,
    ) -> Poly {
        match &n.kind {
            ExprKind::Var(x) => {
                if let Some(g) = self.globals.get(x) {
                    vec![Monomial::of_vars(vec![g.base + index_of(&g.val_index, v)])]
                } else {
                    let dv = delta
                        .get(x.as_str())
                        .unwrap_or_else(|| panic!("unbound variable {x}"));
                    if *dv == v {
                        vec![Monomial::constant(BigRational::one())]
                    } else {
                        Vec::new()
                    }
                }
            }
            ExprKind::Lam { param, body, .. } => {
                let (v1, v2) = match v {
                    SemValue::Tuple(parts) if parts.len() == 2 => (&parts[0], &parts[1]),
                    _ => panic!("function value is not a pair"),
                };
                let z = self.child_var(body, delta, &[(param.as_str(), v1)], v2);
                vec![Monomial::of_vars(vec![z])]
            }
            ExprKind::App(f, a) => {
                let arg_ty = self.tp.ty(a.id);
                let mut poly = Vec::new();
                for v1 in enumerate_domain(arg_ty) {
                    let fv = SemValue::Tuple(vec![v1.clone(), v.clone()]);
                    let zf = self.child_var(f, delta, &[], &fv);
                    let za = self.child_var(a, delta, &[], &v1);
                    poly.push(Monomial::of_vars(vec![zf, za]));
                }
                poly
            }
            ExprKind::Amb(a, b) => {
                let za = self.child_var(a, delta, &[], v);
                let zb = self.child_var(b, delta, &[], v);
                vec![Monomial::of_vars(vec![za]), Monomial::of_vars(vec![zb])]
            }
            ExprKind::Fail => Vec::new(),
            ExprKind::Factor(w, e) => {
                let z = self.child_var(e, delta, &[], v);
                vec![Monomial { coef: w.clone(), vars: vec![z] }]
            }
            ExprKind::Tuple(es) => {
                let parts = match v {
                    SemValue::Tuple(parts) if parts.len() == es.len() => parts,
                    _ => panic!("tuple value arity mismatch"),
                };
                let vars = es
                    .iter()
                    .zip(parts)
                    .map(|(e, p)| self.child_var(e, delta, &[], p))
                    .collect();
                vec![Monomial::of_vars(vars)]
            }
            ExprKind::AddTuple(es) => {
                let (i, vi) = match v {
                    SemValue::Tagged(i, vi) => (*i, vi.as_ref()),
                    _ => panic!("additive tuple value is not tagged"),
                };
                let z = self.child_var(&es[i - 1], delta, &[], vi);
                vec![Monomial::of_vars(vec![z])]
            }
            ExprKind::LetTuple { params, rhs, body } => {
                let rhs_ty = self.tp.ty(rhs.id);
                let mut poly = Vec::new();
                for tv in enumerate_domain(rhs_ty) {
                    let parts = match &tv {
                        SemValue::Tuple(parts) if parts.len() == params.len() => parts,
                        _ => panic!("let-tuple right side is not a tuple"),
                    };
                    let extra: Vec<(&str, &SemValue)> = params
                        .iter()
                        .map(String::as_str)
                        .zip(parts.iter())
                        .collect();
                    let zr = self.child_var(rhs, delta, &[], &tv);
                    let zb = self.child_var(body, delta, &extra, v);
                    poly.push(Monomial::of_vars(vec![zr, zb]));
                }
                poly
            }
            ExprKind::Proj(e, i) => {
                let tagged = SemValue::Tagged(*i, Box::new(v.clone()));
                let z = self.child_var(e, delta, &[], &tagged);
                vec![Monomial::of_vars(vec![z])]
            }
            ExprKind::Inj { index, payload, .. } => match v {
                SemValue::Tagged(j, vj) if j == index => {
                    let z = self.child_var(payload, delta, &[], vj);
                    vec![Monomial::of_vars(vec![z])]
                }
                SemValue::Tagged(..) => Vec::new(),
                _ => panic!("sum value is not tagged"),
            },
            ExprKind::Case { scrutinee, arms } => {
                let scrut_ty = self.tp.ty(scrutinee.id);
                let alts = match scrut_ty {
                    Type::Sum(ts) => ts,
                    _ => panic!("case scrutinee is not a sum"),
                };
                let mut poly = Vec::new();
                for (i, (arm, alt)) in arms.iter().zip(alts).enumerate() {
                    for vi in enumerate_domain(alt) {
                        let tagged = SemValue::Tagged(i + 1, Box::new(vi.clone()));
                        let zs = self.child_var(scrutinee, delta, &[], &tagged);
                        let za =
                            self.child_var(&arm.body, delta, &[(arm.binder.as_str(), &vi)], v);
                        poly.push(Monomial::of_vars(vec![zs, za]));
                    }
                }
                poly
            }
            ExprKind::Fold { .. } | ExprKind::Unfold { .. } => {
                panic!("recursive-type construct survived elimination")
            }
            ExprKind::Eq(..) => panic!("== survived typechecking"),
        }
    }
}

/// Sort each monomial's variables, combine equal monomials, drop zeros.
fn merge_monomials(poly: &mut Poly) {
    for m in poly.iter_mut() {
        m.vars.sort_unstable();
    }
    poly.sort_by(|a, b| a.vars.cmp(&b.vars));
    let mut out: Poly = Vec::with_capacity(poly.len());
    for m in poly.drain(..) {
        if m.coef.is_zero() {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.vars == m.vars => last.coef += m.coef,
            _ => out.push(m),
        }
    }
    *poly = out;
}

impl Mspe {
    pub fn var_count(&self) -> usize {
        self.eqs.len()
    }

    /// Reduce the system without changing the least solution on protected
    /// variables: prune provably-zero variables, then eliminate unprotected
    /// intermediates that are defined by a single monomial or referenced at
    /// most once.
    pub fn reduce(&mut self) {
        self.prune_zeros();
        self.eliminate();
    }

    /// Least-solution zero analysis: a variable is possibly nonzero iff some
    /// monomial of its equation has a positive coefficient and only
    /// possibly-nonzero factors. Everything else is exactly zero and can be
    /// dropped (protected variables keep a zero equation).
    fn prune_zeros(&mut self) {
        let n = self.eqs.len();
        let mut nonzero = vec![false; n];
        // remaining[eq][mono]: factors not yet known nonzero.
        let mut remaining: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut occ: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        let mut queue: Vec<usize> = Vec::new();
        for (ei, poly) in self.eqs.iter().enumerate() {
            let mut rem = Vec::with_capacity(poly.len());
            for (mi, m) in poly.iter().enumerate() {
                // Count distinct unknown factors once; duplicates resolve
                // together.
                let mut distinct = 0usize;
                let mut prev: Option<usize> = None;
                for &v in &m.vars {
                    if prev != Some(v) {
                        occ[v].push((ei as u32, mi as u32));
                        distinct += 1;
                        prev = Some(v);
                    }
                }
                rem.push(distinct);
                if distinct == 0 && !nonzero[ei] {
                    nonzero[ei] = true;
                    queue.push(ei);
                }
            }
            remaining.push(rem);
        }
        while let Some(v) = queue.pop() {
            for &(ei, mi) in &occ[v] {
                let (ei, mi) = (ei as usize, mi as usize);
                remaining[ei][mi] -= 1;
                if remaining[ei][mi] == 0 && !nonzero[ei] {
                    nonzero[ei] = true;
                    queue.push(ei);
                }
            }
        }
        // Drop zero variables and monomials mentioning them.
        let keep: Vec<bool> = (0..n).map(|i| nonzero[i] || self.protected[i]).collect();
        let mut remap = vec![usize::MAX; n];
        let mut next = 0usize;
        for i in 0..n {
            if keep[i] {
                remap[i] = next;
                next += 1;
            }
        }
        let mut eqs = Vec::with_capacity(next);
        let mut infos = Vec::with_capacity(next);
        let mut protected = Vec::with_capacity(next);
        for i in 0..n {
            if !keep[i] {
                continue;
            }
            let mut poly: Poly = self.eqs[i]
                .drain(..)
                .filter(|m| m.vars.iter().all(|&v| nonzero[v]))
                .collect();
            for m in &mut poly {
                for v in &mut m.vars {
                    *v = remap[*v];
                }
            }
            eqs.push(poly);
            infos.push(self.infos[i]);
            protected.push(self.protected[i]);
        }
        for (_, r) in &mut self.roots {
            *r = remap[*r];
        }
        self.eqs = eqs;
        self.infos = infos;
        self.protected = protected;
    }

    /// Eliminate unprotected, non-self-referential variables whose equation
    /// is a single monomial (substitute it everywhere) or that are referenced
    /// at most once (distribute the whole polynomial into the single use).
    fn eliminate(&mut self) {
        let n = self.eqs.len();
        let mut dead = vec![false; n];
        // occ[v]: equations that may reference v (with stale entries allowed).
        let mut occ: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (ei, poly) in self.eqs.iter().enumerate() {
            for m in poly {
                for &v in &m.vars {
                    occ[v].push(ei);
                }
            }
        }
        for o in &mut occ {
            o.sort_unstable();
            o.dedup();
        }
        let mut work: Vec<usize> = (0..n).collect();
        while let Some(i) = work.pop() {
            if dead[i] || self.protected[i] {
                continue;
            }
            let self_ref = self.eqs[i].iter().any(|m| m.vars.contains(&i));
            if self_ref {
                continue;
            }
            // Refresh the true referencing equations of i.
            let users: Vec<usize> = std::mem::take(&mut occ[i])
                .into_iter()
                .filter(|&ei| {
                    !dead[ei] && ei != i && self.eqs[ei].iter().any(|m| m.vars.contains(&i))
                })
                .collect();
            let uses: usize = users
                .iter()
                .map(|&ei| {
                    self.eqs[ei]
                        .iter()
                        .map(|m| m.vars.iter().filter(|&&v| v == i).count())
                        .sum::<usize>()
                })
                .sum();
            let single_mono = self.eqs[i].len() <= 1;
            if !(single_mono || uses <= 1) {
                occ[i] = users;
                continue;
            }
            // Substitute eqs[i] into every use, then retire i.
            let def = std::mem::take(&mut self.eqs[i]);
            for &ei in &users {
                let old = std::mem::take(&mut self.eqs[ei]);
                let mut new: Poly = Vec::with_capacity(old.len());
                for m in old {
                    let k = m.vars.iter().filter(|&&v| v == i).count();
                    if k == 0 {
                        new.push(m);
                        continue;
                    }
                    // Replace each occurrence of i by the definition; the
                    // definition is either a single monomial (k may exceed 1)
                    // or used exactly once (k == 1), so expansion stays flat.
                    let rest: Vec<usize> =
                        m.vars.iter().copied().filter(|&v| v != i).collect();
                    let mut expansions: Vec<Monomial> =
                        vec![Monomial { coef: m.coef.clone(), vars: rest }];
                    for _ in 0..k {
                        let mut next_exp = Vec::with_capacity(expansions.len() * def.len());
                        for base in &expansions {
                            for dm in &def {
                                let mut vars = base.vars.clone();
                                vars.extend_from_slice(&dm.vars);
                                next_exp.push(Monomial {
                                    coef: &base.coef * &dm.coef,
                                    vars,
                                });
                            }
                        }
                        expansions = next_exp;
                    }
                    for e in &mut expansions {
                        for &v in &e.vars {
                            occ[v].push(ei);
                        }
                    }
                    new.extend(expansions);
                }
                merge_monomials(&mut new);
                self.eqs[ei] = new;
                work.push(ei);
            }
            // Variables referenced by the retired definition may have lost a
            // user; revisit them.
            for dm in &def {
                for &v in &dm.vars {
                    work.push(v);
                }
            }
            dead[i] = true;
        }
        // Compact.
        let mut remap = vec![usize::MAX; n];
        let mut next = 0usize;
        for i in 0..n {
            if !dead[i] {
                remap[i] = next;
                next += 1;
            }
        }
        let mut eqs = Vec::with_capacity(next);
        let mut infos = Vec::with_capacity(next);
        let mut protected = Vec::with_capacity(next);
        for i in 0..n {
            if dead[i] {
                continue;
            }
            let mut poly = std::mem::take(&mut self.eqs[i]);
            for m in &mut poly {
                for v in &mut m.vars {
                    *v = remap[*v];
                }
                m.vars.sort_unstable();
            }
            eqs.push(poly);
            infos.push(self.infos[i]);
            protected.push(self.protected[i]);
        }
        for (_, r) in &mut self.roots {
            *r = remap[*r];
        }
        self.eqs = eqs;
        self.infos = infos;
        self.protected = protected;
    }

    /// Human-readable name of a variable.
    pub fn var_name(&self, tp: &TypedProgram, i: usize) -> String {
        match self.infos[i] {
            VarInfo::Global { global, val_idx } => {
                let g = &tp.program.globals[global];
                let v = &enumerate_domain(&g.ty)[val_idx];
                format!("{}({v})", g.name)
            }
            VarInfo::Node { node, env_idx, val_idx } => {
                let env = tp.env(node);
                let doms: Vec<Vec<SemValue>> =
                    env.iter().map(|x| enumerate_domain(&x.ty)).collect();
                let mut rem = env_idx;
                let mut pairs: Vec<(String, SemValue)> = Vec::new();
                for k in (0..doms.len()).rev() {
                    let idx = rem % doms[k].len();
                    rem /= doms[k].len();
                    pairs.push((env[k].name.clone(), doms[k][idx].clone()));
                }
                pairs.reverse();
                let v = &enumerate_domain(tp.ty(node))[val_idx];
                if pairs.is_empty() {
                    format!("e{node}({v})")
                } else {
                    format!("e{node}[{}]({v})", render_env(&pairs))
                }
            }
        }
    }

    /// JSON form: variables, equations, roots.
    pub fn to_json(&self, tp: &TypedProgram) -> serde_json::Value {
        let vars: Vec<String> = (0..self.eqs.len()).map(|i| self.var_name(tp, i)).collect();
        let eqs: Vec<serde_json::Value> = self
            .eqs
            .iter()
            .enumerate()
            .map(|(i, poly)| {
                serde_json::json!({
                    "lhs": i,
                    "monomials": poly.iter().map(|m| serde_json::json!({
                        "coef": rational_to_string(&m.coef),
                        "vars": m.vars,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        let roots: Vec<serde_json::Value> = self
            .roots
            .iter()
            .map(|(v, i)| serde_json::json!({"value": v, "var": i}))
            .collect();
        serde_json::json!({"vars": vars, "eqs": eqs, "roots": roots})
    }

    /// Text form, one `z3 = 1/3 + 2/3*z3*z3` line per equation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, poly) in self.eqs.iter().enumerate() {
            out.push_str(&format!("z{i} = "));
            if poly.is_empty() {
                out.push('0');
            }
            for (k, m) in poly.iter().enumerate() {
                if k > 0 {
                    out.push_str(" + ");
                }
                let mut parts: Vec<String> = Vec::new();
                if !m.coef.is_one() || m.vars.is_empty() {
                    parts.push(rational_to_string(&m.coef));
                }
                for v in &m.vars {
                    parts.push(format!("z{v}"));
                }
                out.push_str(&parts.join("*"));
            }
            out.push('\n');
        }
        out
    }
}
