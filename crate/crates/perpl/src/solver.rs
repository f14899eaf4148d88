//! Least-fixed-point MSPE solver over [0, oo].
//!
//! The dependency graph of the equations is condensed into strongly connected
//! components, visited in topological order. Each component is classified
//! after substituting already-solved predecessors: constant components are
//! evaluated directly, linear ones solved as x = A*.b with the matrix closure,
//! nonlinear ones by Newton's method (iterating z <- z + (dP/dz)*.(P(z) - z)
//! from zero, which converges monotonically to the least solution).
//!
//! Arithmetic runs over a weight semiring with an explicit infinity:
//! 0.oo = 0, oo - oo := 0, star(a) = 1/(1-a) below one and oo otherwise.

use crate::mspe::{Monomial, Mspe};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use petgraph::graph::DiGraph;
use serde::Serialize;
use std::collections::HashMap;

/// Numbers in [0, oo] under the solver's conventions.
pub trait Weight: Clone + std::fmt::Debug + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn infinity() -> Self;
    fn is_zero(&self) -> bool;
    fn is_infinite(&self) -> bool;
    fn from_rational(r: &BigRational) -> Self;
    fn add(&self, o: &Self) -> Self;
    /// Multiplication with 0.oo = 0.
    fn mul(&self, o: &Self) -> Self;
    /// Truncated subtraction: max(a - b, 0), with oo - oo = 0.
    fn sub_trunc(&self, o: &Self) -> Self;
    /// Kleene star: 1/(1-a) if a < 1, else oo.
    fn star(&self) -> Self;
    fn to_f64(&self) -> f64;
    /// `self <= o` up to a relative slack (for float-mode assertions).
    fn le_with_slack(&self, o: &Self, slack: f64) -> bool;
    fn render(&self) -> String;

    /// `max(0, sum_i coef_i . prod_j z[vars_i[j]] - sub)`: one equation's
    /// residual at `z`. The default evaluates term by term; floats override it
    /// with compensated arithmetic, because near a critical (double-root)
    /// fixed point the residual is a tiny difference of order-one terms and
    /// naive evaluation loses it to cancellation.
    fn eval_residual(terms: &[(Self, &[usize])], z: &[Self], sub: &Self) -> Self {
        let mut acc = Self::zero();
        for (coef, vars) in terms {
            let mut t = coef.clone();
            for &v in vars.iter() {
                t = t.mul(&z[v]);
            }
            acc = acc.add(&t);
        }
        acc.sub_trunc(sub)
    }
}

impl Weight for f64 {
    fn zero() -> f64 {
        0.0
    }
    fn one() -> f64 {
        1.0
    }
    fn infinity() -> f64 {
        f64::INFINITY
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_infinite(&self) -> bool {
        f64::is_infinite(*self)
    }
    fn from_rational(r: &BigRational) -> f64 {
        r.to_f64().unwrap_or(f64::INFINITY)
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn mul(&self, o: &f64) -> f64 {
        if *self == 0.0 || *o == 0.0 {
            0.0
        } else {
            self * o
        }
    }
    fn sub_trunc(&self, o: &f64) -> f64 {
        if f64::is_infinite(*self) && f64::is_infinite(*o) {
            0.0
        } else {
            (self - o).max(0.0)
        }
    }
    fn star(&self) -> f64 {
        if *self < 1.0 {
            1.0 / (1.0 - self)
        } else {
            f64::INFINITY
        }
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn le_with_slack(&self, o: &f64, slack: f64) -> bool {
        if f64::is_infinite(*o) {
            return true;
        }
        if f64::is_infinite(*self) {
            return false;
        }
        *self <= *o + slack * (1.0 + o.abs())
    }
    fn render(&self) -> String {
        if f64::is_infinite(*self) {
            "inf".into()
        } else {
            format!("{self}")
        }
    }

    fn eval_residual(terms: &[(f64, &[usize])], z: &[f64], sub: &f64) -> f64 {
        // Compensated evaluation: each product carries a first-order error
        // term from FMA-based two-products, and the terms (including `-sub`)
        // are added with Neumaier summation.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let add = |x: f64, sum: &mut f64, comp: &mut f64| {
            let t = *sum + x;
            *comp += if sum.abs() >= x.abs() {
                (*sum - t) + x
            } else {
                (x - t) + *sum
            };
            *sum = t;
        };
        for (coef, vars) in terms {
            if *coef == 0.0 {
                continue;
            }
            let mut p = *coef;
            let mut e = 0.0f64;
            let mut exact = true;
            for &v in vars.iter() {
                let f = z[v];
                if f == 0.0 {
                    p = 0.0;
                    e = 0.0;
                    break;
                }
                let q = p * f;
                if !q.is_finite() {
                    exact = false;
                    p = q;
                    e = 0.0;
                    break;
                }
                e = e * f + p.mul_add(f, -q);
                p = q;
            }
            if !exact {
                // Overflow or infinity: compensation is meaningless; fall back
                // to the plain semiring value for this term.
                if p.is_infinite() {
                    return f64::INFINITY.sub_trunc(sub);
                }
            }
            add(p, &mut sum, &mut comp);
            add(e, &mut sum, &mut comp);
        }
        if sub.is_infinite() {
            // Truncated subtraction: anything minus infinity is zero.
            return 0.0;
        }
        add(-*sub, &mut sum, &mut comp);
        (sum + comp).max(0.0)
    }
}

/// Exact nonnegative rationals extended with infinity.
#[derive(Debug, Clone, PartialEq)]
pub enum Exact {
    Finite(BigRational),
    Inf,
}

impl Weight for Exact {
    fn zero() -> Exact {
        Exact::Finite(BigRational::zero())
    }
    fn one() -> Exact {
        Exact::Finite(BigRational::one())
    }
    fn infinity() -> Exact {
        Exact::Inf
    }
    fn is_zero(&self) -> bool {
        matches!(self, Exact::Finite(r) if r.is_zero())
    }
    fn is_infinite(&self) -> bool {
        matches!(self, Exact::Inf)
    }
    fn from_rational(r: &BigRational) -> Exact {
        Exact::Finite(r.clone())
    }
    fn add(&self, o: &Exact) -> Exact {
        match (self, o) {
            (Exact::Finite(a), Exact::Finite(b)) => Exact::Finite(a + b),
            _ => Exact::Inf,
        }
    }
    fn mul(&self, o: &Exact) -> Exact {
        if self.is_zero() || o.is_zero() {
            return Exact::zero();
        }
        match (self, o) {
            (Exact::Finite(a), Exact::Finite(b)) => Exact::Finite(a * b),
            _ => Exact::Inf,
        }
    }
    fn sub_trunc(&self, o: &Exact) -> Exact {
        match (self, o) {
            (Exact::Inf, Exact::Inf) => Exact::zero(),
            (Exact::Inf, Exact::Finite(_)) => Exact::Inf,
            (Exact::Finite(_), Exact::Inf) => Exact::zero(),
            (Exact::Finite(a), Exact::Finite(b)) => {
                if a > b {
                    Exact::Finite(a - b)
                } else {
                    Exact::zero()
                }
            }
        }
    }
    fn star(&self) -> Exact {
        match self {
            Exact::Finite(a) if a < &BigRational::one() => {
                Exact::Finite(BigRational::one() / (BigRational::one() - a))
            }
            _ => Exact::Inf,
        }
    }
    fn to_f64(&self) -> f64 {
        match self {
            Exact::Finite(r) => r.to_f64().unwrap_or(f64::INFINITY),
            Exact::Inf => f64::INFINITY,
        }
    }
    fn le_with_slack(&self, o: &Exact, _slack: f64) -> bool {
        match (self, o) {
            (_, Exact::Inf) => true,
            (Exact::Inf, Exact::Finite(_)) => false,
            (Exact::Finite(a), Exact::Finite(b)) => a <= b,
        }
    }
    fn render(&self) -> String {
        match self {
            Exact::Finite(r) => crate::core::rational_to_string(r),
            Exact::Inf => "inf".into(),
        }
    }
}

/// Least solution of X = I + A.X entrywise, by the closure algorithm:
/// iteratively absorb each pivot k via C_ij += C_ik . star(C_kk) . C_kj,
/// then add the identity.
pub fn matrix_star<W: Weight>(a: &[Vec<W>]) -> Vec<Vec<W>> {
    let n = a.len();
    let mut c: Vec<Vec<W>> = a.to_vec();
    for k in 0..n {
        let s = c[k][k].star();
        let row_k: Vec<W> = c[k].clone();
        let col_k: Vec<W> = (0..n).map(|i| c[i][k].clone()).collect();
        for i in 0..n {
            for j in 0..n {
                let inc = col_k[i].mul(&s).mul(&row_k[j]);
                c[i][j] = c[i][j].add(&inc);
            }
        }
    }
    for (i, row) in c.iter_mut().enumerate() {
        row[i] = row[i].add(&W::one());
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SccClass {
    Constant,
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Serialize)]
pub struct SccReport {
    pub size: usize,
    pub class: SccClass,
    pub iterations: usize,
    pub residual: f64,
    /// Newton iterates (rendered), recorded for small components.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterates: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub sccs: Vec<SccReport>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { tol: 1e-12, max_iters: 200 }
    }
}

/// A monomial with predecessors substituted: coefficient times a product of
/// component-local variables (by local index, with multiplicity).
struct LocalMonomial<W> {
    coef: W,
    locals: Vec<usize>,
}

type LocalPoly<W> = Vec<LocalMonomial<W>>;

/// Past this size, nonlinear components fall back from Newton (whose closure
/// step is cubic in the component size) to chaotic fixed-point sweeps.
const NEWTON_SIZE_LIMIT: usize = 512;
/// Iterate-recording cutoff.
const RECORD_SIZE_LIMIT: usize = 8;

/// Solve the system for its least fixed point; returns the full assignment
/// and a per-component report.
pub fn solve<W: Weight>(m: &Mspe, cfg: &SolveConfig) -> (Vec<W>, SolveReport) {
    let n = m.eqs.len();
    // Dependency graph: edge var -> equation that mentions it.
    let mut graph: DiGraph<(), ()> = DiGraph::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (i, poly) in m.eqs.iter().enumerate() {
        for mono in poly {
            for &v in &mono.vars {
                if v != i {
                    graph.update_edge(nodes[v], nodes[i], ());
                }
            }
        }
    }
    let sccs = petgraph::algo::tarjan_scc(&graph);
    // Component index per variable, then Kahn's algorithm over the
    // condensation for a deterministic topological order.
    let mut comp_of = vec![0usize; n];
    for (ci, comp) in sccs.iter().enumerate() {
        for nd in comp {
            comp_of[nd.index()] = ci;
        }
    }
    let nc = sccs.len();
    let mut indeg = vec![0usize; nc];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for e in graph.raw_edges() {
        let (a, b) = (comp_of[e.source().index()], comp_of[e.target().index()]);
        if a != b {
            succs[a].push(b);
        }
    }
    for s in &mut succs {
        s.sort_unstable();
        s.dedup();
    }
    for s in &succs {
        for &b in s {
            indeg[b] += 1;
        }
    }
    let mut order: Vec<usize> = Vec::with_capacity(nc);
    let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..nc)
        .filter(|&c| indeg[c] == 0)
        .map(std::cmp::Reverse)
        .collect();
    while let Some(std::cmp::Reverse(c)) = ready.pop() {
        order.push(c);
        for &b in &succs[c] {
            indeg[b] -= 1;
            if indeg[b] == 0 {
                ready.push(std::cmp::Reverse(b));
            }
        }
    }
    debug_assert_eq!(order.len(), nc);

    let mut value: Vec<W> = vec![W::zero(); n];
    let mut report = SolveReport { sccs: Vec::new(), converged: true };

    for &ci in &order {
        let mut members: Vec<usize> = sccs[ci].iter().map(|nd| nd.index()).collect();
        members.sort_unstable();
        let local_of: HashMap<usize, usize> =
            members.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        // Substitute solved predecessors into the component's equations.
        let polys: Vec<LocalPoly<W>> = members
            .iter()
            .map(|&v| {
                m.eqs[v]
                    .iter()
                    .filter_map(|mono| substitute(mono, &local_of, &value))
                    .collect()
            })
            .collect();
        let degree = polys
            .iter()
            .flat_map(|p| p.iter().map(|mono| mono.locals.len()))
            .max()
            .unwrap_or(0);
        let k = members.len();
        let scc_report = match degree {
            0 => {
                for (li, &v) in members.iter().enumerate() {
                    let mut acc = W::zero();
                    for mono in &polys[li] {
                        acc = acc.add(&mono.coef);
                    }
                    value[v] = acc;
                }
                SccReport {
                    size: k,
                    class: SccClass::Constant,
                    iterations: 0,
                    residual: 0.0,
                    iterates: None,
                }
            }
            1 => {
                let x = solve_linear(&polys, k);
                for (li, &v) in members.iter().enumerate() {
                    value[v] = x[li].clone();
                }
                SccReport {
                    size: k,
                    class: SccClass::Linear,
                    iterations: 0,
                    residual: 0.0,
                    iterates: None,
                }
            }
            _ => {
                let r = if k <= NEWTON_SIZE_LIMIT {
                    newton_solve(&polys, k, cfg)
                } else {
                    kleene_solve(&polys, k, cfg)
                };
                for (li, &v) in members.iter().enumerate() {
                    value[v] = r.0[li].clone();
                }
                if r.1.residual > cfg.tol {
                    report.converged = false;
                }
                r.1
            }
        };
        report.sccs.push(scc_report);
    }
    (value, report)
}

fn substitute<W: Weight>(
    mono: &Monomial,
    local_of: &HashMap<usize, usize>,
    value: &[W],
) -> Option<LocalMonomial<W>> {
    let mut coef = W::from_rational(&mono.coef);
    let mut locals = Vec::new();
    for &v in &mono.vars {
        match local_of.get(&v) {
            Some(&li) => locals.push(li),
            None => coef = coef.mul(&value[v]),
        }
    }
    if coef.is_zero() {
        None
    } else {
        Some(LocalMonomial { coef, locals })
    }
}

/// Least solution of x = A.x + b: x = A*.b.
fn solve_linear<W: Weight>(polys: &[LocalPoly<W>], k: usize) -> Vec<W> {
    let mut a = vec![vec![W::zero(); k]; k];
    let mut b = vec![W::zero(); k];
    for (i, poly) in polys.iter().enumerate() {
        for mono in poly {
            match mono.locals.as_slice() {
                [] => b[i] = b[i].add(&mono.coef),
                [j] => a[i][*j] = a[i][*j].add(&mono.coef),
                _ => unreachable!("linear component with higher-degree monomial"),
            }
        }
    }
    let astar = matrix_star(&a);
    (0..k)
        .map(|i| {
            let mut acc = W::zero();
            for j in 0..k {
                acc = acc.add(&astar[i][j].mul(&b[j]));
            }
            acc
        })
        .collect()
}

/// One equation's residual `max(0, P_i(z) - z_i)` via the weight type's
/// (possibly compensated) evaluation.
fn residual_at<W: Weight>(poly: &LocalPoly<W>, z: &[W], zi: &W) -> W {
    let terms: Vec<(W, &[usize])> = poly
        .iter()
        .map(|m| (m.coef.clone(), m.locals.as_slice()))
        .collect();
    W::eval_residual(&terms, z, zi)
}

fn eval_poly<W: Weight>(poly: &LocalPoly<W>, z: &[W]) -> W {
    let mut acc = W::zero();
    for mono in poly {
        let mut t = mono.coef.clone();
        for &l in &mono.locals {
            t = t.mul(&z[l]);
        }
        acc = acc.add(&t);
    }
    acc
}

/// Formal-derivative Jacobian of the component at z.
fn jacobian<W: Weight>(polys: &[LocalPoly<W>], z: &[W], k: usize) -> Vec<Vec<W>> {
    let mut j = vec![vec![W::zero(); k]; k];
    for (i, poly) in polys.iter().enumerate() {
        for mono in poly {
            for (pos, &l) in mono.locals.iter().enumerate() {
                // d/dz_l of this occurrence: coefficient times the product of
                // the remaining factors.
                let mut t = mono.coef.clone();
                for (q, &l2) in mono.locals.iter().enumerate() {
                    if q != pos {
                        t = t.mul(&z[l2]);
                    }
                }
                j[i][l] = j[i][l].add(&t);
            }
        }
    }
    j
}

/// Newton iteration from zero; returns the assignment and its report.
fn newton_solve<W: Weight>(
    polys: &[LocalPoly<W>],
    k: usize,
    cfg: &SolveConfig,
) -> (Vec<W>, SccReport) {
    let mut z: Vec<W> = vec![W::zero(); k];
    let mut iterates: Option<Vec<Vec<String>>> =
        (k <= RECORD_SIZE_LIMIT).then(Vec::new);
    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let delta: Vec<W> = (0..k)
            .map(|i| residual_at(&polys[i], &z, &z[i]))
            .collect();
        residual = delta.iter().map(|d| d.to_f64()).fold(0.0, f64::max);
        if residual <= cfg.tol {
            break;
        }
        let jstar = matrix_star(&jacobian(polys, &z, k));
        let next: Vec<W> = (0..k)
            .map(|i| {
                let mut acc = z[i].clone();
                for j in 0..k {
                    acc = acc.add(&jstar[i][j].mul(&delta[j]));
                }
                acc
            })
            .collect();
        for i in 0..k {
            assert!(
                z[i].le_with_slack(&next[i], 1e-9),
                "Newton iterate decreased at component variable {i}"
            );
        }
        z = next;
        iterations += 1;
        if let Some(it) = &mut iterates {
            it.push(z.iter().map(Weight::render).collect());
        }
    }
    // Final residual after the last update.
    residual = (0..k)
        .map(|i| residual_at(&polys[i], &z, &z[i]).to_f64())
        .fold(0.0, f64::max)
        .min(residual);
    (
        z,
        SccReport {
            size: k,
            class: SccClass::Nonlinear,
            iterations,
            residual,
            iterates,
        },
    )
}

/// Chaotic (in-place) fixed-point sweeps for oversized nonlinear components.
fn kleene_solve<W: Weight>(
    polys: &[LocalPoly<W>],
    k: usize,
    cfg: &SolveConfig,
) -> (Vec<W>, SccReport) {
    let mut z: Vec<W> = vec![W::zero(); k];
    let sweeps = cfg.max_iters.max(10_000);
    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;
    for _ in 0..sweeps {
        let mut max_change = 0.0f64;
        for i in 0..k {
            let nv = eval_poly(&polys[i], &z);
            let change = nv.sub_trunc(&z[i]).to_f64();
            max_change = max_change.max(change);
            z[i] = nv;
        }
        iterations += 1;
        residual = max_change;
        if max_change <= cfg.tol {
            break;
        }
    }
    (
        z,
        SccReport {
            size: k,
            class: SccClass::Nonlinear,
            iterations,
            residual,
            iterates: None,
        },
    )
}
