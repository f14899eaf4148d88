//! Finite type denotations.
//!
//! Every recursion-free type denotes a finite set of semantic values:
//! functions and multiplicative tuples denote tuples of component values (a
//! function "guesses" its argument, so `a -> b` denotes pairs, not graphs);
//! sums and additive products denote tagged component values.

use crate::core::Type;
use std::fmt;

/// A semantic value, always read relative to the type it inhabits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SemValue {
    /// Component tuple: n components for an n-ary multiplicative tuple, two
    /// (argument, result) for a function. `Tuple([])` is the unit value.
    Tuple(Vec<SemValue>),
    /// Tagged component (1-based) for sums and additive products.
    Tagged(usize, Box<SemValue>),
}

impl SemValue {
    pub fn unit() -> SemValue {
        SemValue::Tuple(Vec::new())
    }

    /// `true` desugars to the first injection of `Unit + Unit`.
    pub fn bool_true() -> SemValue {
        SemValue::Tagged(1, Box::new(SemValue::unit()))
    }

    pub fn bool_false() -> SemValue {
        SemValue::Tagged(2, Box::new(SemValue::unit()))
    }
}

impl fmt::Display for SemValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemValue::Tuple(vs) => {
                write!(f, "(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            SemValue::Tagged(i, v) => write!(f, "({i}, {v})"),
        }
    }
}

/// Number of semantic values of a type, or `None` when the type mentions
/// recursion (no finite denotation) or the count overflows.
pub fn domain_size(t: &Type) -> Option<u128> {
    match t {
        Type::Arrow(a, b) => domain_size(a)?.checked_mul(domain_size(b)?),
        Type::Tensor(ts) => {
            let mut n: u128 = 1;
            for t in ts {
                n = n.checked_mul(domain_size(t)?)?;
            }
            Some(n)
        }
        Type::Sum(ts) | Type::With(ts) => {
            let mut n: u128 = 0;
            for t in ts {
                n = n.checked_add(domain_size(t)?)?;
            }
            Some(n)
        }
        Type::Mu { .. } | Type::Var(_) | Type::Meta(_) => None,
    }
}

/// Enumerate the denotation of a recursion-free type in a canonical order:
/// tagged values by ascending tag, tuples lexicographically with the leftmost
/// component varying slowest.
pub fn enumerate_domain(t: &Type) -> Vec<SemValue> {
    match t {
        Type::Arrow(a, b) => {
            let xs = enumerate_domain(a);
            let ys = enumerate_domain(b);
            let mut out = Vec::with_capacity(xs.len() * ys.len());
            for x in &xs {
                for y in &ys {
                    out.push(SemValue::Tuple(vec![x.clone(), y.clone()]));
                }
            }
            out
        }
        Type::Tensor(ts) => {
            let mut out = vec![Vec::new()];
            for t in ts {
                let dom = enumerate_domain(t);
                let mut next = Vec::with_capacity(out.len() * dom.len());
                for prefix in &out {
                    for v in &dom {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        next.push(p);
                    }
                }
                out = next;
            }
            out.into_iter().map(SemValue::Tuple).collect()
        }
        Type::Sum(ts) | Type::With(ts) => {
            let mut out = Vec::new();
            for (i, t) in ts.iter().enumerate() {
                for v in enumerate_domain(t) {
                    out.push(SemValue::Tagged(i + 1, Box::new(v)));
                }
            }
            out
        }
        Type::Mu { .. } | Type::Var(_) | Type::Meta(_) => {
            panic!("enumerate_domain on recursive or unsolved type")
        }
    }
}

/// Render a local environment as `name=value` pairs sorted by name.
pub fn render_env(env: &[(String, SemValue)]) -> String {
    let mut pairs: Vec<&(String, SemValue)> = env.iter().collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    pairs
        .iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}
