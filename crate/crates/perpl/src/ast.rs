//! Surface abstract syntax, as parsed (before desugaring).

use crate::diag::Span;
use num_rational::BigRational;

#[derive(Debug, Clone, PartialEq)]
pub enum SType {
    /// A named type: a datatype, `Unit`, or `Bool`.
    Name(String, Span),
    Arrow(Box<SType>, Box<SType>),
    /// n != 1 (a 1-tuple type is just grouping); `Tensor([])` is Unit.
    Tensor(Vec<SType>),
    With(Vec<SType>),
    Sum(Vec<SType>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LetPat {
    Var(String),
    /// `let (x, y) = ...` / `let () = ...`
    Tuple(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SArm {
    pub ctor: String,
    pub ctor_span: Span,
    pub vars: Vec<String>,
    pub body: SExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExprKind {
    Var(String),
    Lam {
        param: String,
        ann: Option<SType>,
        body: Box<SExpr>,
    },
    App(Box<SExpr>, Box<SExpr>),
    Amb(Box<SExpr>, Box<SExpr>),
    Fail,
    Factor(BigRational, Box<SExpr>),
    /// Multiplicative tuple; never arity 1.
    Tuple(Vec<SExpr>),
    AddTuple(Vec<SExpr>),
    Proj(Box<SExpr>, usize),
    Let {
        pat: LetPat,
        rhs: Box<SExpr>,
        body: Box<SExpr>,
    },
    If {
        cond: Box<SExpr>,
        then: Box<SExpr>,
        els: Box<SExpr>,
    },
    Case {
        scrutinee: Box<SExpr>,
        /// `case unfold e of ...` shorthand was used.
        explicit_unfold: bool,
        arms: Vec<SArm>,
    },
    Eq(Box<SExpr>, Box<SExpr>),
    And(Box<SExpr>, Box<SExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SExpr {
    pub span: Span,
    pub kind: SExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtorDecl {
    pub name: String,
    pub span: Span,
    pub args: Vec<SType>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataDecl {
    pub name: String,
    pub span: Span,
    pub ctors: Vec<CtorDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefineDecl {
    pub name: String,
    pub span: Span,
    pub params: Vec<(String, Option<SType>)>,
    pub ret: Option<SType>,
    pub body: SExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Data(DataDecl),
    Define(DefineDecl),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceProgram {
    /// Declarations in source order (datatype scoping is order-independent,
    /// but defines see only earlier defines plus themselves).
    pub items: Vec<Item>,
    pub main: SExpr,
}

impl SurfaceProgram {
    pub fn datas(&self) -> impl Iterator<Item = &DataDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Data(d) => Some(d),
            _ => None,
        })
    }

    pub fn defines(&self) -> impl Iterator<Item = &DefineDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Define(d) => Some(d),
            _ => None,
        })
    }
}
