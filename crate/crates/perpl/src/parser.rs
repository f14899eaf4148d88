//! Recursive-descent parser for the surface language.
//!
//! Precedence (loosest to tightest): open forms (`\`, `let`, `if`, `case`,
//! `factor`) extend as far right as possible; then `and` (left-associative);
//! then `==` (non-associative); then application (left-associative); then
//! postfix projection `.i`; then atoms. `amb e1 e2` takes exactly two atoms.
//!
//! Case arms are separated by `|`; an arm body is a full expression, so a
//! nested `case`/`if` inside a non-final arm must be parenthesized.

use crate::ast::*;
use crate::core::rational_from_literal;
use crate::diag::{err, Diagnostic, Diagnostics, Span};
use crate::lexer::{lex, Tok, Token};
use num_rational::BigRational;
use std::collections::BTreeSet;

pub fn parse_program(source: &str) -> Result<SurfaceProgram, Diagnostics> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let prog = p.program()?;
    Ok(prog)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.tokens.get(self.pos + 1).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        self.tokens
            .get(self.pos)
            .map(|t| t.span)
            .or_else(|| self.tokens.last().map(|t| t.span))
            .unwrap_or_default()
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Span, Diagnostics> {
        let span = self.span();
        match self.peek() {
            Some(t) if *t == tok => {
                self.pos += 1;
                Ok(span)
            }
            Some(t) => err(
                Some(span),
                format!("expected {} in {what}, found {}", tok.describe(), t.describe()),
            ),
            None => err(
                Some(span),
                format!("expected {} in {what}, found end of input", tok.describe()),
            ),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Span), Diagnostics> {
        let span = self.span();
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok((s, span))
            }
            Some(t) => err(
                Some(span),
                format!("expected identifier in {what}, found {}", t.describe()),
            ),
            None => err(
                Some(span),
                format!("expected identifier in {what}, found end of input"),
            ),
        }
    }

    fn program(&mut self) -> Result<SurfaceProgram, Diagnostics> {
        let mut items = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        loop {
            match self.peek() {
                Some(Tok::Semi) => {
                    self.pos += 1;
                }
                Some(Tok::Data) => {
                    let d = self.data_decl()?;
                    if !seen.insert(d.name.clone()) {
                        return err(Some(d.span), format!("duplicate name `{}`", d.name));
                    }
                    items.push(Item::Data(d));
                }
                Some(Tok::Define) => {
                    let d = self.define_decl()?;
                    if !seen.insert(d.name.clone()) {
                        return err(Some(d.span), format!("duplicate name `{}`", d.name));
                    }
                    items.push(Item::Define(d));
                }
                Some(_) => break,
                None => {
                    return err(Some(self.span()), "expected a main expression");
                }
            }
        }
        let main = self.expr()?;
        while self.eat(&Tok::Semi) {}
        if let Some(t) = self.peek() {
            return err(
                Some(self.span()),
                format!("unexpected {} after main expression", t.describe()),
            );
        }
        Ok(SurfaceProgram { items, main })
    }

    fn data_decl(&mut self) -> Result<DataDecl, Diagnostics> {
        self.expect(Tok::Data, "datatype declaration")?;
        let (name, span) = self.ident("datatype declaration")?;
        self.expect(Tok::Eq, "datatype declaration")?;
        let mut ctors = Vec::new();
        loop {
            let (cname, cspan) = self.ident("constructor declaration")?;
            let mut args = Vec::new();
            while self.starts_type_atom() {
                args.push(self.type_atom()?);
            }
            ctors.push(CtorDecl {
                name: cname,
                span: cspan,
                args,
            });
            if !self.eat(&Tok::Bar) {
                break;
            }
        }
        Ok(DataDecl { name, span, ctors })
    }

    fn define_decl(&mut self) -> Result<DefineDecl, Diagnostics> {
        self.expect(Tok::Define, "definition")?;
        let (name, span) = self.ident("definition")?;
        let mut params = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Ident(_)) => {
                    let (p, _) = self.ident("parameter")?;
                    params.push((p, None));
                }
                Some(Tok::LParen) if matches!(self.peek2(), Some(Tok::Ident(_))) => {
                    // `(x: T)` — but `(x)` alone would be an expression; peek
                    // for the colon after the identifier.
                    if self.tokens.get(self.pos + 2).map(|t| &t.tok) != Some(&Tok::Colon) {
                        break;
                    }
                    self.expect(Tok::LParen, "parameter")?;
                    let (p, _) = self.ident("parameter")?;
                    self.expect(Tok::Colon, "parameter annotation")?;
                    let t = self.type_expr()?;
                    self.expect(Tok::RParen, "parameter annotation")?;
                    params.push((p, Some(t)));
                }
                _ => break,
            }
        }
        let ret = if self.eat(&Tok::Colon) {
            Some(self.type_expr()?)
        } else {
            None
        };
        self.expect(Tok::Eq, "definition")?;
        let body = self.expr()?;
        Ok(DefineDecl {
            name,
            span,
            params,
            ret,
            body,
        })
    }

    // ---- types ----

    fn starts_type_atom(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(_)) | Some(Tok::LParen))
    }

    fn type_expr(&mut self) -> Result<SType, Diagnostics> {
        let lhs = self.type_sum()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.type_expr()?;
            return Ok(SType::Arrow(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn type_sum(&mut self) -> Result<SType, Diagnostics> {
        let first = self.type_with()?;
        if self.peek() != Some(&Tok::Plus) {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat(&Tok::Plus) {
            parts.push(self.type_with()?);
        }
        Ok(SType::Sum(parts))
    }

    fn type_with(&mut self) -> Result<SType, Diagnostics> {
        let first = self.type_tensor()?;
        if self.peek() != Some(&Tok::Amp) {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat(&Tok::Amp) {
            parts.push(self.type_tensor()?);
        }
        Ok(SType::With(parts))
    }

    fn type_tensor(&mut self) -> Result<SType, Diagnostics> {
        let first = self.type_atom()?;
        if self.peek() != Some(&Tok::Star) {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat(&Tok::Star) {
            parts.push(self.type_atom()?);
        }
        Ok(SType::Tensor(parts))
    }

    fn type_atom(&mut self) -> Result<SType, Diagnostics> {
        let span = self.span();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(SType::Name(name, span))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                if self.eat(&Tok::RParen) {
                    return Ok(SType::Tensor(Vec::new()));
                }
                let t = self.type_expr()?;
                self.expect(Tok::RParen, "type")?;
                Ok(t)
            }
            Some(t) => err(Some(span), format!("expected a type, found {}", t.describe())),
            None => err(Some(span), "expected a type, found end of input"),
        }
    }

    // ---- expressions ----

    fn starts_open_expr(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Backslash)
                | Some(Tok::Let)
                | Some(Tok::If)
                | Some(Tok::Case)
                | Some(Tok::Factor)
        )
    }

    fn expr(&mut self) -> Result<SExpr, Diagnostics> {
        let span = self.span();
        match self.peek() {
            Some(Tok::Backslash) => {
                self.pos += 1;
                let (param, _) = self.ident("abstraction")?;
                let ann = if self.eat(&Tok::Colon) {
                    Some(self.type_expr()?)
                } else {
                    None
                };
                self.expect(Tok::Dot, "abstraction")?;
                let body = self.expr()?;
                Ok(SExpr {
                    span,
                    kind: SExprKind::Lam {
                        param,
                        ann,
                        body: Box::new(body),
                    },
                })
            }
            Some(Tok::Let) => {
                self.pos += 1;
                let pat = if self.eat(&Tok::LParen) {
                    let mut vars = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            let (v, _) = self.ident("tuple pattern")?;
                            vars.push(v);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                        self.expect(Tok::RParen, "tuple pattern")?;
                    }
                    LetPat::Tuple(vars)
                } else {
                    let (v, _) = self.ident("let binding")?;
                    LetPat::Var(v)
                };
                self.expect(Tok::Eq, "let binding")?;
                let rhs = self.expr()?;
                self.expect(Tok::In, "let binding")?;
                let body = self.expr()?;
                Ok(SExpr {
                    span,
                    kind: SExprKind::Let {
                        pat,
                        rhs: Box::new(rhs),
                        body: Box::new(body),
                    },
                })
            }
            Some(Tok::If) => {
                self.pos += 1;
                let cond = self.expr()?;
                self.expect(Tok::Then, "conditional")?;
                let then = self.expr()?;
                self.expect(Tok::Else, "conditional")?;
                let els = self.expr()?;
                Ok(SExpr {
                    span,
                    kind: SExprKind::If {
                        cond: Box::new(cond),
                        then: Box::new(then),
                        els: Box::new(els),
                    },
                })
            }
            Some(Tok::Case) => {
                self.pos += 1;
                let explicit_unfold = self.eat(&Tok::Unfold);
                let scrutinee = self.expr()?;
                self.expect(Tok::Of, "case expression")?;
                let mut arms = Vec::new();
                self.eat(&Tok::Bar);
                loop {
                    let (ctor, ctor_span) = self.ident("case arm")?;
                    let mut vars = Vec::new();
                    while let Some(Tok::Ident(_)) = self.peek() {
                        // A following `=>` means this identifier is the next
                        // arm's constructor only if we've already seen `=>`;
                        // here identifiers before `=>` are pattern variables.
                        let (v, _) = self.ident("pattern variable")?;
                        vars.push(v);
                    }
                    self.expect(Tok::FatArrow, "case arm")?;
                    let body = self.expr()?;
                    arms.push(SArm {
                        ctor,
                        ctor_span,
                        vars,
                        body,
                    });
                    if !self.eat(&Tok::Bar) {
                        break;
                    }
                }
                Ok(SExpr {
                    span,
                    kind: SExprKind::Case {
                        scrutinee: Box::new(scrutinee),
                        explicit_unfold,
                        arms,
                    },
                })
            }
            Some(Tok::Factor) => {
                self.pos += 1;
                let w = self.weight()?;
                self.expect(Tok::In, "factor expression")?;
                let body = self.expr()?;
                Ok(SExpr {
                    span,
                    kind: SExprKind::Factor(w, Box::new(body)),
                })
            }
            _ => self.and_expr(),
        }
    }

    fn weight(&mut self) -> Result<BigRational, Diagnostics> {
        let span = self.span();
        let lit = match self.bump() {
            Some(Token {
                tok: Tok::Number(n),
                ..
            }) => n,
            Some(t) => {
                return err(
                    Some(span),
                    format!("expected a weight literal, found {}", t.tok.describe()),
                )
            }
            None => return err(Some(span), "expected a weight literal, found end of input"),
        };
        let text = if self.peek() == Some(&Tok::Slash) {
            self.pos += 1;
            let dspan = self.span();
            match self.bump() {
                Some(Token {
                    tok: Tok::Number(d),
                    ..
                }) => format!("{lit}/{d}"),
                _ => return err(Some(dspan), "expected a denominator after `/`"),
            }
        } else {
            lit
        };
        rational_from_literal(&text)
            .ok_or_else(|| Diagnostics::from(Diagnostic::at(span, format!("invalid weight `{text}`"))))
    }

    /// `and` chain; a right operand may be an open expression, which ends the
    /// chain (it extends to the right).
    fn and_expr(&mut self) -> Result<SExpr, Diagnostics> {
        let mut lhs = self.eq_expr()?;
        while self.peek() == Some(&Tok::And) {
            let span = self.span();
            self.pos += 1;
            if self.starts_open_expr() {
                let rhs = self.expr()?;
                return Ok(SExpr {
                    span,
                    kind: SExprKind::And(Box::new(lhs), Box::new(rhs)),
                });
            }
            let rhs = self.eq_expr()?;
            lhs = SExpr {
                span,
                kind: SExprKind::And(Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn eq_expr(&mut self) -> Result<SExpr, Diagnostics> {
        let lhs = self.app_expr()?;
        if self.peek() == Some(&Tok::EqEq) {
            let span = self.span();
            self.pos += 1;
            let rhs = if self.starts_open_expr() {
                self.expr()?
            } else {
                self.app_expr()?
            };
            return Ok(SExpr {
                span,
                kind: SExprKind::Eq(Box::new(lhs), Box::new(rhs)),
            });
        }
        Ok(lhs)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Ident(_)) | Some(Tok::Fail) | Some(Tok::LParen) | Some(Tok::LAngle)
        )
    }

    fn app_expr(&mut self) -> Result<SExpr, Diagnostics> {
        if self.peek() == Some(&Tok::Amb) {
            let span = self.span();
            self.pos += 1;
            let a = self.atom()?;
            let b = self.atom()?;
            return Ok(SExpr {
                span,
                kind: SExprKind::Amb(Box::new(a), Box::new(b)),
            });
        }
        let mut head = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            let span = head.span;
            head = SExpr {
                span,
                kind: SExprKind::App(Box::new(head), Box::new(arg)),
            };
        }
        Ok(head)
    }

    fn atom(&mut self) -> Result<SExpr, Diagnostics> {
        let span = self.span();
        let mut e = match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                SExpr {
                    span,
                    kind: SExprKind::Var(name),
                }
            }
            Some(Tok::Fail) => {
                self.pos += 1;
                SExpr {
                    span,
                    kind: SExprKind::Fail,
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                if self.eat(&Tok::RParen) {
                    SExpr {
                        span,
                        kind: SExprKind::Tuple(Vec::new()),
                    }
                } else {
                    let first = self.expr()?;
                    if self.eat(&Tok::Comma) {
                        let mut parts = vec![first];
                        loop {
                            parts.push(self.expr()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                        self.expect(Tok::RParen, "tuple")?;
                        SExpr {
                            span,
                            kind: SExprKind::Tuple(parts),
                        }
                    } else {
                        self.expect(Tok::RParen, "parenthesized expression")?;
                        first
                    }
                }
            }
            Some(Tok::LAngle) => {
                self.pos += 1;
                let mut parts = vec![self.expr()?];
                while self.eat(&Tok::Comma) {
                    parts.push(self.expr()?);
                }
                self.expect(Tok::RAngle, "additive tuple")?;
                SExpr {
                    span,
                    kind: SExprKind::AddTuple(parts),
                }
            }
            Some(t) => {
                return err(
                    Some(span),
                    format!("expected an expression, found {}", t.describe()),
                )
            }
            None => return err(Some(span), "expected an expression, found end of input"),
        };
        // postfix projections
        while self.peek() == Some(&Tok::Dot) {
            let dspan = self.span();
            self.pos += 1;
            match self.bump() {
                Some(Token {
                    tok: Tok::Number(n),
                    ..
                }) if n.chars().all(|c| c.is_ascii_digit()) => {
                    let idx: usize = n.parse().map_err(|_| {
                        Diagnostics::from(Diagnostic::at(dspan, "invalid projection index"))
                    })?;
                    if idx == 0 {
                        return err(Some(dspan), "projection indices start at 1");
                    }
                    e = SExpr {
                        span,
                        kind: SExprKind::Proj(Box::new(e), idx),
                    };
                }
                _ => return err(Some(dspan), "expected a projection index after `.`"),
            }
        }
        Ok(e)
    }
}
