//! Lexer for the surface language.
//!
//! Comments are `(* ... *)` and nest. Keywords:
//! `define data case of if then else let in amb factor fail fold unfold and`.

use crate::diag::{err, Diagnostics, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Integer or decimal literal (also the integer parts of `a/b` weights
    /// and projection indices).
    Number(String),
    // keywords
    Define,
    Data,
    Case,
    Of,
    If,
    Then,
    Else,
    Let,
    In,
    Amb,
    Factor,
    Fail,
    Fold,
    Unfold,
    And,
    // punctuation / operators
    Eq,       // =
    EqEq,     // ==
    FatArrow, // =>
    Arrow,    // ->
    Bar,      // |
    Dot,      // .
    Comma,    // ,
    LParen,
    RParen,
    LAngle,
    RAngle,
    Backslash,
    Colon,
    Semi,
    Star,  // *
    Amp,   // &
    Plus,  // +
    Slash, // /
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Define => "`define`".into(),
            Tok::Data => "`data`".into(),
            Tok::Case => "`case`".into(),
            Tok::Of => "`of`".into(),
            Tok::If => "`if`".into(),
            Tok::Then => "`then`".into(),
            Tok::Else => "`else`".into(),
            Tok::Let => "`let`".into(),
            Tok::In => "`in`".into(),
            Tok::Amb => "`amb`".into(),
            Tok::Factor => "`factor`".into(),
            Tok::Fail => "`fail`".into(),
            Tok::Fold => "`fold`".into(),
            Tok::Unfold => "`unfold`".into(),
            Tok::And => "`and`".into(),
            Tok::Eq => "`=`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::FatArrow => "`=>`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LAngle => "`<`".into(),
            Tok::RAngle => "`>`".into(),
            Tok::Backslash => "`\\`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Star => "`*`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Slash => "`/`".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(source: &str) -> Result<Vec<Token>, Diagnostics> {
    let mut out = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        if c.is_whitespace() {
            bump!();
            continue;
        }
        // nested comments
        if c == '(' && i + 1 < chars.len() && chars[i + 1] == '*' {
            let open = span;
            let mut depth = 0usize;
            while i < chars.len() {
                if chars[i] == '(' && i + 1 < chars.len() && chars[i + 1] == '*' {
                    depth += 1;
                    bump!();
                    bump!();
                } else if chars[i] == '*' && i + 1 < chars.len() && chars[i + 1] == ')' {
                    depth -= 1;
                    bump!();
                    bump!();
                    if depth == 0 {
                        break;
                    }
                } else {
                    bump!();
                }
            }
            if depth != 0 {
                return err(Some(open), "unterminated comment");
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match word.as_str() {
                "define" => Tok::Define,
                "data" => Tok::Data,
                "case" => Tok::Case,
                "of" => Tok::Of,
                "if" => Tok::If,
                "then" => Tok::Then,
                "else" => Tok::Else,
                "let" => Tok::Let,
                "in" => Tok::In,
                "amb" => Tok::Amb,
                "factor" => Tok::Factor,
                "fail" => Tok::Fail,
                "fold" => Tok::Fold,
                "unfold" => Tok::Unfold,
                "and" => Tok::And,
                _ => Tok::Ident(word),
            };
            out.push(Token { tok, span });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            // Decimal fraction; suppressed right after `.` so chained
            // projections like `e.1.2` lex as two indices.
            let after_dot = matches!(out.last(), Some(Token { tok: Tok::Dot, .. }));
            if !after_dot
                && i + 1 < chars.len()
                && chars[i] == '.'
                && chars[i + 1].is_ascii_digit()
            {
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            let word: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::Number(word),
                span,
            });
            continue;
        }
        let two = if i + 1 < chars.len() {
            Some((chars[i], chars[i + 1]))
        } else {
            None
        };
        let tok = match two {
            Some(('=', '=')) => {
                bump!();
                bump!();
                Some(Tok::EqEq)
            }
            Some(('=', '>')) => {
                bump!();
                bump!();
                Some(Tok::FatArrow)
            }
            Some(('-', '>')) => {
                bump!();
                bump!();
                Some(Tok::Arrow)
            }
            _ => None,
        };
        if let Some(tok) = tok {
            out.push(Token { tok, span });
            continue;
        }
        let tok = match c {
            '=' => Tok::Eq,
            '|' => Tok::Bar,
            '.' => Tok::Dot,
            ',' => Tok::Comma,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '<' => Tok::LAngle,
            '>' => Tok::RAngle,
            '\\' => Tok::Backslash,
            ':' => Tok::Colon,
            ';' => Tok::Semi,
            '*' => Tok::Star,
            '&' => Tok::Amp,
            '+' => Tok::Plus,
            '/' => Tok::Slash,
            _ => {
                return err(Some(span), format!("unexpected character `{c}`"));
            }
        };
        bump!();
        out.push(Token { tok, span });
    }
    Ok(out)
}
