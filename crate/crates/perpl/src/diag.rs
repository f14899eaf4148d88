//! Diagnostics with source positions.

use serde::Serialize;
use std::fmt;

/// A 1-based line/column position in a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A single error report tied to an optional source position.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub span: Option<Span>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(span: Option<Span>, message: impl Into<String>) -> Self {
        Diagnostic {
            span,
            message: message.into(),
        }
    }

    pub fn at(span: Span, message: impl Into<String>) -> Self {
        Self::new(Some(span), message)
    }

    /// Render as `file:line:col: error: message`.
    pub fn render(&self, file: &str) -> String {
        match self.span {
            Some(s) => format!("{}:{}: error: {}", file, s, self.message),
            None => format!("{}: error: {}", file, self.message),
        }
    }
}

/// One or more diagnostics produced by a pipeline stage.
#[derive(Debug, Clone, thiserror::Error)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}", d.render("<input>"))?;
        }
        Ok(())
    }
}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }
}

pub type Result<T> = std::result::Result<T, Diagnostics>;

pub fn err<T>(span: Option<Span>, message: impl Into<String>) -> Result<T> {
    Err(Diagnostic::new(span, message).into())
}
