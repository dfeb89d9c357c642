//! Lexer, parser, static checks and printer for Hybrid Rebeca source text.

pub mod ast;
pub mod check;
mod lexer;
mod parser;
pub mod print;

use thiserror::Error;

pub use ast::{Expr, Model, Span};
pub use check::{static_check, Diagnostic, DiagnosticKind};
pub use parser::{is_keyword, KEYWORDS};
pub use print::print_model;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontendError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("{} static check violation(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Diagnostic>),
}

impl FrontendError {
    pub(crate) fn syntax(span: Span, message: impl Into<String>) -> Self {
        FrontendError::Syntax {
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            FrontendError::Invalid(d) => d,
            FrontendError::Syntax { .. } => &[],
        }
    }
}

/// Parses without running the static checks.
pub fn parse_syntax(src: &str) -> Result<Model, FrontendError> {
    parser::Parser::new(src)?.model()
}

/// Parses and statically checks a model.
pub fn parse(src: &str) -> Result<Model, FrontendError> {
    let model = parse_syntax(src)?;
    let diags = static_check(&model);
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(FrontendError::Invalid(diags))
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, FrontendError> {
    let mut p = parser::Parser::new(src)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a predicate over qualified variables such as `hws.temp < 17`.
pub fn parse_predicate(src: &str) -> Result<Expr, FrontendError> {
    let mut p = parser::Parser::new(src)?.with_qualified_vars();
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}
