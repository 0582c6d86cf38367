//! The Pythonic nOP-function language.
//!
//! ```text
//! def addi(rd, rs1, imm):
//!     x = REG_READ(rs1)
//!     y = ADD(x, SIGN_EXTEND(imm, 12, 64))
//!     REG_WRITE(rd, y)
//!     INC_PC(pc)
//! ```
//!
//! Supported: nOP calls (nested), single assignment, `for i in range(N)`
//! with constant bounds, integer constants with `+ - * << >> & | ^ ~`, and
//! subscripted names (`acc[i]`) whose index folds to a constant. Subscripted
//! names live in function scope so loops can carry values between
//! iterations; plain names assigned inside a loop are local to one iteration.

pub mod ast;
mod compile;
mod lexer;
mod parser;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use ast::{BinOp, Expr, Function, Stmt, Target, UnOp};
pub use compile::{compile, Compiled, MAX_LOOP_BOUND, MAX_NODES};
pub use parser::parse;

use crate::nop::NopRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Span,
    pub hint: Option<String>,
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into(), span, hint: None }
    }

    pub fn warning(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into(), span, hint: None }
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} at line {}, column {}: {}", self.span.line, self.span.col, self.message)?;
        if let Some(h) = &self.hint {
            write!(f, "\n  hint: {h}")?;
        }
        Ok(())
    }
}

/// Renders diagnostics one per paragraph, for feeding back into a prompt.
pub fn render(diags: &[Diagnostic]) -> String {
    let mut s = String::new();
    for d in diags {
        s.push_str(&alloc::format!("{d}\n"));
    }
    s
}

/// Parses and compiles `source` in one step.
pub fn compile_source(
    source: &str,
    widths: &alloc::collections::BTreeMap<String, u32>,
    registry: &NopRegistry,
) -> Result<Compiled, Vec<Diagnostic>> {
    let ast = parse(source)?;
    compile(&ast, widths, registry)
}

/// `(ok, diagnostics)` where `ok` means the source parses and compiles.
/// Warnings are reported even on success.
pub fn syntax_feedback(
    source: &str,
    widths: &alloc::collections::BTreeMap<String, u32>,
    registry: &NopRegistry,
) -> (bool, Vec<Diagnostic>) {
    match compile_source(source, widths, registry) {
        Ok(c) => (true, c.warnings),
        Err(d) => (false, d),
    }
}
