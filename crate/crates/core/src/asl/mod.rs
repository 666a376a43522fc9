//! Attack Specification Language: parsing to [`AttackConfig`], validation against a
//! scenario, filter evaluation, canonical printing and the XML form.

mod eval;
mod ir;
mod lexer;
mod parser;
mod pretty;
mod validate;
mod xml;

use std::fmt;

pub use eval::eval_condition;
pub use ir::*;
pub use parser::parse;
pub use pretty::{condition as pretty_condition, event as pretty_event, literal as pretty_literal, pretty};
pub use validate::{AslContext, NodeRole, INTERCEPTED};
pub use xml::{from_xml, to_xml, XmlError, XML_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    UnknownNode,
    UnknownField,
    UndefinedVariable,
    IllegalSend,
    TypeMismatch,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Syntax => "SyntaxError",
            ErrorKind::UnknownNode => "UnknownNode",
            ErrorKind::UnknownField => "UnknownField",
            ErrorKind::UndefinedVariable => "UndefinedVariable",
            ErrorKind::IllegalSend => "IllegalSend",
            ErrorKind::TypeMismatch => "TypeMismatch",
        }
    }
}

/// Diagnostic with a 1-based source position; line 0 means no position is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AslError {
    pub kind: ErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl AslError {
    pub fn new(kind: ErrorKind, line: usize, col: usize, message: impl Into<String>) -> Self {
        AslError {
            kind,
            line,
            col,
            message: message.into(),
        }
    }
}

impl fmt::Display for AslError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.kind.name(), self.message)
        } else {
            write!(f, "{}:{}: {}: {}", self.line, self.col, self.kind.name(), self.message)
        }
    }
}

impl std::error::Error for AslError {}

#[cfg(test)]
mod tests;
