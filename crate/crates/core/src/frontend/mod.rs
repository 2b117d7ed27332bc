//! Mini-language front-end: parsing, checking, lowering to a CFG,
//! normalization and kill insertion.

pub mod ast;
pub mod cfg;
mod check;
mod kills;
mod lower;
mod normalize;
mod parser;

pub use ast::*;
pub use cfg::*;
pub use check::{check_program, check_properties, ENTRY_LABEL};
pub use kills::{insert_kills, liveness};
pub use lower::{add_hints, lower_to_cfg};
pub use normalize::{expr_sort, normalize};
pub use parser::{parse_program, parse_properties};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    Sort,
    Undeclared,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{loc}: {message}")]
pub struct FrontendError {
    pub kind: ErrorKind,
    pub loc: Loc,
    pub message: String,
}

impl FrontendError {
    pub fn syntax(loc: Loc, message: impl Into<String>) -> Self {
        FrontendError { kind: ErrorKind::Syntax, loc, message: format!("syntax error: {}", message.into()) }
    }

    pub fn sort(loc: Loc, message: impl Into<String>) -> Self {
        FrontendError { kind: ErrorKind::Sort, loc, message: message.into() }
    }

    pub fn undeclared(loc: Loc, name: &str) -> Self {
        FrontendError {
            kind: ErrorKind::Undeclared,
            loc,
            message: format!("undeclared identifier `{name}`"),
        }
    }
}

/// Parses and checks a program.
pub fn parse(src: &str) -> Result<Program, FrontendError> {
    check_program(&parse_program(src)?)
}

/// Parses and checks hint properties against a program.
pub fn parse_hints(program: &Program, src: &str) -> Result<Vec<PropertySpec>, FrontendError> {
    check_properties(program, &parse_properties(src)?)
}

/// Lowering, hint attachment, normalization and kill insertion in one go.
pub fn build_cfg(program: &Program, hints: &[PropertySpec]) -> Result<Cfg, FrontendError> {
    let cfg = lower_to_cfg(program)?;
    let cfg = add_hints(&cfg, hints)?;
    Ok(insert_kills(&normalize(&cfg)))
}
