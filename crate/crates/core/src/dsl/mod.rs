//! Cohort query language.

mod ast;
mod eval;
mod parser;
mod printer;
mod typecheck;

use serde::Serialize;
use thiserror::Error;

pub use ast::{CmpOp, CohortQueryAst, Literal, Window};
pub(crate) use eval::candidate_rows;
pub use eval::{evaluate, evaluate_rows};
pub use parser::{parse, ParseError};
pub use printer::print;
pub use typecheck::{event_field, series_field, typecheck, TypeError, TypedQuery};

use crate::dataset::Codebook;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(untagged)]
pub enum QueryError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

impl QueryError {
    /// Stable machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            QueryError::Parse(_) => "ParseError",
            QueryError::Type(t) => t.kind(),
        }
    }
}

/// Parses and typechecks in one go, keeping the original text as source.
pub fn compile(text: &str, codebook: &Codebook) -> Result<TypedQuery, QueryError> {
    let ast = parse(text)?;
    let mut typed = typecheck(&ast, codebook)?;
    typed.source_text = text.to_owned();
    Ok(typed)
}
