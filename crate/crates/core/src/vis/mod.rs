//! Renderer-agnostic visualization models. Everything here is a pure
//! function of a store snapshot and a config.

mod bars;
mod fold;
mod matrix;
mod ordering;
pub mod spline;
mod wrap;

use serde::Serialize;
use thiserror::Error;

pub use bars::{bar_flag, build_bars, Bar, BarFlag, BarModel};
pub use fold::{fold, fold_time, unfold};
pub use matrix::{
    build_matrix, cycle_distribution, default_legend, CycleBin, FoldConfig, LegendEntry, MatrixCell, MatrixModel,
    MatrixParams, MatrixRow,
};
pub use ordering::{order_rows, OutcomeKey, SortDirection, SortKey};
pub use wrap::{build_wrap, stroke_alpha, WrapConfig, WrapEventMark, WrapGeometry, WrapKnot, WrapSegment};

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind", content = "detail")]
pub enum VisError {
    #[error("unknown uid `{0}`")]
    UnknownUid(String),
    #[error("unknown sort key `{0}`")]
    UnknownSortKey(String),
    #[error("unknown outcome key `{0}`")]
    UnknownOutcomeKey(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl VisError {
    pub fn kind(&self) -> &'static str {
        match self {
            VisError::UnknownUid(_) => "UnknownUid",
            VisError::UnknownSortKey(_) => "UnknownSortKey",
            VisError::UnknownOutcomeKey(_) => "UnknownOutcomeKey",
            VisError::InvalidConfig(_) => "InvalidConfig",
        }
    }
}
