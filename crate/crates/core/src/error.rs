use thiserror::Error;

use crate::model::VarId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HdmnError {
    #[error("model error: {0}")]
    Model(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("construction error: {0}")]
    Construction(String),

    /// A continuous block that must be integrated is not positive definite.
    #[error("degenerate potential: cannot integrate out {vars:?}")]
    Degenerate { vars: Vec<VarId> },

    /// All probability mass was removed by constraints or evidence.
    #[error("inconsistent evidence or constraints{}", at_step(*.t))]
    Inconsistent { t: Option<usize> },

    /// Every particle died at slice `t`.
    #[error("filter failure at t={t}: no live particles ({rejections} rejections so far, {proposals} proposals)")]
    FilterFailure {
        t: usize,
        rejections: usize,
        proposals: usize,
    },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

fn at_step(t: Option<usize>) -> String {
    match t {
        Some(t) => format!(" at t={t}"),
        None => String::new(),
    }
}

pub type Result<T, E = HdmnError> = std::result::Result<T, E>;
