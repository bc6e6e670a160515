use thiserror::Error;

use crate::complex::Violation;

/// Errors raised by the solver library.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type the
/// computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {what} = {value} is outside {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("input error: {0}")]
    Input(String),

    #[error("invalid complex: {}", format_violations(.0))]
    InvalidComplex(Vec<Violation>),

    #[error("instance too large for {method}: |V| = {size} exceeds {limit}")]
    Size {
        method: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("numerical error: {message}")]
    Numerical {
        message: String,
        estimate: Option<f64>,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
