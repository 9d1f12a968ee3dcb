use thiserror::Error;

/// Errors raised by the trend-test engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("degenerate shape: prediction is constant on the design{}", context(.0))]
    DegenerateShape(Option<String>),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty spherical cap: radius {0} must be below 1")]
    EmptyCap(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
}

fn context(c: &Option<String>) -> String {
    match c {
        Some(s) => format!(" ({s})"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
