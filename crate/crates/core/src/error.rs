use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular configuration: det J = {det:.3e}, magnitude below tolerance {tolerance:.3e}")]
    SingularConfiguration { det: f64, tolerance: f64 },

    #[error("infeasible QP: no point satisfies all {rows} constraint rows")]
    InfeasibleQp { rows: usize },

    #[error("QP too large for exact enumeration: {vars} variables, {rows} rows (limit {max_vars}×{max_rows})")]
    QpTooLarge {
        vars: usize,
        rows: usize,
        max_vars: usize,
        max_rows: usize,
    },

    #[error("admittance state starts outside the safe set of constraint {constraint} (h = {h:.6e})")]
    StartOutsideSafeSet { constraint: String, h: f64 },

    #[error("invalid parameter: {0}")]
    Validation(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(message()))
    }
}
