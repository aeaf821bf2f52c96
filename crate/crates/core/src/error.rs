use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("{0}")]
    Domain(&'static str),

    #[error("Euler-angle singularity at pitch {pitch} rad")]
    Singularity { pitch: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("first-step window infeasible: t_curr = {t_curr} s leaves no admissible period below {t_ub} s")]
    InfeasibleWindow { t_curr: f64, t_ub: f64 },

    #[error("episode log is empty")]
    EmptyLog,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }
}
