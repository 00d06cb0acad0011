use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    InvalidDomain(&'static str),
    /// The operation only applies to a different competition regime.
    InvalidRegime(&'static str),
    /// A root search was started on an interval without a sign change.
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    /// Iteration or subdivision budget exhausted.
    NoConvergence { iterations: usize, estimate: f64 },
    /// A solved equilibrium failed its own consistency check.
    InconsistentSolution { residual: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDomain(what) => write!(f, "invalid domain: {what}"),
            Error::InvalidRegime(what) => write!(f, "invalid regime: {what}"),
            Error::NoBracket { lo, hi, f_lo, f_hi } => write!(
                f,
                "no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})"
            ),
            Error::NoConvergence { iterations, estimate } => write!(
                f,
                "no convergence after {iterations} iterations (last estimate {estimate})"
            ),
            Error::InconsistentSolution { residual } => {
                write!(f, "inconsistent solution (endpoint residual {residual})")
            }
        }
    }
}

impl core::error::Error for Error {}
