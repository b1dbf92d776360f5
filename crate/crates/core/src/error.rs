use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A mass, rate or density argument outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid caller-supplied parameters (grid sizes, counts, step sizes).
    #[error("usage error: {0}")]
    Usage(String),
    /// The PDE solver clipped more negative mass than its budget allows.
    #[error("positivity budget exceeded at t = {time}: clipped {clipped:e} of total {total:e}")]
    PositivityBudget { time: f64, clipped: f64, total: f64 },
    /// The Picard iteration did not reach its tolerance. `increments` holds
    /// the sup-TV distance between consecutive iterates.
    #[error("Picard iteration did not converge in {iterations} iterations (increments {increments:?})")]
    NoConvergence { iterations: usize, increments: Vec<f64> },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::Error::Domain(alloc::format!($($arg)*)) };
}

macro_rules! usage {
    ($($arg:tt)*) => { $crate::Error::Usage(alloc::format!($($arg)*)) };
}

pub(crate) use domain;
pub(crate) use usage;
