use thiserror::Error;

/// Errors raised by the threshold solvers, exact Bernoulli analysis, the
/// stopping engine and the simulation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("{name} = {value} is outside the domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// Bisection ran out of iterations before the residual tolerance was met.
    #[error("bisection stopped after {iterations} iterations with residual {residual:e} (tolerance {tolerance:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    /// The target function does not change sign exactly once on the search range.
    #[error("expected exactly one sign change on ({lo:e}, {hi:e}), found {sign_changes}")]
    RootNotBracketed {
        lo: f64,
        hi: f64,
        sign_changes: usize,
    },

    #[error("sample {0} is outside [0, 1]")]
    SampleOutOfRange(f64),

    #[error("the stopping rule is already satisfied; no further samples are accepted")]
    AlreadyStopped,

    #[error("the stopping rule is not satisfied yet ({count} samples, sum {sum})")]
    NotStopped { count: u64, sum: f64 },

    #[error("the unbiased estimate (gamma - 1)/(n - 1) is undefined for gamma = {gamma}, n = {n}")]
    EstimateUndefined { gamma: f64, n: u64 },

    /// The sample cap was reached before the running sum reached the threshold.
    #[error("sample cap {cap} reached before the sum reached the threshold{}", trial_suffix(*.trial))]
    CapExceeded { cap: u64, trial: Option<u64> },

    /// A finite stream ran out before the running sum reached the threshold.
    #[error("stream ended after {count} samples with sum {sum} below the threshold")]
    StreamExhausted { count: u64, sum: f64 },

    /// A search that is guaranteed to terminate hit its safety bound.
    #[error("search exceeded its bound of {bound}")]
    SearchExhausted { bound: u64 },

    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

fn trial_suffix(trial: Option<u64>) -> String {
    match trial {
        Some(t) => format!(" (trial {t})"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(name: &'static str, value: f64, domain_desc: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        domain: domain_desc,
    }
}

/// Returns `Ok(())` when `value` lies in the open interval `(lo, hi)`.
pub(crate) fn check_open(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    desc: &'static str,
) -> Result<()> {
    if value > lo && value < hi {
        Ok(())
    } else {
        Err(domain(name, value, desc))
    }
}
