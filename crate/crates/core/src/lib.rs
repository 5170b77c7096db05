//! Inverse (sequential) sampling for estimating the mean of a `[0, 1]`-bounded
//! random variable to a prescribed relative precision.
//!
//! Sampling continues until the running sum reaches a threshold `gamma`; the
//! mean is then estimated by `gamma / n` or `(gamma - 1) / (n - 1)`. This crate
//! computes thresholds that guarantee `Pr{|estimate - mu| < epsilon * mu} > 1 - delta`,
//! runs the stopping rule, evaluates exact coverage in the Bernoulli case, and
//! provides a seeded Monte Carlo harness for checking all of it.

pub mod bernoulli;
pub mod engine;
pub mod error;
pub mod kernels;
mod roots;
pub mod sim;
pub mod thresholds;

pub use bernoulli::{
    candidate_coverages, candidate_set, coverage_probability, coverage_window, min_coverage,
    minimum_gamma, CandidateCoverage, CoverageQuery, CoverageWindow, Estimator, MinCoverage,
    MinimumGamma,
};
pub use engine::{
    bernoulli_exact_tail, bernoulli_sample_size_tail_ln, bernoulli_sample_size_tails,
    expected_n_bracket, sample_size_lower_tail, sample_size_lower_tail_ln, sample_size_upper_tail,
    sample_size_upper_tail_ln, EstimateReport, StoppingState, TailSide,
};
pub use error::{Error, Result};
pub use kernels::{
    hoeffding_m, log_binomial, negbin_cdf, negbin_pmf, negbin_sf, phi, LogProb, NegBinomialParams,
};
pub use sim::{
    ber_demo, run_batch, stopping_times, tail_empirics, trial_rng, BatchConfig,
    BoundedDistribution, HistogramBin, TailRow, TrialBatchResult,
};
pub use thresholds::{
    cheng_alpha, cheng_lhs, dagum_upsilon1, explicit_gamma, gamma_star_lower, q_bernoulli, q_hat,
    q_tilde, solve_gamma_hat, solve_gamma_star, solve_gamma_tilde, AuxiliaryPrecision,
    ChengSolution, PrecisionSpec, Solution, ThresholdReport, ThresholdSelection,
};
