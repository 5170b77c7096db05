//! Seeded Monte Carlo runs of the stopping rule.
//!
//! Every trial draws from its own ChaCha8 stream, selected by the trial index
//! under one root seed, so results do not depend on how trials are scheduled
//! across threads.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Beta, Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::bernoulli::{rational, Estimator};
use crate::engine::{
    bernoulli_exact_tail, bernoulli_sample_size_tails, sample_size_lower_tail,
    sample_size_upper_tail, stopping_threshold, StoppingState, TailSide,
};
use crate::error::{domain, Error, Result};
use crate::thresholds::{explicit_gamma, PrecisionSpec};

/// A distribution supported on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundedDistribution {
    Bernoulli {
        p: f64,
    },
    /// `Binomial(blocks, rate) / blocks`: the fraction of erroneous bits in a block.
    ScaledBinomial {
        blocks: u32,
        rate: f64,
    },
    /// Finitely many support points with weights summing to one.
    Discrete {
        points: Vec<f64>,
        weights: Vec<f64>,
    },
    BetaLike {
        alpha: f64,
        beta: f64,
    },
}

const WEIGHT_TOL: f64 = 1e-12;

fn parse_err(input: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        input: input.to_string(),
        reason: reason.into(),
    }
}

fn in_unit(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(domain(name, x, "[0, 1]"))
    }
}

impl BoundedDistribution {
    pub fn bernoulli(p: f64) -> Result<Self> {
        in_unit("p", p)?;
        Ok(Self::Bernoulli { p })
    }

    pub fn scaled_binomial(blocks: u32, rate: f64) -> Result<Self> {
        if blocks < 1 {
            return Err(domain("blocks", 0.0, "blocks >= 1"));
        }
        in_unit("rate", rate)?;
        Ok(Self::ScaledBinomial { blocks, rate })
    }

    pub fn discrete(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(domain(
                "points",
                points.len() as f64,
                "as many points as weights, at least one",
            ));
        }
        for &x in &points {
            in_unit("point", x)?;
        }
        for &w in &weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(domain("weight", w, "finite and non-negative"));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(domain("weights", total, "summing to 1"));
        }
        Ok(Self::Discrete { points, weights })
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(name, v, "finite and positive"));
            }
        }
        Ok(Self::BetaLike { alpha, beta })
    }

    /// Exact mean.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Bernoulli { p } => *p,
            Self::ScaledBinomial { rate, .. } => *rate,
            Self::Discrete { points, weights } => {
                let total: f64 = weights.iter().sum();
                points.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total
            }
            Self::BetaLike { alpha, beta } => alpha / (alpha + beta),
        }
    }

    /// The Bernoulli parameter, if this is a Bernoulli law.
    pub fn bernoulli_p(&self) -> Option<f64> {
        match self {
            Self::Bernoulli { p } => Some(*p),
            _ => None,
        }
    }

    fn sampler(&self) -> Sampler {
        match self {
            Self::Bernoulli { p } => Sampler::Bernoulli(Bernoulli::new(*p).expect("validated p")),
            Self::ScaledBinomial { blocks, rate } => Sampler::Scaled(
                Binomial::new(u64::from(*blocks), *rate).expect("validated rate"),
                f64::from(*blocks),
            ),
            Self::Discrete { points, weights } => Sampler::Discrete(
                WeightedIndex::new(weights).expect("validated weights"),
                points.clone(),
            ),
            Self::BetaLike { alpha, beta } => {
                Sampler::Beta(Beta::new(*alpha, *beta).expect("validated shapes"))
            }
        }
    }
}

impl fmt::Display for BoundedDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bernoulli { p } => write!(f, "bernoulli({p})"),
            Self::ScaledBinomial { blocks, rate } => write!(f, "scaled-binomial({blocks},{rate})"),
            Self::Discrete { points, weights } => {
                f.write_str("discrete(")?;
                for (i, (x, w)) in points.iter().zip(weights).enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}:{w}")?;
                }
                f.write_str(")")
            }
            Self::BetaLike { alpha, beta } => write!(f, "beta({alpha},{beta})"),
        }
    }
}

impl Serialize for BoundedDistribution {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn parse_f64(input: &str, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(input, format!("`{}` is not a number", field.trim())))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(input, "values must be finite"))
    }
}

fn expect_args<'a>(input: &str, args: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = args.split(',').collect();
    if parts.len() != n {
        return Err(parse_err(
            input,
            format!("expected {n} argument(s), found {}", parts.len()),
        ));
    }
    Ok(parts)
}

/// Parses `bernoulli(p)`, `scaled-binomial(L,rate)`, `discrete(x:w,...)` or `beta(a,b)`.
impl FromStr for BoundedDistribution {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let s = input.trim();
        let open = s
            .find('(')
            .ok_or_else(|| parse_err(input, "expected `name(args)`"))?;
        let args = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| parse_err(input, "missing closing parenthesis"))?;
        let name = s[..open].trim().to_ascii_lowercase();
        match name.as_str() {
            "bernoulli" => {
                let a = expect_args(input, args, 1)?;
                Self::bernoulli(parse_f64(input, a[0])?)
            }
            "scaled-binomial" | "block" => {
                let a = expect_args(input, args, 2)?;
                let blocks: u32 = a[0]
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(input, "block length must be a positive integer"))?;
                Self::scaled_binomial(blocks, parse_f64(input, a[1])?)
            }
            "discrete" => {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for pair in args.split(',') {
                    let (x, w) = pair.split_once(':').ok_or_else(|| {
                        parse_err(input, "discrete support is written `point:weight`")
                    })?;
                    points.push(parse_f64(input, x)?);
                    weights.push(parse_f64(input, w)?);
                }
                Self::discrete(points, weights)
            }
            "beta" => {
                let a = expect_args(input, args, 2)?;
                Self::beta(parse_f64(input, a[0])?, parse_f64(input, a[1])?)
            }
            other => Err(parse_err(input, format!("unknown distribution `{other}`"))),
        }
    }
}

enum Sampler {
    Bernoulli(Bernoulli),
    Scaled(Binomial, f64),
    Discrete(WeightedIndex<f64>, Vec<f64>),
    Beta(Beta<f64>),
}

impl Sampler {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Bernoulli(d) => {
                if d.sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
            Sampler::Scaled(d, blocks) => d.sample(rng) as f64 / blocks,
            Sampler::Discrete(d, points) => points[d.sample(rng)],
            Sampler::Beta(d) => d.sample(rng),
        }
    }
}

/// Trial count, root seed and per-trial sample cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BatchConfig {
    pub trials: u64,
    pub seed: u64,
    pub cap: u64,
}

impl BatchConfig {
    pub const DEFAULT_CAP: u64 = 100_000_000;

    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            cap: Self::DEFAULT_CAP,
        }
    }

    pub fn with_cap(self, cap: u64) -> Self {
        Self { cap, ..self }
    }
}

/// The random stream used by trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

const CHUNK: u64 = 4096;

/// Stopping times of `config.trials` independent streams, in trial order.
///
/// Trials run in parallel chunk by chunk; when trials fail, the error of the
/// lowest failing index is returned.
pub fn stopping_times(
    dist: &BoundedDistribution,
    gamma: f64,
    config: &BatchConfig,
) -> Result<Vec<u64>> {
    if config.trials == 0 {
        return Err(domain("trials", 0.0, "trials >= 1"));
    }
    StoppingState::new(gamma)?;
    if dist.mean() == 0.0 {
        // every sample is zero almost surely, so the first trial exhausts its cap
        return Err(Error::CapExceeded {
            cap: config.cap,
            trial: Some(0),
        });
    }
    let sampler = dist.sampler();
    let run = |index: u64| -> Result<u64> {
        let mut rng = trial_rng(config.seed, index);
        let mut state = StoppingState::new(gamma)?;
        while !state.ingest(sampler.sample(&mut rng))? {
            if state.count() >= config.cap {
                return Err(Error::CapExceeded {
                    cap: config.cap,
                    trial: Some(index),
                });
            }
        }
        Ok(state.count())
    };
    let mut out = Vec::with_capacity(config.trials as usize);
    let mut start = 0;
    while start < config.trials {
        let end = (start + CHUNK).min(config.trials);
        let chunk: Vec<Result<u64>> = (start..end).into_par_iter().map(run).collect();
        for r in chunk {
            out.push(r?);
        }
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HistogramBin {
    pub n: u64,
    pub count: u64,
}

/// Aggregate of a Monte Carlo batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialBatchResult {
    pub distribution: BoundedDistribution,
    pub mean: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub estimator: Estimator,
    pub trials: u64,
    /// Trials whose estimate had relative error below `epsilon`.
    pub successes: u64,
    pub coverage: f64,
    pub n_mean: f64,
    pub n_std_dev: f64,
    /// Standard error of `n_mean`.
    pub n_std_error: f64,
    pub n_min: u64,
    pub n_max: u64,
    pub seed: u64,
    pub histogram: Vec<HistogramBin>,
}

impl TrialBatchResult {
    /// Binomial standard error of `coverage` under the nominal level `1 - delta`.
    pub fn coverage_sigma(&self) -> f64 {
        (self.delta * (1.0 - self.delta) / self.trials as f64).sqrt()
    }
}

/// Whether the estimate at stopping time `n` has relative error below `eps`.
///
/// Near the boundary the comparison is redone in exact arithmetic on the
/// decimal values of the inputs, since estimates such as `9/75` against
/// `0.1 * 1.2` sit exactly on it.
fn within_margin(estimator: Estimator, gamma: f64, n: u64, mu: f64, eps: f64) -> Result<bool> {
    let est = estimator
        .estimate(gamma, n)
        .ok_or(Error::EstimateUndefined { gamma, n })?;
    let slack = eps * mu - (est - mu).abs();
    if slack.abs() > 1e-9 * eps * mu {
        return Ok(slack > 0.0);
    }
    let (num, den) = match estimator {
        Estimator::Mle => (rational(gamma), n),
        Estimator::Mvue => (rational(gamma) - BigRational::one(), n - 1),
    };
    let den = BigRational::from_integer(den.into());
    let mu = rational(mu);
    // |num/den - mu| < eps mu, cleared of the denominator
    Ok((num - &mu * &den).abs() < rational(eps) * mu * den)
}

/// Runs the stopping rule `trials` times and aggregates coverage and stopping-time statistics.
pub fn run_batch(
    dist: &BoundedDistribution,
    gamma: f64,
    spec: PrecisionSpec,
    estimator: Estimator,
    config: &BatchConfig,
) -> Result<TrialBatchResult> {
    let ns = stopping_times(dist, gamma, config)?;
    let mu = dist.mean();
    let eps = spec.epsilon();
    let mut successes = 0u64;
    let (mut sum, mut sum_sq) = (0u128, 0u128);
    let mut hist = BTreeMap::new();
    for &n in &ns {
        if within_margin(estimator, gamma, n, mu, eps)? {
            successes += 1;
        }
        sum += u128::from(n);
        sum_sq += u128::from(n) * u128::from(n);
        *hist.entry(n).or_insert(0u64) += 1;
    }
    let trials = ns.len() as u64;
    let t = trials as f64;
    let n_mean = sum as f64 / t;
    // exact integer sums keep the variance free of cancellation
    let var = if trials > 1 {
        (sum_sq as f64 - (sum as f64) * (sum as f64) / t) / (t - 1.0)
    } else {
        0.0
    };
    let n_std_dev = var.max(0.0).sqrt();
    Ok(TrialBatchResult {
        distribution: dist.clone(),
        mean: mu,
        gamma,
        epsilon: eps,
        delta: spec.delta(),
        estimator,
        trials,
        successes,
        coverage: successes as f64 / t,
        n_mean,
        n_std_dev,
        n_std_error: n_std_dev / t.sqrt(),
        n_min: *hist.keys().next().expect("at least one trial"),
        n_max: *hist.keys().next_back().expect("at least one trial"),
        seed: config.seed,
        histogram: hist
            .into_iter()
            .map(|(n, count)| HistogramBin { n, count })
            .collect(),
    })
}

/// Bit error rate estimation on blocks of `blocks` bits with per-bit error rate `rate`.
///
/// Each sample is the fraction of erroneous bits in a block; sampling stops
/// once the fractions add up to the closed-form threshold, and the rate is
/// estimated by `(gamma - 1)/(n - 1)`.
pub fn ber_demo(
    blocks: u32,
    rate: f64,
    spec: PrecisionSpec,
    config: &BatchConfig,
) -> Result<TrialBatchResult> {
    if blocks < 2 {
        return Err(domain("blocks", f64::from(blocks), "blocks >= 2"));
    }
    let dist = BoundedDistribution::scaled_binomial(blocks, rate)?;
    run_batch(&dist, explicit_gamma(spec), spec, Estimator::Mvue, config)
}

/// One row of [`tail_empirics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub rho: f64,
    pub side: TailSide,
    /// The stopping-time threshold `gamma (1 +/- rho) / mu`.
    pub n_threshold: f64,
    pub empirical: f64,
    /// Bound for general `[0, 1]` samples; 1 outside its domain.
    pub bound: f64,
    /// Sharper bound for Bernoulli samples with integer `gamma`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bernoulli_bound: Option<f64>,
    /// Exact tail for Bernoulli samples with integer `gamma`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    /// `empirical <= bound + 3 sigma`, with sigma the binomial error at `bound`.
    pub within_slack: bool,
}

/// Empirical tail frequencies of the stopping time against their bounds.
pub fn tail_empirics(
    dist: &BoundedDistribution,
    gamma: f64,
    rhos: &[f64],
    side: TailSide,
    config: &BatchConfig,
) -> Result<Vec<TailRow>> {
    for &rho in rhos {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(domain("rho", rho, "finite rho >= 0"));
        }
    }
    let ns = stopping_times(dist, gamma, config)?;
    let mu = dist.mean();
    let t = ns.len() as f64;
    let integer_gamma = (gamma.fract() == 0.0).then_some(gamma as u64);
    let bernoulli = dist
        .bernoulli_p()
        .filter(|&p| p > 0.0 && p < 1.0)
        .zip(integer_gamma);

    Ok(rhos
        .iter()
        .map(|&rho| {
            let (n_threshold, hits) = match side {
                TailSide::Upper => {
                    let first = stopping_threshold(gamma, mu, rho, side);
                    let th = gamma * (1.0 + rho) / mu;
                    (th, ns.iter().filter(|&&n| n as i64 >= first).count())
                }
                TailSide::Lower => {
                    let last = stopping_threshold(gamma, mu, rho, side);
                    let th = gamma * (1.0 - rho) / mu;
                    (th, ns.iter().filter(|&&n| n as i64 <= last).count())
                }
            };
            let general = match side {
                TailSide::Upper => sample_size_upper_tail(gamma, mu, rho),
                TailSide::Lower => sample_size_lower_tail(gamma, mu, rho),
            };
            // outside the domain the statement is vacuous and 1 is the honest bound
            let bound = general.unwrap_or(1.0);
            let (bernoulli_bound, exact) = match bernoulli {
                Some((p, g)) => (
                    Some(bernoulli_sample_size_tails(g, p, rho, side).unwrap_or(1.0)),
                    bernoulli_exact_tail(g, p, rho, side).ok(),
                ),
                None => (None, None),
            };
            let empirical = hits as f64 / t;
            let tightest = bernoulli_bound.unwrap_or(bound).min(bound);
            let sigma = (tightest * (1.0 - tightest) / t).sqrt();
            TailRow {
                rho,
                side,
                n_threshold,
                empirical,
                bound,
                bernoulli_bound,
                exact,
                within_slack: empirical <= tightest + 3.0 * sigma,
            }
        })
        .collect())
}
