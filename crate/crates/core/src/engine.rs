//! The inverse sampling rule: draw samples in `[0, 1]` until their running sum
//! reaches `gamma`, then estimate the mean from the number of draws.
//!
//! Also bounds on the distribution of the stopping time.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::bernoulli::{exact_round, rational};
use crate::error::{check_open, domain, Error, Result};
use crate::kernels::{negbin_cdf, negbin_sf, NegBinomialParams};

/// Running count and sum of a single stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppingState {
    gamma: f64,
    count: u64,
    sum: f64,
    stopped: bool,
}

impl StoppingState {
    /// Starts a stream with threshold `gamma > 1`.
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(domain("gamma", gamma, "finite gamma > 1"));
        }
        Ok(Self {
            gamma,
            count: 0,
            sum: 0.0,
            stopped: false,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    /// Adds one sample and reports whether the rule is now satisfied.
    pub fn ingest(&mut self, sample: f64) -> Result<bool> {
        if self.stopped {
            return Err(Error::AlreadyStopped);
        }
        if !(0.0..=1.0).contains(&sample) {
            return Err(Error::SampleOutOfRange(sample));
        }
        self.count += 1;
        self.sum += sample;
        self.stopped = self.sum >= self.gamma;
        Ok(self.stopped)
    }

    /// Feeds samples until the rule is satisfied.
    ///
    /// Fails with [`Error::CapExceeded`] once `cap` samples have been consumed
    /// without stopping, and with [`Error::StreamExhausted`] if the iterator ends first.
    pub fn run<I>(&mut self, samples: I, cap: u64) -> Result<u64>
    where
        I: IntoIterator<Item = f64>,
    {
        let mut samples = samples.into_iter();
        while !self.stopped {
            if self.count >= cap {
                return Err(Error::CapExceeded { cap, trial: None });
            }
            match samples.next() {
                Some(x) => {
                    self.ingest(x)?;
                }
                None => {
                    return Err(Error::StreamExhausted {
                        count: self.count,
                        sum: self.sum,
                    })
                }
            }
        }
        Ok(self.count)
    }

    pub fn estimates(&self) -> Result<EstimateReport> {
        if !self.stopped {
            return Err(Error::NotStopped {
                count: self.count,
                sum: self.sum,
            });
        }
        EstimateReport::new(self.gamma, self.count)
    }
}

/// Both estimates at a stopping time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    /// `gamma / n`.
    pub mu_tilde: f64,
    /// `(gamma - 1) / (n - 1)`.
    pub mu_hat: f64,
    pub n: u64,
    pub gamma: f64,
}

impl EstimateReport {
    /// Estimates for a stream stopped at `n`; needs `gamma > 1` and `n >= 2`.
    pub fn new(gamma: f64, n: u64) -> Result<Self> {
        if !(gamma > 1.0) || n < 2 {
            return Err(Error::EstimateUndefined { gamma, n });
        }
        Ok(Self {
            mu_tilde: gamma / n as f64,
            mu_hat: (gamma - 1.0) / (n - 1) as f64,
            n,
            gamma,
        })
    }
}

/// Which tail of the stopping time a bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    /// `Pr{n >= gamma (1 + rho) / mu}`.
    Upper,
    /// `Pr{n <= gamma (1 - rho) / mu}`.
    Lower,
}

impl fmt::Display for TailSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailSide::Upper => "upper",
            TailSide::Lower => "lower",
        })
    }
}

impl FromStr for TailSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "upper" => Ok(TailSide::Upper),
            "lower" => Ok(TailSide::Lower),
            _ => Err(Error::Parse {
                input: s.to_string(),
                reason: "expected `upper` or `lower`".to_string(),
            }),
        }
    }
}

fn check_gamma_mu(gamma: f64, mu: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(domain("gamma", gamma, "finite gamma > 0"));
    }
    check_open("mu", mu, 0.0, 1.0, "(0, 1)")
}

fn bound_from_ln(ln_bound: f64) -> f64 {
    ln_bound.min(0.0).exp()
}

/// Log of the bound on `Pr{n >= gamma (1 + rho) / mu}` for samples in `[0, 1]` with mean `mu`.
pub fn sample_size_upper_tail_ln(gamma: f64, mu: f64, rho: f64) -> Result<f64> {
    check_gamma_mu(gamma, mu)?;
    if !(rho > mu / gamma) || !rho.is_finite() {
        return Err(domain("rho", rho, "rho > mu/gamma"));
    }
    let t = 1.0 + rho - mu / gamma;
    Ok((gamma / mu) * (t * t.ln() + (t - mu) * ((1.0 - mu) / (t - mu)).ln()))
}

/// Bound on `Pr{n >= gamma (1 + rho) / mu}`, in `[0, 1]`.
pub fn sample_size_upper_tail(gamma: f64, mu: f64, rho: f64) -> Result<f64> {
    sample_size_upper_tail_ln(gamma, mu, rho).map(bound_from_ln)
}

/// Log of the bound on `Pr{n <= gamma (1 - rho) / mu}`.
pub fn sample_size_lower_tail_ln(gamma: f64, mu: f64, rho: f64) -> Result<f64> {
    check_gamma_mu(gamma, mu)?;
    if !(rho > 0.0 && rho < 1.0 - mu) {
        return Err(domain("rho", rho, "0 < rho < 1 - mu"));
    }
    let r = 1.0 - rho;
    Ok((gamma / mu) * (r * r.ln() + (r - mu) * ((1.0 - mu) / (r - mu)).ln()))
}

/// Bound on `Pr{n <= gamma (1 - rho) / mu}`, in `[0, 1]`.
pub fn sample_size_lower_tail(gamma: f64, mu: f64, rho: f64) -> Result<f64> {
    sample_size_lower_tail_ln(gamma, mu, rho).map(bound_from_ln)
}

fn check_bernoulli(gamma: u64, p: f64, rho: f64, side: TailSide) -> Result<()> {
    if gamma == 0 {
        return Err(domain("gamma", 0.0, "positive integers"));
    }
    check_open("p", p, 0.0, 1.0, "(0, 1)")?;
    match side {
        TailSide::Upper if !(rho > 0.0 && rho.is_finite()) => Err(domain("rho", rho, "rho > 0")),
        TailSide::Lower if !(rho > 0.0 && rho < 1.0 - p) => {
            Err(domain("rho", rho, "0 < rho < 1 - p"))
        }
        _ => Ok(()),
    }
}

/// Log of the sharper bound on a tail of the stopping time for Bernoulli(`p`) samples.
pub fn bernoulli_sample_size_tail_ln(gamma: u64, p: f64, rho: f64, side: TailSide) -> Result<f64> {
    check_bernoulli(gamma, p, rho, side)?;
    let scale = gamma as f64 / p;
    let q = 1.0 - p;
    Ok(match side {
        TailSide::Upper => scale * ((q + rho) * (q / (q + rho)).ln() + (1.0 + rho) * rho.ln_1p()),
        TailSide::Lower => {
            scale * ((q - rho) * (q / (q - rho)).ln() + (1.0 - rho) * (-rho).ln_1p())
        }
    })
}

/// Bound on a tail of the stopping time for Bernoulli(`p`) samples and integer `gamma`, in `[0, 1]`.
pub fn bernoulli_sample_size_tails(gamma: u64, p: f64, rho: f64, side: TailSide) -> Result<f64> {
    bernoulli_sample_size_tail_ln(gamma, p, rho, side).map(bound_from_ln)
}

/// Exact tail probability of the stopping time for Bernoulli(`p`) samples,
/// from the negative binomial law of `n - gamma`.
pub fn bernoulli_exact_tail(gamma: u64, p: f64, rho: f64, side: TailSide) -> Result<f64> {
    check_bernoulli(gamma, p, rho, side)?;
    let nb = NegBinomialParams::new(gamma, p)?;
    Ok(match side {
        TailSide::Upper => {
            let n = stopping_threshold(gamma as f64, p, rho, side);
            negbin_sf(nb, (n - gamma as i64).max(0) as u64)
        }
        TailSide::Lower => {
            let n = stopping_threshold(gamma as f64, p, rho, side);
            if n < gamma as i64 {
                0.0
            } else {
                negbin_cdf(nb, (n - gamma as i64) as u64)
            }
        }
    })
}

/// The integer tail boundary for the stopping time: the smallest `n` with
/// `n >= gamma (1 + rho) / mu` for the upper side, the largest `n` with
/// `n <= gamma (1 - rho) / mu` for the lower side.
///
/// Values on an integer boundary are resolved exactly from the decimal inputs.
pub(crate) fn stopping_threshold(gamma: f64, mu: f64, rho: f64, side: TailSide) -> i64 {
    let (sign, up) = match side {
        TailSide::Upper => (1.0, true),
        TailSide::Lower => (-1.0, false),
    };
    exact_round(
        gamma * (1.0 + sign * rho) / mu,
        || {
            let r = rational(rho);
            let r = if up {
                BigRational::one() + r
            } else {
                BigRational::one() - r
            };
            rational(gamma) * r / rational(mu)
        },
        up,
    )
}

/// `(gamma/mu, gamma/mu + 1)`, which brackets the expected stopping time.
pub fn expected_n_bracket(gamma: f64, mu: f64) -> Result<(f64, f64)> {
    check_gamma_mu(gamma, mu)?;
    let lo = gamma / mu;
    Ok((lo, lo + 1.0))
}
