//! Sample-sum thresholds.
//!
//! The tail functions are evaluated through `exp(-gamma * phi(.))` rather than
//! the power form, which overflows and cancels for large `gamma`.

use serde::Serialize;

use crate::error::{check_open, domain, Error, Result};
use crate::kernels::phi_unchecked as phi;
use crate::roots::bisect_decreasing;

const MAX_ITER: usize = 200;
const REL_TOL: f64 = 1e-10;
const CHENG_TOL: f64 = 1e-12;

/// Relative margin `epsilon` and risk `delta`, both in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionSpec {
    epsilon: f64,
    delta: f64,
}

impl PrecisionSpec {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        check_open("epsilon", epsilon, 0.0, 1.0, "(0, 1)")?;
        check_open("delta", delta, 0.0, 1.0, "(0, 1)")?;
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// The reduced margins that appear in the tail bounds of the two estimators
/// at a given threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxiliaryPrecision {
    /// `(epsilon * gamma - 1) / (gamma - 1)`, used for `(gamma - 1)/(n - 1)`.
    pub eta: f64,
    /// Solves `1/(1 - epsilon) = 1/(1 - zeta) + 1/gamma`, used for `gamma / n`.
    pub zeta: f64,
    pub gamma: f64,
}

impl AuxiliaryPrecision {
    /// Requires `gamma > 1/epsilon`, where both margins are positive.
    pub fn new(epsilon: f64, gamma: f64) -> Result<Self> {
        check_open("epsilon", epsilon, 0.0, 1.0, "(0, 1)")?;
        if !(gamma > 1.0 / epsilon) {
            return Err(domain("gamma", gamma, "gamma > 1/epsilon"));
        }
        Ok(Self {
            eta: eta(epsilon, gamma),
            zeta: zeta(epsilon, gamma),
            gamma,
        })
    }
}

fn eta(epsilon: f64, gamma: f64) -> f64 {
    (epsilon * gamma - 1.0) / (gamma - 1.0)
}

fn zeta(epsilon: f64, gamma: f64) -> f64 {
    (epsilon * gamma + epsilon - 1.0) / (gamma - 1.0 + epsilon)
}

fn two_sided(gamma: f64, upper_rate: f64, lower_rate: f64) -> f64 {
    (-gamma * upper_rate).exp() + (-gamma * lower_rate).exp()
}

fn q_tilde_unchecked(epsilon: f64, gamma: f64) -> f64 {
    two_sided(gamma, phi(epsilon), phi(-zeta(epsilon, gamma)))
}

fn q_hat_unchecked(epsilon: f64, gamma: f64) -> f64 {
    two_sided(gamma, phi(epsilon), phi(-eta(epsilon, gamma)))
}

fn q_bernoulli_unchecked(epsilon: f64, gamma: f64) -> f64 {
    two_sided(gamma, phi(epsilon), phi(-epsilon))
}

/// Bound on `Pr{|gamma/n - mu| >= epsilon * mu}`; defined for `gamma > (1 - epsilon)/epsilon`.
pub fn q_tilde(epsilon: f64, gamma: f64) -> Result<f64> {
    check_open("epsilon", epsilon, 0.0, 1.0, "(0, 1)")?;
    if !(gamma > (1.0 - epsilon) / epsilon) {
        return Err(domain("gamma", gamma, "gamma > (1 - epsilon)/epsilon"));
    }
    Ok(q_tilde_unchecked(epsilon, gamma))
}

/// Bound on `Pr{|(gamma-1)/(n-1) - mu| >= epsilon * mu}`; defined for `gamma > 1/epsilon`.
pub fn q_hat(epsilon: f64, gamma: f64) -> Result<f64> {
    check_open("epsilon", epsilon, 0.0, 1.0, "(0, 1)")?;
    if !(gamma > 1.0 / epsilon) {
        return Err(domain("gamma", gamma, "gamma > 1/epsilon"));
    }
    Ok(q_hat_unchecked(epsilon, gamma))
}

/// Bound on the relative-error probability of `gamma/n` for Bernoulli samples.
pub fn q_bernoulli(epsilon: f64, gamma: f64) -> Result<f64> {
    check_open("epsilon", epsilon, 0.0, 1.0, "(0, 1)")?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(domain("gamma", gamma, "gamma > 0"));
    }
    Ok(q_bernoulli_unchecked(epsilon, gamma))
}

/// `ln(2/delta) / phi(epsilon)`, the closed-form sufficient threshold.
pub fn explicit_gamma(spec: PrecisionSpec) -> f64 {
    (2.0 / spec.delta).ln() / phi(spec.epsilon)
}

/// Dagum's threshold `1 + 4(e - 2)(1 + epsilon) ln(2/delta) / epsilon^2`.
pub fn dagum_upsilon1(spec: PrecisionSpec) -> f64 {
    let e = spec.epsilon;
    1.0 + 4.0 * (std::f64::consts::E - 2.0) * (1.0 + e) * (2.0 / spec.delta).ln() / (e * e)
}

/// A threshold found by bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Solution {
    pub value: f64,
    /// `|Q(value) - delta|`.
    pub residual: f64,
    /// Initial bracket.
    pub bracket: (f64, f64),
    pub iterations: usize,
}

fn solve<F: Fn(f64) -> f64>(q: F, lo: f64, hi: f64, delta: f64) -> Result<Solution> {
    let root = bisect_decreasing(q, lo, hi, delta, REL_TOL * delta, MAX_ITER)?;
    Ok(Solution {
        value: root.x,
        residual: root.residual,
        bracket: (lo, hi),
        iterations: root.iterations,
    })
}

fn open_lower(endpoint: f64) -> f64 {
    endpoint * (1.0 + 1e-9) + 1e-9
}

/// Unique `gamma` with `q_tilde(epsilon, gamma) = delta`.
pub fn solve_gamma_tilde(spec: PrecisionSpec) -> Result<Solution> {
    let e = spec.epsilon;
    let lo = open_lower((1.0 - e) / e);
    solve(
        |g| q_tilde_unchecked(e, g),
        lo,
        explicit_gamma(spec),
        spec.delta,
    )
}

/// Unique `gamma` with `q_hat(epsilon, gamma) = delta`.
pub fn solve_gamma_hat(spec: PrecisionSpec) -> Result<Solution> {
    let e = spec.epsilon;
    let lo = open_lower(1.0 / e);
    solve(
        |g| q_hat_unchecked(e, g),
        lo,
        explicit_gamma(spec),
        spec.delta,
    )
}

/// Unique `gamma` with `q_bernoulli(epsilon, gamma) = delta`.
pub fn solve_gamma_star(spec: PrecisionSpec) -> Result<Solution> {
    let e = spec.epsilon;
    let lo = gamma_star_lower(spec);
    solve(
        |g| q_bernoulli_unchecked(e, g),
        lo,
        explicit_gamma(spec),
        spec.delta,
    )
}

/// `max{ln(1/delta)/phi(epsilon), ln(2/delta)/phi(-epsilon)}`, a strict lower
/// bound for the Bernoulli threshold.
pub fn gamma_star_lower(spec: PrecisionSpec) -> f64 {
    let e = spec.epsilon;
    let a = (1.0 / spec.delta).ln() / phi(e);
    let b = (2.0 / spec.delta).ln() / phi(-e);
    a.max(b)
}

/// Left-hand side of Cheng's equation for `delta_s`.
pub fn cheng_lhs(epsilon: f64, delta_s: f64) -> f64 {
    let h = 0.5 * delta_s;
    let a = (1.0 + epsilon) / (1.0 + 2.0 * epsilon);
    let b = (1.0 + epsilon) / (1.0 + 3.0 * epsilon);
    (1.0 - h) * ((1.0 - delta_s) + (1.0 - 2.0 * h.powf(a)) * h + (1.0 - 2.0 * h.powf(b)) * h * h)
}

/// Cheng's reduced threshold. Reported for comparison only: its guarantee has
/// not been established.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChengSolution {
    pub alpha: f64,
    pub delta_s: f64,
    /// `|cheng_lhs(delta_s) - delta|`.
    pub residual: f64,
    pub comparison_only: bool,
}

const CHENG_LO: f64 = 1e-15;
const CHENG_HI: f64 = 1.0 - 1e-15;
const CHENG_SCAN: usize = 400;

/// Solves Cheng's equation for `delta_s` and returns `ln(2/delta_s)/phi(epsilon)`.
///
/// The left-hand side is scanned on a grid that is log-spaced towards both
/// ends of `(0, 1)`; exactly one sign change is required.
pub fn cheng_alpha(spec: PrecisionSpec) -> Result<ChengSolution> {
    let e = spec.epsilon;
    let f = |x: f64| cheng_lhs(e, x) - spec.delta;

    let mut grid = Vec::with_capacity(2 * CHENG_SCAN + 1);
    let (l0, l1) = (CHENG_LO.ln(), 0.5f64.ln());
    for i in 0..=CHENG_SCAN {
        grid.push((l0 + (l1 - l0) * i as f64 / CHENG_SCAN as f64).exp());
    }
    for i in (0..CHENG_SCAN).rev() {
        grid.push(1.0 - (l0 + (l1 - l0) * i as f64 / CHENG_SCAN as f64).exp());
    }
    debug_assert!(grid.windows(2).all(|w| w[0] < w[1]));

    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let changes: Vec<usize> = (0..grid.len() - 1)
        .filter(|&i| (values[i] > 0.0) != (values[i + 1] > 0.0))
        .collect();
    let [i] = changes[..] else {
        return Err(Error::RootNotBracketed {
            lo: CHENG_LO,
            hi: CHENG_HI,
            sign_changes: changes.len(),
        });
    };
    if values[i] <= 0.0 {
        // increasing crossing; the equation is not of the expected shape
        return Err(Error::RootNotBracketed {
            lo: grid[i],
            hi: grid[i + 1],
            sign_changes: 1,
        });
    }
    let root = bisect_decreasing(
        |x| cheng_lhs(e, x),
        grid[i],
        grid[i + 1],
        spec.delta,
        CHENG_TOL,
        MAX_ITER,
    )?;
    Ok(ChengSolution {
        alpha: (2.0 / root.x).ln() / phi(e),
        delta_s: root.x,
        residual: root.residual,
        comparison_only: true,
    })
}

/// Which thresholds a [`ThresholdReport`] should contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ThresholdSelection {
    pub explicit: bool,
    pub tilde: bool,
    pub hat: bool,
    pub star: bool,
    pub dagum: bool,
    pub cheng: bool,
}

impl ThresholdSelection {
    pub const ALL: Self = Self {
        explicit: true,
        tilde: true,
        hat: true,
        star: true,
        dagum: true,
        cheng: true,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explicit_gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_tilde: Option<Solution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_hat: Option<Solution>,
    /// Valid for Bernoulli samples only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_star: Option<Solution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dagum_upsilon1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cheng_alpha: Option<ChengSolution>,
}

impl ThresholdReport {
    pub fn compute(spec: PrecisionSpec, which: ThresholdSelection) -> Result<Self> {
        Ok(Self {
            epsilon: spec.epsilon,
            delta: spec.delta,
            explicit_gamma: which.explicit.then(|| explicit_gamma(spec)),
            gamma_tilde: which.tilde.then(|| solve_gamma_tilde(spec)).transpose()?,
            gamma_hat: which.hat.then(|| solve_gamma_hat(spec)).transpose()?,
            gamma_star: which.star.then(|| solve_gamma_star(spec)).transpose()?,
            dagum_upsilon1: which.dagum.then(|| dagum_upsilon1(spec)),
            cheng_alpha: which.cheng.then(|| cheng_alpha(spec)).transpose()?,
        })
    }
}
