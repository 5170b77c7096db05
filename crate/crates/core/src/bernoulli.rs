//! Exact coverage of inverse binomial sampling.
//!
//! With `k = n - gamma` failures before the `gamma`-th success, the estimate
//! lies strictly inside `(p(1 - epsilon), p(1 + epsilon))` exactly when `k`
//! falls in an integer window `[g(p), h(p)]`. Both ends are step functions of
//! `p` that jump on two harmonic families of points; the minimum coverage over
//! an interval is attained at one of those points or at an endpoint.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_open, domain, Error, Result};
use crate::kernels::{NegBinomialParams, MAX_MEAN_FAILURES};
use crate::thresholds::{solve_gamma_hat, solve_gamma_star, PrecisionSpec};

/// Point estimator applied at the stopping time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// `gamma / n`.
    Mle,
    /// `(gamma - 1) / (n - 1)`.
    Mvue,
}

impl Estimator {
    /// Smallest admissible integer threshold.
    pub fn min_gamma(self) -> u64 {
        match self {
            Estimator::Mle => 1,
            Estimator::Mvue => 2,
        }
    }

    /// Numerator of the estimate; the denominator is `k + offset(gamma)` with the same value.
    fn numerator(self, gamma: u64) -> u64 {
        match self {
            Estimator::Mle => gamma,
            Estimator::Mvue => gamma - 1,
        }
    }

    /// Evaluates the estimate at a stopping time `n`.
    pub fn estimate(self, gamma: f64, n: u64) -> Option<f64> {
        match self {
            Estimator::Mle if n >= 1 => Some(gamma / n as f64),
            Estimator::Mvue if n >= 2 && gamma > 1.0 => Some((gamma - 1.0) / (n - 1) as f64),
            _ => None,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Mle => "mle",
            Estimator::Mvue => "mvue",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mle" => Ok(Estimator::Mle),
            "mvue" => Ok(Estimator::Mvue),
            _ => Err(Error::Parse {
                input: s.to_string(),
                reason: "expected `mle` or `mvue`".to_string(),
            }),
        }
    }
}

fn check_gamma(gamma: u64, estimator: Estimator) -> Result<()> {
    if gamma < estimator.min_gamma() {
        return Err(domain(
            "gamma",
            gamma as f64,
            match estimator {
                Estimator::Mle => "gamma >= 1",
                Estimator::Mvue => "gamma >= 2",
            },
        ));
    }
    Ok(())
}

fn check_p(gamma: u64, p: f64) -> Result<()> {
    check_open("p", p, 0.0, 1.0, "(0, 1)")?;
    if gamma as f64 * (1.0 - p) / p > MAX_MEAN_FAILURES {
        return Err(domain(
            "p",
            p,
            "mean failure count gamma(1 - p)/p at most 1e12",
        ));
    }
    Ok(())
}

/// An exact coverage question over a parameter interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageQuery {
    gamma: u64,
    epsilon: f64,
    estimator: Estimator,
    a: f64,
    b: f64,
}

impl CoverageQuery {
    pub fn new(gamma: u64, epsilon: f64, estimator: Estimator, a: f64, b: f64) -> Result<Self> {
        check_gamma(gamma, estimator)?;
        check_open("epsilon", epsilon, 0.0, 1.0, "(0, 1)")?;
        check_p(gamma, a)?;
        check_p(gamma, b)?;
        if a > b {
            return Err(domain("a", a, "a <= b"));
        }
        Ok(Self {
            gamma,
            epsilon,
            estimator,
            a,
            b,
        })
    }

    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }
}

/// Failure counts `g..=h` for which the estimate is within the relative margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoverageWindow {
    /// Clamped to be non-negative.
    pub g: i64,
    pub h: i64,
}

impl CoverageWindow {
    pub fn is_empty(&self) -> bool {
        self.g > self.h
    }

    fn mass(&self, gamma: u64, p: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let params = NegBinomialParams::new(gamma, p).expect("validated parameters");
        params.window_mass(self.g as u64, self.h as u64)
    }
}

/// Exact `floor`/`ceil` of a ratio known approximately as `approx`.
///
/// Float rounding only matters when `approx` is close to an integer, in which
/// case the ratio is recomputed in rational arithmetic.
pub(crate) fn exact_round(approx: f64, exact: impl FnOnce() -> BigRational, up: bool) -> i64 {
    let near = (approx - approx.round()).abs() <= 1e-9 * approx.abs().max(1.0);
    if !near && approx.abs() < 1e15 {
        let r = if up { approx.ceil() } else { approx.floor() };
        return r as i64;
    }
    let x = exact();
    let r = if up { x.ceil() } else { x.floor() };
    r.to_integer().to_i64().unwrap_or(i64::MAX)
}

/// The value of the shortest decimal that round-trips to `x`, so that inputs
/// such as `0.2` are treated as the decimals they were written as.
pub(crate) fn rational(x: f64) -> BigRational {
    let text = format!("{x:e}");
    let (mantissa, exponent) = text
        .split_once('e')
        .expect("LowerExp always has an exponent");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{int_part}{frac_part}")
        .parse()
        .expect("decimal digits");
    let shift = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u8);
    if shift >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, shift as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-shift) as usize))
    }
}

fn int(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// Shared quantities for evaluating windows at one `(gamma, epsilon, estimator)`.
#[derive(Clone, Copy)]
struct WindowRule {
    gamma: u64,
    /// The estimate is `c / (k + c)`.
    c: u64,
    epsilon: f64,
}

impl WindowRule {
    fn new(gamma: u64, epsilon: f64, estimator: Estimator) -> Self {
        Self {
            gamma,
            c: estimator.numerator(gamma),
            epsilon,
        }
    }

    fn finish(&self, lower_floor: i64, upper_ceil: i64) -> CoverageWindow {
        // k + c must lie strictly between c/((1+e)p) and c/((1-e)p)
        let c = self.c as i64;
        CoverageWindow {
            g: lower_floor.saturating_add(1).saturating_sub(c).max(0),
            h: upper_ceil.saturating_sub(1).saturating_sub(c),
        }
    }

    fn at_p(&self, p: f64) -> CoverageWindow {
        let (c, e) = (self.c as f64, self.epsilon);
        let lower = exact_round(
            c / ((1.0 + e) * p),
            || int(self.c) / ((BigRational::one() + rational(e)) * rational(p)),
            false,
        );
        let upper = exact_round(
            c / ((1.0 - e) * p),
            || int(self.c) / ((BigRational::one() - rational(e)) * rational(p)),
            true,
        );
        self.finish(lower, upper)
    }

    /// Window at `p = c / ((1 + epsilon) m)`, where the lower end jumps.
    fn at_upper_family(&self, m: u64) -> CoverageWindow {
        let e = self.epsilon;
        let upper = exact_round(
            m as f64 * (1.0 + e) / (1.0 - e),
            || int(m) * (BigRational::one() + rational(e)) / (BigRational::one() - rational(e)),
            true,
        );
        self.finish(m as i64, upper)
    }

    /// Window at `p = c / ((1 - epsilon) m)`, where the upper end jumps.
    fn at_lower_family(&self, m: u64) -> CoverageWindow {
        let e = self.epsilon;
        let lower = exact_round(
            m as f64 * (1.0 - e) / (1.0 + e),
            || int(m) * (BigRational::one() - rational(e)) / (BigRational::one() + rational(e)),
            false,
        );
        self.finish(lower, m as i64)
    }
}

/// The window of failure counts for which the estimate lies strictly inside
/// `(p(1 - epsilon), p(1 + epsilon))`.
pub fn coverage_window(
    gamma: u64,
    epsilon: f64,
    p: f64,
    estimator: Estimator,
) -> Result<CoverageWindow> {
    check_gamma(gamma, estimator)?;
    check_open("epsilon", epsilon, 0.0, 1.0, "(0, 1)")?;
    check_open("p", p, 0.0, 1.0, "(0, 1)")?;
    Ok(WindowRule::new(gamma, epsilon, estimator).at_p(p))
}

/// `Pr{|estimate - p| < epsilon p}` for Bernoulli(`p`) samples and integer threshold `gamma`.
pub fn coverage_probability(gamma: u64, epsilon: f64, p: f64, estimator: Estimator) -> Result<f64> {
    check_p(gamma, p)?;
    let w = coverage_window(gamma, epsilon, p, estimator)?;
    Ok(w.mass(gamma, p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Endpoint,
    /// `c / ((1 + epsilon) m)`
    Upper(u64),
    /// `c / ((1 - epsilon) m)`
    Lower(u64),
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    p: f64,
    source: Source,
}

/// Tolerance for merging a family point with an interval endpoint.
const ENDPOINT_MERGE: f64 = 1e-14;

fn family(
    rule: &WindowRule,
    factor: f64,
    a: f64,
    b: f64,
    make: fn(u64) -> Source,
    out: &mut Vec<Candidate>,
) {
    // p_m = c / (factor m) is decreasing in m; a < p_m < b iff c/(factor b) < m < c/(factor a)
    let c = rule.c as f64;
    let lo = ((c / (factor * b)).floor().max(0.0) as u64).max(rule.c);
    let hi = (c / (factor * a)).ceil() as u64 + 1;
    for m in lo..=hi {
        if m == 0 {
            continue;
        }
        let p = c / (factor * m as f64);
        if p > a + ENDPOINT_MERGE && p < b - ENDPOINT_MERGE {
            out.push(Candidate { p, source: make(m) });
        }
    }
}

fn build_candidates(query: &CoverageQuery) -> Vec<Candidate> {
    let rule = WindowRule::new(query.gamma, query.epsilon, query.estimator);
    let (a, b, e) = (query.a, query.b, query.epsilon);
    let mut out = vec![Candidate {
        p: a,
        source: Source::Endpoint,
    }];
    if a == b {
        return out;
    }
    if rule.c > 0 {
        family(&rule, 1.0 + e, a, b, Source::Upper, &mut out);
        family(&rule, 1.0 - e, a, b, Source::Lower, &mut out);
    }
    out.push(Candidate {
        p: b,
        source: Source::Endpoint,
    });
    out.sort_by(|x, y| x.p.total_cmp(&y.p));
    // the two families can share a point; the windows there coincide
    out.dedup_by(|later, earlier| later.p == earlier.p);
    out
}

fn window_of(rule: &WindowRule, cand: &Candidate) -> CoverageWindow {
    match cand.source {
        Source::Endpoint => rule.at_p(cand.p),
        Source::Upper(m) => rule.at_upper_family(m),
        Source::Lower(m) => rule.at_lower_family(m),
    }
}

/// Ascending parameters at which the minimum coverage over `[a, b]` is attained:
/// both endpoints and every jump point of the window strictly inside.
pub fn candidate_set(query: &CoverageQuery) -> Vec<f64> {
    build_candidates(query).into_iter().map(|c| c.p).collect()
}

/// Coverage at a parameter together with the window used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateCoverage {
    pub p: f64,
    pub window: CoverageWindow,
    pub coverage: f64,
}

/// Coverage at every candidate, evaluated in parallel.
pub fn candidate_coverages(query: &CoverageQuery) -> Vec<CandidateCoverage> {
    let rule = WindowRule::new(query.gamma, query.epsilon, query.estimator);
    build_candidates(query)
        .par_iter()
        .map(|c| {
            let window = window_of(&rule, c);
            CandidateCoverage {
                p: c.p,
                window,
                coverage: window.mass(rule.gamma, c.p),
            }
        })
        .collect()
}

/// Minimum coverage over an interval and the smallest parameter attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinCoverage {
    pub coverage: f64,
    pub p: f64,
    /// Number of candidate points.
    pub candidates: usize,
}

#[derive(Clone, Copy)]
struct Block {
    lower_bound: f64,
    lo: usize,
    hi: usize,
}

impl PartialEq for Block {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Block {}

impl PartialOrd for Block {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Block {
    // reversed so that BinaryHeap pops the smallest bound, then the leftmost block
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower_bound
            .total_cmp(&self.lower_bound)
            .then_with(|| other.lo.cmp(&self.lo))
    }
}

const LEAF: usize = 4;

/// Best-first branch and bound over consecutive candidates.
///
/// For `p` between candidates `i < j` the window contains `[g(p_i), h(p_j)]`,
/// and for a fixed window the coverage is unimodal in `p`, so the smaller of
/// the two endpoint values bounds every candidate in between.
struct Search<'a> {
    rule: WindowRule,
    cands: &'a [Candidate],
    windows: Vec<CoverageWindow>,
}

enum Outcome {
    /// Exact minimum and its index.
    Minimum(f64, usize),
    /// Some candidate has coverage at or below the threshold.
    Violated(usize),
    /// Every candidate exceeds the threshold.
    Certified,
}

impl<'a> Search<'a> {
    fn new(rule: WindowRule, cands: &'a [Candidate]) -> Self {
        let windows = cands.iter().map(|c| window_of(&rule, c)).collect();
        Self {
            rule,
            cands,
            windows,
        }
    }

    fn exact(&self, i: usize) -> f64 {
        self.windows[i].mass(self.rule.gamma, self.cands[i].p)
    }

    fn bound(&self, lo: usize, hi: usize) -> f64 {
        let w = CoverageWindow {
            g: self.windows[lo].g,
            h: self.windows[hi].h,
        };
        if w.is_empty() {
            return 0.0;
        }
        let gamma = self.rule.gamma;
        w.mass(gamma, self.cands[lo].p)
            .min(w.mass(gamma, self.cands[hi].p))
    }

    fn block(&self, lo: usize, hi: usize) -> Block {
        let lower_bound = if hi - lo < LEAF {
            f64::NEG_INFINITY
        } else {
            self.bound(lo, hi)
        };
        Block {
            lower_bound,
            lo,
            hi,
        }
    }

    /// With `threshold = None` finds the exact minimum; otherwise decides
    /// whether every candidate exceeds `threshold`.
    fn run(&self, threshold: Option<f64>) -> Outcome {
        let n = self.cands.len();
        let mut best = (f64::INFINITY, usize::MAX);
        let consider = |value: f64, i: usize, best: &mut (f64, usize)| {
            if value < best.0 || (value == best.0 && i < best.1) {
                *best = (value, i);
            }
        };
        for i in [0, n - 1] {
            let v = self.exact(i);
            if threshold.is_some_and(|t| v <= t) {
                return Outcome::Violated(i);
            }
            consider(v, i, &mut best);
        }
        let mut heap = BinaryHeap::new();
        heap.push(self.block(0, n - 1));
        while let Some(blk) = heap.pop() {
            let cutoff = threshold.unwrap_or(best.0);
            if blk.lower_bound > cutoff {
                break;
            }
            if blk.hi - blk.lo < LEAF {
                for i in blk.lo..=blk.hi {
                    let v = self.exact(i);
                    if threshold.is_some_and(|t| v <= t) {
                        return Outcome::Violated(i);
                    }
                    consider(v, i, &mut best);
                }
                continue;
            }
            let mid = blk.lo + (blk.hi - blk.lo) / 2;
            for child in [self.block(blk.lo, mid), self.block(mid + 1, blk.hi)] {
                if child.lower_bound <= threshold.unwrap_or(best.0) {
                    heap.push(child);
                }
            }
        }
        match threshold {
            Some(_) => Outcome::Certified,
            None => Outcome::Minimum(best.0, best.1),
        }
    }
}

/// Minimum of the coverage probability over `[a, b]`.
///
/// Ties are resolved towards the smallest parameter.
pub fn min_coverage(query: &CoverageQuery) -> MinCoverage {
    let rule = WindowRule::new(query.gamma, query.epsilon, query.estimator);
    let cands = build_candidates(query);
    let search = Search::new(rule, &cands);
    match search.run(None) {
        Outcome::Minimum(coverage, i) => MinCoverage {
            coverage,
            p: cands[i].p,
            candidates: cands.len(),
        },
        _ => unreachable!("minimum search always returns a minimum"),
    }
}

/// Result of the minimum threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimumGamma {
    pub gamma: u64,
    /// Parameter with the lowest coverage at `gamma`.
    pub worst_p: f64,
    pub coverage: f64,
    /// Threshold at which coverage above `1 - delta` is guaranteed by the tail bounds.
    pub bound: u64,
}

/// Smallest integer `gamma >= 2` whose minimum coverage over `[a, b]` exceeds `1 - delta`.
pub fn minimum_gamma(
    spec: PrecisionSpec,
    a: f64,
    b: f64,
    estimator: Estimator,
) -> Result<MinimumGamma> {
    let bound = {
        let s = match estimator {
            Estimator::Mle => solve_gamma_star(spec)?,
            Estimator::Mvue => solve_gamma_hat(spec)?,
        };
        s.value.floor() as u64 + 1
    };
    // validates the interval once, at the largest gamma the search may reach
    CoverageQuery::new(bound.max(2), spec.epsilon(), estimator, a, b)?;
    let target = 1.0 - spec.delta();
    let mut last_violation: Option<f64> = None;

    for gamma in 2..=bound.max(2) {
        let query = CoverageQuery::new(gamma, spec.epsilon(), estimator, a, b)?;
        // cheap probes first: a violation anywhere in [a, b] rules gamma out
        let probes = last_violation.into_iter().chain([b, 0.5 * (a + b), a]);
        let mut violated = false;
        for p in probes {
            if coverage_probability(gamma, spec.epsilon(), p, estimator)? <= target {
                last_violation = Some(p);
                violated = true;
                break;
            }
        }
        if violated {
            continue;
        }
        let rule = WindowRule::new(gamma, spec.epsilon(), estimator);
        let cands = build_candidates(&query);
        match Search::new(rule, &cands).run(Some(target)) {
            Outcome::Violated(i) => last_violation = Some(cands[i].p),
            Outcome::Certified => {
                let worst = min_coverage(&query);
                return Ok(MinimumGamma {
                    gamma,
                    worst_p: worst.p,
                    coverage: worst.coverage,
                    bound,
                });
            }
            Outcome::Minimum(..) => unreachable!("threshold search never reports a minimum"),
        }
    }
    Err(Error::SearchExhausted { bound })
}
