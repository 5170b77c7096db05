//! Scalar functions underlying every bound: the rate kernel `phi`, the
//! Hoeffding exponent, log binomial coefficients and the negative binomial
//! distribution of the number of failures before the `gamma`-th success.
//!
//! Probabilities of the negative binomial law are produced in log scale.
//! Individual log-pmf values use the saddle-point decomposition (Stirling
//! remainders plus the `bd0` deviance term), which keeps full relative
//! precision even when `p^gamma` underflows. Cumulative sums are formed by
//! direct summation outward from the mode with compensated addition and stop
//! once a geometric bound on the remaining tail is negligible. Windows wider
//! than a few hundred terms are summed on the equivalent binomial tails.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{check_open, domain, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln(1 + x) - x / (1 + x)` for `|x| < 1`.
///
/// Positive everywhere except at the origin; every exponential rate in the
/// threshold theory is a value of this function.
pub fn phi(x: f64) -> Result<f64> {
    check_open("x", x, -1.0, 1.0, "(-1, 1)")?;
    Ok(phi_unchecked(x))
}

#[inline]
pub(crate) fn phi_unchecked(x: f64) -> f64 {
    x.ln_1p() - x / (1.0 + x)
}

/// Hoeffding's exponent `M(z, mu) = ln(mu / z) + (1/z - 1) ln((1 - mu) / (1 - z))`.
///
/// For the mean of `m` i.i.d. samples in `[0, 1]`, `Pr{mean >= z} <= exp(m z M(z, mu))`
/// when `z > mu`, and the same bound holds for `Pr{mean <= z}` when `z < mu`.
pub fn hoeffding_m(z: f64, mu: f64) -> Result<f64> {
    check_open("z", z, 0.0, 1.0, "(0, 1)")?;
    check_open("mu", mu, 0.0, 1.0, "(0, 1)")?;
    Ok((mu / z).ln() + (1.0 / z - 1.0) * ((1.0 - mu) / (1.0 - z)).ln())
}

// ln(n!) - [(n + 1/2) ln n - n + ln(2 pi)/2] for n = 1..=15.
const STIRLING_REMAINDER: [f64; 15] = [
    0.081_061_466_795_327_258,
    0.041_340_695_955_409_294,
    0.027_677_925_684_998_339,
    0.020_790_672_103_765_093,
    0.016_644_691_189_821_192,
    0.013_876_128_823_070_748,
    0.011_896_709_945_891_770,
    0.010_411_265_261_972_096,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_530,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

/// Remainder of Stirling's series for `ln(n!)`, `n >= 1`.
fn stirling_remainder(n: f64) -> f64 {
    if n <= 15.0 {
        // callers only pass integers in this range
        return STIRLING_REMAINDER[n as usize - 1];
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nn = n * n;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// Deviance term `x ln(x / m) + m - x`, accurate when `x` is close to `m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        let mut j = 1.0;
        loop {
            ej *= v;
            let s1 = s + ej / (2.0 * j + 1.0);
            if s1 == s {
                return s1;
            }
            s = s1;
            j += 1.0;
        }
    }
    x * (x / m).ln() + m - x
}

/// `ln C(n, k)`.
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(domain("k", k as f64, "[0, n]"));
    }
    Ok(log_binomial_unchecked(n, k))
}

pub(crate) fn log_binomial_unchecked(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    let (nf, kf) = (n as f64, k as f64);
    let mf = (n - k) as f64;
    // k ln(n/k) + m ln(n/m) carries the bulk; the Stirling remainders and the
    // square-root factor are small corrections.
    kf * (nf / kf).ln() + mf * (kf / mf).ln_1p() - 0.5 * (2.0 * PI * kf * (mf / nf)).ln()
        + stirling_remainder(nf)
        - stirling_remainder(kf)
        - stirling_remainder(mf)
}

/// A probability held as its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    /// Wraps a log-probability; rejects positive values and NaN.
    pub fn new(ln_value: f64) -> Result<Self> {
        if ln_value <= 0.0 {
            Ok(LogProb(ln_value))
        } else {
            Err(domain("log probability", ln_value, "[-inf, 0]"))
        }
    }

    pub(crate) fn clamped(ln_value: f64) -> Self {
        LogProb(ln_value.min(0.0))
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }
}

/// Negative binomial law of the number of failures before the `gamma`-th
/// success in Bernoulli(`p`) trials: `Pr{k} = C(gamma + k - 1, k) p^gamma q^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegBinomialParams {
    gamma: u64,
    p: f64,
}

impl NegBinomialParams {
    pub fn new(gamma: u64, p: f64) -> Result<Self> {
        if gamma == 0 {
            return Err(domain("gamma", 0.0, "positive integers"));
        }
        check_open("p", p, 0.0, 1.0, "(0, 1)")?;
        if gamma as f64 * (1.0 - p) / p > MAX_MEAN_FAILURES {
            return Err(domain(
                "p",
                p,
                "mean failure count gamma(1 - p)/p at most 1e12",
            ));
        }
        Ok(NegBinomialParams { gamma, p })
    }

    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// Mean number of failures, `gamma q / p`.
    pub fn mean(&self) -> f64 {
        self.gamma as f64 * self.q() / self.p
    }

    /// Most likely number of failures.
    pub fn mode(&self) -> u64 {
        if self.gamma == 1 {
            return 0;
        }
        let m = (self.gamma - 1) as f64 * self.q() / self.p;
        if m >= u64::MAX as f64 {
            u64::MAX
        } else {
            m.floor() as u64
        }
    }

    fn ln_pmf(&self, k: u64) -> f64 {
        let g = self.gamma as f64;
        if k == 0 {
            return g * self.p.ln();
        }
        // Pr{k} = gamma/(gamma + k) * Binomial(gamma; gamma + k, p)
        let n = g + k as f64;
        (g / n).ln() + ln_binomial_pmf(g, n, self.p, self.q())
    }

    /// Beyond this many failures the remaining mass is below `exp(-60)`.
    fn far_tail(&self) -> u64 {
        let sd = (self.gamma as f64 * self.q()).sqrt() / self.p;
        let far = self.mean() + 60.0 * sd + 100.0;
        if far >= 1e18 {
            u64::MAX / 4
        } else {
            far as u64
        }
    }

    /// Mass of the window `lo..=hi`; `hi = u64::MAX` stands for an unbounded window.
    ///
    /// Narrow windows are summed term by term. Wide ones go through the
    /// binomial identity `Pr{failures <= k} = Pr{Binomial(gamma + k, p) >= gamma}`,
    /// whose terms are spread over `O(sqrt(gamma))` values instead of `O(sqrt(gamma)/p)`.
    pub(crate) fn window_mass(&self, lo: u64, hi: u64) -> f64 {
        if lo > hi {
            return 0.0;
        }
        if hi - lo < DIRECT_WIDTH {
            return self.direct_mass(lo, hi);
        }
        let hi = hi.min(
            lo.max(self.far_tail())
                .saturating_mul(2)
                .saturating_add(1000),
        );
        let mode = self.mode();
        let mass = if lo > mode {
            self.upper_tail(lo) - self.upper_tail(hi + 1)
        } else if hi < mode {
            self.lower_tail(hi)
                - if lo == 0 {
                    0.0
                } else {
                    self.lower_tail(lo - 1)
                }
        } else {
            let below = if lo == 0 {
                0.0
            } else {
                self.lower_tail(lo - 1)
            };
            let mut acc = NeumaierSum::default();
            acc.add(1.0);
            acc.add(-below);
            acc.add(-self.upper_tail(hi + 1));
            acc.total()
        };
        mass.clamp(0.0, 1.0)
    }

    /// `Pr{failures <= k}` through the binomial identity.
    fn lower_tail(&self, k: u64) -> f64 {
        let n = self.gamma + k;
        binomial_mass(n, self.p, self.gamma, n)
    }

    /// `Pr{failures >= k}` for `k >= 1`: fewer than `gamma` successes in the first `gamma + k - 1` trials.
    fn upper_tail(&self, k: u64) -> f64 {
        binomial_mass(self.gamma + k - 1, self.p, 0, self.gamma - 1)
    }

    fn direct_mass(&self, lo: u64, hi: u64) -> f64 {
        let q = self.q();
        let g = self.gamma as f64;
        lattice_sum(
            lo,
            hi,
            self.mode(),
            |k| self.ln_pmf(k),
            |i| q * (g + i as f64) / (i as f64 + 1.0),
            |i| i as f64 / (q * (g + i as f64 - 1.0)),
        )
    }
}

/// Keeps every trial count exactly representable in `f64`.
pub(crate) const MAX_MEAN_FAILURES: f64 = 1e12;
const DIRECT_WIDTH: u64 = 256;
const REANCHOR: u64 = 64;
const TAIL_CUTOFF: f64 = 1e-17;

/// `ln Pr{Binomial(n, p) = x}` in saddle-point form, for real `0 <= x <= n`.
fn ln_binomial_pmf(x: f64, n: f64, p: f64, q: f64) -> f64 {
    if x == 0.0 {
        return n * q.ln();
    }
    if x == n {
        return n * p.ln();
    }
    let lc = stirling_remainder(n)
        - stirling_remainder(x)
        - stirling_remainder(n - x)
        - bd0(x, n * p)
        - bd0(n - x, n * q);
    let lf = LN_2PI + x.ln() + (-x / n).ln_1p();
    lc - 0.5 * lf
}

/// `Pr{lo <= Binomial(n, p) <= hi}`.
fn binomial_mass(n: u64, p: f64, lo: u64, hi: u64) -> f64 {
    let hi = hi.min(n);
    let q = 1.0 - p;
    let nf = n as f64;
    let odds = p / q;
    let mode = (((n + 1) as f64) * p).floor().min(nf) as u64;
    lattice_sum(
        lo,
        hi,
        mode,
        |j| ln_binomial_pmf(j as f64, nf, p, q),
        |j| (nf - j as f64) / (j as f64 + 1.0) * odds,
        |j| j as f64 / ((nf - j as f64 + 1.0) * odds),
    )
}

/// Sums a log-concave lattice mass over `lo..=hi`, starting at the point of
/// the window nearest to `mode` and walking outward with the term ratios.
///
/// `up(i)` is `pmf(i + 1)/pmf(i)` and `down(i)` is `pmf(i - 1)/pmf(i)`. Terms
/// are re-anchored on `ln_pmf` every `REANCHOR` steps, and each leg stops once
/// the geometric bound on what remains is negligible against the running sum.
fn lattice_sum(
    lo: u64,
    hi: u64,
    mode: u64,
    ln_pmf: impl Fn(u64) -> f64,
    up: impl Fn(u64) -> f64,
    down: impl Fn(u64) -> f64,
) -> f64 {
    if lo > hi {
        return 0.0;
    }
    let start = mode.clamp(lo, hi);
    let anchor = ln_pmf(start).exp();
    let mut acc = NeumaierSum::default();

    let mut i = start;
    let mut term = anchor;
    loop {
        acc.add(term);
        if i == hi {
            break;
        }
        let ratio = up(i);
        if ratio < 1.0 && term * ratio / (1.0 - ratio) <= acc.total() * TAIL_CUTOFF {
            break;
        }
        i += 1;
        term = if (i - start) % REANCHOR == 0 {
            ln_pmf(i).exp()
        } else {
            term * ratio
        };
    }

    let mut i = start;
    let mut term = anchor;
    while i > lo {
        let ratio = down(i);
        i -= 1;
        term = if (start - i) % REANCHOR == 0 {
            ln_pmf(i).exp()
        } else {
            term * ratio
        };
        acc.add(term);
        if i > 0 {
            let next = down(i);
            if next < 1.0 && term * next / (1.0 - next) <= acc.total() * TAIL_CUTOFF {
                break;
            }
        }
    }
    acc.total().min(1.0)
}

/// `ln Pr{k}` for the negative binomial law.
pub fn negbin_pmf(params: NegBinomialParams, k: u64) -> LogProb {
    LogProb::clamped(params.ln_pmf(k))
}

/// `Pr{failures <= k}`, which equals the regularized incomplete beta `I_p(gamma, k + 1)`.
pub fn negbin_cdf(params: NegBinomialParams, k: u64) -> f64 {
    params.window_mass(0, k)
}

/// `Pr{failures >= k}`.
pub fn negbin_sf(params: NegBinomialParams, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    params.window_mass(k, u64::MAX)
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
