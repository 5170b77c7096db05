use invsample::{
    hoeffding_m, log_binomial, negbin_cdf, negbin_pmf, negbin_sf, phi, NegBinomialParams,
};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;

// Extended-precision values from tests/oracle/reference_values.py.
const PHI_0_1: f64 = 0.004_401_088_895_233_951_411_8;
const PHI_M0_1: f64 = 0.005_750_595_453_284_810_568_9;
const M_0_2_0_1: f64 = -0.222_015_037_934_411_493_11;
const M_0_05_0_1: f64 = -0.334_130_023_575_294_280_46;

fn ln_big(x: &BigUint) -> f64 {
    let shift = x.bits().saturating_sub(64);
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

fn binomial_big(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    c
}

#[test]
fn phi_reference_values() {
    assert_eq!(phi(0.0).unwrap(), 0.0);
    assert!((phi(0.1).unwrap() - PHI_0_1).abs() < 1e-8);
    assert!((phi(-0.1).unwrap() - PHI_M0_1).abs() < 1e-8);
    // far tighter than the stated tolerance
    assert!((phi(0.1).unwrap() - PHI_0_1).abs() < 1e-16);
    assert!((phi(-0.1).unwrap() - PHI_M0_1).abs() < 1e-16);
    assert!(phi(1.0).is_err() && phi(-1.0).is_err() && phi(1.2).is_err());
}

#[test]
fn hoeffding_reference_values() {
    assert_eq!(hoeffding_m(0.3, 0.3).unwrap(), 0.0);
    assert!((hoeffding_m(0.2, 0.1).unwrap() - M_0_2_0_1).abs() < 1e-12);
    assert!((hoeffding_m(0.05, 0.1).unwrap() - M_0_05_0_1).abs() < 1e-9);
    let direct = 0.5f64.ln() + 4.0 * (0.9f64 / 0.8).ln();
    assert!((hoeffding_m(0.2, 0.1).unwrap() - direct).abs() < 1e-15);
    assert!(hoeffding_m(1.0, 0.5).is_err() && hoeffding_m(0.5, 0.0).is_err());
}

#[test]
fn log_binomial_small_n_is_exact() {
    for n in 0..30u64 {
        for k in 0..=n {
            let exact = ln_big(&binomial_big(n, k));
            let got = log_binomial(n, k).unwrap();
            assert!(
                (got - exact).abs() <= 1e-12 * exact.max(1.0),
                "C({n},{k}): {got} vs {exact}"
            );
        }
    }
    assert_eq!(log_binomial(5, 0).unwrap(), 0.0);
    assert!((log_binomial(4, 2).unwrap() - 6f64.ln()).abs() < 1e-15);
    assert!(log_binomial(4, 5).is_err());
}

#[test]
fn log_binomial_against_big_integers() {
    for &(n, k) in &[
        (100u64, 50u64),
        (1000, 1),
        (1000, 333),
        (2000, 1000),
        (4999, 17),
        (1_000_000, 3),
    ] {
        let exact = ln_big(&binomial_big(n, k));
        let got = log_binomial(n, k).unwrap();
        assert!(
            (got - exact).abs() <= 1e-12 * exact,
            "C({n},{k}): {got} vs {exact}"
        );
    }
}

#[test]
fn log_binomial_at_a_million() {
    // sum of ln((n - k + i)/i) with compensated addition
    for &(n, k) in &[
        (1_000_000u64, 500_000u64),
        (1_000_000, 12_345),
        (999_983, 400_000),
    ] {
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for i in 1..=k {
            let x = ((n - k + i) as f64 / i as f64).ln();
            let t = s + x;
            c += if s.abs() >= x.abs() {
                (s - t) + x
            } else {
                (x - t) + s
            };
            s = t;
        }
        let exact = s + c;
        let got = log_binomial(n, k).unwrap();
        assert!(
            (got - exact).abs() <= 1e-12 * exact,
            "C({n},{k}): {got} vs {exact}"
        );
    }
}

fn decimal(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn ln_rational(x: &BigRational) -> f64 {
    let num = x.numer().to_biguint().unwrap();
    let den = x.denom().to_biguint().unwrap();
    ln_big(&num) - ln_big(&den)
}

#[test]
fn negbin_pmf_reference_values() {
    let nb = NegBinomialParams::new(2, 0.5).unwrap();
    assert!((negbin_pmf(nb, 0).ln() - 0.25f64.ln()).abs() < 1e-15);
    assert!((negbin_pmf(nb, 2).ln() - 0.1875f64.ln()).abs() < 1e-15);

    // C(12, 10) (1/10)^3 (9/10)^10 in exact rational arithmetic
    let p = decimal(1, 10);
    let q = decimal(9, 10);
    let mut exact = BigRational::from_integer(BigInt::from(binomial_big(12, 10)));
    for _ in 0..3 {
        exact *= &p;
    }
    for _ in 0..10 {
        exact *= &q;
    }
    let nb = NegBinomialParams::new(3, 0.1).unwrap();
    assert!((negbin_pmf(nb, 10).ln() - ln_rational(&exact)).abs() < 1e-12);
}

#[test]
fn negbin_pmf_matches_rationals_on_a_grid() {
    for gamma in [1u64, 2, 7, 30] {
        for (pn, pd) in [(1i64, 20i64), (3, 10), (9, 10)] {
            let pr = decimal(pn, pd);
            let qr = decimal(pd - pn, pd);
            let nb = NegBinomialParams::new(gamma, pn as f64 / pd as f64).unwrap();
            for k in [0u64, 1, 5, 40, 200] {
                let mut exact =
                    BigRational::from_integer(BigInt::from(binomial_big(gamma + k - 1, k)));
                exact *= num_traits::pow(pr.clone(), gamma as usize);
                exact *= num_traits::pow(qr.clone(), k as usize);
                let want = ln_rational(&exact);
                let got = negbin_pmf(nb, k).ln();
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "{gamma} {pn}/{pd} {k}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn negbin_cdf_reference_values() {
    let nb = NegBinomialParams::new(2, 0.5).unwrap();
    assert!((negbin_cdf(nb, 0) - 0.25).abs() < 1e-15);
    assert!((negbin_cdf(nb, 2) - 0.6875).abs() < 1e-15);

    // term-by-term summation with the pmf built from scratch
    let nb = NegBinomialParams::new(5, 0.2).unwrap();
    let mut term = 0.2f64.powi(5);
    let mut sum = term;
    for k in 1..=40u64 {
        term *= 0.8 * (5 + k - 1) as f64 / k as f64;
        sum += term;
    }
    assert!((negbin_cdf(nb, 40) - sum).abs() < 1e-12);
}

#[test]
fn pmf_sums_to_one() {
    for gamma in 1..=20u64 {
        for p in [0.05, 0.3, 0.9] {
            let nb = NegBinomialParams::new(gamma, p).unwrap();
            let mut sum = 0.0;
            let mut k = 0u64;
            loop {
                sum += negbin_pmf(nb, k).prob();
                k += 1;
                if negbin_sf(nb, k) < 1e-13 {
                    break;
                }
            }
            assert!((sum - 1.0).abs() < 1e-12, "gamma {gamma} p {p}: {sum}");
        }
    }
}

#[test]
fn wide_windows_agree_with_term_sums() {
    // the cdf of a spread-out law, summed term by term from the recurrence
    let nb = NegBinomialParams::new(12, 0.01).unwrap();
    let mut term = negbin_pmf(nb, 0).prob();
    let mut sum = term;
    for k in 1..=1500u64 {
        term *= 0.99 * (12 + k - 1) as f64 / k as f64;
        sum += term;
        if k % 100 == 0 {
            assert!((negbin_cdf(nb, k) - sum).abs() < 1e-13, "k = {k}");
        }
    }
}

fn unit_open() -> impl Strategy<Value = f64> {
    1e-4..0.99f64
}

proptest! {
    #[test]
    fn phi_chain(e in unit_open()) {
        let lhs = phi(-e).unwrap();
        let a = e * e / (2.0 * (1.0 - e));
        let b = e * e / 2.0;
        let c = phi(e).unwrap();
        let d = (2.0 * std::f64::consts::LN_2 - 1.0) * e * e / (1.0 + e);
        prop_assert!(lhs > a && a > b && b > c && c > d && d > 0.0, "{lhs} {a} {b} {c} {d}");
    }

    #[test]
    fn phi_positive_off_origin(x in -0.999..0.999f64) {
        prop_assume!(x.abs() > 1e-6);
        prop_assert!(phi(x).unwrap() > 0.0);
    }

    #[test]
    fn hoeffding_exponent_bounds(e in unit_open(), t in 0.01..0.99f64) {
        // mu ranges over the admissible interval for each side
        let mu_up = t / (1.0 + e);
        prop_assert!(hoeffding_m((1.0 + e) * mu_up, mu_up).unwrap() <= -phi(e).unwrap() + 1e-15);
        let mu_lo = t;
        prop_assert!(hoeffding_m((1.0 - e) * mu_lo, mu_lo).unwrap() <= -phi(-e).unwrap() + 1e-15);
    }

    #[test]
    fn hoeffding_exponent_decreases_in_margin(e1 in unit_open(), e2 in unit_open(), mu in 0.01..0.5f64) {
        prop_assume!((e1 - e2).abs() > 1e-6);
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        if (1.0 + hi) * mu < 1.0 {
            prop_assert!(hoeffding_m((1.0 + hi) * mu, mu).unwrap() < hoeffding_m((1.0 + lo) * mu, mu).unwrap());
        }
        prop_assert!(hoeffding_m((1.0 - hi) * mu, mu).unwrap() < hoeffding_m((1.0 - lo) * mu, mu).unwrap());
    }

    #[test]
    fn cdf_increments_are_pmf(gamma in 1u64..60, p in 0.01..0.99f64, k in 1u64..3000) {
        let nb = NegBinomialParams::new(gamma, p).unwrap();
        let diff = negbin_cdf(nb, k) - negbin_cdf(nb, k - 1);
        prop_assert!((diff - negbin_pmf(nb, k).prob()).abs() < 1e-12);
    }

    #[test]
    fn cdf_is_monotone_probability(gamma in 1u64..200, p in 0.001..0.999f64, k in 0u64..100_000) {
        let nb = NegBinomialParams::new(gamma, p).unwrap();
        let (a, b) = (negbin_cdf(nb, k), negbin_cdf(nb, k + 1));
        prop_assert!((0.0..=1.0).contains(&a) && a <= b + 1e-15);
        prop_assert!((negbin_cdf(nb, k) + negbin_sf(nb, k + 1) - 1.0).abs() < 1e-13);
    }
}
