//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. Exits
//! non-zero if an attainable criterion fails; criteria listed in
//! `KNOWN_UNATTAINABLE` still print their real verdict.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use invsample::{
    ber_demo, bernoulli_exact_tail, bernoulli_sample_size_tails, coverage_probability,
    dagum_upsilon1, explicit_gamma, min_coverage, negbin_pmf, negbin_sf, phi, run_batch,
    solve_gamma_hat, solve_gamma_tilde, stopping_times, tail_empirics, BatchConfig,
    BoundedDistribution, CoverageQuery, Estimator, NegBinomialParams, PrecisionSpec, TailSide,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const EPSILONS: [f64; 6] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5];
const DELTAS: [f64; 6] = [1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2];

/// Criteria that cannot hold as stated; see the notes printed with each.
/// 2: explicit/dagum crosses 0.75 near eps = 0.2584.
/// 4: a finite grid misses the isolated minima at window jump points.
const KNOWN_UNATTAINABLE: [u32; 2] = [2, 4];

struct Verdict {
    pass: bool,
    detail: String,
    /// Sub-checks that must hold even when the criterion itself cannot.
    required: bool,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Self {
            pass,
            detail,
            required: pass,
        }
    }
}

fn spec(e: f64, d: f64) -> PrecisionSpec {
    PrecisionSpec::new(e, d).unwrap()
}

fn three_sigma(q: f64, trials: u64) -> f64 {
    3.0 * (q * (1.0 - q) / trials as f64).sqrt()
}

fn threshold_chain() -> Verdict {
    let start = Instant::now();
    let mut worst_residual: f64 = 0.0;
    let mut broken = Vec::new();
    for e in EPSILONS {
        for d in DELTAS {
            let s = spec(e, d);
            let tilde = solve_gamma_tilde(s).unwrap();
            let hat = solve_gamma_hat(s).unwrap();
            worst_residual = worst_residual.max(tilde.residual / d).max(hat.residual / d);
            let ln2d = (2.0 / d).ln();
            let chain = [
                (1.0 - e) * hat.value,
                tilde.value,
                hat.value,
                explicit_gamma(s),
                (1.0 + e) * ln2d / ((2.0 * 2f64.ln() - 1.0) * e * e),
                4.0 * (std::f64::consts::E - 2.0) * (1.0 + e) * ln2d / (e * e),
            ];
            if !chain.windows(2).all(|w| w[0] < w[1]) {
                broken.push((e, d));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = broken.is_empty() && worst_residual <= 1e-10 && elapsed < Duration::from_secs(1);
    Verdict::new(
        pass,
        format!(
            "36 cells, chain broken at {broken:?}, max residual {worst_residual:.2e} delta, {:.1} ms",
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn explicit_versus_dagum() -> Verdict {
    let start = Instant::now();
    let s = spec(0.1, 0.05);
    let (explicit, dagum) = (explicit_gamma(s), dagum_upsilon1(s));
    let values_ok = (explicit - 838.18).abs() <= 0.1 && (dagum - 1166.8).abs() <= 0.1;

    // 0.001 steps over [0.01, 0.5]
    let ratios: Vec<(f64, f64)> = (10..=500)
        .map(|i| {
            let e = i as f64 / 1000.0;
            let s = spec(e, 0.05);
            (e, explicit_gamma(s) / dagum_upsilon1(s))
        })
        .collect();
    let above: Vec<f64> = ratios.iter().filter(|r| r.1 >= 0.75).map(|r| r.0).collect();
    let max = ratios.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    let elapsed = start.elapsed();
    let ratio_ok = above.is_empty();
    Verdict {
        pass: values_ok && ratio_ok && elapsed < Duration::from_secs(1),
        detail: format!(
            "explicit {explicit:.3}, dagum {dagum:.3}; ratio >= 0.75 at {} of {} eps values from {:?} on, max {max:.4}; {:.1} ms",
            above.len(),
            ratios.len(),
            above.first(),
            elapsed.as_secs_f64() * 1e3
        ),
        required: values_ok,
    }
}

fn bracket_inequality() -> Verdict {
    let mut broken = Vec::new();
    for e in EPSILONS {
        for d in DELTAS {
            let lower = (1.0 / d).ln() / phi(e).unwrap();
            if !(lower < solve_gamma_tilde(spec(e, d)).unwrap().value) {
                broken.push((e, d));
            }
        }
    }
    let trend: Vec<f64> = (1..=5)
        .map(|k| {
            let d = 10f64.powi(-2 * k);
            solve_gamma_tilde(spec(0.1, d)).unwrap().value * phi(0.1).unwrap() / (2.0 / d).ln()
        })
        .collect();
    let increasing = trend.windows(2).all(|w| w[0] < w[1]) && trend.iter().all(|&r| r < 1.0);
    Verdict::new(
        broken.is_empty() && increasing,
        format!(
            "lower bracket broken at {broken:?}; ratio along delta = 1e-2..1e-10: {}",
            trend
                .iter()
                .map(|r| format!("{r:.5}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

fn candidate_minimum_against_grid() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut equal, mut below, mut endpoint, mut isolated) = (0, 0, 0, 0);
    let mut worst_gap: f64 = 0.0;
    for i in 0..30 {
        let est = if i % 2 == 0 {
            Estimator::Mvue
        } else {
            Estimator::Mle
        };
        let gamma = rng.random_range(est.min_gamma()..=50);
        let eps = [0.1, 0.2, 0.5][rng.random_range(0..3)];
        let (x, y) = (rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        let q = CoverageQuery::new(gamma, eps, est, a, b).unwrap();
        let exact = min_coverage(&q);
        let grid = (0..10_000)
            .map(|j| {
                let p = if j == 9_999 {
                    b
                } else {
                    a + (b - a) * j as f64 / 9_999.0
                };
                coverage_probability(gamma, eps, p, est).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        let gap = grid - exact.coverage;
        worst_gap = worst_gap.max(gap);
        equal += usize::from(gap.abs() <= 1e-12);
        below += usize::from(exact.coverage <= grid + 1e-12);
        endpoint += usize::from(exact.p == a || exact.p == b);
        if gap.abs() > 1e-12 {
            // coverage just beside the argmin is higher on both sides
            let near = |f: f64| coverage_probability(gamma, eps, exact.p * f, est).unwrap();
            isolated += usize::from(
                near(1.0 - 1e-9) > exact.coverage + 1e-12
                    && near(1.0 + 1e-9) > exact.coverage + 1e-12,
            );
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        pass: equal == 30 && elapsed < Duration::from_secs(30),
        detail: format!(
            "candidate min equals grid min in {equal}/30 (endpoint argmin in {endpoint}), \
             never above it in {below}/30, largest grid excess {worst_gap:.3e}, \
             isolated jump-point minimum in {isolated}/{}; {:.1} s",
            30 - equal,
            elapsed.as_secs_f64()
        ),
        required: below == 30 && isolated == 30 - equal,
    }
}

/// Exact coverage by enumerating stopping times, with the margin test done on
/// integers for `p = pn / 1000` and `eps = en / ed`.
fn enumerated_coverage(gamma: u64, (en, ed): (i128, i128), pn: i128, est: Estimator) -> f64 {
    let pd = 1000i128;
    let p = pn as f64 / pd as f64;
    let (c, shift) = match est {
        Estimator::Mle => (gamma as i128, 0),
        Estimator::Mvue => (gamma as i128 - 1, 1),
    };
    let last = (c as f64 / ((1.0 - en as f64 / ed as f64) * p)).ceil() as u64 + 5;
    let mut term = p.powi(gamma as i32);
    let mut total = 0.0;
    for n in gamma..=last.max(gamma) {
        let d = n as i128 - shift;
        if (c * pd * ed - pn * d * ed).abs() < en * pn * d {
            total += term;
        }
        term *= n as f64 / (n + 1 - gamma) as f64 * (1.0 - p);
    }
    total
}

fn exact_coverage_oracle() -> Verdict {
    let reference = coverage_probability(2, 0.5, 0.5, Estimator::Mvue).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eps_choices = [(1, 10), (1, 5), (1, 2)];
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let est = if i % 2 == 0 {
            Estimator::Mvue
        } else {
            Estimator::Mle
        };
        let gamma = rng.random_range(est.min_gamma()..=20);
        let (en, ed) = eps_choices[rng.random_range(0..3)];
        let pn = rng.random_range(20..=980);
        let lib =
            coverage_probability(gamma, en as f64 / ed as f64, pn as f64 / 1000.0, est).unwrap();
        worst = worst.max((lib - enumerated_coverage(gamma, (en, ed), pn, est)).abs());
    }
    Verdict::new(
        (reference - 0.4375).abs() <= 1e-12 && worst <= 1e-12,
        format!("C(2, 0.5, 0.5) = {reference}; 20 enumerated cases, max difference {worst:.2e}"),
    )
}

const COVERAGE_CELLS: [&str; 4] = [
    "bernoulli(0.02)",
    "bernoulli(0.1)",
    "bernoulli(0.5)",
    "scaled-binomial(8,0.05)",
];

fn coverage_and_sample_size() -> (Verdict, Verdict) {
    let start = Instant::now();
    let s = spec(0.1, 0.05);
    let gamma = solve_gamma_hat(s).unwrap().value.ceil();
    let floor = 0.95 - three_sigma(0.05, 20_000);
    let (mut cov_ok, mut n_ok) = (true, true);
    let (mut cov_lines, mut n_lines) = (Vec::new(), Vec::new());
    for (i, d) in COVERAGE_CELLS.iter().enumerate() {
        let dist: BoundedDistribution = d.parse().unwrap();
        let mut coverages = Vec::new();
        for est in [Estimator::Mle, Estimator::Mvue] {
            let r = run_batch(
                &dist,
                gamma,
                s,
                est,
                &BatchConfig::new(20_000, 600 + i as u64),
            )
            .unwrap();
            cov_ok &= r.coverage >= floor;
            coverages.push(r.coverage);
            if est == Estimator::Mle {
                let (lo, hi) = (gamma / r.mean, gamma / r.mean + 1.0);
                let slack = 3.0 * r.n_std_error;
                n_ok &= r.n_mean >= lo - slack && r.n_mean <= hi + slack;
                n_lines.push(format!(
                    "{d} {:.1} in [{lo:.1}, {hi:.1}] +- {slack:.1}",
                    r.n_mean
                ));
            }
        }
        cov_lines.push(format!("{d} {:.4}/{:.4}", coverages[0], coverages[1]));
    }
    (
        Verdict::new(
            cov_ok,
            format!(
                "gamma {gamma}, mle/mvue coverage {} (floor {floor:.4}); {:.1} s",
                cov_lines.join(", "),
                start.elapsed().as_secs_f64()
            ),
        ),
        Verdict::new(n_ok, n_lines.join("; ")),
    )
}

fn tail_dominance() -> Verdict {
    let trials = 100_000;
    let mut notes = Vec::new();
    let mut pass = true;
    for (i, (gamma, p)) in [(20u64, 0.1), (10, 0.5)].into_iter().enumerate() {
        let dist = BoundedDistribution::bernoulli(p).unwrap();
        let cfg = BatchConfig::new(trials, 800 + i as u64);
        for (side, rhos) in [
            (TailSide::Upper, &[0.2, 0.5, 1.0][..]),
            (TailSide::Lower, &[0.2, 0.4][..]),
        ] {
            for row in tail_empirics(&dist, gamma as f64, rhos, side, &cfg).unwrap() {
                let bb = bernoulli_sample_size_tails(gamma, p, row.rho, side).unwrap();
                let exact = bernoulli_exact_tail(gamma, p, row.rho, side).unwrap();
                let ok = row.within_slack
                    && row.empirical <= bb + three_sigma(bb, trials)
                    && exact <= bb;
                pass &= ok;
                if !ok {
                    notes.push(format!("{gamma}/{p} {side:?} {}: {row:?}", row.rho));
                }
            }
        }
    }
    Verdict::new(pass, format!("10 tail points, violations {notes:?}"))
}

fn negative_binomial_fit() -> Verdict {
    let (gamma, p, trials) = (5u64, 0.3, 100_000u64);
    let dist = BoundedDistribution::bernoulli(p).unwrap();
    let ns = stopping_times(&dist, gamma as f64, &BatchConfig::new(trials, 900)).unwrap();
    let nb = NegBinomialParams::new(gamma, p).unwrap();
    let max_k = ns.iter().max().unwrap() - gamma;
    let mut observed = vec![0.0; max_k as usize + 1];
    for n in &ns {
        observed[(n - gamma) as usize] += 1.0;
    }
    // adjacent cells are pooled until each expects at least 5; the last bin takes the tail
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e, mut k) = (0.0, 0.0, 0u64);
    loop {
        o += observed.get(k as usize).copied().unwrap_or(0.0);
        e += negbin_pmf(nb, k).prob() * trials as f64;
        k += 1;
        if e >= 5.0 {
            let rest: f64 = observed.iter().skip(k as usize).sum();
            let rest_e = negbin_sf(nb, k) * trials as f64;
            if rest_e < 5.0 {
                bins.push((o + rest, e + rest_e));
                break;
            }
            bins.push((o, e));
            (o, e) = (0.0, 0.0);
        }
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (bins.len() - 1) as f64;
    let critical = ChiSquared::new(dof).unwrap().inverse_cdf(1.0 - 1e-3);
    Verdict::new(
        stat < critical,
        format!("chi-square {stat:.2} on {dof} dof, critical {critical:.2}"),
    )
}

fn cli_output(args: &[&str], threads: Option<&str>) -> Vec<u8> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_invsample"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("RAYON_NUM_THREADS", t),
        None => cmd.env_remove("RAYON_NUM_THREADS"),
    };
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn determinism() -> Verdict {
    let s = spec(0.1, 0.05);
    let many = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .max(16);
    let in_pool = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let beta: BoundedDistribution = "beta(2,3)".parse().unwrap();
            let batch = run_batch(
                &beta,
                50.0,
                s,
                Estimator::Mvue,
                &BatchConfig::new(20_000, 11),
            )
            .unwrap();
            let ber = ber_demo(4, 0.05, s, &BatchConfig::new(2_000, 12)).unwrap();
            let coin = BoundedDistribution::bernoulli(0.2).unwrap();
            let tails = tail_empirics(
                &coin,
                20.0,
                &[0.3],
                TailSide::Upper,
                &BatchConfig::new(10_000, 13),
            )
            .unwrap();
            format!("{batch:?}{ber:?}{tails:?}")
        })
    };
    let library = in_pool(1) == in_pool(many);

    let max = many.to_string();
    let runs: [&[&str]; 3] = [
        &[
            "simulate",
            "beta(2,5)",
            "-e",
            "0.1",
            "-d",
            "0.05",
            "--trials",
            "8000",
            "--seed",
            "3",
        ],
        &[
            "simulate",
            "bernoulli(0.3)",
            "-e",
            "0.2",
            "-d",
            "0.1",
            "--estimator",
            "mle",
            "--trials",
            "8000",
            "--format",
            "csv",
        ],
        &[
            "ber", "--L", "8", "--rate", "0.05", "-e", "0.2", "-d", "0.1", "--trials", "4000",
            "--seed", "9",
        ],
    ];
    let mut cli = true;
    for args in runs {
        let first = cli_output(args, Some("1"));
        for threads in [Some(max.as_str()), None, Some("1")] {
            cli &= cli_output(args, threads) == first;
        }
    }
    Verdict::new(
        library && cli,
        format!("library 1 vs {many} threads identical: {library}; 3 CLI runs byte-identical across thread counts: {cli}"),
    )
}

fn main() -> ExitCode {
    let (coverage, sample_size) = coverage_and_sample_size();
    let results = [
        (1, "threshold ordering", threshold_chain()),
        (2, "explicit versus dagum", explicit_versus_dagum()),
        (3, "bracket inequality", bracket_inequality()),
        (4, "candidate set minimum", candidate_minimum_against_grid()),
        (5, "exact coverage oracle", exact_coverage_oracle()),
        (6, "monte carlo coverage", coverage),
        (7, "sample size bracket", sample_size),
        (8, "tail bound dominance", tail_dominance()),
        (9, "negative binomial fit", negative_binomial_fit()),
        (10, "determinism", determinism()),
    ];
    let mut failed = Vec::new();
    for (id, name, v) in &results {
        println!(
            "{} {id:>2} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        let attainable = !KNOWN_UNATTAINABLE.contains(id);
        if (attainable && !v.pass) || !v.required {
            failed.push(*id);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("required checks failed for criteria {failed:?}");
        ExitCode::FAILURE
    }
}
