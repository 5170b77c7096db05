//! `invsample`: thresholds, exact Bernoulli coverage and Monte Carlo runs from the command line.

mod output;

use std::fmt;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use invsample::{
    ber_demo, candidate_coverages, coverage_probability, coverage_window, dagum_upsilon1,
    explicit_gamma, min_coverage, minimum_gamma, run_batch, solve_gamma_hat, solve_gamma_tilde,
    BatchConfig, BoundedDistribution, CandidateCoverage, CoverageQuery, CoverageWindow, Error,
    Estimator, MinimumGamma, PrecisionSpec, ThresholdReport, ThresholdSelection, TrialBatchResult,
};
use serde::Serialize;

use output::{emit, num, opt_num, round_sig, Format, Table};

#[derive(Debug, Parser, Serialize)]
#[command(name = "invsample", version, about = "Sample-sum thresholds for inverse sampling", long_about = None)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,

    /// Significant digits for printed thresholds.
    #[arg(long, default_value_t = 6, global = true, value_parser = clap::value_parser!(u32).range(1..=17))]
    precision: u32,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Thresholds on the sample sum for a relative margin and a risk.
    Threshold(ThresholdArgs),
    /// Smallest integer threshold with exact Bernoulli coverage above 1 - delta on [a, b].
    MinGamma(MinGammaArgs),
    /// Exact Bernoulli coverage at a point, or its minimum over an interval.
    Coverage(CoverageArgs),
    /// Monte Carlo runs of the stopping rule on a bounded distribution.
    Simulate(SimulateArgs),
    /// Bit error rate estimation on blocks of bits.
    Ber(BerArgs),
    /// Threshold curves against the relative margin.
    Curves(CurvesArgs),
}

#[derive(Debug, Args, Serialize)]
struct Precision {
    /// Relative margin, in (0, 1).
    #[arg(short, long)]
    epsilon: f64,
    /// Risk, in (0, 1).
    #[arg(short, long)]
    delta: f64,
}

impl Precision {
    fn spec(&self) -> invsample::Result<PrecisionSpec> {
        PrecisionSpec::new(self.epsilon, self.delta)
    }
}

#[derive(Debug, Args, Serialize)]
struct ThresholdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    precision: Precision,
    /// Every threshold below (the default when none is chosen).
    #[arg(long)]
    all: bool,
    /// Closed form ln(2/delta)/phi(epsilon).
    #[arg(long)]
    explicit: bool,
    /// Threshold for gamma/n.
    #[arg(long)]
    tilde: bool,
    /// Threshold for (gamma-1)/(n-1).
    #[arg(long)]
    hat: bool,
    /// Threshold for Bernoulli samples.
    #[arg(long)]
    star: bool,
    /// Dagum's threshold.
    #[arg(long)]
    dagum: bool,
    /// Cheng's threshold, for comparison only.
    #[arg(long)]
    cheng: bool,
}

impl ThresholdArgs {
    fn selection(&self) -> ThresholdSelection {
        let picked = ThresholdSelection {
            explicit: self.explicit,
            tilde: self.tilde,
            hat: self.hat,
            star: self.star,
            dagum: self.dagum,
            cheng: self.cheng,
        };
        if self.all || picked == ThresholdSelection::default() {
            ThresholdSelection::ALL
        } else {
            picked
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct MinGammaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    precision: Precision,
    /// Lower end of the parameter interval.
    #[arg(short = 'a', long = "lower")]
    a: f64,
    /// Upper end of the parameter interval.
    #[arg(short = 'b', long = "upper")]
    b: f64,
    #[arg(long, default_value_t = Estimator::Mvue)]
    estimator: Estimator,
}

#[derive(Debug, Args, Serialize)]
struct CoverageArgs {
    /// Integer threshold on the number of successes.
    #[arg(short, long)]
    gamma: u64,
    /// Relative margin, in (0, 1).
    #[arg(short, long)]
    epsilon: f64,
    /// A single Bernoulli parameter.
    #[arg(short, long, conflicts_with_all = ["a", "b"], required_unless_present_all = ["a", "b"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    /// Lower end of the parameter interval.
    #[arg(short = 'a', long = "lower", requires = "b")]
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    /// Upper end of the parameter interval.
    #[arg(short = 'b', long = "upper", requires = "a")]
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[arg(long, default_value_t = Estimator::Mvue)]
    estimator: Estimator,
}

/// A threshold given on the command line, or `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum GammaArg {
    Auto,
    Value(f64),
}

impl FromStr for GammaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GammaArg::Auto);
        }
        s.parse::<f64>()
            .map(GammaArg::Value)
            .map_err(|_| format!("expected a number or `auto`, got {s:?}"))
    }
}

impl fmt::Display for GammaArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaArg::Auto => f.write_str("auto"),
            GammaArg::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for GammaArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            GammaArg::Auto => s.serialize_str("auto"),
            GammaArg::Value(v) => s.serialize_f64(*v),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct Trials {
    #[arg(long, default_value_t = 20_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest number of samples a single run may consume.
    #[arg(long, default_value_t = BatchConfig::DEFAULT_CAP)]
    cap: u64,
}

impl Trials {
    fn config(&self) -> BatchConfig {
        BatchConfig::new(self.trials, self.seed).with_cap(self.cap)
    }
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// `bernoulli(p)`, `scaled-binomial(L,r)`, `discrete(x:w,...)` or `beta(a,b)`.
    #[serde(serialize_with = "serialize_display")]
    distribution: BoundedDistribution,
    /// Threshold on the sample sum, or `auto`.
    #[arg(short, long, default_value = "auto")]
    gamma: GammaArg,
    #[command(flatten)]
    #[serde(flatten)]
    precision: Precision,
    #[arg(long, default_value_t = Estimator::Mvue)]
    estimator: Estimator,
    #[command(flatten)]
    #[serde(flatten)]
    trials: Trials,
}

fn serialize_display<T: fmt::Display, S: serde::Serializer>(
    v: &T,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Args, Serialize)]
struct BerArgs {
    /// Bits per block.
    #[arg(long = "L", id = "L")]
    #[serde(rename = "L")]
    blocks: u32,
    /// Per-bit error rate.
    #[arg(long)]
    rate: f64,
    #[command(flatten)]
    #[serde(flatten)]
    precision: Precision,
    #[command(flatten)]
    #[serde(flatten)]
    trials: Trials,
}

#[derive(Debug, Args, Serialize)]
struct CurvesArgs {
    #[arg(short, long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_min: f64,
    #[arg(long, default_value_t = 0.5)]
    eps_max: f64,
    /// Number of evenly spaced margins, end points included.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..=100_000))]
    steps: u32,
}

/// Exit status for each failure class.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain { .. }
        | Error::Parse { .. }
        | Error::EstimateUndefined { .. }
        | Error::SampleOutOfRange(_) => 2,
        Error::NoConvergence { .. }
        | Error::RootNotBracketed { .. }
        | Error::SearchExhausted { .. } => 3,
        Error::CapExceeded { .. } | Error::StreamExhausted { .. } => 4,
        Error::AlreadyStopped | Error::NotStopped { .. } => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

enum Failure {
    Lib(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (format, digits) = (cli.format, cli.precision);
    match &cli.command {
        Command::Threshold(args) => {
            let report = ThresholdReport::compute(args.precision.spec()?, args.selection())?;
            emit(
                format,
                "threshold",
                cli,
                None,
                &ThresholdPayload(rounded(report, digits)),
            )?;
        }
        Command::MinGamma(args) => {
            let spec = args.precision.spec()?;
            let found = minimum_gamma(spec, args.a, args.b, args.estimator)?;
            let payload = MinGammaPayload {
                target: 1.0 - spec.delta(),
                result: found,
            };
            emit(format, "min-gamma", cli, None, &payload)?;
        }
        Command::Coverage(args) => {
            let payload = coverage(args)?;
            emit(format, "coverage", cli, None, &payload)?;
        }
        Command::Simulate(args) => {
            let spec = args.precision.spec()?;
            let (gamma, source) = resolve_gamma(args, spec)?;
            let result = run_batch(
                &args.distribution,
                gamma,
                spec,
                args.estimator,
                &args.trials.config(),
            )?;
            let payload = SimulatePayload {
                gamma_source: source,
                result,
            };
            emit(format, "simulate", cli, Some(args.trials.seed), &payload)?;
        }
        Command::Ber(args) => {
            let result = ber_demo(
                args.blocks,
                args.rate,
                args.precision.spec()?,
                &args.trials.config(),
            )?;
            emit(
                format,
                "ber",
                cli,
                Some(args.trials.seed),
                &BatchPayload(result),
            )?;
        }
        Command::Curves(args) => {
            let payload = curves(args, digits)?;
            emit(format, "curves", cli, None, &payload)?;
        }
    }
    Ok(())
}

fn rounded(mut r: ThresholdReport, digits: u32) -> ThresholdReport {
    let round = |x: f64| round_sig(x, digits);
    r.explicit_gamma = r.explicit_gamma.map(round);
    r.dagum_upsilon1 = r.dagum_upsilon1.map(round);
    for s in [&mut r.gamma_tilde, &mut r.gamma_hat, &mut r.gamma_star]
        .into_iter()
        .flatten()
    {
        s.value = round(s.value);
    }
    if let Some(c) = r.cheng_alpha.as_mut() {
        c.alpha = round(c.alpha);
    }
    r
}

#[derive(Serialize)]
#[serde(transparent)]
struct ThresholdPayload(ThresholdReport);

impl Table for ThresholdPayload {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "epsilon",
            "delta",
            "threshold",
            "value",
            "residual",
            "bracket_lo",
            "bracket_hi",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let r = &self.0;
        let row = |name: &str, value: f64, residual: Option<f64>, bracket: Option<(f64, f64)>| {
            vec![
                num(r.epsilon),
                num(r.delta),
                name.to_string(),
                num(value),
                opt_num(residual),
                opt_num(bracket.map(|b| b.0)),
                opt_num(bracket.map(|b| b.1)),
            ]
        };
        let mut rows = Vec::new();
        if let Some(v) = r.explicit_gamma {
            rows.push(row("explicit_gamma", v, None, None));
        }
        for (name, s) in [
            ("gamma_tilde", r.gamma_tilde),
            ("gamma_hat", r.gamma_hat),
            ("gamma_star", r.gamma_star),
        ] {
            if let Some(s) = s {
                rows.push(row(name, s.value, Some(s.residual), Some(s.bracket)));
            }
        }
        if let Some(v) = r.dagum_upsilon1 {
            rows.push(row("dagum_upsilon1", v, None, None));
        }
        if let Some(c) = r.cheng_alpha {
            rows.push(row("cheng_alpha", c.alpha, Some(c.residual), None));
        }
        rows
    }
}

#[derive(Serialize)]
struct MinGammaPayload {
    /// Coverage must exceed this level.
    target: f64,
    #[serde(flatten)]
    result: MinimumGamma,
}

impl Table for MinGammaPayload {
    fn header(&self) -> Vec<&'static str> {
        vec!["gamma", "worst_p", "coverage", "target", "bound"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let r = &self.result;
        vec![vec![
            r.gamma.to_string(),
            num(r.worst_p),
            num(r.coverage),
            num(self.target),
            r.bound.to_string(),
        ]]
    }
}

#[derive(Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
enum CoveragePayload {
    Point {
        p: f64,
        window: CoverageWindow,
        coverage: f64,
    },
    Interval {
        candidates: Vec<CandidateCoverage>,
        minimum: Minimum,
    },
}

#[derive(Serialize)]
struct Minimum {
    p: f64,
    coverage: f64,
}

fn coverage(args: &CoverageArgs) -> invsample::Result<CoveragePayload> {
    let (gamma, eps, est) = (args.gamma, args.epsilon, args.estimator);
    match (args.p, args.a, args.b) {
        (Some(p), _, _) => Ok(CoveragePayload::Point {
            p,
            window: coverage_window(gamma, eps, p, est)?,
            coverage: coverage_probability(gamma, eps, p, est)?,
        }),
        (None, Some(a), Some(b)) => {
            let query = CoverageQuery::new(gamma, eps, est, a, b)?;
            let m = min_coverage(&query);
            Ok(CoveragePayload::Interval {
                candidates: candidate_coverages(&query),
                minimum: Minimum {
                    p: m.p,
                    coverage: m.coverage,
                },
            })
        }
        _ => unreachable!("clap requires either p or both interval ends"),
    }
}

impl Table for CoveragePayload {
    fn header(&self) -> Vec<&'static str> {
        vec!["p", "g", "h", "coverage", "is_minimum"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let row = |p: f64, w: CoverageWindow, c: f64, min: bool| {
            vec![
                num(p),
                w.g.to_string(),
                w.h.to_string(),
                num(c),
                min.to_string(),
            ]
        };
        match self {
            CoveragePayload::Point {
                p,
                window,
                coverage,
            } => vec![row(*p, *window, *coverage, true)],
            CoveragePayload::Interval {
                candidates,
                minimum,
            } => candidates
                .iter()
                .map(|c| row(c.p, c.window, c.coverage, c.p == minimum.p))
                .collect(),
        }
    }
}

/// How the threshold of a simulation was chosen.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GammaSource {
    Given,
    /// Smallest integer threshold with exact coverage above `1 - delta`.
    BernoulliMinimum,
    /// Ceiling of the bisection threshold for the chosen estimator.
    GeneralBound,
}

fn resolve_gamma(
    args: &SimulateArgs,
    spec: PrecisionSpec,
) -> invsample::Result<(f64, GammaSource)> {
    match args.gamma {
        GammaArg::Value(g) => Ok((g, GammaSource::Given)),
        GammaArg::Auto => match args.distribution.bernoulli_p() {
            Some(p) if p > 0.0 && p < 1.0 => {
                let m = minimum_gamma(spec, p, p, args.estimator)?;
                Ok((m.gamma as f64, GammaSource::BernoulliMinimum))
            }
            _ => {
                let s = match args.estimator {
                    Estimator::Mle => solve_gamma_tilde(spec)?,
                    Estimator::Mvue => solve_gamma_hat(spec)?,
                };
                Ok((s.value.ceil(), GammaSource::GeneralBound))
            }
        },
    }
}

#[derive(Serialize)]
struct SimulatePayload {
    gamma_source: GammaSource,
    #[serde(flatten)]
    result: TrialBatchResult,
}

const BATCH_HEADER: [&str; 15] = [
    "distribution",
    "mean",
    "gamma",
    "epsilon",
    "delta",
    "estimator",
    "trials",
    "successes",
    "coverage",
    "n_mean",
    "n_std_dev",
    "n_std_error",
    "n_min",
    "n_max",
    "seed",
];

fn batch_row(r: &TrialBatchResult) -> Vec<String> {
    vec![
        r.distribution.to_string(),
        num(r.mean),
        num(r.gamma),
        num(r.epsilon),
        num(r.delta),
        r.estimator.to_string(),
        r.trials.to_string(),
        r.successes.to_string(),
        num(r.coverage),
        num(r.n_mean),
        num(r.n_std_dev),
        num(r.n_std_error),
        r.n_min.to_string(),
        r.n_max.to_string(),
        r.seed.to_string(),
    ]
}

impl Table for SimulatePayload {
    fn header(&self) -> Vec<&'static str> {
        BATCH_HEADER.to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![batch_row(&self.result)]
    }
}

#[derive(Serialize)]
#[serde(transparent)]
struct BatchPayload(TrialBatchResult);

impl Table for BatchPayload {
    fn header(&self) -> Vec<&'static str> {
        BATCH_HEADER.to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![batch_row(&self.0)]
    }
}

#[derive(Serialize)]
struct CurveRow {
    epsilon: f64,
    explicit_gamma: f64,
    gamma_tilde: f64,
    gamma_hat: f64,
    dagum_upsilon1: f64,
}

#[derive(Serialize)]
struct CurvesPayload {
    delta: f64,
    rows: Vec<CurveRow>,
}

fn curves(args: &CurvesArgs, digits: u32) -> invsample::Result<CurvesPayload> {
    let (lo, hi) = (args.eps_min, args.eps_max);
    // also rejects NaN
    if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
        return Err(Error::Domain {
            name: "epsilon range",
            value: if lo > 0.0 && lo < 1.0 { hi } else { lo },
            domain: "0 < eps-min <= eps-max < 1",
        });
    }
    let n = args.steps;
    let rows = (0..n)
        .map(|i| {
            let eps = if n == 1 {
                lo
            } else {
                lo + (hi - lo) * f64::from(i) / f64::from(n - 1)
            };
            let spec = PrecisionSpec::new(eps, args.delta)?;
            let round = |x: f64| round_sig(x, digits);
            Ok(CurveRow {
                epsilon: eps,
                explicit_gamma: round(explicit_gamma(spec)),
                gamma_tilde: round(solve_gamma_tilde(spec)?.value),
                gamma_hat: round(solve_gamma_hat(spec)?.value),
                dagum_upsilon1: round(dagum_upsilon1(spec)),
            })
        })
        .collect::<invsample::Result<Vec<_>>>()?;
    Ok(CurvesPayload {
        delta: args.delta,
        rows,
    })
}

impl Table for CurvesPayload {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "epsilon",
            "explicit_gamma",
            "gamma_tilde",
            "gamma_hat",
            "dagum_upsilon1",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    num(r.epsilon),
                    num(r.explicit_gamma),
                    num(r.gamma_tilde),
                    num(r.gamma_hat),
                    num(r.dagum_upsilon1),
                ]
            })
            .collect()
    }
}
