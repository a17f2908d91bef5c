//! Command-line front end for the RB correlated-noise toolkit.
//!
//! Subcommands: `fidelity` (decay-curve CSV), `covariance` (PSD-derived
//! covariance CSV plus diagnostics), `fit` (exponential-fit study and linear
//! estimator, JSON), `verify-twirl` (Haar-sampling check of the twirled map),
//! and `qudit` (d-state partition sum from a model file).
//!
//! Exit codes: 0 success, 2 usage or input errors, 3 numerical or capacity
//! failures. Every run is fully determined by its flags and seed.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rbcorr::fitting::{self, FitScenario};
use rbcorr::noise::{self, PsdSpec};
use rbcorr::partition::{self, CurveMethod, ExpansionOrder, ModelFamily};
use rbcorr::qudit;
use rbcorr::twirl;
use rbcorr::Error;

#[derive(Parser)]
#[command(
    name = "rbcorr",
    about = "Randomized-benchmarking decay curves under correlated Gaussian noise",
    after_help = "Exit codes: 0 success, 2 usage/input error, 3 numerical/capacity failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a P0(N) decay curve as CSV
    Fidelity(FidelityArgs),
    /// Build a covariance matrix from a power spectral density
    Covariance(CovarianceArgs),
    /// Fit decay data (exponential scenarios 1-4 or the linear estimator)
    Fit(FitArgs),
    /// Verify the twirled map against Haar-random sampling
    VerifyTwirl(VerifyTwirlArgs),
    /// Evaluate the d-state sequence fidelity from a model file
    Qudit(QuditArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseKind {
    Uncorrelated,
    Quasistatic,
    Psd,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodKind {
    /// Closed form (uncorrelated/quasistatic only)
    Exact,
    /// Full 3^N Ising sum (N <= 18)
    Bruteforce,
    /// Determinant expansion, leading order
    Det,
    /// Determinant expansion with series corrections
    DetCorr,
    /// Monte Carlo sampling
    Mc,
    /// Gauss-Hermite quadrature oracle (quasistatic only)
    Oracle,
}

#[derive(Args)]
struct PsdFlags {
    /// PSD amplitude A
    #[arg(long = "A")]
    amplitude: Option<f64>,
    /// Lower knee frequency (Hz)
    #[arg(long)]
    fl: Option<f64>,
    /// Upper cutoff frequency (Hz)
    #[arg(long)]
    fh: Option<f64>,
    /// Free evolution interval tau (s)
    #[arg(long)]
    tau: Option<f64>,
    /// White spectrum (flat at A for all frequencies)
    #[arg(long)]
    white: bool,
}

impl PsdFlags {
    fn build(&self) -> Result<PsdSpec, Error> {
        let a = self
            .amplitude
            .ok_or_else(|| Error::Domain("--A is required for a PSD".into()))?;
        let tau = self
            .tau
            .ok_or_else(|| Error::Domain("--tau is required for a PSD".into()))?;
        if self.white {
            return PsdSpec::white(a, tau);
        }
        let fl = self
            .fl
            .ok_or_else(|| Error::Domain("--fl is required (or pass --white)".into()))?;
        let fh = self
            .fh
            .ok_or_else(|| Error::Domain("--fh is required (or pass --white)".into()))?;
        PsdSpec::new(a, fl, fh, tau)
    }
}

#[derive(Args)]
struct FidelityArgs {
    /// Noise family
    #[arg(long, value_enum)]
    noise: NoiseKind,
    /// Noise strength beta (uncorrelated/quasistatic)
    #[arg(long)]
    beta: Option<f64>,
    /// Mean phase per interval (radians)
    #[arg(long, default_value_t = 0.0)]
    theta0: f64,
    /// Largest sequence length
    #[arg(long)]
    n_max: usize,
    /// Number of grid points (log-spaced, deduplicated)
    #[arg(long, default_value_t = 60)]
    n_points: usize,
    /// Use a log-spaced N grid (the default; kept for explicitness)
    #[arg(long, default_value_t = true)]
    log_n: bool,
    /// Evaluation method
    #[arg(long, value_enum)]
    method: MethodKind,
    #[command(flatten)]
    psd: PsdFlags,
    /// Covariance CSV for --noise custom
    #[arg(long)]
    cov: Option<PathBuf>,
    /// Monte Carlo sample count
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CovarianceArgs {
    #[command(flatten)]
    psd: PsdFlags,
    /// Matrix size N
    #[arg(long)]
    n: usize,
    /// Mean phase per interval (radians)
    #[arg(long, default_value_t = 0.0)]
    theta0: f64,
    /// Also report beta, T2*, and the spectral exponent alpha as JSON
    #[arg(long)]
    diagnostics: bool,
    /// Check the Toeplitz structure and print a pass/fail line
    #[arg(long)]
    verify: bool,
    /// Output path for the covariance CSV (stdout if omitted; reports then go
    /// to stderr)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenerateKind {
    Quasistatic,
}

#[derive(Args)]
struct FitArgs {
    /// Input curve CSV (N,P0,... as written by `fidelity`)
    #[arg(long, conflicts_with = "generate")]
    input: Option<PathBuf>,
    /// Generate ideal data instead of reading a file
    #[arg(long, value_enum)]
    generate: Option<GenerateKind>,
    /// Noise strength for --generate (epsilon = beta/3)
    #[arg(long)]
    beta: Option<f64>,
    /// Fitting scenario: 1-4 or "linear"
    #[arg(long)]
    scenario: String,
    /// Maximum sequence length used in the fit
    #[arg(long)]
    n_max: Option<usize>,
    /// Fixed asymptote A for the linear estimator
    #[arg(long)]
    asymptote: Option<f64>,
    /// Comma-separated N_max ladder; emits a JSON array of reports
    #[arg(long)]
    scan: Option<String>,
    /// Output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyTwirlArgs {
    /// Hilbert space dimension
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Accumulated phase theta for d=2 (split as +-theta/2)
    #[arg(long)]
    theta: Option<f64>,
    /// Comma-separated per-state phases (overrides --theta)
    #[arg(long)]
    phases: Option<String>,
    /// Haar sample count
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuditMethod {
    Bruteforce,
    Mc,
}

#[derive(Args)]
struct QuditArgs {
    /// Qudit model file (# d=<d> n=<N> header, means, blank line, covariance)
    #[arg(long)]
    model: PathBuf,
    /// Evaluation route
    #[arg(long, value_enum)]
    method: QuditMethod,
    /// Monte Carlo sample count
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fidelity(a) => cmd_fidelity(a),
        Command::Covariance(a) => cmd_covariance(a),
        Command::Fit(a) => cmd_fit(a),
        Command::VerifyTwirl(a) => cmd_verify_twirl(a),
        Command::Qudit(a) => cmd_qudit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Numerical(_) | Error::Capacity(_) | Error::Fitting(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Validation(format!("json: {e}")))
}

/// Log-spaced integer grid from 1 to `n_max`, deduplicated and sorted.
fn n_grid(n_max: usize, n_points: usize) -> Vec<usize> {
    if n_points == 0 || n_max <= 1 {
        return vec![n_max.max(1)];
    }
    if n_points >= n_max {
        return (1..=n_max).collect();
    }
    let top = (n_max as f64).ln();
    let mut grid: Vec<usize> = (0..n_points)
        .map(|i| {
            let x = top * i as f64 / (n_points - 1) as f64;
            (x.exp().round() as usize).clamp(1, n_max)
        })
        .collect();
    grid.sort_unstable();
    grid.dedup();
    grid
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn cmd_fidelity(a: FidelityArgs) -> Result<(), Error> {
    if a.n_max < 1 {
        return Err(Error::Domain("--n-max must be >= 1".into()));
    }
    let need_beta = || {
        a.beta
            .ok_or_else(|| Error::Domain("--beta is required for this noise family".into()))
    };
    let family = match a.noise {
        NoiseKind::Uncorrelated => ModelFamily::Uncorrelated { beta: need_beta()?, theta0: a.theta0 },
        NoiseKind::Quasistatic => ModelFamily::Quasistatic { beta: need_beta()?, theta0: a.theta0 },
        NoiseKind::Psd => ModelFamily::Psd { spec: a.psd.build()?, theta0: a.theta0 },
        NoiseKind::Custom => {
            let path = a
                .cov
                .as_ref()
                .ok_or_else(|| Error::Domain("--cov is required with --noise custom".into()))?;
            let model = noise::read_covariance_csv(BufReader::new(File::open(path)?))?;
            ModelFamily::Custom { model }
        }
    };
    let method = match a.method {
        MethodKind::Exact => CurveMethod::Exact,
        MethodKind::Bruteforce => CurveMethod::BruteForce,
        MethodKind::Det => CurveMethod::Determinant(ExpansionOrder::Leading),
        MethodKind::DetCorr => CurveMethod::Determinant(ExpansionOrder::WithCorrections),
        MethodKind::Mc => CurveMethod::MonteCarlo { samples: a.samples, seed: a.seed },
        MethodKind::Oracle => CurveMethod::Oracle,
    };
    let grid = n_grid(a.n_max, a.n_points);
    let points = partition::p0_curve(&family, &grid, &method)?;
    let mut out = open_out(&a.out)?;
    partition::write_curve_csv(&points, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_covariance(a: CovarianceArgs) -> Result<(), Error> {
    if a.n < 1 {
        return Err(Error::Domain("--n must be >= 1".into()));
    }
    let spec = a.psd.build()?;
    let model = noise::covariance_from_psd(&spec, a.n, a.theta0)?;
    let to_file = a.out.is_some();
    {
        let mut out = open_out(&a.out)?;
        noise::write_covariance_csv(&model, &mut out)?;
        out.flush()?;
    }
    let mut report: Box<dyn Write> = if to_file {
        Box::new(io::stdout())
    } else {
        Box::new(io::stderr())
    };
    if a.verify {
        let cov = model.covariance();
        let scale = cov.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
        let mut worst: f64 = 0.0;
        for i in 0..a.n {
            for j in 0..a.n {
                worst = worst.max((cov[(i, j)] - cov[(0, i.abs_diff(j))]).abs());
            }
        }
        let ok = worst <= 1e-12 * scale;
        writeln!(
            report,
            "toeplitz-check: {} (max deviation {:.3e} relative)",
            if ok { "pass" } else { "fail" },
            worst / scale
        )?;
        if !ok {
            return Err(Error::Numerical("covariance is not Toeplitz".into()));
        }
    }
    if a.diagnostics {
        let d = noise::diagnostics(&spec)?;
        let json = serde_json::json!({
            "beta": d.beta,
            "t2_star": d.t2_star,
            "alpha": d.alpha,
            "alpha_raw": d.alpha_raw,
        });
        writeln!(report, "{}", to_json(&json)?)?;
    }
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<(), Error> {
    let data: Vec<(usize, f64)> = match (&a.input, a.generate) {
        (Some(path), None) => {
            partition::read_curve_csv(BufReader::new(File::open(path)?))?
        }
        (None, Some(GenerateKind::Quasistatic)) => {
            let beta = a
                .beta
                .ok_or_else(|| Error::Domain("--beta is required with --generate".into()))?;
            let top = match (&a.scan, a.n_max) {
                (Some(s), _) => parse_usize_list(s)?.into_iter().max().unwrap_or(1),
                (None, Some(n)) => n,
                (None, None) => {
                    return Err(Error::Domain("--n-max (or --scan) is required".into()))
                }
            };
            fitting::generate_quasistatic_data(beta, top)?
        }
        _ => {
            return Err(Error::Domain(
                "exactly one of --input or --generate must be given".into(),
            ))
        }
    };
    let mut out = open_out(&a.out)?;
    if a.scenario == "linear" {
        let asymptote = a
            .asymptote
            .ok_or_else(|| Error::Domain("--asymptote is required with --scenario linear".into()))?;
        let eps_hat = fitting::fit_linear_short(&data, asymptote)?;
        let json = serde_json::json!({
            "scenario": "linear",
            "asymptote": asymptote,
            "epsilon_hat": eps_hat,
            "beta_hat": 3.0 * eps_hat,
        });
        writeln!(out, "{}", to_json(&json)?)?;
        out.flush()?;
        return Ok(());
    }
    let number: usize = a
        .scenario
        .parse()
        .map_err(|_| Error::Domain(format!("--scenario must be 1-4 or 'linear', got {}", a.scenario)))?;
    let scenario = FitScenario::numbered(number)?;
    let epsilon_of = |beta: Option<f64>| beta.map(|b| b / 3.0);
    // epsilon comes from --beta when given; otherwise it must be inferable
    let epsilon = epsilon_of(a.beta)
        .ok_or_else(|| Error::Domain("--beta is required to set the nominal epsilon".into()))?;
    if let Some(scan) = &a.scan {
        let ladder = parse_usize_list(scan)?;
        let reports: Result<Vec<_>, Error> = ladder
            .iter()
            .map(|&n_max| fitting::fit_exponential(&data, scenario, epsilon, n_max))
            .collect();
        writeln!(out, "{}", to_json(&reports?)?)?;
    } else {
        let n_max = a
            .n_max
            .ok_or_else(|| Error::Domain("--n-max is required without --scan".into()))?;
        let report = fitting::fit_exponential(&data, scenario, epsilon, n_max)?;
        writeln!(out, "{}", to_json(&report)?)?;
    }
    out.flush()?;
    Ok(())
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, Error> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::Domain(format!("bad integer '{t}': {e}")))
        })
        .collect()
}

fn cmd_verify_twirl(a: VerifyTwirlArgs) -> Result<(), Error> {
    let phases: Vec<f64> = match (&a.phases, a.theta) {
        (Some(list), _) => list
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Domain(format!("bad phase '{t}': {e}")))
            })
            .collect::<Result<_, _>>()?,
        (None, Some(theta)) => {
            if a.d != 2 {
                return Err(Error::Domain("--theta applies to d=2 only; use --phases".into()));
            }
            vec![theta / 2.0, -theta / 2.0]
        }
        (None, None) => return Err(Error::Domain("either --theta or --phases is required".into())),
    };
    let analytic = twirl::adjoint_scalar_d(a.d, &phases)?;
    let (estimate, stderr) = twirl::haar_verify(a.d, &phases, a.samples, a.seed)?;
    let sigmas = if stderr > 0.0 { (estimate - analytic).abs() / stderr } else { 0.0 };
    let pass = (estimate - analytic).abs() <= 4.0 * stderr.max(1e-15);
    let json = serde_json::json!({
        "d": a.d,
        "phases": phases,
        "samples": a.samples,
        "seed": a.seed,
        "analytic": analytic,
        "estimate": estimate,
        "stderr": stderr,
        "sigmas": sigmas,
        "pass": pass,
    });
    let mut out = open_out(&a.out)?;
    writeln!(out, "{}", to_json(&json)?)?;
    out.flush()?;
    if pass {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "Haar estimate {estimate:.6} deviates from analytic {analytic:.6} by {sigmas:.1} sigma"
        )))
    }
}

fn cmd_qudit(a: QuditArgs) -> Result<(), Error> {
    let model = qudit::read_qudit_model(BufReader::new(File::open(&a.model)?))?;
    let result = match a.method {
        QuditMethod::Bruteforce => qudit::p0_qudit_bruteforce(&model)?,
        QuditMethod::Mc => qudit::p0_qudit_montecarlo(&model, a.samples, a.seed)?,
    };
    let json = serde_json::json!({
        "d": model.d(),
        "n": model.n_intervals(),
        "method": result.method.to_string(),
        "p0": result.p0,
        "z": result.z,
        "error_estimate": result.error_estimate,
    });
    let mut out = open_out(&a.out)?;
    writeln!(out, "{}", to_json(&json)?)?;
    out.flush()?;
    Ok(())
}
