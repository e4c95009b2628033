//! Batch front door for the chaoskit library: verification suites, the
//! fourth-moment sequence diagnostic, and drift-estimation experiments,
//! all emitting machine-readable reports.
//!
//! Exit codes: 0 every assertion passed, 1 an assertion failed,
//! 2 usage or configuration error. Reports are JSON with a stable key
//! order; identical config and seed produce byte-identical reports
//! (apart from the `wall_time` field) at any worker count. Per-replica
//! and per-kernel tabular data goes to CSV via `--out`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use chaoskit::hermite::poly_j;
use chaoskit::moments::{fmt_diagnostic, FmtReport};
use chaoskit::process::{drift_experiment, DriftSummary, GridSpec, OUModel};
use chaoskit::tensor::Kernel;

pub mod config;
pub mod suites;

use config::{parse_config, Resolver};
use suites::{run_cases, suite_case, CaseResult, CASES_PER_SUITE, SUITES};

const DEFAULT_TOL: f64 = 1e-10;
const DEFAULT_SAMPLES: usize = 10_000;
const DEFAULT_REPLICAS: usize = 100;

#[derive(Parser)]
#[command(
    name = "chaoskit",
    version,
    about = "Chaos-calculus verification suites, diagnostics, and estimation experiments"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Base seed; required by every stochastic command
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count for suite execution
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Artifact path: JSON report for verify, CSV table for fmt/ou
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tolerance override for suite assertions
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// key=value config file consulted for any missing option
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print or evaluate a two-index Hermite polynomial
    Hermite {
        /// Holomorphic index
        #[arg(long)]
        m: Option<usize>,
        /// Antiholomorphic index
        #[arg(long)]
        n: Option<usize>,
        /// Evaluation point "re,im"; prints the value instead of the polynomial
        #[arg(long)]
        z: Option<String>,
        /// Variance parameter used when evaluating (default 1)
        #[arg(long)]
        rho: Option<f64>,
        /// Emit a JSON object instead of plain text
        #[arg(long)]
        json: bool,
    },
    /// Run a named invariant suite and report per-case errors
    Verify {
        /// One of: product, stroock, humeyer, ou, wick, independence
        #[arg(long)]
        suite: Option<String>,
    },
    /// Fourth-moment diagnostic over a kernel sequence fixture
    Fmt {
        /// JSON file holding an array of kernel objects
        #[arg(long)]
        sequence: Option<PathBuf>,
        /// Monte Carlo sample count for the normality statistic
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Drift-estimation experiment for the complex OU process
    Ou {
        /// Drift restoring rate (real part), must be positive
        #[arg(long)]
        lambda: Option<f64>,
        /// Drift rotation rate (imaginary part)
        #[arg(long)]
        omega: Option<f64>,
        /// Diffusion scale
        #[arg(long)]
        a: Option<f64>,
        /// Hurst index of the driving noise, in [0.5, 0.75)
        #[arg(long)]
        hurst: Option<f64>,
        /// Observation horizon
        #[arg(long = "T")]
        horizon: Option<f64>,
        /// Number of grid steps
        #[arg(long)]
        steps: Option<usize>,
        /// Number of independent replicas
        #[arg(long)]
        replicas: Option<usize>,
    },
}

/// Parse `text` as a JSON array of kernel fixture objects.
pub fn parse_kernel_sequence(text: &str) -> Result<Vec<Kernel>, String> {
    let values: Vec<Value> = serde_json::from_str(text)
        .map_err(|e| format!("sequence file is not a JSON array: {e}"))?;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| Kernel::from_json(&v.to_string()).map_err(|e| format!("kernel {i}: {e}")))
        .collect()
}

/// Parse "re,im" (or a bare real) into a finite complex number.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let s = s.trim();
    let part = |text: &str| -> Result<f64, String> {
        let v: f64 = text
            .trim()
            .parse()
            .map_err(|_| format!("cannot parse {text:?} as a number in {s:?}"))?;
        if !v.is_finite() {
            return Err(format!("component {text:?} of {s:?} is not finite"));
        }
        Ok(v)
    };
    match s.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(part(re)?, part(im)?)),
        None => Ok(Complex64::new(part(s)?, 0.0)),
    }
}

/// Entry point shared by the binary and the integration tests.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn execute(cli: Cli) -> Result<i32, String> {
    let file = match &cli.global.config {
        None => BTreeMap::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            parse_config(&text)?
        }
    };
    let r = Resolver::new(file);
    let out = match cli.global.out.clone() {
        Some(p) => Some(p),
        None => r.resolve::<String>(None, "out")?.map(PathBuf::from),
    };
    let workers = r.resolve_or(cli.global.workers, "workers", 1)?;
    if workers == 0 {
        return Err("worker count must be at least 1".into());
    }
    let tol = r.resolve_or(cli.global.tol, "tol", DEFAULT_TOL)?;
    let seed = r.resolve(cli.global.seed, "seed")?;

    match cli.command {
        Command::Hermite { m, n, z, rho, json } => {
            hermite_command(&r, m, n, z, rho, json, out.as_deref())
        }
        Command::Verify { suite } => {
            let seed = seed.ok_or("verify is stochastic: --seed is required")?;
            verify_command(&r, suite, seed, workers, tol, out.as_deref())
        }
        Command::Fmt { sequence, samples } => {
            let seed = seed.ok_or("fmt is stochastic: --seed is required")?;
            fmt_command(&r, sequence, samples, seed, out.as_deref())
        }
        Command::Ou {
            lambda,
            omega,
            a,
            hurst,
            horizon,
            steps,
            replicas,
        } => {
            let seed = seed.ok_or("ou is stochastic: --seed is required")?;
            ou_command(
                &r, lambda, omega, a, hurst, horizon, steps, replicas, seed,
                out.as_deref(),
            )
        }
    }
}

fn write_artifact(path: &std::path::Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents)
        .map_err(|e| format!("cannot write output {}: {e}", path.display()))
}

/// Print a line to stdout, tolerating a closed pipe (e.g. `| head`).
fn emit(text: &str) {
    use std::io::Write;
    let stdout = std::io::stdout();
    let _ = writeln!(stdout.lock(), "{text}");
}

fn hermite_command(
    r: &Resolver,
    m: Option<usize>,
    n: Option<usize>,
    z: Option<String>,
    rho: Option<f64>,
    json_flag: bool,
    out: Option<&std::path::Path>,
) -> Result<i32, String> {
    let m = r.require(m, "m")?;
    let n = r.require(n, "n")?;
    let z = r.resolve(z, "z")?.map(|s| parse_complex(&s)).transpose()?;
    let rho = r.resolve_or(rho, "rho", 1.0)?;
    let json_flag = json_flag || r.resolve_or(None, "json", false)?;
    if !rho.is_finite() {
        return Err(format!("rho must be finite, got {rho}"));
    }

    let poly = poly_j(m, n).map_err(|e| e.to_string())?;
    let value = z.map(|point| poly.eval(point, rho));

    let text = if json_flag {
        let mut doc = json!({
            "command": "hermite",
            "m": m,
            "n": n,
            "polynomial": poly.to_string(),
        });
        if let Some(v) = value {
            doc["rho"] = json!(rho);
            doc["z"] = json!({ "re": z.unwrap().re, "im": z.unwrap().im });
            doc["value"] = json!({ "re": v.re, "im": v.im });
        }
        serde_json::to_string_pretty(&doc).expect("report serializes")
    } else if let Some(v) = value {
        format!("{v}")
    } else {
        poly.to_string()
    };

    emit(&text);
    if let Some(path) = out {
        write_artifact(path, &format!("{text}\n"))?;
    }
    Ok(0)
}

/// The common report envelope: stable field order, `wall_time` last.
#[derive(Serialize)]
struct Report<E: Serialize> {
    command: &'static str,
    config: BTreeMap<&'static str, Value>,
    cases: usize,
    failures: Vec<String>,
    max_error: f64,
    #[serde(flatten)]
    extra: E,
    wall_time: f64,
}

fn print_report<E: Serialize>(report: &Report<E>) -> String {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    emit(&text);
    text
}

fn verify_command(
    r: &Resolver,
    suite: Option<String>,
    seed: u64,
    workers: usize,
    tol: f64,
    out: Option<&std::path::Path>,
) -> Result<i32, String> {
    let suite = r.resolve(suite, "suite")?.ok_or("verify needs --suite")?;
    if !SUITES.contains(&suite.as_str()) {
        return Err(format!(
            "unknown suite {suite:?}; valid suites: {}",
            SUITES.join(", ")
        ));
    }
    let start = Instant::now();
    let results: Vec<CaseResult> =
        run_cases(CASES_PER_SUITE, workers, |i| suite_case(&suite, seed, i));
    let max_error = results.iter().map(|c| c.error).fold(0.0f64, f64::max);
    let failures: Vec<String> = results
        .iter()
        .filter(|c| !(c.error <= tol))
        .map(|c| format!("{} (error {:.3e})", c.label, c.error))
        .collect();

    // The echo records what determines the result; the worker count
    // only affects scheduling, so it is deliberately absent — reports
    // must be byte-identical across `--workers` values.
    let mut config = BTreeMap::new();
    config.insert("seed", json!(seed));
    config.insert("suite", json!(suite));
    config.insert("tol", json!(tol));
    let exit = if failures.is_empty() { 0 } else { 1 };
    let report = Report {
        command: "verify",
        config,
        cases: CASES_PER_SUITE,
        failures,
        max_error,
        extra: json!({}),
        wall_time: start.elapsed().as_secs_f64(),
    };
    let text = print_report(&report);
    if let Some(path) = out {
        write_artifact(path, &text)?;
    }
    Ok(exit)
}

fn fmt_command(
    r: &Resolver,
    sequence: Option<PathBuf>,
    samples: Option<usize>,
    seed: u64,
    out: Option<&std::path::Path>,
) -> Result<i32, String> {
    let sequence = match sequence {
        Some(p) => p,
        None => PathBuf::from(r.require::<String>(None, "sequence")?),
    };
    let samples = r.resolve_or(samples, "samples", DEFAULT_SAMPLES)?;
    let text = std::fs::read_to_string(&sequence)
        .map_err(|e| format!("cannot read sequence {}: {e}", sequence.display()))?;
    let kernels = parse_kernel_sequence(&text)?;

    let start = Instant::now();
    let diag = fmt_diagnostic(&kernels, samples, seed).map_err(|e| e.to_string())?;

    if let Some(path) = out {
        write_artifact(path, &fmt_csv(&diag))?;
    }
    let mut config = BTreeMap::new();
    config.insert("samples", json!(samples));
    config.insert("seed", json!(seed));
    config.insert("sequence", json!(sequence.display().to_string()));
    let report = Report {
        command: "fmt",
        config,
        cases: diag.rows.len(),
        failures: Vec::new(),
        max_error: 0.0,
        extra: json!({ "report": diag }),
        wall_time: start.elapsed().as_secs_f64(),
    };
    print_report(&report);
    Ok(0)
}

fn fmt_csv(diag: &FmtReport) -> String {
    let mut out = String::from(
        "k,dim,second_moment,gap,unsym_sum,sym_sum,max_contraction,\
         var_grad,var_grad_bar,var_mixed,normality_distance\n",
    );
    for row in &diag.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.index,
            row.dim,
            row.second_moment,
            row.gap,
            row.unsym_sum,
            row.sym_sum,
            row.max_contraction,
            row.variances.var_grad,
            row.variances.var_grad_bar,
            row.variances.var_mixed,
            row.energy_distance
        )
        .expect("string write");
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn ou_command(
    r: &Resolver,
    lambda: Option<f64>,
    omega: Option<f64>,
    a: Option<f64>,
    hurst: Option<f64>,
    horizon: Option<f64>,
    steps: Option<usize>,
    replicas: Option<usize>,
    seed: u64,
    out: Option<&std::path::Path>,
) -> Result<i32, String> {
    let lambda = r.require(lambda, "lambda")?;
    let omega = r.resolve_or(omega, "omega", 0.0)?;
    let a = r.resolve_or(a, "a", 1.0)?;
    let hurst = r.resolve_or(hurst, "hurst", 0.5)?;
    let horizon = r.require(horizon, "T")?;
    let steps = r.require(steps, "steps")?;
    let replicas = r.resolve_or(replicas, "replicas", DEFAULT_REPLICAS)?;

    let model = OUModel::new(lambda, omega, a, hurst, Complex64::new(0.0, 0.0))
        .map_err(|e| e.to_string())?;
    let grid = GridSpec::new(horizon, steps).map_err(|e| e.to_string())?;

    let start = Instant::now();
    let summary = drift_experiment(&model, &grid, replicas, seed).map_err(|e| e.to_string())?;

    if let Some(path) = out {
        write_artifact(path, &ou_csv(&summary))?;
    }
    let mut config = BTreeMap::new();
    config.insert("T", json!(horizon));
    config.insert("a", json!(a));
    config.insert("hurst", json!(hurst));
    config.insert("lambda", json!(lambda));
    config.insert("omega", json!(omega));
    config.insert("replicas", json!(replicas));
    config.insert("seed", json!(seed));
    config.insert("steps", json!(steps));
    let report = Report {
        command: "ou",
        config,
        cases: replicas,
        failures: Vec::new(),
        max_error: summary.bias_abs,
        extra: json!({
            "summary": {
                "mean_gamma_hat_re": summary.mean_gamma_hat_re,
                "mean_gamma_hat_im": summary.mean_gamma_hat_im,
                "se_re": summary.se_re,
                "se_im": summary.se_im,
                "bias_abs": summary.bias_abs,
                "normality_distance": summary.normality_distance,
            }
        }),
        wall_time: start.elapsed().as_secs_f64(),
    };
    print_report(&report);
    Ok(0)
}

fn ou_csv(summary: &DriftSummary) -> String {
    let mut out = String::from("replica,gamma_hat_re,gamma_hat_im,sqrtT_error_re,sqrtT_error_im\n");
    for row in &summary.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.replica,
            row.gamma_hat_re,
            row.gamma_hat_im,
            row.sqrt_t_error_re,
            row.sqrt_t_error_im
        )
        .expect("string write");
    }
    out
}
