//! Command-line front end: argument parsing, problem documents, solver
//! dispatch and output.
//!
//! Every solver subcommand builds a [`ProblemDoc`], solves it, and writes an
//! [`OutputDoc`] holding the problem, the solution and its certificate. The
//! `check` subcommand recomputes the certificate from such a document.

pub mod docs;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use maxent::check::Certificate;
use maxent::circulant::{circulant_complete, sample_reciprocal, BlockCirculant, ReciprocalSpec};
use maxent::io::{self, MatrixJson, SpectrumJson};
use maxent::linalg::{CMat, HermMat};
use maxent::spectrum::SpectrumGrid;
use maxent::{bridge, burg, dempster, gibbs, moment, prior, Error};
use nalgebra::DMatrix;
use serde_json::{json, Value};

pub use docs::{OutputDoc, ProblemDoc};

/// Exit code for a converged run.
pub const EXIT_OK: i32 = 0;
/// Exit code for malformed or infeasible input.
pub const EXIT_INPUT: i32 = 1;
/// Exit code when the solver did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "maxent", version, about = "Maximum-entropy completion and spectral estimation solvers")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Convergence tolerance for solvers and certificates.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap; each solver has its own default.
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Frequency grid size (power of two).
    #[arg(long, global = true, env = "MAXENT_GRID", default_value_t = 4096)]
    grid: usize,
    /// Seed for sampling subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path; standard output when omitted.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Covariance selection: complete a partially specified covariance.
    Dempster {
        /// Problem document (JSON) or a path; replaces the individual inputs.
        #[arg(long)]
        problem: Option<String>,
        /// Dimension of the matrix.
        #[arg(long)]
        n: Option<usize>,
        /// Specified entries as JSON `[[i, j, value], ...]` (0-based), or a path.
        #[arg(long)]
        entries: Option<String>,
    },
    /// Maximum-entropy spectral extension of covariance lags.
    Burg {
        /// Problem document (JSON) or a path; replaces the individual inputs.
        #[arg(long)]
        problem: Option<String>,
        /// Lags `C_0..C_{n-1}` as a JSON array of numbers or matrices, or a path.
        #[arg(long)]
        lags: Option<String>,
        /// Indices of lags that are not specified.
        #[arg(long, value_delimiter = ',')]
        missing: Vec<usize>,
    },
    /// Maximum-entropy spectrum matching `Σ` through the filter bank `(A, B)`.
    Moment {
        /// Problem document (JSON) or a path; replaces the individual inputs.
        #[arg(long)]
        problem: Option<String>,
        /// State matrix `A` as JSON rows, or a path.
        #[arg(long = "A")]
        a: Option<String>,
        /// Input matrix `B` as JSON rows, or a path.
        #[arg(long = "B")]
        b: Option<String>,
        /// State covariance `Σ` as JSON rows, or a path.
        #[arg(long)]
        sigma: Option<String>,
    },
    /// Nevanlinna-Pick interpolation through the moment problem.
    Pick {
        /// Problem document (JSON) or a path; replaces the individual inputs.
        #[arg(long)]
        problem: Option<String>,
        /// Interpolation points as JSON `[[re, im], ...]`, or a path.
        #[arg(long)]
        points: Option<String>,
        /// Interpolation values as JSON `[[re, im], ...]`, or a path.
        #[arg(long)]
        values: Option<String>,
    },
    /// Structured state-covariance approximation.
    Covapprox {
        /// Problem document (JSON) or a path; replaces the individual inputs.
        #[arg(long)]
        problem: Option<String>,
        /// State matrix `A` as JSON rows, or a path.
        #[arg(long = "A")]
        a: Option<String>,
        /// Input matrix `B` as JSON rows, or a path.
        #[arg(long = "B")]
        b: Option<String>,
        /// Sample state covariance `Σ̂`.
        #[arg(long)]
        sigma: Option<String>,
        /// Input series CSV used to estimate `Σ̂` instead of `--sigma`.
        #[arg(long)]
        series: Option<PathBuf>,
        /// Samples discarded before accumulating the estimate.
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Spectrum closest to a prior in the Itakura-Saito sense.
    IsApprox(SpectralArgs),
    /// Spectrum closest to a prior in the Kullback-Leibler sense.
    KlApprox(SpectralArgs),
    /// Maximum-entropy block-circulant completion of a reciprocal process.
    Circulant {
        /// Problem document (JSON) or a path; replaces the individual inputs.
        #[arg(long)]
        problem: Option<String>,
        /// Circle length `N`.
        #[arg(long = "N")]
        circle_len: Option<usize>,
        /// Lags `Σ_0..Σ_n` as a JSON array of numbers or matrices, or a path.
        #[arg(long)]
        lags: Option<String>,
        /// First block row of a circulant prior.
        #[arg(long)]
        prior: Option<String>,
    },
    /// Draw sample paths from a circulant solution.
    CirculantSample {
        /// Output of the `circulant` subcommand.
        #[arg(long)]
        solution: PathBuf,
        /// Number of sample paths.
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Gibbs distribution matching feature expectations.
    Gibbs {
        /// Problem document (JSON) or a path; replaces the individual inputs.
        #[arg(long)]
        problem: Option<String>,
        /// Feature matrix `d x K` as JSON rows, or a path (JSON or CSV).
        #[arg(long)]
        features: Option<String>,
        /// Target expectations, JSON array or path.
        #[arg(long)]
        target: Option<String>,
        /// Base measure, JSON array or path; uniform when omitted.
        #[arg(long)]
        mu: Option<String>,
    },
    /// Boltzmann dice with a prescribed mean.
    Dice {
        /// Prescribed mean face value.
        #[arg(long)]
        mean: f64,
        /// Number of faces.
        #[arg(long, default_value_t = 6)]
        faces: usize,
    },
    /// Discrete Schrödinger bridge by Sinkhorn scaling.
    Bridge {
        /// Problem document (JSON) or a path; replaces the individual inputs.
        #[arg(long)]
        problem: Option<String>,
        /// Prior kernel `K x K`, JSON rows or path (JSON or CSV).
        #[arg(long)]
        kernel: Option<String>,
        /// Initial marginal, JSON array or path.
        #[arg(long)]
        rho0: Option<String>,
        /// Final marginal, JSON array or path.
        #[arg(long)]
        rho1: Option<String>,
        /// Use the heat kernel with this total time on a uniform grid.
        #[arg(long)]
        heat: Option<f64>,
        /// Left end of the heat-kernel grid.
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        grid_min: f64,
        /// Right end of the heat-kernel grid.
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        grid_max: f64,
        /// Number of heat-kernel grid points.
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Intermediate times for the marginal flow (heat kernel only).
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
        /// CSV file for the marginal flow.
        #[arg(long)]
        flow_output: Option<PathBuf>,
    },
    /// Recompute the certificate of a solution.
    Check {
        /// Problem document; defaults to the one embedded in the solution.
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Solver output (JSON), or a bare solution when `--problem` is given.
        #[arg(long)]
        solution: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SpectralArgs {
    /// Problem document (JSON) or a path; replaces the individual inputs.
    #[arg(long)]
    problem: Option<String>,
    /// State matrix `A` as JSON rows, or a path.
    #[arg(long = "A")]
    a: Option<String>,
    /// Input matrix `B` as JSON rows, or a path.
    #[arg(long = "B")]
    b: Option<String>,
    /// State covariance `Σ` as JSON rows, or a path.
    #[arg(long)]
    sigma: Option<String>,
    /// Prior spectrum as CSV (or a spectrum JSON document).
    #[arg(long)]
    prior: Option<PathBuf>,
}

/// Failure carrying its exit code.
struct Failure {
    code: i32,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        Self { code: exit_code(&error), error }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::MaxIterExceeded { .. } | Error::DualDiverged(_)) => EXIT_NOT_CONVERGED,
        _ => EXIT_INPUT,
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

fn execute(cli: Cli) -> Result<i32, Failure> {
    let g = cli.global;
    if !(g.tol > 0.0 && g.tol.is_finite()) {
        return Err(anyhow!("--tol must be positive, got {}", g.tol).into());
    }
    if !g.grid.is_power_of_two() || g.grid < 4 {
        return Err(anyhow!("--grid must be a power of two >= 4, got {}", g.grid).into());
    }
    match cli.command {
        Command::CirculantSample { solution, count } => circulant_sample(&g, &solution, count),
        Command::Check { problem, solution } => check(&g, problem.as_deref(), &solution),
        Command::Bridge { times, flow_output, heat, grid_min, grid_max, points, problem, kernel, rho0, rho1 } => {
            let doc = match heat {
                Some(t) => heat_problem(t, grid_min, grid_max, points, rho0.as_deref(), rho1.as_deref())?,
                None => match problem {
                    Some(p) => read_problem(&p)?,
                    None => ProblemDoc::Bridge {
                        kernel: read_rows(need(&kernel, "--kernel")?)?,
                        rho0: read_vec(need(&rho0, "--rho0")?)?,
                        rho1: read_vec(need(&rho1, "--rho1")?)?,
                    },
                },
            };
            let code = solve_and_emit(&g, doc.clone())?;
            if !times.is_empty() {
                let t = heat.ok_or_else(|| anyhow!("--times requires --heat"))?;
                write_flow(&g, &doc, t, grid_min, grid_max, points, &times, flow_output.as_deref())?;
            }
            Ok(code)
        }
        other => {
            let doc = build_problem(other)?;
            solve_and_emit(&g, doc)
        }
    }
}

fn need<'a>(v: &'a Option<String>, flag: &str) -> Result<&'a str> {
    v.as_deref().ok_or_else(|| anyhow!("missing required input {flag} (or pass --problem)"))
}

/// Reads an argument that is either inline JSON or a path to a file.
fn read_arg(arg: &str) -> Result<String> {
    let t = arg.trim_start();
    if t.starts_with('[') || t.starts_with('{') || t.parse::<f64>().is_ok() {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(arg).with_context(|| format!("cannot read {arg}"))
}

fn is_csv(arg: &str) -> bool {
    Path::new(arg).extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn json_value(arg: &str) -> Result<Value> {
    let text = read_arg(arg)?;
    serde_json::from_str(&text).with_context(|| format!("malformed JSON in {arg}"))
}

fn read_problem(arg: &str) -> Result<ProblemDoc> {
    let v = json_value(arg)?;
    let v = match v.get("problem") {
        Some(p) if v.get("type").is_none() => p.clone(),
        _ => v,
    };
    serde_json::from_value(v).with_context(|| format!("{arg} is not a valid problem document"))
}

/// Matrix from a CSV path, a matrix JSON object, nested rows or a number.
fn read_matrix(arg: &str) -> Result<MatrixJson> {
    if is_csv(arg) {
        let f = File::open(arg).with_context(|| format!("cannot open {arg}"))?;
        return Ok(MatrixJson::from_real(&io::read_matrix_csv(f).with_context(|| format!("reading {arg}"))?));
    }
    matrix_from_value(&json_value(arg)?).with_context(|| format!("reading matrix {arg}"))
}

fn matrix_from_value(v: &Value) -> Result<MatrixJson> {
    match v {
        Value::Number(x) => {
            let x = x.as_f64().ok_or_else(|| anyhow!("invalid number"))?;
            Ok(MatrixJson { n: Some(1), re: vec![vec![x]], im: None })
        }
        Value::Array(_) => {
            let re: Vec<Vec<f64>> = serde_json::from_value(v.clone()).context("expected an array of numeric rows")?;
            let m = docs::rows_to_matrix(&re, "matrix")?;
            Ok(MatrixJson::from_real(&m))
        }
        Value::Object(_) => Ok(serde_json::from_value(v.clone())?),
        _ => bail!("expected a matrix"),
    }
}

/// Sequence of blocks: numbers become `1x1` blocks.
fn read_blocks(arg: &str) -> Result<Vec<MatrixJson>> {
    let v = json_value(arg)?;
    let items = v.as_array().ok_or_else(|| anyhow!("{arg}: expected a JSON array of lags"))?;
    items
        .iter()
        .enumerate()
        .map(|(k, item)| matrix_from_value(item).with_context(|| format!("{arg}: entry {k}")))
        .collect()
}

fn read_vec(arg: &str) -> Result<Vec<f64>> {
    if is_csv(arg) {
        let f = File::open(arg).with_context(|| format!("cannot open {arg}"))?;
        return Ok(io::read_vector_csv(f).with_context(|| format!("reading {arg}"))?.iter().copied().collect());
    }
    serde_json::from_value(json_value(arg)?).with_context(|| format!("{arg}: expected an array of numbers"))
}

fn read_rows(arg: &str) -> Result<Vec<Vec<f64>>> {
    let m = read_matrix(arg)?.to_real()?;
    Ok(docs::matrix_to_rows(&m))
}

fn read_pairs(arg: &str) -> Result<Vec<[f64; 2]>> {
    serde_json::from_value(json_value(arg)?).with_context(|| format!("{arg}: expected [[re, im], ...]"))
}

fn read_spectrum(path: &Path) -> Result<SpectrumJson> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        return serde_json::from_reader(f).with_context(|| format!("{} is not a spectrum document", path.display()));
    }
    let grid = io::read_spectrum_csv(f).with_context(|| format!("reading {}", path.display()))?;
    Ok(SpectrumJson::from_grid(&grid))
}

fn build_problem(cmd: Command) -> Result<ProblemDoc> {
    use Command as C;
    let from = |p: &Option<String>| p.as_deref().map(read_problem).transpose();
    Ok(match cmd {
        C::Dempster { problem, n, entries } => match from(&problem)? {
            Some(d) => d,
            None => ProblemDoc::Dempster {
                n: n.ok_or_else(|| anyhow!("missing required input --n (or pass --problem)"))?,
                entries: serde_json::from_value(json_value(need(&entries, "--entries")?)?)
                    .context("--entries: expected [[i, j, value], ...]")?,
            },
        },
        C::Burg { problem, lags, missing } => match from(&problem)? {
            Some(d) => d,
            None => ProblemDoc::Burg { lags: read_blocks(need(&lags, "--lags")?)?, missing },
        },
        C::Moment { problem, a, b, sigma } => match from(&problem)? {
            Some(d) => d,
            None => ProblemDoc::Moment {
                a: read_matrix(need(&a, "--A")?)?,
                b: read_matrix(need(&b, "--B")?)?,
                sigma: read_matrix(need(&sigma, "--sigma")?)?,
            },
        },
        C::Pick { problem, points, values } => match from(&problem)? {
            Some(d) => d,
            None => ProblemDoc::Pick {
                points: read_pairs(need(&points, "--points")?)?,
                values: read_pairs(need(&values, "--values")?)?,
            },
        },
        C::Covapprox { problem, a, b, sigma, series, burn_in } => match from(&problem)? {
            Some(d) => d,
            None => {
                let a = read_matrix(need(&a, "--A")?)?;
                let b = read_matrix(need(&b, "--B")?)?;
                let sigma_hat = match (&sigma, &series) {
                    (Some(s), None) => read_matrix(s)?,
                    (None, Some(path)) => {
                        let fb = docs::filter_bank(&a, &b)?;
                        let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
                        let y = io::read_series_csv(f).with_context(|| format!("reading {}", path.display()))?;
                        let burn = burn_in.unwrap_or_else(|| prior::default_burn_in(&fb));
                        MatrixJson::from_cmat(prior::sample_covariance(&fb, &y, burn)?.as_matrix())
                    }
                    _ => bail!("pass exactly one of --sigma and --series"),
                };
                ProblemDoc::Covapprox { a, b, sigma_hat }
            }
        },
        C::IsApprox(s) | C::KlApprox(s) if s.problem.is_some() => read_problem(s.problem.as_deref().unwrap_or_default())?,
        C::IsApprox(s) => {
            let (a, b, sigma, prior) = spectral_inputs(&s)?;
            ProblemDoc::IsApprox { a, b, sigma, prior }
        }
        C::KlApprox(s) => {
            let (a, b, sigma, prior) = spectral_inputs(&s)?;
            ProblemDoc::KlApprox { a, b, sigma, prior }
        }
        C::Circulant { problem, circle_len, lags, prior } => match from(&problem)? {
            Some(d) => d,
            None => ProblemDoc::Circulant {
                circle_len: circle_len.ok_or_else(|| anyhow!("missing required input --N (or pass --problem)"))?,
                lags: read_blocks(need(&lags, "--lags")?)?,
                prior: prior.as_deref().map(read_blocks).transpose()?,
            },
        },
        C::Gibbs { problem, features, target, mu } => match from(&problem)? {
            Some(d) => d,
            None => {
                let features = read_rows(need(&features, "--features")?)?;
                let k = features.first().map_or(0, Vec::len);
                let mu = match &mu {
                    Some(m) => read_vec(m)?,
                    None => vec![1.0; k],
                };
                ProblemDoc::Gibbs { features, target: read_vec(need(&target, "--target")?)?, mu }
            }
        },
        C::Dice { mean, faces } => ProblemDoc::Gibbs {
            features: vec![(1..=faces).map(|k| k as f64).collect()],
            target: vec![mean],
            mu: vec![1.0; faces],
        },
        C::Bridge { .. } | C::CirculantSample { .. } | C::Check { .. } => unreachable!("handled by the caller"),
    })
}

fn spectral_inputs(s: &SpectralArgs) -> Result<(MatrixJson, MatrixJson, MatrixJson, SpectrumJson)> {
    let prior = s.prior.as_deref().ok_or_else(|| anyhow!("missing required input --prior (or pass --problem)"))?;
    Ok((
        read_matrix(need(&s.a, "--A")?)?,
        read_matrix(need(&s.b, "--B")?)?,
        read_matrix(need(&s.sigma, "--sigma")?)?,
        read_spectrum(prior)?,
    ))
}

fn heat_problem(t: f64, lo: f64, hi: f64, points: usize, rho0: Option<&str>, rho1: Option<&str>) -> Result<ProblemDoc> {
    let grid = bridge::uniform_grid(lo, hi, points);
    let kernel = bridge::heat_kernel(&grid, t)?;
    let rho = |v: Option<&str>, flag: &str| -> Result<Vec<f64>> {
        read_vec(v.ok_or_else(|| anyhow!("missing required input {flag}"))?)
    };
    Ok(ProblemDoc::Bridge { kernel: docs::matrix_to_rows(&kernel), rho0: rho(rho0, "--rho0")?, rho1: rho(rho1, "--rho1")? })
}

fn herm_json(m: &HermMat<f64>) -> MatrixJson {
    MatrixJson::from_cmat(m.as_matrix())
}

fn blocks_json(b: &[CMat<f64>]) -> Vec<MatrixJson> {
    b.iter().map(MatrixJson::from_cmat).collect()
}

fn spectrum_json(phi: &SpectrumGrid<f64>) -> SpectrumJson {
    SpectrumJson::from_grid(phi)
}

fn max_iter(g: &Global, default: usize) -> usize {
    g.max_iter.unwrap_or(default)
}

/// Solves `doc`; the returned JSON is what [`ProblemDoc::certify`] reads.
pub fn solve(doc: &ProblemDoc, tol: f64, max_iter_override: Option<usize>, grid: usize) -> Result<Value> {
    let g = Global { tol, max_iter: max_iter_override, grid, seed: None, output: None, format: Format::Json };
    solve_with(doc, &g)
}

fn solve_with(doc: &ProblemDoc, g: &Global) -> Result<Value> {
    let tol = g.tol;
    Ok(match doc {
        ProblemDoc::Dempster { n, entries } => {
            let p = ProblemDoc::partial_cov(*n, entries)?;
            let c = dempster::complete(&p, tol, max_iter(g, dempster::DEFAULT_MAX_ITER))?;
            json!({ "sigma": herm_json(&c.sigma), "iterations": c.iterations })
        }
        ProblemDoc::Burg { lags, missing } => {
            let lags = lags.iter().map(|m| docs::cmat(m, "lag")).collect::<Result<Vec<_>>>()?;
            let c = burg::CovSequence::new(lags, missing)?;
            let (model, phi) = burg::burg_extend_with(&c, g.grid, tol.min(burg::DUAL_TOL), max_iter(g, burg::DUAL_MAX_ITER))?;
            json!({
                "spectrum": spectrum_json(&phi),
                "coeffs": blocks_json(&model.coeffs),
                "predictor": blocks_json(&model.predictor),
                "innovation": herm_json(&model.innovation),
            })
        }
        ProblemDoc::Moment { a, b, sigma } => {
            let fb = docs::filter_bank(a, b)?;
            let (phi, lambda) = moment::maxent_spectrum(&fb, &docs::herm(sigma, "Σ")?, g.grid)?;
            json!({ "spectrum": spectrum_json(&phi), "lambda": herm_json(&lambda) })
        }
        ProblemDoc::Pick { points, values } => {
            let pp = ProblemDoc::pick_problem(points, values)?;
            let (fb, sigma) = moment::pick_to_problem(&pp)?;
            let (phi, lambda) = moment::maxent_spectrum(&fb, &sigma, g.grid)?;
            let w = moment::recover_interpolants(&phi, pp.points())?;
            // the spectrum fixes the interpolant up to an imaginary constant
            let shift = values.first().map_or(0.0, |v| v[1] - w[0].im);
            let w: Vec<[f64; 2]> = w.iter().map(|z| [z.re, z.im + shift]).collect();
            json!({ "spectrum": spectrum_json(&phi), "lambda": herm_json(&lambda), "interpolants": w })
        }
        ProblemDoc::Covapprox { a, b, sigma_hat } => {
            let fb = docs::filter_bank(a, b)?;
            let c = prior::cov_approx(&fb, &docs::herm(sigma_hat, "Σ̂")?, tol, max_iter(g, prior::DEFAULT_MAX_ITER))?;
            json!({
                "sigma": herm_json(&c.sigma),
                "lambda": herm_json(&c.lambda),
                "lambda_fit_residual": c.lambda_fit_residual,
                "iterations": c.iterations,
            })
        }
        ProblemDoc::IsApprox { a, b, sigma, prior: psi } | ProblemDoc::KlApprox { a, b, sigma, prior: psi } => {
            let p = docs::spectral_problem(a, b, sigma, psi)?;
            let mi = max_iter(g, prior::DEFAULT_MAX_ITER);
            let s = match doc {
                ProblemDoc::IsApprox { .. } => prior::is_spectral_solve(&p, tol, mi)?,
                _ => prior::kl_spectral_solve(&p, tol, mi)?,
            };
            json!({ "spectrum": spectrum_json(&s.phi), "lambda": herm_json(&s.lambda), "iterations": s.iterations })
        }
        ProblemDoc::MatrixPrior { prior: n, offset, basis } => {
            let dim = docs::herm(offset, "offset")?.dim();
            let basis = basis.iter().map(|m| docs::herm(m, "basis element")).collect::<Result<Vec<_>>>()?;
            let w = maxent::AffineProblem::new(docs::herm(offset, "offset")?, maxent::SubspaceBasis::new(dim, basis)?)?;
            let p = prior::MatrixPriorProblem::new(docs::herm(n, "prior")?, w)?;
            let s = prior::matrix_prior_solve(&p, tol, max_iter(g, prior::DEFAULT_MAX_ITER))?;
            json!({ "sigma": herm_json(&s.m), "iterations": s.iterations })
        }
        ProblemDoc::Circulant { circle_len, lags, prior: p } => {
            let spec = ReciprocalSpec::new(*circle_len, docs::circulant_rows(lags, "lag")?)?;
            let p = match p {
                Some(r) => Some(BlockCirculant::new(spec.block_dim(), docs::circulant_rows(r, "prior row")?)?),
                None => None,
            };
            let s = circulant_complete(&spec, p.as_ref(), tol, max_iter(g, maxent::circulant::DEFAULT_MAX_ITER))?;
            json!({
                "row": blocks_json(s.sigma.first_block_row()),
                "params": blocks_json(&s.params),
                "iterations": s.iterations,
            })
        }
        ProblemDoc::Gibbs { features, target, mu } => {
            let fp = docs::feature_problem(features, target, mu)?;
            let f = gibbs::fit(&fp, tol.min(gibbs::DEFAULT_TOL), max_iter(g, gibbs::DEFAULT_MAX_ITER))?;
            json!({
                "p": f.p.values(),
                "theta": f.theta.as_slice(),
                "lambda": f.lambda().as_slice(),
                "normalizer": f.normalizer,
                "iterations": f.iterations,
                "dual_history": f.dual_history,
            })
        }
        ProblemDoc::Bridge { kernel, rho0, rho1 } => {
            let bp = docs::bridge_problem(kernel, rho0, rho1)?;
            let s = bridge::solve_bridge(&bp, tol.min(bridge::DEFAULT_TOL), max_iter(g, bridge::DEFAULT_MAX_ITER))?;
            json!({
                "phi_hat0": s.phi_hat0.as_slice(),
                "phi1": s.phi1.as_slice(),
                "joint": docs::matrix_to_rows(&s.joint),
                "iterations": s.iterations,
                "residuals": s.residuals,
            })
        }
    })
}

fn failed_certificate() -> Certificate {
    Certificate {
        constraint_residual: f64::INFINITY,
        orthogonality_residual: f64::INFINITY,
        objective_value: f64::NAN,
        iterations: 0,
        converged: false,
    }
}

fn solve_and_emit(g: &Global, doc: ProblemDoc) -> Result<i32, Failure> {
    let solution = match solve_with(&doc, g) {
        Ok(s) => s,
        Err(e) if exit_code(&e) == EXIT_NOT_CONVERGED => {
            eprintln!("error: {e:#}");
            let iterations = match e.downcast_ref::<Error>() {
                Some(Error::MaxIterExceeded { iterations, .. }) => *iterations,
                _ => 0,
            };
            let out = OutputDoc {
                problem: doc,
                solution: None,
                error: Some(format!("{e:#}")),
                certificate: failed_certificate().with_iterations(iterations),
            };
            write_json(g, &serde_json::to_value(&out)?)?;
            return Ok(EXIT_NOT_CONVERGED);
        }
        Err(e) => return Err(e.into()),
    };
    let certificate = doc.certify(&solution, g.tol)?;
    let code = if certificate.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
    if code != EXIT_OK {
        eprintln!(
            "warning: certificate not within tolerance (constraint {:.3e}, orthogonality {:.3e})",
            certificate.constraint_residual, certificate.orthogonality_residual
        );
    }
    match g.format {
        Format::Json => {
            let out = OutputDoc { problem: doc, solution: Some(solution), error: None, certificate };
            write_json(g, &serde_json::to_value(&out)?)?;
        }
        Format::Csv => {
            write_csv(g, &doc, &solution)?;
            eprintln!("{}", serde_json::to_string(&certificate)?);
        }
    }
    Ok(code)
}

fn sink(g: &Global) -> Result<Box<dyn Write>> {
    Ok(match &g.output {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json(g: &Global, v: &Value) -> Result<()> {
    let mut w = sink(g)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_csv(g: &Global, doc: &ProblemDoc, solution: &Value) -> Result<()> {
    let w = sink(g)?;
    if let Some(s) = solution.get("spectrum") {
        let s: SpectrumJson = serde_json::from_value(s.clone())?;
        io::write_spectrum_csv(w, &s.to_grid()?)?;
    } else if let Some(s) = solution.get("sigma") {
        let m: MatrixJson = serde_json::from_value(s.clone())?;
        io::write_matrix_csv(w, None, &real_part(&m)?)?;
    } else if let Some(p) = solution.get("p") {
        let p: Vec<f64> = serde_json::from_value(p.clone())?;
        io::write_matrix_csv(w, Some(&["p"]), &DMatrix::from_column_slice(p.len(), 1, &p))?;
    } else if let Some(q) = solution.get("joint") {
        let q: Vec<Vec<f64>> = serde_json::from_value(q.clone())?;
        io::write_matrix_csv(w, None, &docs::rows_to_matrix(&q, "joint")?)?;
    } else if let (ProblemDoc::Circulant { .. }, Some(r)) = (doc, solution.get("row")) {
        let rows: Vec<MatrixJson> = serde_json::from_value(r.clone())?;
        let m = rows[0].to_cmat()?.nrows();
        let sigma = BlockCirculant::new(m, docs::circulant_rows(&rows, "row")?)?;
        io::write_matrix_csv(w, None, &real_part(&herm_json(&sigma.materialize()))?)?;
    } else {
        bail!("no CSV form for this solution");
    }
    Ok(())
}

/// Real part of `m`; imaginary parts at roundoff level are dropped.
fn real_part(m: &MatrixJson) -> Result<DMatrix<f64>> {
    let c = m.to_cmat()?;
    let re_max = c.iter().fold(0.0f64, |a, z| a.max(z.re.abs()));
    let im_max = c.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    if im_max > 1e-12 * re_max.max(1.0) {
        bail!("CSV output supports real matrices only; use --format json");
    }
    Ok(c.map(|z| z.re))
}

fn check(g: &Global, problem: Option<&Path>, solution: &Path) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(solution).with_context(|| format!("cannot read {}", solution.display()))?;
    let doc: Value = serde_json::from_str(&text).with_context(|| format!("malformed JSON in {}", solution.display()))?;
    let problem = match problem {
        Some(p) => read_problem(&p.to_string_lossy())?,
        None => {
            let p = doc.get("problem").ok_or_else(|| anyhow!("solution has no embedded problem; pass --problem"))?;
            serde_json::from_value(p.clone()).context("embedded problem is not valid")?
        }
    };
    let sol = doc.get("solution").unwrap_or(&doc);
    if sol.is_null() {
        return Err(anyhow!("document holds no solution").into());
    }
    let cert = problem.certify(sol, g.tol)?;
    write_json(g, &serde_json::to_value(&cert)?)?;
    Ok(if cert.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn circulant_sample(g: &Global, path: &Path, count: usize) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let doc: OutputDoc = serde_json::from_str(&text).with_context(|| format!("{} is not a solver output", path.display()))?;
    let (ProblemDoc::Circulant { lags, .. }, Some(sol)) = (&doc.problem, &doc.solution) else {
        return Err(anyhow!("{} does not hold a circulant solution", path.display()).into());
    };
    let rows: Vec<MatrixJson> = serde_json::from_value(sol.get("row").cloned().unwrap_or(Value::Null)).context("reading \"row\"")?;
    let m = docs::cmat(&lags[0], "lag")?.nrows();
    let sigma = BlockCirculant::new(m, docs::circulant_rows(&rows, "row")?)?;
    let paths = sample_reciprocal(&sigma, count, g.seed.unwrap_or(0))?;
    let mut w = sink(g)?;
    match g.format {
        Format::Json => {
            let v: Vec<Vec<Vec<[f64; 2]>>> =
                paths.iter().map(|p| p.iter().map(|x| x.iter().map(|z| [z.re, z.im]).collect()).collect()).collect();
            serde_json::to_writer_pretty(&mut w, &json!({ "seed": g.seed.unwrap_or(0), "samples": v }))?;
            writeln!(w)?;
        }
        Format::Csv => {
            writeln!(w, "sample,t,component,re,im")?;
            for (s, p) in paths.iter().enumerate() {
                for (t, x) in p.iter().enumerate() {
                    for (c, z) in x.iter().enumerate() {
                        writeln!(w, "{s},{t},{c},{:.16e},{:.16e}", z.re, z.im)?;
                    }
                }
            }
        }
    }
    w.flush().map_err(anyhow::Error::from)?;
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn write_flow(
    g: &Global,
    doc: &ProblemDoc,
    total: f64,
    lo: f64,
    hi: f64,
    points: usize,
    times: &[f64],
    out: Option<&Path>,
) -> Result<()> {
    let ProblemDoc::Bridge { kernel, rho0, rho1 } = doc else { unreachable!() };
    let bp = docs::bridge_problem(kernel, rho0, rho1)?;
    let s = bridge::solve_bridge(&bp, g.tol.min(bridge::DEFAULT_TOL), max_iter(g, bridge::DEFAULT_MAX_ITER))?;
    let grid = bridge::uniform_grid(lo, hi, points);
    let splits = bridge::heat_splits(&grid, total, times)?;
    let flow = bridge::bridge_marginal_flow(&bp, &s, &splits)?;
    let path = out.ok_or_else(|| anyhow!("--times requires --flow-output"))?;
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    writeln!(w, "t,x,density")?;
    for (t, rho) in times.iter().zip(&flow) {
        for (x, r) in grid.iter().zip(rho.iter()) {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", t, x, r)?;
        }
    }
    w.flush()?;
    Ok(())
}
