//! `spherical-calabi` command line.
//!
//! Exit codes: 0 valid / feasible / converged, 1 negative verdict (invalid
//! complex, infeasible prescription, numerical failure), 2 parse or usage
//! error, 3 diverged, 4 budget exhausted.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::complex::Violation;
use crate::error::Error;
use crate::flow::{self, FlowConfig, FlowMethod, Integrator, Verdict, NEWTON_MAX_ITERS};
use crate::instance::{format_float, Instance};
use crate::oracle::CounterRng;
use crate::report::{feasibility_text, sha256_hex, solution_toml, write_trace, RunInfo};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "spherical-calabi", version, about = "Ideal circle patterns via combinatorial Calabi flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the complex and prescription of an instance file.
    Validate { path: PathBuf },
    /// Decide whether the prescription is attainable.
    Check { path: PathBuf },
    /// Run a flow. PATH may be a directory of *.toml instances, in which
    /// case --trace and --solution name output directories.
    Solve(SolveArgs),
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    path: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Calabi)]
    method: MethodArg,
    #[arg(long, value_enum)]
    integrator: Option<IntegratorArg>,
    /// Initial (rkf45) or fixed (rk4) step size.
    #[arg(long)]
    step: Option<f64>,
    /// Convergence threshold on max |L - L_hat|.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Add cone angles at vertices and face centers to the solution.
    #[arg(long)]
    report_geometry: bool,
    /// Start from K drawn uniformly from [-1, 1] with this seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Calabi,
    Curvature,
    Newton,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum IntegratorArg {
    Rk4,
    Rkf45,
}

/// Captured result of one command.
struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Outcome {
    fn new() -> Self {
        Self {
            code: EXIT_OK,
            stdout: String::new(),
            stderr: String::new(),
        }
    }

    fn fail(mut self, code: i32, msg: impl std::fmt::Display) -> Self {
        self.code = code;
        let _ = writeln!(self.stderr, "error: {msg}");
        self
    }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::Size { .. } => EXIT_USAGE,
        _ => EXIT_NEGATIVE,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let out = match cli.command {
        Command::Validate { path } => single(&path, validate),
        Command::Check { path } => single(&path, check),
        Command::Solve(args) => solve_entry(&args),
    };
    let _ = stdout.write_all(out.stdout.as_bytes());
    let _ = stderr.write_all(out.stderr.as_bytes());
    out.code
}

fn single(path: &Path, cmd: fn(&Instance) -> Outcome) -> Outcome {
    if path.is_dir() {
        return Outcome::new().fail(
            EXIT_USAGE,
            format!("{} is a directory; only solve accepts directories", path.display()),
        );
    }
    match Instance::read(path) {
        Ok((inst, _)) => cmd(&inst),
        Err(e) => Outcome::new().fail(error_code(&e), e),
    }
}

fn describe(inst: &Instance, v: &Violation) -> String {
    let edge = |e: &usize| format!("'{}'", inst.edge_names[*e]);
    match v {
        Violation::Loop { edge: e } => format!("edge {} is a loop", edge(e)),
        Violation::EdgeCoverage { edge: e, count } => {
            format!("edge {} covered {count} times by face walks (expected 2)", edge(e))
        }
        Violation::PhiOutOfRange { edge: e, phi } => format!(
            "edge {} has intersection angle {} outside (0, pi/2]",
            edge(e),
            format_float(*phi)
        ),
        other => other.to_string(),
    }
}

fn validate(inst: &Instance) -> Outcome {
    let mut out = Outcome::new();
    let report = inst.complex.validate();
    let mut problems: Vec<String> = report.violations.iter().map(|v| describe(inst, v)).collect();
    if let Some(lhat) = &inst.lhat {
        for (name, x) in inst.vertex_names.iter().zip(lhat) {
            if !(x.is_finite() && *x > 0.0) {
                problems.push(format!(
                    "prescription at '{name}' is {}, must be positive",
                    format_float(*x)
                ));
            }
        }
    }
    if let Err(e) = inst.initial_k() {
        problems.push(format!("initial radii: {e}"));
    }
    if problems.is_empty() {
        let _ = writeln!(out.stdout, "valid, chi={}", report.euler_characteristic);
    } else {
        out.code = EXIT_NEGATIVE;
        let _ = writeln!(out.stdout, "invalid");
        for p in problems {
            let _ = writeln!(out.stdout, "  - {p}");
        }
    }
    out
}

/// Validates and returns the prescription, or the outcome to report.
fn prepare(inst: &Instance) -> Result<crate::complex::Prescription<f64>, Outcome> {
    let checked = validate(inst);
    if checked.code != EXIT_OK {
        let mut out = checked;
        out.stderr.push_str("error: instance is invalid\n");
        return Err(out);
    }
    inst.prescription()
        .map_err(|e| Outcome::new().fail(error_code(&e), e))
}

fn check(inst: &Instance) -> Outcome {
    let lhat = match prepare(inst) {
        Ok(l) => l,
        Err(out) => return out,
    };
    let mut out = Outcome::new();
    match flow::certify(&inst.complex, &lhat) {
        Ok(v) => {
            out.stdout = feasibility_text(inst, &v);
            if !v.feasible {
                out.code = EXIT_NEGATIVE;
            }
            out
        }
        Err(e) => out.fail(error_code(&e), e),
    }
}

fn config_for(args: &SolveArgs) -> Result<FlowConfig<f64>, String> {
    let mut c = FlowConfig {
        method: match args.method {
            MethodArg::Calabi => FlowMethod::Calabi,
            MethodArg::Curvature => FlowMethod::Curvature,
            MethodArg::Newton => FlowMethod::Newton,
        },
        ..FlowConfig::default()
    };
    if c.method == FlowMethod::Newton {
        if args.integrator.is_some() || args.step.is_some() || args.max_time.is_some() {
            return Err("--integrator, --step and --max-time do not apply to --method newton".into());
        }
        c.max_iters = NEWTON_MAX_ITERS;
    }
    if let Some(i) = args.integrator {
        c.integrator = match i {
            IntegratorArg::Rk4 => Integrator::Rk4,
            IntegratorArg::Rkf45 => Integrator::Rkf45,
        };
    }
    if let Some(h) = args.step {
        c.step = h;
    }
    if let Some(t) = args.tol {
        c.tol_curvature = t;
    }
    if let Some(t) = args.max_time {
        c.max_time = t;
    }
    c.validate().map_err(|e| e.to_string())?;
    if let (Some(a), Some(b)) = (&args.trace, &args.solution) {
        if a == b {
            return Err("--trace and --solution name the same file".into());
        }
    }
    Ok(c)
}

fn solve_entry(args: &SolveArgs) -> Outcome {
    let config = match config_for(args) {
        Ok(c) => c,
        Err(msg) => return Outcome::new().fail(EXIT_USAGE, msg),
    };
    if !args.path.is_dir() {
        return solve_file(&args.path, args, &config, args.trace.clone(), args.solution.clone());
    }

    let mut files: Vec<PathBuf> = match std::fs::read_dir(&args.path) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect(),
        Err(e) => return Outcome::new().fail(EXIT_USAGE, format!("{}: {e}", args.path.display())),
    };
    files.sort();
    for dir in [&args.trace, &args.solution].into_iter().flatten() {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return Outcome::new().fail(EXIT_USAGE, format!("{}: {e}", dir.display()));
        }
    }
    let results: Vec<Outcome> = files
        .par_iter()
        .map(|f| {
            let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let trace = args.trace.as_ref().map(|d| d.join(format!("{stem}.trace.csv")));
            let solution = args.solution.as_ref().map(|d| d.join(format!("{stem}.solution.toml")));
            solve_file(f, args, &config, trace, solution)
        })
        .collect();
    let mut out = Outcome::new();
    for (f, r) in files.iter().zip(results) {
        let _ = writeln!(out.stdout, "== {} (exit {})", f.display(), r.code);
        out.stdout.push_str(&r.stdout);
        out.stderr.push_str(&r.stderr);
        out.code = out.code.max(r.code);
    }
    out
}

fn solve_file(
    path: &Path,
    args: &SolveArgs,
    config: &FlowConfig<f64>,
    trace_path: Option<PathBuf>,
    solution_path: Option<PathBuf>,
) -> Outcome {
    let (inst, bytes) = match Instance::read(path) {
        Ok(x) => x,
        Err(e) => return Outcome::new().fail(error_code(&e), e),
    };
    let lhat = match prepare(&inst) {
        Ok(l) => l,
        Err(out) => return out,
    };
    let n = inst.complex.n_vertices();
    let k0 = match (inst.initial_k(), args.seed) {
        (Ok(Some(_)), Some(_)) => {
            return Outcome::new().fail(EXIT_USAGE, "--seed conflicts with the instance's [initial] section")
        }
        (Ok(Some(k)), None) => k,
        (Ok(None), Some(seed)) => CounterRng::new(seed).uniform_vec(n, -1.0, 1.0),
        (Ok(None), None) => vec![0.0; n],
        (Err(e), _) => return Outcome::new().fail(EXIT_NEGATIVE, e),
    };

    let mut out = Outcome::new();
    let trace = match flow::run(&inst.complex, &lhat, &k0, config) {
        Ok(t) => t,
        Err(failure) => {
            out = out.fail(error_code(&failure.error), &failure.error);
            failure.partial
        }
    };
    let digest = sha256_hex(&bytes);
    let info = RunInfo {
        digest: &digest,
        config,
        seed: args.seed,
    };
    if let Some(p) = &trace_path {
        let written = std::fs::File::create(p)
            .map_err(|e| e.to_string())
            .and_then(|f| {
                write_trace(std::io::BufWriter::new(f), &inst, &info, &trace).map_err(|e| e.to_string())
            });
        if let Err(e) = written {
            return out.fail(EXIT_USAGE, format!("{}: {e}", p.display()));
        }
    }
    if out.code != EXIT_OK {
        return out;
    }

    let last = trace.last().expect("successful runs record the start");
    let _ = writeln!(out.stdout, "{}", trace.verdict);
    let _ = writeln!(out.stdout, "steps: {}", trace.samples.len() - 1);
    let _ = writeln!(out.stdout, "t: {}", format_float(last.t));
    let _ = writeln!(out.stdout, "residual: {}", format_float(last.residual));
    if let Some(f) = trace.fitted_rate {
        let _ = writeln!(
            out.stdout,
            "fitted_rate: {} (r_squared {})",
            format_float(f.slope),
            format_float(f.r_squared)
        );
    }
    if let Some(c) = &trace.certificate {
        out.stdout.push_str(&feasibility_text(&inst, c));
    }
    if let Some(p) = &solution_path {
        let doc = match solution_toml(&inst, lhat.values(), &trace, args.report_geometry) {
            Ok(d) => d,
            Err(e) => return out.fail(EXIT_NEGATIVE, e),
        };
        if let Err(e) = std::fs::write(p, doc) {
            return out.fail(EXIT_USAGE, format!("{}: {e}", p.display()));
        }
    }
    out.code = match trace.verdict {
        Verdict::Converged => EXIT_OK,
        Verdict::Diverged => EXIT_DIVERGED,
        Verdict::BudgetExhausted => EXIT_BUDGET,
    };
    out
}
