//! `msa` — validate manipulator models, compute their Cartesian stiffness and
//! solve end-effector load cases.
//!
//! Exit codes: 0 success, 1 validation errors, 2 unreadable or malformed
//! input, 3 mechanism / unbounded stiffness / failed residual gate,
//! 4 ill-conditioned under `--strict`, 5 singular stiffness in `--wrench`
//! mode, 6 usage errors.

mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use msa_core::assembly::{assemble, AssemblyError};
use msa_core::model::{parse_model, validate, ManipulatorModel, ValidationReport};
use msa_core::screw::{Twist, Wrench};
use msa_core::solver::{Analysis, ComplianceAnalysis, SolveError, SolveWarning, SolverOptions};
use serde::Serialize;

use report::*;

const EXIT_VALIDATION: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ILL_CONDITIONED: u8 = 4;
const EXIT_SINGULAR_STIFFNESS: u8 = 5;
const EXIT_USAGE: u8 = 6;

#[derive(Parser)]
#[command(name = "msa", version, about = "Matrix structural analysis of manipulator stiffness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and report the equation count.
    Validate {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        output: Format,
    },
    /// Compute the Cartesian stiffness matrix at the end effector.
    Stiffness {
        path: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve for the full state under an end-effector wrench or deflection.
    Solve {
        path: PathBuf,
        /// External wrench at the end effector: fx fy fz mx my mz.
        #[arg(
            long,
            num_args = 6,
            value_name = "W",
            allow_negative_numbers = true,
            conflicts_with = "deflection",
            required_unless_present = "deflection"
        )]
        wrench: Option<Vec<f64>>,
        /// Prescribed end-effector deflection: dx dy dz rx ry rz.
        #[arg(long, num_args = 6, value_name = "D", allow_negative_numbers = true)]
        deflection: Option<Vec<f64>>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    output: Format,
    /// Write the assembled system as Matrix Market files into this directory.
    #[arg(long, value_name = "DIR")]
    dump_system: Option<PathBuf>,
    /// Treat an ill-conditioned reduced system as an error.
    #[arg(long)]
    strict: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// A finished command: what to print and how to exit.
struct Outcome {
    code: u8,
    json: String,
    text: String,
    to_stderr: bool,
}

impl Outcome {
    fn ok<T: Serialize>(value: &T, text: String) -> Self {
        Self {
            code: 0,
            json: to_json(value),
            text,
            to_stderr: false,
        }
    }

    fn fail(code: u8, err: ErrorOutput) -> Self {
        Self {
            code,
            json: to_json(&err),
            text: error_text(&err),
            to_stderr: true,
        }
    }

    fn emit(self, format: Format) -> ExitCode {
        // a closed pipe is not worth a panic; the exit code still reports the outcome
        let _ = match format {
            // machine-readable output always goes to stdout
            Format::Json => writeln!(std::io::stdout(), "{}", self.json),
            Format::Text if self.to_stderr => write!(std::io::stderr(), "{}", self.text),
            Format::Text => write!(std::io::stdout(), "{}", self.text),
        };
        ExitCode::from(self.code)
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

fn load(path: &Path) -> Result<ManipulatorModel, Outcome> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Outcome::fail(
            EXIT_INPUT,
            ErrorOutput::Io {
                message: format!("cannot read {}: {e}", path.display()),
            },
        )
    })?;
    parse_model(&text).map_err(|e| {
        Outcome::fail(
            EXIT_INPUT,
            ErrorOutput::Parse {
                message: format!("{}: {e}", path.display()),
            },
        )
    })
}

fn validation_failure(report: &ValidationReport) -> Outcome {
    Outcome::fail(
        EXIT_VALIDATION,
        ErrorOutput::Validation {
            errors: report.errors.clone(),
            warnings: report.warnings.clone(),
            equations: report.equation_count,
            unknowns: report.unknown_count,
        },
    )
}

/// Loads, validates and optionally dumps the assembled system.
fn prepare(path: &Path, common: &CommonArgs) -> Result<(ManipulatorModel, ValidationReport), Outcome> {
    let model = load(path)?;
    let report = validate(&model);
    if !report.is_valid() {
        return Err(validation_failure(&report));
    }
    if let Some(dir) = &common.dump_system {
        let system =
            assemble(&model).map_err(|e| Outcome::fail(EXIT_INPUT, ErrorOutput::Parse { message: e.to_string() }))?;
        system.write_matrix_market(dir).map_err(|e| {
            Outcome::fail(
                EXIT_INPUT,
                ErrorOutput::Io {
                    message: format!("cannot write system to {}: {e}", dir.display()),
                },
            )
        })?;
    }
    Ok((model, report))
}

fn solve_failure(err: SolveError, model: &ManipulatorModel) -> Outcome {
    let message = err.to_string();
    match err {
        SolveError::Assembly(AssemblyError::Invalid(report)) => validation_failure(&report),
        SolveError::Assembly(e) => Outcome::fail(EXIT_INPUT, ErrorOutput::Parse { message: e.to_string() }),
        SolveError::Mobility(report) => Outcome::fail(EXIT_NUMERICAL, ErrorOutput::mechanism(message, &report, model)),
        SolveError::UnboundedStiffness(report) => {
            Outcome::fail(EXIT_NUMERICAL, ErrorOutput::unbounded(message, &report))
        }
        SolveError::Inaccurate { backward_error } => Outcome::fail(
            EXIT_NUMERICAL,
            ErrorOutput::Inaccurate {
                message,
                backward_error,
            },
        ),
        SolveError::SingularStiffness { free_directions } => Outcome::fail(
            EXIT_SINGULAR_STIFFNESS,
            ErrorOutput::singular(message, &free_directions),
        ),
    }
}

fn strict_check(strict: bool, warnings: &[SolveWarning]) -> Result<(), Outcome> {
    if !strict {
        return Ok(());
    }
    for w in warnings {
        if let SolveWarning::IllConditioned { estimate } = w {
            return Err(Outcome::fail(
                EXIT_ILL_CONDITIONED,
                ErrorOutput::IllConditioned {
                    message: w.to_string(),
                    condition_estimate: *estimate,
                },
            ));
        }
    }
    Ok(())
}

fn cmd_validate(path: &Path) -> Outcome {
    let model = match load(path) {
        Ok(m) => m,
        Err(o) => return o,
    };
    let report = validate(&model);
    let out = ValidateOutput {
        valid: report.is_valid(),
        equations: report.equation_count,
        unknowns: report.unknown_count,
        errors: &report.errors,
        warnings: &report.warnings,
    };
    let mut outcome = Outcome::ok(&out, validate_text(&out));
    if !report.is_valid() {
        outcome.code = EXIT_VALIDATION;
    }
    outcome
}

fn cmd_stiffness(path: &Path, common: &CommonArgs) -> Result<Outcome, Outcome> {
    let (model, report) = prepare(path, common)?;
    let analysis = Analysis::new(&model, &SolverOptions::default()).map_err(|e| solve_failure(e, &model))?;
    let stiffness = analysis.stiffness();
    strict_check(common.strict, &stiffness.warnings)?;
    let out = StiffnessOutput::new(ModelSummary::new(&model, &report), stiffness, report.warnings.clone());
    let text = stiffness_text(&out);
    Ok(Outcome::ok(&out, text))
}

enum LoadCase {
    Wrench(Wrench),
    Deflection(Twist),
}

fn cmd_solve(path: &Path, case: LoadCase, common: &CommonArgs) -> Result<Outcome, Outcome> {
    let (model, report) = prepare(path, common)?;
    let opts = SolverOptions::default();
    let summary = ModelSummary::new(&model, &report);
    let fail = |e| solve_failure(e, &model);
    let out = match (Analysis::new(&model, &opts), case) {
        (Ok(analysis), case) => {
            let s = analysis.stiffness();
            strict_check(common.strict, &s.warnings)?;
            let state = match case {
                LoadCase::Wrench(w) => analysis.solve_applied_wrench(&w).map_err(fail)?,
                LoadCase::Deflection(t) => analysis.solve_prescribed_deflection(&t),
            };
            let parts = SolveParts {
                route: "stiffness",
                state: &state,
                residual: analysis.equilibrium_residual(&state),
                condition_estimate: s.condition_estimate,
                warnings: &s.warnings,
            };
            SolveOutput::new(&model, summary, parts, report.warnings.clone())
        }
        // rigid end-effector directions: a wrench is still a well-posed load case
        (Err(SolveError::UnboundedStiffness(_)), LoadCase::Wrench(w)) => {
            let full = ComplianceAnalysis::new(&model, &opts).map_err(fail)?;
            let c = full.compliance();
            strict_check(common.strict, &c.warnings)?;
            let state = full.solve_applied_wrench(&w);
            let parts = SolveParts {
                route: "compliance",
                state: &state,
                residual: full.equilibrium_residual(&state),
                condition_estimate: c.condition_estimate,
                warnings: &c.warnings,
            };
            SolveOutput::new(&model, summary, parts, report.warnings.clone())
        }
        (Err(e), _) => return Err(fail(e)),
    };
    let text = solve_text(&out);
    Ok(Outcome::ok(&out, text))
}

/// Sizes the global thread pool from `MSA_THREADS`.
fn configure_threads() -> Result<(), Outcome> {
    let Ok(value) = std::env::var("MSA_THREADS") else {
        return Ok(());
    };
    let usage = |message: String| Outcome::fail(EXIT_USAGE, ErrorOutput::Usage { message });
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| usage(format!("MSA_THREADS must be an integer ≥ 1, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("cannot size thread pool: {e}")))
}

fn six(v: Vec<f64>) -> [f64; 6] {
    v.try_into().expect("clap enforces six values")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let format = match &cli.command {
        Command::Validate { output, .. } => *output,
        Command::Stiffness { common, .. } | Command::Solve { common, .. } => common.output,
    };
    if let Err(o) = configure_threads() {
        return o.emit(format);
    }
    let outcome = match cli.command {
        Command::Validate { path, .. } => cmd_validate(&path),
        Command::Stiffness { path, common } => cmd_stiffness(&path, &common).unwrap_or_else(|o| o),
        Command::Solve {
            path,
            wrench,
            deflection,
            common,
        } => {
            let case = match (wrench, deflection) {
                (Some(w), None) => LoadCase::Wrench(Wrench::from_array(six(w))),
                (None, Some(d)) => LoadCase::Deflection(Twist::from_array(six(d))),
                _ => unreachable!("clap enforces exactly one load case"),
            };
            cmd_solve(&path, case, &common).unwrap_or_else(|o| o)
        }
    };
    outcome.emit(format)
}
