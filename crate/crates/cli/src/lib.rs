//! Command-line front end: coherent-state tables, energy surfaces, bounds,
//! fidelity sweeps and oracle verification, emitted as CSV or JSON.

pub mod args;
pub mod commands;
pub mod table;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use args::{Cli, Command, InputKind, Settings};
use commands::{CliError, CliResult, SweepSpec, VerifySpec, DEFAULT_LAMBDA_IN, DEFAULT_TOL};
use table::{Format, ResultTable};

/// Exit status for a verification run whose deviations exceed tolerance.
pub const EXIT_TOLERANCE: i32 = 4;

fn load_config(path: &std::path::Path) -> CliResult<Settings> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
}

fn scalar(a: &Option<args::Axis>, name: &str) -> CliResult<f64> {
    a.as_ref()
        .ok_or_else(|| CliError::Validation(format!("--{name} is required")))?
        .scalar(name)
        .map_err(CliError::Validation)
}

fn axis_or(a: &Option<args::Axis>, default: &str) -> args::Axis {
    a.clone().unwrap_or_else(|| default.parse().expect("default axis"))
}

pub fn execute(command: Command, s: &Settings) -> CliResult<ResultTable> {
    let tol = s.tol.unwrap_or(DEFAULT_TOL);
    match command {
        Command::TwoportCoherent => {
            let alpha = s.alpha.map(|a| a.0).unwrap_or_default();
            commands::cmd_twoport_coherent(scalar(&s.lambda_x, "lambda-x")?, scalar(&s.lambda_y, "lambda-y")?, alpha, s.cutoff, tol)
        }
        Command::Energy => commands::cmd_energy(&axis_or(&s.lambda_x, "0:0.9:10"), &axis_or(&s.lambda_y, "0.1:0.9:9")),
        Command::Bounds { kind } => commands::run_bounds(kind, s.lambda_x.as_ref(), s.lambda_y.as_ref(), s.energy.as_ref(), s.delta.as_ref(), tol),
        Command::FidelitySweep => commands::cmd_fidelity_sweep(&SweepSpec {
            input: s.input.unwrap_or(InputKind::Tmsv),
            ports: s.ports.unwrap_or(2),
            lambda_in: s.lambda_in.unwrap_or(DEFAULT_LAMBDA_IN),
            lambda_x: axis_or(&s.lambda_x, "0.1:0.8:8"),
            lambda_y: axis_or(&s.lambda_y, "0.1:0.8:8"),
            cutoff: s.cutoff,
            cap: s.cap,
            tol,
        }),
        Command::OracleVerify => {
            let ports = s.ports.unwrap_or(2);
            let cutoff = s.cutoff.unwrap_or(if ports == 2 { 14 } else { 8 });
            let reach = 3.min(cutoff.saturating_sub(1));
            commands::cmd_oracle_verify(&VerifySpec {
                ports,
                lambda_x: scalar(&s.lambda_x, "lambda-x")?,
                lambda_y: scalar(&s.lambda_y, "lambda-y")?,
                cutoff,
                a_max: s.a_max.unwrap_or(reach),
                b_max: s.b_max.unwrap_or(reach),
                tol: s.tol.unwrap_or_else(|| commands::default_verify_tol(ports)),
                cap: s.cap,
            })
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_cli(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cvpbt: {e}");
            e.exit_code()
        }
    }
}

fn run_cli(cli: Cli) -> CliResult<i32> {
    let settings = match &cli.config {
        Some(p) => cli.settings.clone().or(load_config(p)?),
        None => cli.settings.clone(),
    };
    let table = execute(cli.command, &settings)?;
    let format = settings.format.unwrap_or(Format::Csv);
    let text = table.to_string(format);
    match &settings.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    if table.metadata.get("passed") == Some(&serde_json::Value::Bool(false)) {
        eprintln!(
            "cvpbt: max deviation {} exceeds tolerance {}",
            table.metadata["max_deviation"], table.metadata["tolerance"]
        );
        return Ok(EXIT_TOLERANCE);
    }
    Ok(0)
}
