use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carroll_core::run::{
    cmd_certify, cmd_compare, cmd_simulate, to_json, write_atomic, DataSource, GridSpec, RunConfig, SolverKind,
    Tolerances, DEFAULT_NX,
};
use carroll_core::CarrollError;

const EXIT_ERROR: u8 = 1;
const EXIT_CERTIFICATE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "carroll", version, about = "Isentropic Carrollian fluid solvers and certifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Admissibility, classification and blow-up prediction, no time stepping.
    Certify(CommonArgs),
    /// Run a solver, write snapshots and certificates.
    Simulate(CommonArgs),
    /// Differences between stored runs of the same problem.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    gamma: f64,
    /// Preset name: constant, arctan-compressive, arctan-rarefactive, remark-family, gaussian-bump.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    preset: Option<String>,
    /// Preset parameter as key=value; repeatable.
    #[arg(long = "param", value_parser = parse_param, requires = "preset")]
    params: Vec<(String, f64)>,
    /// Tabulated CSV with header x,sigma,beta.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    /// Additional snapshot time; repeatable.
    #[arg(long = "snapshot")]
    snapshots: Vec<f64>,
    #[arg(long, default_value = "grid", value_parser = parse_solver)]
    solver: SolverKind,
    #[arg(long, default_value_t = DEFAULT_NX)]
    nx: usize,
    #[arg(long, default_value_t = carroll_core::reference::DEFAULT_CFL)]
    cfl: f64,
    #[arg(long, allow_negative_numbers = true)]
    x_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = carroll_core::classify::DEFAULT_TOL_REGION_EXACT)]
    tol_region: f64,
    /// Fraction of the predicted blow-up time kept as a safety margin.
    #[arg(long, default_value_t = carroll_core::reference::DEFAULT_BLOWUP_MARGIN)]
    blowup_margin: f64,
    #[arg(long)]
    allow_near_blowup: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Run directories containing report.json; ordered coarse to fine for order estimates.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Run every other run is measured against.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Write the comparison as JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("{v:?} is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse().map_err(|e: CarrollError| e.to_string())
}

impl CommonArgs {
    fn config(&self) -> RunConfig {
        let data = match (&self.preset, &self.data) {
            (Some(name), _) => DataSource::Preset {
                name: name.clone(),
                params: self.params.iter().cloned().collect::<BTreeMap<_, _>>(),
            },
            (None, Some(path)) => DataSource::File { path: path.clone() },
            (None, None) => unreachable!("clap requires --preset or --data"),
        };
        RunConfig {
            gamma: self.gamma,
            data,
            solver: self.solver,
            t_end: self.t_end,
            snapshots: self.snapshots.clone(),
            grid: GridSpec {
                nx: self.nx,
                cfl: self.cfl,
                x_min: self.x_min,
                x_max: self.x_max,
            },
            out: self.out.clone(),
            tolerances: Tolerances {
                region: self.tol_region,
                blowup_margin: self.blowup_margin,
            },
            allow_near_blowup: self.allow_near_blowup,
        }
    }
}

fn emit(bytes: &[u8]) -> Result<(), CarrollError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, CarrollError> {
    match cli.command {
        Command::Certify(args) => {
            let report = cmd_certify(&args.config())?;
            emit(&to_json(&report)?)?;
            Ok(true)
        }
        Command::Simulate(args) => {
            let report = cmd_simulate(&args.config())?;
            let region_ok = report.certificates.region.iter().filter(|c| c.region.passed).count();
            println!(
                "simulate: {} snapshots, region certificates {}/{} passed, lipschitz {}",
                report.snapshots.len(),
                region_ok,
                report.certificates.region.len(),
                match &report.certificates.lipschitz {
                    Some(c) if c.passed => "passed",
                    Some(_) => "FAILED",
                    None => "not applicable",
                }
            );
            if let Some(d) = &report.exact_comparison {
                println!("simulate: max L∞ difference from exact at t={}: {:e}", d.t, d.max_linf());
            }
            Ok(report.passed)
        }
        Command::Compare(args) => {
            let report = cmd_compare(&args.runs, args.reference.as_deref())?;
            let bytes = to_json(&report)?;
            if let Some(path) = &args.out {
                write_atomic(path, &bytes)?;
            }
            emit(&bytes)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for certificate violations
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("carroll: certificate violation");
            ExitCode::from(EXIT_CERTIFICATE)
        }
        Err(e) => {
            eprintln!("carroll: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
