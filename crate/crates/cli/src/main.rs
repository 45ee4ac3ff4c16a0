//! Batch experiment runner: every verification in the library, driven by
//! declarative JSON records, emitting machine-readable reports.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration
//! error, 3 resource cap exceeded.

mod config;
mod report;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_experiment, Overrides};
use report::{convergence_csv, Report, SweepReport};
use runner::{run_experiment, RunError, LEVEL_CAP_ENV};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "projfield",
    version,
    about = "Consistency experiments for discretized free scalar fields",
    after_help = "The refinement-level cap can be overridden with the PROJFIELD_LEVEL_CAP environment variable."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment from a config record (flags override fields).
    Run {
        /// JSON file with one experiment record.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Experiment kind, as an alternative to --config (all fields then
        /// come from flags).
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a list of experiments and aggregate the reports.
    Sweep {
        /// JSON file with an array of experiment records.
        #[arg(long)]
        config: PathBuf,
        /// Write the aggregate report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write convergence rows here as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// List the available experiment kinds and their parameters.
    ListExperiments,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(RunError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(RunError::Resource(msg)) => {
            eprintln!("resource error: {msg}");
            ExitCode::from(EXIT_RESOURCE)
        }
    }
}

fn read_json(path: &PathBuf) -> Result<serde_json::Value, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| RunError::Usage(format!("cannot parse {}: {e}", path.display())))
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), RunError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| RunError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn print_summary(report: &Report) {
    for check in &report.checks {
        let verdict = if check.pass { "pass" } else { "FAIL" };
        eprintln!(
            "{verdict}  {name}: residual {residual:.3e} (bound {tolerance:.3e})",
            name = check.name,
            residual = check.residual,
            tolerance = check.tolerance
        );
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, RunError> {
    match cli.command {
        Command::Run {
            config,
            experiment,
            overrides,
            output,
        } => {
            let record = match (config, experiment) {
                (Some(path), None) => read_json(&path)?,
                (None, Some(kind)) => serde_json::json!({ "experiment": kind }),
                (Some(path), Some(kind)) => {
                    let mut record = read_json(&path)?;
                    if let Some(obj) = record.as_object_mut() {
                        obj.insert("experiment".into(), serde_json::json!(kind));
                    }
                    record
                }
                (None, None) => {
                    return Err(RunError::Usage("provide --config or --experiment".into()))
                }
            };
            let experiment = parse_experiment(record, &overrides).map_err(RunError::Usage)?;
            let report = run_experiment(&experiment)?;
            eprintln!("experiment: {}", experiment.kind());
            print_summary(&report);
            emit(&report.to_json(), output.as_ref())?;
            Ok(if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            })
        }

        Command::Sweep {
            config,
            output,
            csv,
        } => {
            let value = read_json(&config)?;
            let records = value
                .as_array()
                .ok_or_else(|| RunError::Usage("sweep config must be a JSON array".into()))?;
            if records.is_empty() {
                return Err(RunError::Usage(
                    "sweep config must contain at least one record".into(),
                ));
            }
            let no_overrides = Overrides::default();
            let mut reports = Vec::with_capacity(records.len());
            let mut csv_rows: Vec<(usize, f64, f64, f64)> = Vec::new();
            for (idx, record) in records.iter().enumerate() {
                let experiment = parse_experiment(record.clone(), &no_overrides)
                    .map_err(|e| RunError::Usage(format!("record {idx}: {e}")))?;
                let report = run_experiment(&experiment)?;
                for check in &report.checks {
                    if let Some(rows) = check
                        .detail
                        .as_ref()
                        .and_then(|d| d.get("rows"))
                        .and_then(|r| r.as_array())
                    {
                        for row in rows {
                            csv_rows.push((
                                idx,
                                row["h"].as_f64().unwrap_or(f64::NAN),
                                row["covariance_diag_error"].as_f64().unwrap_or(f64::NAN),
                                row["interpolation_error"].as_f64().unwrap_or(f64::NAN),
                            ));
                        }
                    }
                }
                reports.push(report);
            }
            let sweep = SweepReport::new(reports);
            for (idx, report) in sweep.experiments.iter().enumerate() {
                let verdict = if report.pass { "pass" } else { "FAIL" };
                eprintln!("{verdict}  experiment {idx}");
            }
            if let Some(path) = csv.as_ref() {
                std::fs::write(path, convergence_csv(&csv_rows)).map_err(|e| {
                    RunError::Usage(format!("cannot write {}: {e}", path.display()))
                })?;
            }
            emit(&sweep.to_json(), output.as_ref())?;
            Ok(if sweep.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            })
        }

        Command::ListExperiments => {
            println!("cochain-map              d, i, j");
            println!("projective               d, i, j [, tolerance=1e-8, renormalized=true]");
            println!("mc-pushforward           d, i, j, samples, seed [, tolerance=max(0.05, 10/sqrt(n))]");
            println!("whitney-isometry         geometry, coarse_n, fine_n [, tolerance=1e-12]");
            println!("covariance-consistency   geometry, coarse_n, fine_n [, quad_order=8, tolerance=1e-6]");
            println!("convergence              geometry, mesh_sizes [, quad_order=8, order_threshold=1.5]");
            println!("equicontinuity           d, i, pairs, seed [, tolerance=1e-12]");
            println!();
            println!("geometry: {{\"kind\": \"circle\", \"circumference\": L}}");
            println!("          {{\"kind\": \"line\", \"coarse-window\": [a,b], \"fine-window\": [a,b]}}");
            println!("level cap override: {LEVEL_CAP_ENV}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
