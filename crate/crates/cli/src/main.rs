use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use etcoord::report::{self, RunOptions};
use etcoord::scenario::{ScenarioFile, Severity};
use etcoord::Error;
use rayon::prelude::*;

/// Event-triggered time coordination of a vehicle fleet.
#[derive(Parser)]
#[command(name = "etcoord", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Check a scenario file and print its diagnostics.
    Validate(Common),
    /// Simulate and write timeseries.csv, events.jsonl and summary.json.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the analytic constants as JSON.
    Certify(Common),
    /// Run once per value of one override key and write one summary per point.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Dotted key to vary, e.g. `gains.a`.
        #[arg(long)]
        key: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Step size override (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Reserved; runs are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            overrides: self.overrides.clone(),
            dt: self.dt,
            seed: self.seed,
        }
    }
}

fn report_error(e: &Error) -> ExitCode {
    match e {
        Error::Validation(diags) => {
            for d in diags {
                eprintln!("{d}");
            }
            eprintln!("{e}");
        }
        _ => eprintln!("error: {e}"),
    }
    ExitCode::from(e.exit_code() as u8)
}

fn validate(c: &Common) -> Result<ExitCode, Error> {
    let file = report::load_with(&c.scenario, &c.options())?;
    let diags = file.validate();
    for d in &diags {
        println!("{d}");
    }
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    println!("{errors} error(s), {} warning(s)", diags.len() - errors);
    Ok(if errors > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn sweep(c: &Common, out: &PathBuf, key: &str, values: &[String]) -> Result<ExitCode, Error> {
    let base: ScenarioFile = report::load_with(&c.scenario, &c.options())?;
    let results: Vec<_> = values
        .par_iter()
        .map(|v| report::sweep_point(&base, key, v))
        .collect();
    std::fs::create_dir_all(out)?;
    let mut worst = 0;
    for (k, (v, r)) in values.iter().zip(results).enumerate() {
        match r {
            Ok(summary) => {
                let path = out.join(report::sweep_file_name(k));
                report::write_summary(&path, &summary)?;
                let status = summary.error.as_deref().unwrap_or("ok");
                println!("{key}={v}: {} ({status})", path.display());
                if summary.error.is_some() {
                    worst = worst.max(3);
                }
            }
            Err(e) => {
                eprintln!("{key}={v}: {e}");
                worst = worst.max(e.exit_code());
            }
        }
    }
    Ok(ExitCode::from(worst as u8))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.verb {
        Verb::Validate(c) => validate(c),
        Verb::Run { common, out } => report::run_command(&common.scenario, out, &common.options())
            .map(|s| {
                println!(
                    "{}: {} steps, {} events, written to {}",
                    s.scenario,
                    s.steps,
                    s.total_events,
                    out.display()
                );
                ExitCode::SUCCESS
            }),
        Verb::Certify(c) => report::certify_command(&c.scenario, &c.options()).map(|cert| {
            println!("{}", report::certificate_json(&cert));
            ExitCode::SUCCESS
        }),
        Verb::Sweep {
            common,
            out,
            key,
            values,
        } => sweep(common, out, key, values),
    };
    result.unwrap_or_else(|e| report_error(&e))
}
