//! Artifacts of the command-line verbs.
//!
//! A run writes three files into its output directory:
//!
//! - `timeseries.csv`: one row per step
//! - `events.jsonl`: one event record per line
//! - `summary.json`: run metrics and the analytic constants

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::etc::EventRecord;
use crate::scenario::ScenarioFile;
use crate::sim::{self, certify, summarize, Certificate, RunResult, Scenario, Summary};

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// Command-line adjustments applied on top of a scenario file, in this order:
/// `--set` overrides, then `--dt`, then `--seed`.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub overrides: Vec<String>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
}

impl RunOptions {
    pub fn apply(&self, file: &mut ScenarioFile) -> Result<()> {
        for o in &self.overrides {
            file.apply_override(o)?;
        }
        if let Some(dt) = self.dt {
            file.sim.dt = dt;
        }
        if let Some(seed) = self.seed {
            file.sim.seed = seed;
        }
        Ok(())
    }
}

pub fn load_with(path: &Path, opts: &RunOptions) -> Result<ScenarioFile> {
    let mut file = ScenarioFile::load(path)?;
    opts.apply(&mut file)?;
    Ok(file)
}

pub fn timeseries_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for i in 1..=n {
        for c in [
            "gamma", "gamma_dot", "alpha", "accel", "p_x", "p_y", "p_z", "e_pf_norm",
        ] {
            cols.push(format!("{c}_{i}"));
        }
    }
    cols.push("xi_norm".into());
    cols.push("max_gamma_spread".into());
    cols.join(",")
}

pub fn write_timeseries(w: &mut impl Write, result: &RunResult) -> std::io::Result<()> {
    let s = &result.series;
    writeln!(w, "{}", timeseries_header(s.agents))?;
    for k in 0..s.len() {
        write!(w, "{}", s.t[k])?;
        for i in 0..s.agents {
            let m = s.at(k, i);
            let p = s.position[m];
            write!(
                w,
                ",{},{},{},{},{},{},{},{}",
                s.gamma[m], s.gamma_dot[m], s.alpha[m], s.accel[m], p[0], p[1], p[2], s.e_pf_norm[m]
            )?;
        }
        writeln!(w, ",{},{}", s.xi_norm[k], s.max_gamma_spread[k])?;
    }
    Ok(())
}

pub fn write_events(w: &mut impl Write, events: &[EventRecord]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut *w, e)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_event_log(path: impl AsRef<Path>) -> Result<Vec<EventRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("event log line {}: {e}", k + 1)))?,
        );
    }
    Ok(out)
}

/// Writes the three run artifacts and returns their paths.
pub fn write_artifacts(out_dir: &Path, result: &RunResult, summary: &Summary) -> Result<[PathBuf; 3]> {
    fs::create_dir_all(out_dir)?;
    let paths = [
        out_dir.join(TIMESERIES_FILE),
        out_dir.join(EVENTS_FILE),
        out_dir.join(SUMMARY_FILE),
    ];
    let mut w = BufWriter::new(File::create(&paths[0])?);
    write_timeseries(&mut w, result)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&paths[1])?);
    write_events(&mut w, &result.events)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&paths[2])?);
    serde_json::to_writer_pretty(&mut w, summary).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(paths)
}

/// Runs a validated scenario. An aborted run still yields its partial result
/// and a summary carrying the cause.
pub fn execute(scn: &Scenario) -> Result<(RunResult, Summary, Option<Error>)> {
    match sim::run(scn) {
        Ok(r) => {
            let s = summarize(scn, &r, None)?;
            Ok((r, s, None))
        }
        Err(aborted) => {
            let aborted = *aborted;
            let s = summarize(scn, &aborted.partial, Some(aborted.cause.to_string()))?;
            Ok((aborted.partial, s, Some(aborted.cause)))
        }
    }
}

/// The `run` verb. Nothing is written unless the scenario loads and
/// validates; a run that aborts writes its partial artifacts and then
/// returns the cause.
pub fn run_command(path: &Path, out_dir: &Path, opts: &RunOptions) -> Result<Summary> {
    let scn = load_with(path, opts)?.into_scenario()?;
    let (result, summary, cause) = execute(&scn)?;
    write_artifacts(out_dir, &result, &summary)?;
    match cause {
        None => Ok(summary),
        Some(e) => Err(e),
    }
}

/// The `certify` verb.
pub fn certify_command(path: &Path, opts: &RunOptions) -> Result<Certificate> {
    let scn = load_with(path, opts)?.into_scenario()?;
    certify(&scn)
}

/// File name of the summary for sweep point `k`.
pub fn sweep_file_name(k: usize) -> String {
    format!("summary_{k:03}.json")
}

/// One sweep point: `key=value` applied on top of `base`, run, summarized.
pub fn sweep_point(base: &ScenarioFile, key: &str, value: &str) -> Result<Summary> {
    let mut file = base.clone();
    file.apply_override(&format!("{key}={value}"))?;
    let scn = file.into_scenario()?;
    let (_, summary, _) = execute(&scn)?;
    Ok(summary)
}

pub fn certificate_json(cert: &Certificate) -> String {
    serde_json::to_string_pretty(cert).expect("certificate serializes")
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, summary).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
