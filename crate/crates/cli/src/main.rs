// Copyright (c) 2026 The trsbd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `trsbd`: simulate scenarios, run the detector on traces, evaluate runs and
//! aggregate reports.

mod evaluate;
mod failure;
mod manifest;

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trsbd::detect::{run_detector, write_verdicts_csv, DetectorConfig, FlowTrace};
use trsbd::scenario::ScenarioFile;

use crate::failure::{Class, Failure, ResultExt};
use crate::manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "trsbd", version, about = "Trend-line shared bottleneck detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write traces, summary and manifest.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// overrides the scenario seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two RTT traces window by window.
    Detect {
        /// exactly two trace files
        #[arg(long = "trace", required = true, num_args = 1)]
        traces: Vec<PathBuf>,
        /// detector config (JSON)
        #[arg(long)]
        config: Option<PathBuf>,
        /// verdict CSV; stdout if absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute fairness, ratio, detection and fit metrics of a run.
    Evaluate {
        run_dir: PathBuf,
        /// report CSV; `<run_dir>/report.csv` if absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One row per run with J, R and time to first positive.
    Report {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        /// table CSV; stdout if absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SBD_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", Failure::new(Class::Usage, first).line());
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Simulate { scenario, out, seed } => simulate(&scenario, &out, seed),
        Command::Detect { traces, config, out } => detect(&traces, config.as_deref(), out.as_deref()),
        Command::Evaluate { run_dir, out } => {
            let out = out.unwrap_or_else(|| run_dir.join(evaluate::REPORT_FILE));
            let report = evaluate::evaluate_dir(&run_dir)?;
            report.write(&out)?;
            print!("{}", report.summary());
            Ok(())
        }
        Command::Report { run_dirs, out } => {
            let rows = run_dirs
                .iter()
                .map(|d| evaluate::report_row(d))
                .collect::<Result<Vec<_>, _>>()?;
            match out {
                Some(p) => evaluate::write_table(&rows, File::create(&p).class(Class::Io)?),
                None => evaluate::write_table(&rows, std::io::stdout().lock()),
            }
            .class(Class::Io)
        }
    }
}

fn simulate(scenario_path: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let raw = fs::read(scenario_path).class(Class::Io)?;
    let text = std::str::from_utf8(&raw).class(Class::Parse)?;
    let scenario = ScenarioFile::from_json(text).map_err(failure::scenario)?;
    let seed = seed.unwrap_or(scenario.seed);
    log::info!("simulating `{}` for {} ms, seed {}", scenario.name, scenario.duration_ms, seed);
    let result = scenario.simulate(Some(seed)).map_err(failure::scenario)?;

    let traces = out.join("traces");
    fs::create_dir_all(&traces).class(Class::Io)?;
    let mut files = result.write_traces(&traces).class(Class::Io)?;
    let mut write = |name: &str, f: &dyn Fn(File) -> std::io::Result<()>| -> Result<(), Failure> {
        let p = out.join(name);
        f(File::create(&p).class(Class::Io)?).class(Class::Io)?;
        files.push(p);
        Ok(())
    };
    write("summary.csv", &|f| result.write_summary_csv(f))?;
    write("rates.csv", &|f| result.write_rates_csv(f))?;
    write("links.csv", &|f| result.write_links_csv(f))?;
    write("verdicts.csv", &|f| result.write_session_verdicts_csv(f))?;
    write("modes.csv", &|f| result.write_modes_csv(f))?;
    if result.links.iter().any(|l| l.monitor.is_some()) {
        write("queue.csv", &|f| result.write_queue_csv(f))?;
        write("drops.csv", &|f| result.write_drops_csv(f))?;
    }
    write("scenario.json", &|mut f| f.write_all(&raw))?;

    let manifest = Manifest::new("simulate", &raw, seed, out, &files).class(Class::Io)?;
    manifest.write(&out.join(manifest::MANIFEST_FILE)).class(Class::Io)?;
    println!(
        "{}: {} flows, seed {}, outputs in {}",
        scenario.name,
        result.flows.len(),
        seed,
        out.display()
    );
    Ok(())
}

fn detect(traces: &[PathBuf], config: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    if traces.len() != 2 {
        return Err(Failure::new(
            Class::Usage,
            format!("detect takes exactly two --trace files, got {}", traces.len()),
        ));
    }
    let cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).class(Class::Io)?;
            DetectorConfig::from_json(&text).class(Class::Config)?
        }
        None => DetectorConfig::default(),
    };
    let a = FlowTrace::from_path(&traces[0]).class(Class::Input)?;
    let b = FlowTrace::from_path(&traces[1]).class(Class::Input)?;
    let ((a0, a1), (b0, b1)) = (a.span(), b.span());
    if a0.max(b0) > a1.min(b1) {
        return Err(Failure::new(
            Class::Input,
            format!("traces do not overlap in time: [{a0}, {a1}] and [{b0}, {b1}] ms"),
        ));
    }
    let verdicts = run_detector(&a, &b, &cfg).class(Class::Input)?;
    log::info!("{} windows with a verdict", verdicts.len());
    match out {
        Some(p) => write_verdicts_csv(&verdicts, File::create(p).class(Class::Io)?),
        None => write_verdicts_csv(&verdicts, std::io::stdout().lock()),
    }
    .class(Class::Io)
}
