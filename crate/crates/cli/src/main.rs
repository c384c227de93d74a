use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hvlab_core::report::Status;
use hvlab_core::runner::{emit_report, output_dir, run, EmitFormat, RunOptions, RunReport};
use hvlab_core::scenario::{Scenario, Suite, SuiteSelection};

#[derive(Parser)]
#[command(
    name = "hvlab",
    version,
    about = "Verify heat-kernel, resolvent and spectral-multiplier estimates on grid domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites of a scenario and write CSV tables and a JSON summary.
    Verify {
        scenario: PathBuf,
        /// Suites to run (comma separated); overrides the scenario.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<Suite>,
        /// Output directory; defaults to the scenario's, then $HVLAB_OUT, then ./hvlab-out.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
        /// Print every check, not only failures.
        #[arg(short, long)]
        verbose: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl From<Format> for EmitFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => EmitFormat::Csv,
            Format::Json => EmitFormat::Json,
            Format::Both => EmitFormat::Both,
        }
    }
}

fn print_report(r: &RunReport, verbose: bool) {
    println!(
        "d={} h={:.5} nodes={} window theta=[{:.4e}, {:.4e}]",
        r.dimension, r.h, r.nodes, r.window.theta_min, r.window.theta_max
    );
    for s in &r.suites {
        println!(
            "{:<11} pass {:>3}  fail {:>3}  excluded {:>3}  hypothesis-unmet {:>3}  errors {:>2}  {:>7} ms",
            s.suite.name(),
            s.count(Status::Pass),
            s.count(Status::Fail),
            s.count(Status::Excluded),
            s.count(Status::HypothesisUnmet),
            s.errors.len(),
            s.elapsed_ms
        );
        for c in s.checks.iter().filter(|c| verbose || c.failed()) {
            println!("  {}", c.summary());
        }
        for e in &s.errors {
            println!("  [error] {e}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Verify {
        scenario,
        suite,
        out,
        seed,
        jobs,
        format,
        verbose,
    } = cli.command;
    let result = Scenario::load(&scenario).and_then(|sc| {
        let suites = if suite.is_empty() {
            None
        } else {
            Some(SuiteSelection::Many(suite).resolve())
        };
        let opts = RunOptions { suites, seed, jobs };
        let report = run(&sc, &opts)?;
        let dir = output_dir(out.as_deref(), &sc);
        let files = emit_report(&report, &dir, format.into())?;
        Ok((report, dir, files.len()))
    });
    match result {
        Ok((report, dir, n)) => {
            print_report(&report, verbose);
            println!("wrote {n} files to {}", dir.display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
