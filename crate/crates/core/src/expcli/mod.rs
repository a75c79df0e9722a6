//! Scenario runner behind the `arwlab` binary.
//!
//! A run is described by a [`ScenarioConfig`], assembled from an optional
//! `key = value` file and command-line flags (flags win). Each scenario
//! writes one long-format record per replicate and metric, prints its
//! checks, and the process exits 0 only if every check passes.

mod config;
mod output;
mod scenarios;

pub use config::{parse_config, Cli, Format, QMode, Scenario, ScenarioConfig};
pub use output::{read_records, write_records, RunRecord, CSV_HEADER};
pub use scenarios::{execute, run_scenario, ScenarioOutcome};

/// Runs the command line in `argv` and returns the process exit code:
/// 0 if every check passed, 1 if a check failed, 2 on a usage or runtime
/// error.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;

    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match config::from_cli(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match run_scenario(&config) {
        Ok(outcome) => {
            println!("scenario {} run {}", config.scenario, outcome.run_id);
            for line in &outcome.info {
                println!("  info {line}");
            }
            for r in &outcome.reports {
                println!("  {r}");
            }
            if outcome.all_pass() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
