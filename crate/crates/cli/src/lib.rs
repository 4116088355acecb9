//! Batch experiment driver for `regdiag-core`: problem generation,
//! semi-convergence runs, subspace diagnostics and report merging.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::{Cli, Command, ExperimentConfig};
pub use error::{CliError, Result};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => commands::cmd_generate(&ExperimentConfig::for_generate(&a)?),
        Command::Semiconv(a) => commands::cmd_semiconv(&ExperimentConfig::for_semiconv(&a)?),
        Command::Diagnose(a) => commands::cmd_diagnose(&ExperimentConfig::for_diagnose(&a)?),
        Command::Report(a) => {
            let report = report::cmd_report(&a.out)?;
            if report.partial {
                eprintln!("partial report: {} missing", report.missing.join(", "));
            }
            Ok(())
        }
    }
}
