//! `georef`: ingest occurrence data, run LLM and gazetteer georeferencing,
//! and evaluate the results.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use georef_core::prompt::ExportMode;

use crate::commands::Context;
use crate::config::{extract_overrides, RunConfig};
use crate::error::CliError;

const AFTER_HELP: &str = "Any configuration key can be overridden with `--section.key value`, \
for example `--split.ratios '[0.8, 0.1, 0.1]'` or `--dbscan.eps_km 10`. \
Top-level keys: --seed, --output_dir, --record_timing.\n\n\
Exit status: 0 success, 1 empty or degenerate result, 2 configuration error, \
3 upstream service failure.";

#[derive(Parser, Debug)]
#[command(name = "georef", version, about, after_help = AFTER_HELP)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// More logging; repeat for debug output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Train,
    Test,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a raw occurrence file into the canonical record file.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Seeded train/validation/test split.
    Split {
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Combine seeded fractions of several training sets.
    Mix,
    /// Seeded k-fold partition.
    Kfold {
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Write fine-tuning examples and their manifest.
    ExportFinetune {
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "train")]
        mode: ModeArg,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Georeference records with a language model.
    Predict {
        #[arg(long)]
        records: Option<PathBuf>,
        /// Use a seeded sample of this many records.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Georeference records by gazetteer matching and clustering.
    Baseline {
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score prediction logs against the records' coordinates.
    Evaluate {
        /// Prediction logs, one report row each.
        #[arg(long, required = true, num_args = 1..)]
        predictions: Vec<PathBuf>,
        /// Records holding the true coordinates.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Also report by locality length.
        #[arg(long)]
        by_length: bool,
    },
    /// Count place names and spatial indicators per locality.
    Analyze {
        #[arg(long)]
        records: Option<PathBuf>,
        /// Correlate the counts with the errors in this prediction log.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Strip distance values from localities.
    Perturb {
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

fn run(cli: Cli, overrides: &[(String, String)]) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref(), overrides)?;
    let ctx = Context::new(config);
    match cli.command {
        Command::Ingest { input } => commands::ingest(&ctx, input),
        Command::Split { records } => commands::split_cmd(&ctx, records),
        Command::Mix => commands::mix(&ctx),
        Command::Kfold { records } => commands::kfold_cmd(&ctx, records),
        Command::ExportFinetune {
            records,
            mode,
            output,
        } => {
            let mode = match mode {
                ModeArg::Train => ExportMode::Train,
                ModeArg::Test => ExportMode::Test,
            };
            commands::export_finetune(&ctx, records, mode, output)
        }
        Command::Predict {
            records,
            sample,
            output,
        } => commands::predict(&ctx, records, sample, output),
        Command::Baseline { records, output } => commands::baseline(&ctx, records, output),
        Command::Evaluate {
            predictions,
            records,
            by_length,
        } => commands::evaluate(&ctx, &predictions, records, by_length),
        Command::Analyze {
            records,
            predictions,
        } => commands::analyze(&ctx, records, predictions),
        Command::Perturb { records } => commands::perturb(&ctx, records),
    }
}

fn main() -> ExitCode {
    let (args, overrides) = match extract_overrides(std::env::args().collect()) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
