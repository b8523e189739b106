//! `uq` — train, calibrate, and compare uncertainty-aware score
//! regressors on synthetic or user-supplied data.

mod commands;
mod failure;
mod overrides;

use clap::{Parser, Subcommand};
use failure::CliFailure;
use overrides::ConfigArgs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "uq",
    version,
    about = "Uncertainty-aware score regression",
    long_about = "Train regressors that attach a variance to every predicted score, \
calibrate them on held-out data, and compare estimator families under \
controlled noise. Experiments are JSON-configured and fully seeded: the \
same config produces byte-identical reports."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as JSON lines
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        /// Where to write the dataset
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        /// Where to write the shifted corpus of a domain_shift scenario
        #[arg(long, value_name = "FILE")]
        ood_output: Option<PathBuf>,
    },
    /// Train one estimator on the train split and save its bundle
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for the model bundle
        #[arg(long, value_name = "DIR")]
        model_dir: PathBuf,
        /// Estimator name or JSON object; defaults to the config's
        /// single list entry
        #[arg(long, value_name = "SPEC")]
        estimator: Option<String>,
        /// Continue training the bundle at this directory instead of
        /// starting fresh
        #[arg(long, value_name = "DIR")]
        resume_from: Option<PathBuf>,
    },
    /// Fit the post-hoc variance scale on the dev split
    Calibrate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Bundle to calibrate
        #[arg(long, value_name = "DIR")]
        model_dir: PathBuf,
        /// Fit one scale per domain tag instead of a global one
        #[arg(long)]
        per_tag: bool,
    },
    /// Score a trained bundle on the test split
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Bundle to score
        #[arg(long, value_name = "DIR")]
        model_dir: PathBuf,
        /// Apply the per-tag scales fitted by `calibrate --per-tag`
        #[arg(long)]
        per_tag: bool,
    },
    /// Train, calibrate, and score every configured estimator
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Check which variant of each clean/noisy reference pair gets
    /// the lower predicted variance
    NoisyRef {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare predicted-variance sharpness in-domain vs out-of-domain
    Ood {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Time training and inference per estimator (medians over
    /// repetitions)
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare the three second-stage losses of the two-step pipeline
    AblateDup {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn run(cli: Cli) -> Result<(), CliFailure> {
    match cli.command {
        Command::Synth { config, output, ood_output } => {
            commands::synth(&config.assemble()?, &output, ood_output.as_deref())
        }
        Command::Train { config, model_dir, estimator, resume_from } => commands::train(
            &config.assemble()?,
            estimator.as_deref(),
            &model_dir,
            resume_from.as_deref(),
        ),
        Command::Calibrate { config, model_dir, per_tag } => {
            commands::calibrate(&config.assemble()?, &model_dir, per_tag)
        }
        Command::Evaluate { config, model_dir, per_tag } => {
            commands::evaluate(&config.assemble()?, &model_dir, per_tag)
        }
        Command::Compare { config } => commands::compare(&config.assemble()?),
        Command::NoisyRef { config } => commands::noisy_ref(&config.assemble()?),
        Command::Ood { config } => commands::ood(&config.assemble()?),
        Command::Bench { config } => commands::bench(&config.assemble()?),
        Command::AblateDup { config } => commands::ablate_dup(&config.assemble()?),
    }
}

fn main() {
    if let Err(failure) = run(Cli::parse()) {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
