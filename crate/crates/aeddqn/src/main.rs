use std::path::PathBuf;
use std::process::ExitCode;

use aeddqn::commands::{
    cmd_baseline, cmd_encode, cmd_eval, cmd_train_ae, cmd_train_agent, RunOptions,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aeddqn",
    version,
    about = "Cost-aware classification on autoencoder features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the convolutional autoencoder and write its loss curve.
    TrainAe(Common),
    /// Encode the train and test splits into feature caches.
    Encode(Common),
    /// Train the feature-acquisition agent.
    TrainAgent(Common),
    /// Evaluate the trained agent greedily on the test cache.
    Eval(Common),
    /// Train and score the linear SVM baseline.
    Baseline(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `seed` key of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl From<Common> for RunOptions {
    fn from(c: Common) -> Self {
        RunOptions {
            config: c.config,
            seed: c.seed,
            out_dir: c.out_dir,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::TrainAe(c) => cmd_train_ae(&c.into()),
        Command::Encode(c) => cmd_encode(&c.into()),
        Command::TrainAgent(c) => cmd_train_agent(&c.into()),
        Command::Eval(c) => cmd_eval(&c.into()),
        Command::Baseline(c) => cmd_baseline(&c.into()),
    };
    match result {
        Ok(manifest) => {
            for path in &manifest.artifacts {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
