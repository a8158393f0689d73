use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use stockcast_cli::{CliError, Pipeline, PipelineConfig};

#[derive(Parser)]
#[command(name = "stockcast", version, about = "Panel stock price forecasting pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic panel (panel.csv).
    Synth(Common),
    /// Choose the explanatory variables (selected_variables.json).
    Select(Common),
    /// Stepwise linear regression (linreg_fit.json and its metrics).
    FitLinreg(Common),
    /// Kernel GRNN (grnn_model.json and its metrics).
    FitGrnn(Common),
    /// LM-trained perceptron (mlp_model.json, mlp_history.csv and metrics).
    TrainMlp(Common),
    /// Rank every model with metrics present (comparison.json / .txt).
    Compare(Common),
    /// All steps in order.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// TOML pipeline configuration; defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
}

impl Common {
    fn pipeline(&self) -> Result<Pipeline, CliError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Pipeline::new(config)
    }
}

fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Synth(c) => c.pipeline()?.synth().map(drop),
        Command::Select(c) => c.pipeline()?.select().map(drop),
        Command::FitLinreg(c) => {
            let p = c.pipeline()?;
            p.fit_linreg(&p.dataset()?).map(drop)
        }
        Command::FitGrnn(c) => {
            let p = c.pipeline()?;
            p.fit_grnn(&p.dataset()?).map(drop)
        }
        Command::TrainMlp(c) => {
            let p = c.pipeline()?;
            p.train_mlp(&p.dataset()?).map(drop)
        }
        Command::Compare(c) => {
            let comparison = c.pipeline()?.compare()?;
            print!("{}", comparison.render());
            Ok(())
        }
        Command::Run(c) => {
            let comparison = c.pipeline()?.run()?;
            print!("{}", comparison.render());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = match &cli.command {
        Command::Synth(c)
        | Command::Select(c)
        | Command::FitLinreg(c)
        | Command::FitGrnn(c)
        | Command::TrainMlp(c)
        | Command::Compare(c)
        | Command::Run(c) => c.verbose,
    };
    env_logger::Builder::new()
        .filter_level(if verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();

    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
