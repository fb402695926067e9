use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mqe::commands;
use mqe::{CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "mqe", version, about = "Meta-quantum ensemble intrusion-detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, encode, split, standardize and project the dataset.
    Prep(Common),
    /// Train the variational classifier on the prepared training split.
    TrainQnn(Common),
    /// Train the kernel SVM on the prepared training split.
    TrainQsvm(Common),
    /// Stack the branches with one forest per scheme and evaluate on the test split.
    FuseEval(Common),
    /// Re-evaluate the fused pipeline over the noise grid.
    NoiseSweep(Common),
    /// Print the resolved configuration, defaults included.
    PrintConfig {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(c: &Common) -> CliResult<RunConfig> {
    let cfg = RunConfig::load(Some(&c.config))?.finalize(c.seed, c.out.clone())?;
    if cfg.run.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.run.threads).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Prep(c) => commands::prep(&load(&c)?).map(drop),
        Command::TrainQnn(c) => commands::train_qnn_cmd(&load(&c)?).map(drop),
        Command::TrainQsvm(c) => commands::train_qsvm_cmd(&load(&c)?).map(drop),
        Command::FuseEval(c) => commands::fuse_eval(&load(&c)?).map(drop),
        Command::NoiseSweep(c) => commands::noise_sweep(&load(&c)?).map(drop),
        Command::PrintConfig { config, seed, out } => {
            let cfg = RunConfig::load(config.as_deref())?.finalize(seed, out)?;
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
