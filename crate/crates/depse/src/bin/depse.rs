use clap::{Parser, Subcommand};

use depse::cli::{cmd_enhance, cmd_evaluate, cmd_oracle_check, cmd_simulate};
use depse::config::RunConfig;
use depse::DepseError;

#[derive(Parser)]
#[command(name = "depse", version, about = "Posterior-transition diffusion denoising")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance the WAV files listed in the config.
    Enhance(CommonArgs),
    /// Run synthetic benchmarks (conjugate oracle or SNR sweep).
    Simulate(CommonArgs),
    /// Score (reference, noise, estimate) triples.
    Evaluate(CommonArgs),
    /// Run the self-verification suite.
    OracleCheck(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: String,
    /// Parallel jobs over utterances/trials.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let args = Args::parse();
    let common = match &args.command {
        Command::Enhance(c) | Command::Simulate(c) | Command::Evaluate(c)
        | Command::OracleCheck(c) => c,
    };
    let config = match RunConfig::from_file(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("depse: config error: {e}");
            std::process::exit(2);
        }
    };
    let seed = common.seed.unwrap_or(config.sampler.seed);

    let outcome = match &args.command {
        Command::Enhance(_) => cmd_enhance(&config, common.jobs, seed),
        Command::Simulate(_) => cmd_simulate(&config, common.jobs, seed),
        Command::Evaluate(_) => cmd_evaluate(&config),
        Command::OracleCheck(_) => cmd_oracle_check(&config, seed),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e @ DepseError::Config(_)) => {
            eprintln!("depse: config error: {e}");
            std::process::exit(2);
        }
        Err(e) => {
            eprintln!("depse: {e}");
            std::process::exit(1);
        }
    }
}
