use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gnnlab::experiment::{
    cmd_figure3, cmd_generate, cmd_sampler_stats, cmd_train, cmd_verify, load_config, parse_config, CommandOutput,
    ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "gnnlab", version, about = "Minibatch sampling experiments for graph neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's `out`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic graph as edge list plus feature, label and split CSVs.
    Generate(Common),
    /// Train under each configured regime and write per-epoch traces.
    Train(Common),
    /// Regularization statistics per sampler at random initialization.
    Figure3(Common),
    /// Run the numerical verification suite and write manifest.csv.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run a single check group.
        #[arg(long)]
        only: Option<String>,
    },
    /// Structural statistics of RNS batches as the number of parts grows.
    SamplerStats(Common),
}

fn config(common: &Common, required: bool) -> gnnlab::Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None if required => return Err(gnnlab::Error::Config("--config is required for this command".into())),
        None => parse_config("")?,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn run(cli: Cli) -> gnnlab::Result<CommandOutput> {
    type Cmd = fn(&ExperimentConfig, &Path) -> gnnlab::Result<CommandOutput>;
    let (common, cmd): (&Common, Cmd) = match &cli.command {
        Command::Generate(c) => (c, cmd_generate),
        Command::Train(c) => (c, cmd_train),
        Command::Figure3(c) => (c, cmd_figure3),
        Command::SamplerStats(c) => (c, cmd_sampler_stats),
        Command::Verify { common, only } => {
            let (cfg, out) = config(common, false)?;
            return cmd_verify(&cfg, &out, only.as_deref());
        }
    };
    let (cfg, out) = config(common, true)?;
    cmd(&cfg, &out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            for line in &out.lines {
                println!("{line}");
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if out.verification_failed {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
