use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stancefuse::commands::{self, CommandError, Context, Outcome};
use stancefuse::config::RunConfig;
use stancefuse::exec::Execution;
use stancefuse::synth::{write_mini_corpus, SynthOptions};

/// Multimodal stance classification: ingest, augment, train, evaluate, merge.
#[derive(Parser)]
#[command(name = "stancefuse", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "stancefuse.toml")]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Redo stages whose outputs are already up to date.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the TSV/JSONL splits, run OCR, write the canonical corpus.
    Ingest,
    /// Rebalance and synonym-expand the training splits.
    Augment,
    /// Grid search over the hyperparameters for every topic.
    Train,
    /// Score the selected checkpoints on the test splits.
    Evaluate,
    /// Pool the topic reports and render the results table.
    Merge,
    /// Run all five stages in order.
    Run,
    /// Write the synthetic two-topic mini corpus.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
    },
}

fn execution(jobs: Option<usize>) -> Result<Execution, String> {
    match jobs {
        Some(0) => Err("--jobs must be at least 1".into()),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| e.to_string())?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Sequential),
        None if Execution::parallel_available() => Ok(Execution::Parallel),
        None => Ok(Execution::Sequential),
    }
}

fn run(cli: Cli) -> Result<(), String> {
    let exec = execution(cli.jobs)?;
    if let Command::SynthCorpus { out } = &cli.command {
        let options = SynthOptions {
            seed: cli.seed.unwrap_or(SynthOptions::default().seed),
            ..SynthOptions::default()
        };
        let n = write_mini_corpus(out, &options).map_err(|e| format!("{}: {e}", out.display()))?;
        eprintln!("wrote {n} examples under {}", out.display());
        return Ok(());
    }
    let mut config = RunConfig::load(&cli.config).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let ctx = Context::new(config, cli.force, exec);
    type Stage = fn(&Context, &mut dyn std::io::Write) -> Result<Outcome, CommandError>;
    let stages: Vec<(&str, Stage)> = match cli.command {
        Command::Ingest => vec![("ingest", commands::ingest)],
        Command::Augment => vec![("augment", commands::augment)],
        Command::Train => vec![("train", commands::train)],
        Command::Evaluate => vec![("evaluate", commands::evaluate_cmd)],
        Command::Merge => vec![("merge", commands::merge)],
        Command::Run => vec![
            ("ingest", commands::ingest),
            ("augment", commands::augment),
            ("train", commands::train),
            ("evaluate", commands::evaluate_cmd),
            ("merge", commands::merge),
        ],
        Command::SynthCorpus { .. } => unreachable!(),
    };
    let mut stderr = std::io::stderr();
    for (name, stage) in stages {
        match stage(&ctx, &mut stderr) {
            Ok(Outcome::UpToDate) => eprintln!("{name}: up to date"),
            Ok(Outcome::Done) => {}
            Err(e) => return Err(format!("{name}: {e}")),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
