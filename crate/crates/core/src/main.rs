use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use genrefine::corpus::DatasetName;
use genrefine::runner::{Pipeline, PipelineConfig};
use genrefine::selection::Strategy;
use genrefine::{Error, Result};

/// Generate-then-refine synthetic data pipeline for zero-resource intent detection.
#[derive(Debug, Parser)]
#[command(name = "genrefine", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset override: clinc150, sgd or custom.
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Number of trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Strategies to run; repeat or comma-separate.
    #[arg(long, global = true, value_delimiter = ',')]
    strategy: Vec<String>,
    /// Synthetic sample size multiplier (1 or 2).
    #[arg(long, global = true)]
    multiplier: Option<usize>,
    /// Root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory holding the run manifest and artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Skip intents whose generation file is already complete.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Verb {
    /// Plan trials and write the run manifest.
    Split,
    /// Generate utterances for every planned intent.
    Generate,
    /// Build the zerogen and supergen training sets.
    Select,
    /// Train the refiner on seen domains and refine unseen generations.
    Refine,
    /// Train and score classifiers for every strategy and trial.
    Evaluate,
    /// Write markdown and SVG reports.
    Report,
    /// Split, then every later stage in order.
    Run,
}

fn config_with_overrides(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Usage("--config: a configuration file is required to plan a run".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(d) = &cli.dataset {
        cfg.dataset = d.parse::<DatasetName>()?;
    }
    if let Some(n) = cli.trials {
        cfg.n_trials = n;
    }
    if !cli.strategy.is_empty() {
        cfg.strategies = cli.strategy.iter().map(|s| s.parse::<Strategy>()).collect::<Result<_>>()?;
    }
    if let Some(m) = cli.multiplier {
        cfg.sample_size_multiplier = m;
    }
    if let Some(s) = cli.seed {
        cfg.seeds.root = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open(cli: &Cli) -> Result<Pipeline> {
    let out = match (&cli.out, &cli.config) {
        (Some(o), _) => o.clone(),
        (None, Some(c)) => PipelineConfig::load(c)?.output_dir,
        (None, None) => return Err(Error::Usage("--out: give the run directory or a --config naming it".into())),
    };
    Ok(Pipeline::open(&out)?.with_resume(cli.resume))
}

fn run(cli: &Cli) -> Result<()> {
    match cli.verb {
        Verb::Split | Verb::Run => {
            let mut p = Pipeline::split(config_with_overrides(cli)?)?.with_resume(cli.resume);
            println!(
                "planned {} trial(s) in {}",
                p.manifest.plans.len(),
                p.manifest.out_dir().display()
            );
            if matches!(cli.verb, Verb::Run) {
                let agg = p.run_all()?;
                print!("{}", agg.to_markdown());
            }
        }
        Verb::Generate => open(cli)?.generate()?,
        Verb::Select => open(cli)?.select()?,
        Verb::Refine => open(cli)?.refine()?,
        Verb::Evaluate => print!("{}", open(cli)?.evaluate()?.to_markdown()),
        Verb::Report => println!("wrote {}", open(cli)?.report()?.display()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
