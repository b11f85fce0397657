use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use fundmatch_core::stages::{self, IngestInputs};
use fundmatch_core::synth::{self, SynthOptions};
use fundmatch_core::{Corpus, Error, PipelineConfig};

#[derive(Parser)]
#[command(name = "fundmatch", version, about = "Match researchers to funding calls")]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, env = "FUNDMATCH_CONFIG", default_value = "config.json")]
    config: PathBuf,

    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Work {
    /// Directory holding the stage files.
    #[arg(long, default_value = "work")]
    work: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Configuration helpers.
    #[command(subcommand)]
    Config(ConfigCommand),
    /// Validate raw inputs into canonical stage files and rejects.jsonl.
    Ingest {
        #[arg(long)]
        publications: PathBuf,
        #[arg(long)]
        calls: PathBuf,
        #[arg(long)]
        masters: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        /// Optional doi,topic CSV.
        #[arg(long)]
        topics: Option<PathBuf>,
        #[command(flatten)]
        work: Work,
    },
    /// Resolve source author profiles into researchers.
    Resolve(Work),
    /// Embed publications and calls, writing debiased vectors.jsonl.
    Embed(Work),
    /// Write scores.jsonl.
    Score(Work),
    /// Write assignments.csv and recommendations.csv from scores.jsonl.
    Rank(Work),
    /// Write analytics.json from scores.jsonl.
    Analyze(Work),
    /// Score, rank and analyze in one pass and write every report.
    Report {
        #[command(flatten)]
        work: Work,
        /// Report directory; defaults to the work directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 50)]
        researchers: usize,
        #[arg(long, default_value_t = 20)]
        calls: usize,
        /// Defaults to the config's seed, or 0 without a config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 8)]
        topics: usize,
        #[arg(long, default_value_t = 2)]
        min_pubs: usize,
        #[arg(long, default_value_t = 20)]
        max_pubs: usize,
        #[arg(long)]
        reference_year: Option<i32>,
        /// Give every researcher enough recent leading papers for all default indicators.
        #[arg(long)]
        all_eligible: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API over the work directory.
    Serve {
        #[command(flatten)]
        work: Work,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Write a config file with default values.
    Init {
        #[arg(long, default_value_t = fundmatch_core::config::DEFAULT_REFERENCE_YEAR)]
        reference_year: i32,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

fn load_config(path: &Path) -> Result<PipelineConfig, Failure> {
    Ok(PipelineConfig::load(path)?)
}

fn config_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::Validation(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Config(ConfigCommand::Init { reference_year, force }) => {
            if cli.config.exists() && !force {
                return Err(Failure::Validation(format!(
                    "{} already exists (use --force to overwrite)",
                    cli.config.display()
                )));
            }
            let config = PipelineConfig {
                reference_year,
                ..Default::default()
            };
            config.validate()?;
            config.save(&cli.config)?;
            println!("wrote {}", cli.config.display());
        }
        Command::Ingest {
            publications,
            calls,
            masters,
            profiles,
            topics,
            work,
        } => {
            let config = load_config(&cli.config)?;
            let inputs = IngestInputs {
                publications,
                calls,
                masters,
                profiles,
                topics,
            };
            let s = stages::ingest(&inputs, &work.work, config.reference_year)?;
            println!(
                "publications {} calls {} masters {} profiles {} topics enriched {} rejects {}",
                s.publications, s.calls, s.masters, s.profiles, s.topics_enriched, s.rejects
            );
        }
        Command::Resolve(work) => {
            let r = stages::resolve(&work.work)?;
            println!(
                "researchers {} unmatched source profiles {}",
                r.researchers.len(),
                r.unmatched_source_ids.len()
            );
        }
        Command::Embed(work) => {
            let config = load_config(&cli.config)?;
            let n = stages::embed(&work.work, &config, &config_dir(&cli.config))?;
            println!("vectors {n}");
        }
        Command::Score(work) => {
            let config = load_config(&cli.config)?;
            let rows = stages::score(&work.work, &config)?;
            println!("scores {}", rows.len());
        }
        Command::Rank(work) => {
            let config = load_config(&cli.config)?;
            let n = stages::rank(&work.work, &config)?;
            println!("assignments {n}");
        }
        Command::Analyze(work) => {
            let config = load_config(&cli.config)?;
            let a = stages::analyze_scores(&work.work, &config)?;
            for row in &a.summary {
                println!(
                    "{}: {} researchers, {:.2} calls each",
                    row.indicator_name, row.researchers_assigned, row.avg_calls_per_researcher
                );
            }
        }
        Command::Report { work, out } => {
            let config = load_config(&cli.config)?;
            let out = out.unwrap_or_else(|| work.work.clone());
            let snap = stages::report(&work.work, &out, &config)?;
            println!(
                "snapshot {} assignments {}",
                snap.info.snapshot_id,
                snap.output.ranking.assignments().len()
            );
        }
        Command::Synth {
            researchers,
            calls,
            seed,
            topics,
            min_pubs,
            max_pubs,
            reference_year,
            all_eligible,
            out,
        } => {
            let config = if cli.config.exists() { Some(load_config(&cli.config)?) } else { None };
            let defaults = SynthOptions::default();
            let opts = SynthOptions {
                researchers,
                calls,
                seed: seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0),
                reference_year: reference_year
                    .or(config.as_ref().map(|c| c.reference_year))
                    .unwrap_or(defaults.reference_year),
                topics,
                min_pubs,
                max_pubs,
                all_eligible,
            };
            let corpus = synth::generate(&opts)?;
            synth::write_corpus(&corpus, &out)?;
            println!(
                "wrote {} masters, {} publications, {} calls to {}",
                corpus.masters.len(),
                corpus.publications.len(),
                corpus.calls.len(),
                out.display()
            );
        }
        Command::Serve { work, addr } => {
            let config = load_config(&cli.config)?;
            let corpus = Corpus::load(&work.work)?;
            let state = Arc::new(fundmatch_service::AppState::new(corpus, config)?);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
            runtime
                .block_on(fundmatch_service::serve(state, addr))
                .map_err(|e| Failure::Io(format!("{addr}: {e}")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
