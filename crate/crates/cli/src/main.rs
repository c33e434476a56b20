use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use shopsim::catalog::{generate_catalog, load_catalog, CatalogSpec};
use shopsim::harness::{compute_gaps, emit_table, run_benchmark, Ablation, RunConfig, Summary};
use shopsim::par::Execution;
use shopsim::rerank::generate_ratings;
use shopsim::tasks::{default_profiles, generate_suite};

#[derive(Parser)]
#[command(name = "shopsim", version, about = "Personalized shopping environment benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a policy over every user stream and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_ablation)]
        ablate: Option<Ablation>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Alignment gaps from three run directories.
    Gaps {
        #[arg(long)]
        full: PathBuf,
        #[arg(long)]
        hi: PathBuf,
        #[arg(long)]
        ed: PathBuf,
    },
    /// Generate the instruction suite for the built-in users.
    GenSuite {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate run directories.
    Table {
        #[arg(long = "in", num_args = 1.., required = true)]
        dirs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate a synthetic catalog.
    GenCatalog {
        #[arg(long, default_value_t = 2000)]
        items: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate prime-user ratings for a catalog.
    GenRatings {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value_t = 30)]
        users: usize,
        #[arg(long, default_value_t = 100)]
        per_user: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    s.parse()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, ablate, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(a) = ablate {
                cfg.ablation = a;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            let report = run_benchmark(&cfg)?;
            let s = &report.summary;
            println!(
                "{} [{}] reward {:.1} sr {:.1} time {:.2}s money ${:.4} over {} episodes -> {}",
                s.policy,
                s.ablation.as_str(),
                s.reward_mean,
                s.sr,
                s.time_mean,
                s.money_mean,
                s.episodes,
                cfg.out.display()
            );
        }
        Command::Gaps { full, hi, ed } => {
            let g = compute_gaps(&Summary::load(&full)?, &Summary::load(&hi)?, &Summary::load(&ed)?)?;
            println!("{}", serde_json::to_string_pretty(&g)?);
        }
        Command::GenSuite { catalog, seed, out } => {
            let catalog = load_catalog(&catalog)?;
            let suite = generate_suite(&catalog, &default_profiles(), seed, Execution::default())?;
            suite.save(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("{} users, suite hash {}", suite.users.len(), suite.content_hash());
        }
        Command::Table { dirs, csv } => {
            let summaries = dirs.iter().map(Summary::load).collect::<Result<Vec<_>, _>>()?;
            let (text, table_csv) = emit_table(&summaries)?;
            print!("{text}");
            if let Some(path) = csv {
                fs::write(&path, table_csv).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::GenCatalog { items, seed, out } => {
            let catalog = generate_catalog(&CatalogSpec { items, seed });
            catalog.write_jsonl(&out)?;
            println!("{} items -> {}", catalog.len(), out.display());
        }
        Command::GenRatings { catalog, users, per_user, seed, out } => {
            let catalog = load_catalog(&catalog)?;
            let ratings = generate_ratings(&catalog, users, per_user, seed);
            fs::write(&out, ratings.to_json()).with_context(|| format!("writing {}", out.display()))?;
            println!("{users} prime users -> {}", out.display());
        }
    }
    Ok(())
}
