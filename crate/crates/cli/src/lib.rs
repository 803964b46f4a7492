//! The `blf` command line: configuration, stage runner, manifest and
//! rendering.

pub mod config;
pub mod error;
pub mod manifest;
pub mod render;
pub mod stages;
pub mod synth;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::error::CliResult;
use crate::stages::{Outcome, Runner, Stage};

#[derive(Debug, Parser)]
#[command(name = "blf", version, about = "Belief landscapes from social media corpora")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Parameter profile, built in (`fixtures`) or defined in the config.
    #[arg(long, global = true)]
    pub profile: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Rerun stages even when the manifest shows them up to date.
    #[arg(long, global = true)]
    pub force: bool,
    /// Log progress (`-vv` for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter the corpus and flag bot accounts.
    Ingest,
    /// Extract subject-verb-object belief statements.
    Extract,
    /// Assign user stances from retweet affiliation.
    Stance,
    /// Build the subject catalog and the focal statement set.
    Catalog,
    /// Sample labelled sentence pairs for embedding fine-tuning.
    Pairs,
    /// Project and cluster focal statement embeddings.
    Cluster,
    /// Decay-weighted belief vectors per user and window.
    Trajectories,
    /// Project belief vectors, estimate density, find attractors.
    Landscape,
    /// Test the hypotheses and write the report.
    Evaluate,
    /// Draw each landscape as SVG.
    Render,
    /// Run every stage in order.
    Pipeline,
    /// Write a synthetic corpus and config under `--out`.
    Synth {
        /// Smaller world for quick runs.
        #[arg(long)]
        small: bool,
    },
}

fn stage_of(c: &Command) -> Option<Stage> {
    Some(match c {
        Command::Ingest => Stage::Ingest,
        Command::Extract => Stage::Extract,
        Command::Stance => Stage::Stance,
        Command::Catalog => Stage::Catalog,
        Command::Pairs => Stage::Pairs,
        Command::Cluster => Stage::Cluster,
        Command::Trajectories => Stage::Trajectories,
        Command::Landscape => Stage::Landscape,
        Command::Evaluate => Stage::Evaluate,
        Command::Render => Stage::Render,
        Command::Pipeline | Command::Synth { .. } => return None,
    })
}

pub fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    if let Command::Synth { small } = cli.command {
        let seed = g.seed.unwrap_or(belief_landscape::synth::WorldParams::default().seed);
        let params = if small {
            belief_landscape::synth::WorldParams::small(seed)
        } else {
            belief_landscape::synth::WorldParams {
                seed,
                ..Default::default()
            }
        };
        let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("synthetic"));
        let config = synth::write_world(&dir, &params)?;
        println!("wrote {}", config.display());
        return Ok(());
    }
    let cfg = RunConfig::load(&Overrides {
        config: g.config.clone(),
        profile: g.profile.clone(),
        seed: g.seed,
        out: g.out.clone(),
    })?;
    let mut runner = Runner::new(cfg, g.force)?;
    let stages: Vec<Stage> = match stage_of(&cli.command) {
        Some(s) => vec![s],
        None => Stage::ALL.to_vec(),
    };
    for s in stages {
        let outcome = runner.run(s)?;
        let word = match outcome {
            Outcome::Ran => "done",
            Outcome::UpToDate => "up to date",
        };
        println!("{:<13} {word}", s.name());
    }
    Ok(())
}
