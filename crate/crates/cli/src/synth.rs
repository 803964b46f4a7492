//! Writes a synthetic corpus with planted attractors, in the formats the
//! pipeline reads, plus a config file pointing at it.

use std::fs;
use std::path::{Path, PathBuf};

use belief_landscape::ingest::{write_corpus, write_parses};
use belief_landscape::synth::{agent_world, WorldParams};
use belief_landscape::Error;

use crate::error::CliResult;

pub const CONFIG: &str = "config.toml";

/// Writes the world under `dir`; returns the config path.
pub fn write_world(dir: &Path, p: &WorldParams) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let world = agent_world(p);
    write_corpus(dir.join("tweets.jsonl"), &world.tweets)?;
    let parses = dir.join("parses.conllu");
    let mut buf = Vec::new();
    write_parses(&mut buf, &world.parses).map_err(|e| Error::io(&parses, e))?;
    fs::write(&parses, buf).map_err(|e| Error::io(&parses, e))?;
    world.embeddings.save(dir.join("embeddings.txt"))?;

    let mut gold = String::from("user_id,stance\n");
    for (u, s) in &world.gold {
        gold.push_str(&format!("{u},{}\n", s.as_str()));
    }
    let gold_path = dir.join("gold.csv");
    fs::write(&gold_path, gold).map_err(|e| Error::io(&gold_path, e))?;

    let quoted = |v: &[String]| v.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ");
    let config = format!(
        "seed = {seed}\n\
         out = \"out\"\n\
         \n\
         [inputs]\n\
         corpus = \"tweets.jsonl\"\n\
         parses = \"parses.conllu\"\n\
         embeddings = \"embeddings.txt\"\n\
         # gold = \"gold.csv\"\n\
         \n\
         [stance]\n\
         believer_seeds = [{b}]\n\
         skeptic_seeds = [{s}]\n",
        seed = p.seed,
        b = quoted(&world.believer_accounts),
        s = quoted(&world.skeptic_accounts),
    );
    let path = dir.join(CONFIG);
    fs::write(&path, config).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
