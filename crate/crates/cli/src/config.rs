//! Run configuration: a TOML file whose sections mirror the stage
//! parameters, an `[inputs]` table, a seed, and named profiles.
//!
//! Values are layered as defaults, then the built-in profile (if any), then
//! the file's top level, then the file's `[profiles.<name>]` table.

use std::path::{Path, PathBuf};

use belief_landscape::pipeline::Params;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Tweets, one JSON object per line.
    pub corpus: Option<PathBuf>,
    /// Dependency parses in CoNLL-U.
    pub parses: Option<PathBuf>,
    /// Sentence embeddings keyed by statement id.
    pub embeddings: Option<PathBuf>,
    /// `user_id,stance` labels used to name stance clusters.
    pub gold: Option<PathBuf>,
    /// `user_id,score` bot scores in [0, 1].
    pub bot_scores: Option<PathBuf>,
    /// `user_id,cluster_id` replacing the built-in stance clustering.
    pub stance_clusters: Option<PathBuf>,
    /// `statement_id,x,y` replacing the built-in statement projection.
    pub statement_coordinates: Option<PathBuf>,
    /// `user_id,t,x,y` replacing the built-in belief-vector projection.
    pub landscape_coordinates: Option<PathBuf>,
}

impl Inputs {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.parses,
            &mut self.embeddings,
            &mut self.gold,
            &mut self.bot_scores,
            &mut self.stance_clusters,
            &mut self.statement_coordinates,
            &mut self.landscape_coordinates,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    fn named(&self) -> Vec<(&'static str, &PathBuf)> {
        [
            ("corpus", &self.corpus),
            ("parses", &self.parses),
            ("embeddings", &self.embeddings),
            ("gold", &self.gold),
            ("bot_scores", &self.bot_scores),
            ("stance_clusters", &self.stance_clusters),
            ("statement_coordinates", &self.statement_coordinates),
            ("landscape_coordinates", &self.landscape_coordinates),
        ]
        .into_iter()
        .filter_map(|(n, p)| Some((n, p.as_ref()?)))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub inputs: Inputs,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTop {
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    inputs: Inputs,
}

/// Command-line overrides, applied last.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub profile: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

const PARAM_SECTIONS: [&str; 9] = [
    "ingest",
    "stance",
    "catalog",
    "pairs",
    "cluster",
    "trajectory",
    "landscape",
    "hypotheses",
    "render",
];

fn builtin_profile(name: &str) -> Option<Params> {
    match name {
        "fixtures" => Some(Params::fixtures()),
        _ => None,
    }
}

fn to_table(p: &Params) -> Table {
    match Value::try_from(p) {
        Ok(Value::Table(t)) => t,
        other => unreachable!("parameters serialise to a table, got {other:?}"),
    }
}

/// Recursively overlays `top` onto `base`; tables merge, everything else
/// replaces.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    pub fn load(o: &Overrides) -> CliResult<Self> {
        let (file, base_dir) = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let table: Table = text
                    .parse()
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (table, dir)
            }
            None => (Table::new(), PathBuf::new()),
        };
        Self::from_table(file, &base_dir, o)
    }

    pub fn from_table(mut file: Table, base_dir: &Path, o: &Overrides) -> CliResult<Self> {
        let mut profiles = match file.remove("profiles") {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(_) => return Err(CliError::Config("`profiles` must be a table".into())),
        };
        let mut params = to_table(&Params::default());
        if let Some(name) = &o.profile {
            let builtin = builtin_profile(name);
            let from_file = profiles.remove(name);
            if builtin.is_none() && from_file.is_none() {
                return Err(CliError::Config(format!("unknown profile `{name}`")));
            }
            if let Some(b) = builtin {
                merge(&mut params, to_table(&b));
            }
            split_and_merge(&mut params, &mut file)?;
            match from_file {
                Some(Value::Table(mut t)) => {
                    split_and_merge(&mut params, &mut t)?;
                    merge(&mut file, t);
                }
                Some(_) => return Err(CliError::Config(format!("profile `{name}` must be a table"))),
                None => {}
            }
        } else {
            split_and_merge(&mut params, &mut file)?;
        }
        let params: Params = Value::Table(params)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let top: FileTop = Value::Table(file)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut inputs = top.inputs;
        inputs.resolve(base_dir);
        let out = o
            .out
            .clone()
            .or(top.out.map(|p| if p.is_relative() { base_dir.join(p) } else { p }))
            .unwrap_or_else(|| PathBuf::from("blf-out"));
        let cfg = RunConfig {
            params,
            inputs,
            seed: o.seed.or(top.seed).unwrap_or(DEFAULT_SEED),
            out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every named input must exist.
    pub fn validate(&self) -> CliResult<()> {
        for (name, path) in self.inputs.named() {
            if !path.is_file() {
                return Err(CliError::Config(format!("inputs.{name}: {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn input(&self, name: &'static str) -> CliResult<&Path> {
        self.inputs
            .named()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, p)| p.as_path())
            .ok_or_else(|| CliError::Config(format!("inputs.{name} is required for this stage")))
    }
}

/// Moves the parameter sections out of `src` and overlays them.
fn split_and_merge(params: &mut Table, src: &mut Table) -> CliResult<()> {
    for name in PARAM_SECTIONS {
        match src.remove(name) {
            Some(Value::Table(t)) => merge_section(params, name, t),
            Some(_) => return Err(CliError::Config(format!("`{name}` must be a table"))),
            None => {}
        }
    }
    Ok(())
}

fn merge_section(params: &mut Table, name: &str, t: Table) {
    let mut wrapper = Table::new();
    wrapper.insert(name.to_string(), Value::Table(t));
    merge(params, wrapper);
}
