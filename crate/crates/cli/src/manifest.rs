//! Run manifest: per stage, the hash of its parameters and seed plus the
//! SHA-256 of every file it read and wrote.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use belief_landscape::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    /// Keyed by path relative to the output directory.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> CliResult<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("{:x}", h.finalize()))
}

impl Manifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(FILE_NAME);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::Format {
                path: path.clone(),
                line: e.line(),
                message: e.to_string(),
            }
            .into()
        })
    }

    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(FILE_NAME);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e).into())
    }

    /// Whether `stage` already ran with this configuration on these inputs
    /// and its outputs are untouched.
    pub fn is_fresh(&self, stage: &str, want: &StageRecord, out_dir: &Path) -> bool {
        let Some(rec) = self.stages.get(stage) else { return false };
        rec.config_hash == want.config_hash
            && rec.seed == want.seed
            && rec.inputs == want.inputs
            && !rec.outputs.is_empty()
            && rec
                .outputs
                .iter()
                .all(|(p, h)| hash_file(&out_dir.join(p)).is_ok_and(|cur| &cur == h))
    }
}

/// Manifest key of an output file.
pub fn relative(out_dir: &Path, path: &Path) -> String {
    let rel: PathBuf = path.strip_prefix(out_dir).map(Path::to_path_buf).unwrap_or_else(|_| path.into());
    rel.to_string_lossy().replace('\\', "/")
}
