//! Belief propositions: density clusters of embedded focal statements, and
//! the per-stance count / coverage / purity measures used to score encoders.

use std::collections::BTreeMap;
use std::path::Path;

use crate::density::{DensityParams, Labels};
use crate::error::{Error, Result};
use crate::ingest::EmbeddingFile;
use crate::projection::pca_2d;
use crate::stance::{cluster_label, cluster_purity, Stance};

/// How statement embeddings reach the plane.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    /// Leading two principal axes of the embeddings.
    Pca,
    /// Externally computed coordinates keyed by statement id.
    Import(BTreeMap<String, [f64; 2]>),
}

/// Projects every embedding row to 2D, in row order.
pub fn project_embeddings(emb: &EmbeddingFile, method: &Projection) -> Result<Vec<(String, [f64; 2])>> {
    if emb.dim < 2 {
        return Err(Error::param("dim", format!("embedding dimension {} is below 2", emb.dim)));
    }
    match method {
        Projection::Pca => {
            let rows: Vec<Vec<f64>> = emb.rows.iter().map(|(_, v)| v.clone()).collect();
            let coords = pca_2d(&rows)?;
            Ok(emb.rows.iter().map(|(id, _)| id.clone()).zip(coords).collect())
        }
        Projection::Import(coords) => emb
            .rows
            .iter()
            .map(|(id, _)| {
                coords
                    .get(id)
                    .map(|c| (id.clone(), *c))
                    .ok_or_else(|| Error::Degenerate(format!("no imported coordinates for `{id}`")))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefCluster {
    pub id: usize,
    pub members: Vec<String>,
    /// Majority author stance; `None` when no member has a stance.
    pub majority: Option<Stance>,
    pub purity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefClusterSet {
    pub clusters: Vec<BeliefCluster>,
    pub noise: Vec<String>,
    /// Cluster id per statement id.
    pub assignment: BTreeMap<String, Option<usize>>,
    /// Author stance per statement id, where known.
    pub stances: BTreeMap<String, Stance>,
    pub coverage: f64,
}

impl BeliefClusterSet {
    pub fn total(&self) -> usize {
        self.assignment.len()
    }

    /// Groups labelled statements. `labels[i]` belongs to `ids[i]`.
    pub fn from_labels(ids: &[String], labels: &[Option<usize>], stances: BTreeMap<String, Stance>) -> Self {
        let mut members: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        let mut noise = Vec::new();
        let mut assignment = BTreeMap::new();
        for (id, l) in ids.iter().zip(labels) {
            match l {
                Some(c) => members.entry(*c).or_default().push(id.clone()),
                None => noise.push(id.clone()),
            }
            assignment.insert(id.clone(), *l);
        }
        let clusters: Vec<BeliefCluster> = members
            .into_iter()
            .map(|(id, members)| {
                let names = members.iter().map(String::as_str);
                let majority = cluster_label(names.clone(), &stances);
                let purity = cluster_purity(names, &stances);
                BeliefCluster {
                    id,
                    members,
                    majority,
                    purity,
                }
            })
            .collect();
        let total = ids.len();
        let coverage = if total == 0 {
            0.0
        } else {
            (total - noise.len()) as f64 / total as f64
        };
        if clusters.is_empty() && total > 0 {
            log::warn!("all {total} statements are NOISE");
        }
        BeliefClusterSet {
            clusters,
            noise,
            assignment,
            stances,
            coverage,
        }
    }
}

/// Reference parameters for ~170k statements. `eps` has no counterpart in the
/// hierarchical method these stand in for and must suit the projection scale.
pub const REFERENCE_PARAMS: DensityParams = DensityParams {
    eps: 0.5,
    min_samples: 100,
    min_cluster_size: 200,
};

/// Density-clusters projected statements. Points are processed in statement
/// id order, so the result does not depend on input order.
pub fn cluster_projection(
    coords: &[(String, [f64; 2])],
    params: &DensityParams,
    stances: BTreeMap<String, Stance>,
) -> BeliefClusterSet {
    let mut sorted: Vec<&(String, [f64; 2])> = coords.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let points: Vec<Vec<f64>> = sorted.iter().map(|(_, c)| c.to_vec()).collect();
    let labels: Labels = params.fit(&points);
    let ids: Vec<String> = sorted.iter().map(|(id, _)| id.clone()).collect();
    BeliefClusterSet::from_labels(&ids, &labels, stances)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StanceMetrics {
    /// Clusters whose majority stance is this one.
    pub num_clusters: usize,
    /// Fraction of this stance's statements inside any cluster.
    pub coverage: f64,
    /// Mean purity of this stance's clusters; absent without clusters.
    pub purity: Option<f64>,
}

/// Per-stance measures. Statements without a known author stance count
/// toward neither stance's coverage.
pub fn cluster_metrics(set: &BeliefClusterSet) -> BTreeMap<Stance, StanceMetrics> {
    Stance::ALL
        .iter()
        .map(|&s| {
            let mine: Vec<&BeliefCluster> = set.clusters.iter().filter(|c| c.majority == Some(s)).collect();
            let purity = (!mine.is_empty()).then(|| {
                mine.iter().map(|c| c.purity.unwrap_or(0.0)).sum::<f64>() / mine.len() as f64
            });
            let (clustered, total) = set
                .stances
                .iter()
                .filter(|(id, st)| **st == s && set.assignment.contains_key(*id))
                .fold((0usize, 0usize), |(c, t), (id, _)| {
                    (c + usize::from(set.assignment[id].is_some()), t + 1)
                });
            let coverage = if total == 0 { 0.0 } else { clustered as f64 / total as f64 };
            (
                s,
                StanceMetrics {
                    num_clusters: mine.len(),
                    coverage,
                    purity,
                },
            )
        })
        .collect()
}

/// `statement_id,cluster_id` with `NOISE` for unclustered statements.
pub fn write_assignments(path: impl AsRef<Path>, set: &BeliefClusterSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["statement_id", "cluster_id"]).map_err(|e| csv_err(path, e))?;
    for (id, l) in &set.assignment {
        let c = l.map_or_else(|| "NOISE".to_string(), |c| c.to_string());
        w.write_record([id.as_str(), c.as_str()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an assignment file written by [`write_assignments`].
pub fn load_assignments(path: impl AsRef<Path>) -> Result<BTreeMap<String, Option<usize>>> {
    let path = path.as_ref();
    let rows = crate::ingest::read_user_table(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, (id, v))| {
            crate::stance::parse_cluster_id(&v)
                .map(|c| (id, c))
                .ok_or_else(|| Error::Format {
                    path: path.into(),
                    line: i + 2,
                    message: format!("bad cluster id `{v}`"),
                })
        })
        .collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.into(),
        line: 0,
        message: e.to_string(),
    }
}
