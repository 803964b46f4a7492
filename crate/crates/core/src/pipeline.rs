//! Stage parameters with their defaults, and the in-memory stage functions
//! the command line chains together.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::belief_clusters::{cluster_projection, project_embeddings, BeliefClusterSet, Projection};
use crate::catalog::{build_catalog, focal_set, Catalog, FocalSet};
use crate::density::DensityParams;
use crate::error::{Error, Result};
use crate::hypotheses::{evaluate, EvalParams, Evaluation};
use crate::ingest::{DepSentence, EmbeddingFile, Tweet};
use crate::landscape::{
    find_maxima, kde2d, project_vectors, threshold_attractors, Attractor, DensityGrid, LandscapePoint, VectorProjection,
};
use crate::pairs::{sample_cluster, sample_knn, sample_random, PairCounts, PairPool, PairSample, SimilarityStrategy};
use crate::stance::{
    assign_stances, build_affiliation, stance_map, AffiliationClusterer, DensityBaseline, EligibilityRule,
    ImportedClusters, NamingRule, Stance, StanceAssignment, StanceLabel,
};
use crate::svo::{extract_tweet, BeliefStatement, Extraction};
use crate::trajectory::{halflife_sweep, BeliefVector, DecayParams, Observation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct IngestParams {
    pub lang: Option<String>,
    pub terms: Vec<String>,
    /// Inclusive epoch-second bounds.
    pub interval: Option<[i64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StanceParams {
    pub min_tweets: usize,
    pub min_retweets: usize,
    pub binary: bool,
    pub dims: usize,
    pub eps: f64,
    pub min_samples: usize,
    pub min_cluster_size: usize,
    /// Accounts whose retweeters name a cluster; ignored when gold labels
    /// are supplied.
    pub believer_seeds: Vec<String>,
    pub skeptic_seeds: Vec<String>,
    pub bot_threshold: f64,
    pub unscored_as_human: bool,
}

impl Default for StanceParams {
    fn default() -> Self {
        let d = DensityBaseline::default();
        StanceParams {
            min_tweets: 100,
            min_retweets: 1,
            binary: false,
            dims: 2,
            eps: d.density.eps,
            min_samples: d.density.min_samples,
            min_cluster_size: d.density.min_cluster_size,
            believer_seeds: Vec::new(),
            skeptic_seeds: Vec::new(),
            bot_threshold: 0.5,
            unscored_as_human: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogParams {
    pub top_k: usize,
    pub aliases: BTreeMap<String, String>,
}

impl Default for CatalogParams {
    fn default() -> Self {
        CatalogParams {
            top_k: 100,
            aliases: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairParams {
    /// `random`, `knn` or `cluster`.
    pub sampler: String,
    /// `min` or `invert`.
    pub strategy: String,
    pub cutoff: f64,
    pub homog_per_stance: usize,
    pub heterog: usize,
    pub k: usize,
    pub purity_cutoff: f64,
    pub fraction: f64,
}

impl Default for PairParams {
    fn default() -> Self {
        PairParams {
            sampler: "random".into(),
            strategy: "invert".into(),
            cutoff: 0.0,
            homog_per_stance: 500_000,
            heterog: 1_500_000,
            k: 5,
            purity_cutoff: 0.9,
            fraction: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_samples: usize,
    pub min_cluster_size: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        let r = crate::belief_clusters::REFERENCE_PARAMS;
        ClusterParams {
            eps: r.eps,
            min_samples: r.min_samples,
            min_cluster_size: r.min_cluster_size,
        }
    }
}

impl ClusterParams {
    pub fn density(&self) -> DensityParams {
        DensityParams {
            eps: self.eps,
            min_samples: self.min_samples,
            min_cluster_size: self.min_cluster_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryParams {
    pub window_days: u32,
    pub min_history_days: u32,
    pub origin: i64,
    /// The configuration grid, in windows.
    pub halflives: Vec<f64>,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        TrajectoryParams {
            window_days: 7,
            min_history_days: 7,
            origin: 0,
            halflives: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        }
    }
}

impl TrajectoryParams {
    pub fn decay(&self) -> DecayParams {
        DecayParams {
            halflife: self.halflives.first().copied().unwrap_or(1.0),
            window_days: self.window_days,
            min_history_days: self.min_history_days,
            origin: self.origin,
        }
    }

    /// Column name of a grid entry, in days.
    pub fn label(&self, halflife: f64) -> String {
        format!("{}d", halflife * f64::from(self.window_days))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeParams {
    pub train_fraction: f64,
    pub n_grid: usize,
    /// Grid margin in bandwidths.
    pub margin: f64,
    pub magnitude_cutoff: f64,
}

impl Default for LandscapeParams {
    fn default() -> Self {
        LandscapeParams {
            train_fraction: 0.3,
            n_grid: crate::landscape::DEFAULT_GRID,
            margin: 1.0,
            magnitude_cutoff: crate::landscape::DEFAULT_MAGNITUDE_CUTOFF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesisParams {
    pub min_periods: usize,
    pub exclude_gaps: bool,
    pub fixed_k: usize,
    pub k_neighbors: usize,
}

impl Default for HypothesisParams {
    fn default() -> Self {
        let e = EvalParams::default();
        HypothesisParams {
            min_periods: e.min_periods,
            exclude_gaps: e.exclude_gaps,
            fixed_k: e.top_k,
            k_neighbors: e.max_neighbors,
        }
    }
}

impl HypothesisParams {
    pub fn eval(&self) -> EvalParams {
        EvalParams {
            min_periods: self.min_periods,
            exclude_gaps: self.exclude_gaps,
            top_k: self.fixed_k,
            max_neighbors: self.k_neighbors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderParams {
    pub sample_fraction: f64,
    pub contour_levels: usize,
}

impl Default for RenderParams {
    fn default() -> Self {
        RenderParams {
            sample_fraction: 0.001,
            contour_levels: 8,
        }
    }
}

/// Every stage's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub ingest: IngestParams,
    pub stance: StanceParams,
    pub catalog: CatalogParams,
    pub pairs: PairParams,
    pub cluster: ClusterParams,
    pub trajectory: TrajectoryParams,
    pub landscape: LandscapeParams,
    pub hypotheses: HypothesisParams,
    pub render: RenderParams,
}

impl Params {
    /// Overrides for desk-scale corpora (thousands of statements rather
    /// than hundreds of thousands).
    pub fn fixtures() -> Self {
        let d = Params::default();
        Params {
            stance: StanceParams {
                min_tweets: 20,
                ..d.stance
            },
            pairs: PairParams {
                homog_per_stance: 2_000,
                heterog: 6_000,
                ..d.pairs
            },
            cluster: ClusterParams {
                eps: 0.3,
                min_samples: 10,
                min_cluster_size: 30,
            },
            trajectory: TrajectoryParams {
                halflives: vec![2.0, 3.0],
                ..d.trajectory
            },
            render: RenderParams {
                sample_fraction: 0.1,
                ..d.render
            },
            ..d
        }
    }
}

/// Statements from every tweet that has parses, in tweet order.
pub fn extract_all(tweets: &[Tweet], parses: &[DepSentence]) -> Extraction {
    let mut by_tweet: HashMap<&str, Vec<DepSentence>> = HashMap::new();
    for s in parses {
        by_tweet.entry(s.tweet_id.as_str()).or_default().push(s.clone());
    }
    let mut out = Extraction::default();
    for t in tweets {
        if let Some(sents) = by_tweet.get_mut(t.tweet_id.as_str()) {
            sents.sort_by_key(|s| s.sent_index);
            out.merge(extract_tweet(sents, t));
        }
    }
    out
}

/// Eligible users clustered by retweet affiliation and named by gold labels
/// (if given) or seed accounts. `imported` replaces the built-in clustering.
pub fn assign_user_stances(
    tweets: &[Tweet],
    p: &StanceParams,
    gold: Option<&BTreeMap<String, Stance>>,
    imported: Option<&ImportedClusters>,
    seed: u64,
) -> Result<Vec<StanceAssignment>> {
    let rule = EligibilityRule {
        min_tweets: p.min_tweets,
        min_retweets: p.min_retweets,
        binary: p.binary,
    };
    let matrix = build_affiliation(tweets, rule)?;
    let labels = match imported {
        Some(c) => c.cluster(&matrix, seed)?,
        None => DensityBaseline {
            dims: Some(p.dims),
            density: DensityParams {
                eps: p.eps,
                min_samples: p.min_samples,
                min_cluster_size: p.min_cluster_size,
            },
        }
        .cluster(&matrix, seed)?,
    };
    let naming = match gold {
        Some(g) => NamingRule::GoldMajority(g.clone()),
        None if !p.believer_seeds.is_empty() || !p.skeptic_seeds.is_empty() => NamingRule::SeedAccounts {
            believer: p.believer_seeds.clone(),
            skeptic: p.skeptic_seeds.clone(),
        },
        None => {
            return Err(Error::param(
                "stance.believer_seeds",
                "naming clusters needs gold labels or seed accounts",
            ))
        }
    };
    Ok(assign_stances(&matrix, &labels, &naming))
}

/// Stance per statement id, from its author's stance.
pub fn statement_stances(statements: &[BeliefStatement], users: &BTreeMap<String, Stance>) -> BTreeMap<String, Stance> {
    statements
        .iter()
        .filter_map(|s| Some((s.statement_id.clone(), *users.get(&s.user_id)?)))
        .collect()
}

pub fn build_focal(
    statements: &[BeliefStatement],
    users: &BTreeMap<String, Stance>,
    p: &CatalogParams,
) -> Result<(Catalog, FocalSet)> {
    let catalog = build_catalog(statements, |u| users.get(u).copied(), &p.aliases);
    let focal = focal_set(statements, &catalog, p.top_k)?;
    Ok((catalog, focal))
}

/// Embedding rows of the given statements, in statement order. Statements
/// without a row are counted and left out.
pub fn focal_embeddings(statements: &[BeliefStatement], emb: &EmbeddingFile) -> (EmbeddingFile, usize) {
    let index = emb.index();
    let mut out = EmbeddingFile::new(emb.dim);
    let mut missing = 0;
    for s in statements {
        match index.get(s.statement_id.as_str()) {
            Some(v) => out.rows.push((s.statement_id.clone(), v.to_vec())),
            None => missing += 1,
        }
    }
    if missing > 0 {
        log::warn!("{missing} focal statements have no embedding");
    }
    (out, missing)
}

pub fn sample_pairs(
    stmt_stances: &BTreeMap<String, Stance>,
    emb: &EmbeddingFile,
    p: &PairParams,
    seed: u64,
) -> Result<PairSample> {
    let strategy: SimilarityStrategy = p.strategy.parse()?;
    let pool = PairPool::new(stmt_stances, emb);
    match p.sampler.as_str() {
        "random" => Ok(sample_random(
            &pool,
            p.cutoff,
            PairCounts {
                homog_per_stance: p.homog_per_stance,
                heterog: p.heterog,
            },
            strategy,
            seed,
        )),
        "knn" => sample_knn(&pool, p.k, p.homog_per_stance, strategy, seed),
        "cluster" => {
            let coords = project_embeddings(emb, &Projection::Pca)?;
            let set = cluster_projection(&coords, &ClusterParams::default().density(), stmt_stances.clone());
            let labels: Vec<Option<usize>> = pool.ids.iter().map(|id| set.assignment.get(id).copied().flatten()).collect();
            sample_cluster(&pool, &labels, p.purity_cutoff, p.fraction, strategy, seed)
        }
        other => Err(Error::param("pairs.sampler", format!("unknown sampler `{other}`"))),
    }
}

/// Clusters focal statement embeddings; `import` supplies 2D coordinates
/// computed elsewhere.
pub fn cluster_statements(
    emb: &EmbeddingFile,
    p: &ClusterParams,
    stmt_stances: &BTreeMap<String, Stance>,
    import: Option<BTreeMap<String, [f64; 2]>>,
) -> Result<(Vec<(String, [f64; 2])>, BeliefClusterSet)> {
    let method = import.map_or(Projection::Pca, Projection::Import);
    let coords = project_embeddings(emb, &method)?;
    let set = cluster_projection(&coords, &p.density(), stmt_stances.clone());
    Ok((coords, set))
}

/// One observation per clustered statement, skipping excluded users.
pub fn observations(
    statements: &[BeliefStatement],
    assignment: &BTreeMap<String, Option<usize>>,
    excluded_users: &BTreeSet<String>,
) -> Vec<Observation> {
    statements
        .iter()
        .filter(|s| !excluded_users.contains(&s.user_id))
        .filter_map(|s| {
            let cluster = (*assignment.get(&s.statement_id)?)?;
            Some(Observation {
                user_id: s.user_id.clone(),
                timestamp: s.timestamp,
                cluster,
            })
        })
        .collect()
}

pub fn trajectory_grid(obs: &[Observation], dims: usize, p: &TrajectoryParams) -> Result<Vec<(f64, Vec<BeliefVector>)>> {
    if p.halflives.is_empty() {
        return Err(Error::param("trajectory.halflives", "empty configuration grid"));
    }
    halflife_sweep(obs, dims, &p.decay(), &p.halflives)
}

#[derive(Debug, Clone)]
pub struct Landscape {
    pub points: Vec<LandscapePoint>,
    /// Absent when the density could not be estimated.
    pub grid: Option<DensityGrid>,
    pub attractors: Vec<Attractor>,
}

pub fn build_landscape(
    vectors: &[BeliefVector],
    users: &BTreeMap<String, Stance>,
    p: &LandscapeParams,
    import: Option<BTreeMap<(String, i64), [f64; 2]>>,
    seed: u64,
) -> Result<Landscape> {
    let method = match import {
        Some(m) => VectorProjection::Import(m),
        None => VectorProjection::Pca {
            train_fraction: p.train_fraction,
        },
    };
    let points = project_vectors(vectors, &method, |u| StanceLabel::from(users.get(u).copied()), seed)?;
    let xy: Vec<[f64; 2]> = points.iter().map(LandscapePoint::xy).collect();
    let grid = kde2d(&xy, p.n_grid, p.margin)?;
    let attractors = threshold_attractors(&grid, &find_maxima(&grid), p.magnitude_cutoff);
    Ok(Landscape {
        points,
        grid: Some(grid),
        attractors,
    })
}

pub fn evaluate_landscape(l: &Landscape, p: &HypothesisParams) -> Result<Evaluation> {
    evaluate(&l.points, &l.attractors, &p.eval())
}

/// User stance map from assignments, as used by every later stage.
pub fn user_stances(assignments: &[StanceAssignment]) -> BTreeMap<String, Stance> {
    stance_map(assignments)
}
