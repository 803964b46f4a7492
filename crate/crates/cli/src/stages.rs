//! The pipeline stages. Each reads named artifacts from the output
//! directory (and configured inputs), writes its own artifacts there, and is
//! skipped when the manifest shows it already ran on identical inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use belief_landscape::belief_clusters::{self, cluster_metrics};
use belief_landscape::catalog::{write_catalog, write_count_rank};
use belief_landscape::hypotheses::{evaluate, Evaluation, ReportTable};
use belief_landscape::ingest::{
    load_bot_scores, load_corpus, load_gold_labels, load_parses, partition_bots, CorpusFilter, EmbeddingFile, Tweet,
};
use belief_landscape::landscape::{
    self, find_maxima, kde2d, project_vectors, threshold_attractors, LandscapePoint, VectorProjection,
};
use belief_landscape::pairs::save_pairs;
use belief_landscape::pipeline::{self, Params};
use belief_landscape::projection::{load_coordinates, write_coordinates};
use belief_landscape::stance::{self, ImportedClusters, StanceLabel};
use belief_landscape::svo::{load_statements, save_statements, write_diagnostic_counts};
use belief_landscape::trajectory::{load_trajectories, write_trajectories};
use belief_landscape::Error;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{hash_bytes, hash_file, relative, Manifest, StageRecord};
use crate::render;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Extract,
    Stance,
    Catalog,
    Pairs,
    Cluster,
    Trajectories,
    Landscape,
    Evaluate,
    Render,
}

pub const TWEETS: &str = "tweets.jsonl";
pub const INGEST_STATS: &str = "ingest_stats.json";
pub const EXCLUDED: &str = "excluded_users.txt";
pub const STATEMENTS: &str = "statements.tsv";
pub const EXTRACT_DIAG: &str = "extract_diagnostics.csv";
pub const STANCES: &str = "stances.csv";
pub const CATALOG: &str = "catalog.csv";
pub const COUNT_RANK: &str = "count_rank.csv";
pub const FOCAL: &str = "focal.tsv";
pub const PAIRS: &str = "pairs.tsv";
pub const COORDINATES: &str = "coordinates.csv";
pub const BELIEF_CLUSTERS: &str = "belief_clusters.csv";
pub const CLUSTER_METRICS: &str = "cluster_metrics.csv";
pub const TRAJECTORY_META: &str = "trajectories.json";
pub const LANDSCAPE_META: &str = "landscape.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const EVAL_NOTES: &str = "evaluation_notes.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub dims: usize,
    pub configs: Vec<TrajectoryConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub label: String,
    pub halflife: f64,
    pub file: String,
    pub vectors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeMeta {
    pub configs: Vec<LandscapeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub label: String,
    pub points: String,
    pub attractors: String,
    /// Absent when the density could not be estimated.
    pub grid: Option<String>,
    pub hx: f64,
    pub hy: f64,
    pub n_samples: usize,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Extract,
        Stage::Stance,
        Stage::Catalog,
        Stage::Pairs,
        Stage::Cluster,
        Stage::Trajectories,
        Stage::Landscape,
        Stage::Evaluate,
        Stage::Render,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Stance => "stance",
            Stage::Catalog => "catalog",
            Stage::Pairs => "pairs",
            Stage::Cluster => "cluster",
            Stage::Trajectories => "trajectories",
            Stage::Landscape => "landscape",
            Stage::Evaluate => "evaluate",
            Stage::Render => "render",
        }
    }

    /// Output-directory artifacts read by this stage, with their producer.
    fn upstream(self) -> &'static [(&'static str, Stage)] {
        use Stage::*;
        match self {
            Ingest => &[],
            Extract => &[(TWEETS, Ingest)],
            Stance => &[(TWEETS, Ingest), (EXCLUDED, Ingest)],
            Catalog => &[(STATEMENTS, Extract), (STANCES, Stance)],
            Pairs => &[(FOCAL, Catalog), (STANCES, Stance)],
            Cluster => &[(FOCAL, Catalog), (STANCES, Stance)],
            Trajectories => &[(FOCAL, Catalog), (BELIEF_CLUSTERS, Cluster), (EXCLUDED, Ingest)],
            Landscape => &[(TRAJECTORY_META, Trajectories), (STANCES, Stance)],
            Evaluate => &[(LANDSCAPE_META, Landscape)],
            Render => &[(LANDSCAPE_META, Landscape)],
        }
    }

    /// Configured inputs: `(name, required)`.
    fn external(self) -> &'static [(&'static str, bool)] {
        match self {
            Stage::Ingest => &[("corpus", true), ("bot_scores", false)],
            Stage::Extract => &[("parses", true)],
            Stage::Stance => &[("gold", false), ("stance_clusters", false)],
            Stage::Pairs => &[("embeddings", true)],
            Stage::Cluster => &[("embeddings", true), ("statement_coordinates", false)],
            Stage::Landscape => &[("landscape_coordinates", false)],
            _ => &[],
        }
    }

    /// The parameters this stage's output depends on.
    fn params(self, p: &Params) -> serde_json::Value {
        use serde_json::json;
        match self {
            Stage::Ingest => json!({
                "ingest": p.ingest,
                "bot_threshold": p.stance.bot_threshold,
                "unscored_as_human": p.stance.unscored_as_human,
            }),
            Stage::Extract => json!(null),
            Stage::Stance => json!(p.stance),
            Stage::Catalog => json!(p.catalog),
            Stage::Pairs => json!(p.pairs),
            Stage::Cluster => json!(p.cluster),
            Stage::Trajectories => json!(p.trajectory),
            Stage::Landscape => json!(p.landscape),
            Stage::Evaluate => json!(p.hypotheses),
            Stage::Render => json!(p.render),
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// Whether a stage ran or was found up to date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    UpToDate,
}

pub struct Runner {
    pub cfg: RunConfig,
    pub force: bool,
    manifest: Manifest,
}

impl Runner {
    pub fn new(cfg: RunConfig, force: bool) -> CliResult<Self> {
        fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
        let manifest = Manifest::load(&cfg.out)?;
        Ok(Runner { cfg, force, manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn require(&self, stage: Stage, name: &str, producer: Stage) -> CliResult<PathBuf> {
        let path = self.out(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(CliError::MissingUpstream {
                stage: stage.name(),
                path,
                run_first: producer.name(),
            })
        }
    }

    /// Every file the stage reads, keyed as recorded in the manifest.
    fn input_files(&self, stage: Stage) -> CliResult<BTreeMap<String, PathBuf>> {
        let mut files = BTreeMap::new();
        for &(name, producer) in stage.upstream() {
            files.insert(name.to_string(), self.require(stage, name, producer)?);
        }
        // per-configuration files listed in the metadata
        let listed: Vec<(String, Stage)> = match stage {
            Stage::Landscape => read_json::<TrajectoryMeta>(&files[TRAJECTORY_META])?
                .configs
                .into_iter()
                .map(|c| (c.file, Stage::Trajectories))
                .collect(),
            Stage::Evaluate | Stage::Render => read_json::<LandscapeMeta>(&files[LANDSCAPE_META])?
                .configs
                .into_iter()
                .flat_map(|c| {
                    let grid = if stage == Stage::Render { c.grid } else { None };
                    [Some(c.points), Some(c.attractors), grid]
                })
                .flatten()
                .map(|f| (f, Stage::Landscape))
                .collect(),
            _ => Vec::new(),
        };
        for (name, producer) in listed {
            let path = self.require(stage, &name, producer)?;
            files.insert(name, path);
        }
        for &(name, required) in stage.external() {
            match self.cfg.input(name) {
                Ok(p) => {
                    files.insert(format!("inputs.{name}"), p.to_path_buf());
                }
                Err(e) if required => return Err(e),
                Err(_) => {}
            }
        }
        Ok(files)
    }

    fn expected_record(&self, stage: Stage, files: &BTreeMap<String, PathBuf>) -> CliResult<StageRecord> {
        let hashed = serde_json::json!({
            "stage": stage.name(),
            "seed": self.cfg.seed,
            "params": stage.params(&self.cfg.params),
        });
        let mut inputs = BTreeMap::new();
        for (k, p) in files {
            inputs.insert(k.clone(), hash_file(p)?);
        }
        Ok(StageRecord {
            config_hash: hash_bytes(hashed.to_string().as_bytes()),
            seed: self.cfg.seed,
            inputs,
            outputs: BTreeMap::new(),
        })
    }

    pub fn run(&mut self, stage: Stage) -> CliResult<Outcome> {
        let files = self.input_files(stage)?;
        let mut record = self.expected_record(stage, &files)?;
        if !self.force && self.manifest.is_fresh(stage.name(), &record, &self.cfg.out) {
            log::info!("{}: up to date", stage.name());
            return Ok(Outcome::UpToDate);
        }
        log::info!("{}: running", stage.name());
        let written = self.execute(stage, &files)?;
        for p in written {
            record.outputs.insert(relative(&self.cfg.out, &p), hash_file(&p)?);
        }
        self.manifest.stages.insert(stage.name().to_string(), record);
        self.manifest.save(&self.cfg.out)?;
        Ok(Outcome::Ran)
    }

    fn execute(&self, stage: Stage, files: &BTreeMap<String, PathBuf>) -> CliResult<Vec<PathBuf>> {
        let f = |k: &str| files[k].as_path();
        let opt = |k: &str| files.get(&format!("inputs.{k}")).map(PathBuf::as_path);
        let p = &self.cfg.params;
        let seed = self.cfg.seed;
        match stage {
            Stage::Ingest => self.ingest(f("inputs.corpus"), opt("bot_scores")),
            Stage::Extract => {
                let tweets = read_tweets(f(TWEETS))?;
                let parses = load_parses(f("inputs.parses"))?;
                if !parses.rejected.is_empty() {
                    log::warn!("{} parsed sentences rejected", parses.rejected.len());
                }
                let ex = pipeline::extract_all(&tweets, &parses.sentences);
                log::info!("{} statements from {} tweets", ex.statements.len(), tweets.len());
                let (s, d) = (self.out(STATEMENTS), self.out(EXTRACT_DIAG));
                save_statements(&s, &ex.statements)?;
                write_diagnostic_counts(&d, &ex.category_counts())?;
                Ok(vec![s, d])
            }
            Stage::Stance => {
                let excluded = read_excluded(f(EXCLUDED))?;
                let tweets: Vec<Tweet> = read_tweets(f(TWEETS))?
                    .into_iter()
                    .filter(|t| !excluded.contains(&t.user_id))
                    .collect();
                let gold = opt("gold").map(load_gold_labels).transpose()?;
                let imported = opt("stance_clusters").map(ImportedClusters::load).transpose()?;
                let assignments =
                    pipeline::assign_user_stances(&tweets, &p.stance, gold.as_ref(), imported.as_ref(), seed)?;
                if let Some(g) = &gold {
                    for q in stance::cluster_quality(&assignments, g) {
                        log::info!("stance cluster {}: {} users, purity {:?}", q.cluster_id, q.size, q.purity);
                    }
                }
                let out = self.out(STANCES);
                stance::write_assignments(&out, &assignments)?;
                Ok(vec![out])
            }
            Stage::Catalog => {
                let statements = load_statements(f(STATEMENTS))?;
                let users = pipeline::user_stances(&stance::load_assignments(f(STANCES))?);
                let (catalog, focal) = pipeline::build_focal(&statements, &users, &p.catalog)?;
                log::info!(
                    "{} subjects; focal set keeps {} statements ({:.1}%)",
                    catalog.entries.len(),
                    focal.coverage,
                    100.0 * focal.coverage_fraction
                );
                let outs = [self.out(CATALOG), self.out(COUNT_RANK), self.out(FOCAL)];
                write_catalog(&outs[0], &catalog)?;
                write_count_rank(&outs[1], &catalog)?;
                save_statements(&outs[2], &focal.statements)?;
                Ok(outs.to_vec())
            }
            Stage::Pairs => {
                let (emb, stances) = self.focal_inputs(f(FOCAL), f(STANCES), f("inputs.embeddings"))?;
                let sample = pipeline::sample_pairs(&stances, &emb, &p.pairs, seed)?;
                let out = self.out(PAIRS);
                save_pairs(&out, &sample.pairs)?;
                Ok(vec![out])
            }
            Stage::Cluster => {
                let (emb, stances) = self.focal_inputs(f(FOCAL), f(STANCES), f("inputs.embeddings"))?;
                let import = opt("statement_coordinates").map(load_coordinates).transpose()?;
                let (coords, set) = pipeline::cluster_statements(&emb, &p.cluster, &stances, import)?;
                log::info!(
                    "{} belief clusters; {:.1}% of statements clustered",
                    set.clusters.len(),
                    100.0 * set.coverage
                );
                let outs = [self.out(COORDINATES), self.out(BELIEF_CLUSTERS), self.out(CLUSTER_METRICS)];
                write_coordinates(&outs[0], "statement_id", coords.iter().map(|(id, xy)| (id.as_str(), *xy)))?;
                belief_clusters::write_assignments(&outs[1], &set)?;
                let mut text = String::from("stance,num_clusters,coverage,purity\n");
                for (s, m) in cluster_metrics(&set) {
                    let purity = m.purity.map(|v| v.to_string()).unwrap_or_default();
                    text.push_str(&format!("{},{},{},{purity}\n", s.as_str(), m.num_clusters, m.coverage));
                }
                write_text(&outs[2], &text)?;
                Ok(outs.to_vec())
            }
            Stage::Trajectories => {
                let statements = load_statements(f(FOCAL))?;
                let assignment = belief_clusters::load_assignments(f(BELIEF_CLUSTERS))?;
                let excluded = read_excluded(f(EXCLUDED))?;
                let dims = assignment.values().flatten().max().map_or(0, |m| m + 1);
                if dims == 0 {
                    return Err(Error::Degenerate("no belief clusters to build vectors over".into()).into());
                }
                let obs = pipeline::observations(&statements, &assignment, &excluded);
                let mut meta = TrajectoryMeta {
                    dims,
                    configs: Vec::new(),
                };
                let mut outs = Vec::new();
                for (h, vectors) in pipeline::trajectory_grid(&obs, dims, &p.trajectory)? {
                    let label = p.trajectory.label(h);
                    let file = format!("trajectories_{label}.csv");
                    write_trajectories(self.out(&file), &vectors)?;
                    outs.push(self.out(&file));
                    meta.configs.push(TrajectoryConfig {
                        label,
                        halflife: h,
                        file,
                        vectors: vectors.len(),
                    });
                }
                outs.push(write_json(&self.out(TRAJECTORY_META), &meta)?);
                Ok(outs)
            }
            Stage::Landscape => self.landscape(files, opt("landscape_coordinates")),
            Stage::Evaluate => self.evaluate(files),
            Stage::Render => self.render(files),
        }
    }

    fn ingest(&self, corpus: &Path, bot_scores: Option<&Path>) -> CliResult<Vec<PathBuf>> {
        let ip = &self.cfg.params.ingest;
        let filter = CorpusFilter {
            lang: ip.lang.clone(),
            terms: ip.terms.clone(),
            interval: ip.interval.map(|[a, b]| (a, b)),
        };
        let corpus = load_corpus(corpus, &filter)?;
        if corpus.tweets.is_empty() {
            log::warn!("no tweets passed the corpus filter");
        }
        let users: BTreeSet<&str> = corpus.tweets.iter().map(|t| t.user_id.as_str()).collect();
        let excluded: BTreeSet<String> = match bot_scores {
            Some(path) => {
                let sp = &self.cfg.params.stance;
                let part = partition_bots(users.iter().copied(), &load_bot_scores(path)?, sp.bot_threshold)?;
                users
                    .iter()
                    .filter(|u| !part.is_human(u, sp.unscored_as_human))
                    .map(|u| u.to_string())
                    .collect()
            }
            None => BTreeSet::new(),
        };
        let stats = serde_json::json!({
            "records": corpus.stats,
            "users": users.len(),
            "excluded_users": excluded.len(),
            "diagnostics": corpus.diagnostics,
        });
        let outs = [self.out(TWEETS), self.out(INGEST_STATS), self.out(EXCLUDED)];
        belief_landscape::ingest::write_corpus(&outs[0], &corpus.tweets)?;
        write_json(&outs[1], &stats)?;
        let mut text = String::new();
        for u in &excluded {
            text.push_str(u);
            text.push('\n');
        }
        write_text(&outs[2], &text)?;
        Ok(outs.to_vec())
    }

    fn focal_inputs(
        &self,
        focal: &Path,
        stances: &Path,
        embeddings: &Path,
    ) -> CliResult<(EmbeddingFile, BTreeMap<String, stance::Stance>)> {
        let statements = load_statements(focal)?;
        let users = pipeline::user_stances(&stance::load_assignments(stances)?);
        let (emb, _) = pipeline::focal_embeddings(&statements, &EmbeddingFile::load(embeddings)?);
        Ok((emb, pipeline::statement_stances(&statements, &users)))
    }

    fn landscape(&self, files: &BTreeMap<String, PathBuf>, import: Option<&Path>) -> CliResult<Vec<PathBuf>> {
        let p = &self.cfg.params.landscape;
        let tmeta: TrajectoryMeta = read_json(&files[TRAJECTORY_META])?;
        let users = pipeline::user_stances(&stance::load_assignments(&files[STANCES])?);
        let method = match import {
            Some(path) => VectorProjection::Import(landscape::load_points(path)?),
            None => VectorProjection::Pca {
                train_fraction: p.train_fraction,
            },
        };
        let built = fan_out(&tmeta.configs, |i, tc| {
            let mut outs = Vec::new();
            let vectors = load_trajectories(&files[&tc.file], tmeta.dims)?;
            let seed = self.cfg.seed.wrapping_add(i as u64);
            let points = if vectors.is_empty() {
                log::warn!("{}: no belief vectors", tc.label);
                Vec::new()
            } else {
                project_vectors(&vectors, &method, |u| StanceLabel::from(users.get(u).copied()), seed)?
            };
            let xy: Vec<[f64; 2]> = points.iter().map(LandscapePoint::xy).collect();
            let grid = match kde2d(&xy, p.n_grid, p.margin) {
                Ok(g) => Some(g),
                Err(e) if e.is_data_error() => {
                    log::warn!("{}: density not estimated: {e}", tc.label);
                    None
                }
                Err(e) => return Err(e.into()),
            };
            let attractors = grid
                .as_ref()
                .map(|g| threshold_attractors(g, &find_maxima(g), p.magnitude_cutoff))
                .unwrap_or_default();
            log::info!("{}: {} points, {} attractors", tc.label, points.len(), attractors.len());
            let lc = LandscapeConfig {
                label: tc.label.clone(),
                points: format!("points_{}.csv", tc.label),
                attractors: format!("attractors_{}.csv", tc.label),
                grid: grid.as_ref().map(|_| format!("grid_{}.csv", tc.label)),
                hx: grid.as_ref().map_or(0.0, |g| g.hx),
                hy: grid.as_ref().map_or(0.0, |g| g.hy),
                n_samples: grid.as_ref().map_or(0, |g| g.n_samples),
            };
            landscape::write_points(self.out(&lc.points), &points)?;
            landscape::write_attractors(self.out(&lc.attractors), &attractors)?;
            outs.push(self.out(&lc.points));
            outs.push(self.out(&lc.attractors));
            if let (Some(g), Some(name)) = (&grid, &lc.grid) {
                landscape::write_grid(self.out(name), g)?;
                outs.push(self.out(name));
            }
            Ok((lc, outs))
        })?;
        let mut meta = LandscapeMeta { configs: Vec::new() };
        let mut outs = Vec::new();
        for (lc, o) in built {
            meta.configs.push(lc);
            outs.extend(o);
        }
        outs.push(write_json(&self.out(LANDSCAPE_META), &meta)?);
        Ok(outs)
    }

    fn evaluate(&self, files: &BTreeMap<String, PathBuf>) -> CliResult<Vec<PathBuf>> {
        let meta: LandscapeMeta = read_json(&files[LANDSCAPE_META])?;
        let eval_params = self.cfg.params.hypotheses.eval();
        let results = fan_out(&meta.configs, |_, c| {
            let points = landscape::load_landscape_points(&files[&c.points])?;
            let attractors = landscape::load_attractors(&files[&c.attractors])?;
            if attractors.is_empty() {
                log::warn!("{}: no attractors; hypotheses not evaluated", c.label);
                let column = BTreeMap::from([("attractors".to_string(), 0.0)]);
                return Ok((column, format!("{}\tall\tno attractors\n", c.label), Vec::new()));
            }
            let ev = evaluate(&points, &attractors, &eval_params)?;
            let notes: String = ev.skipped.iter().map(|(h, why)| format!("{}\t{h}\t{why}\n", c.label)).collect();
            let outs = self.write_hypotheses(&c.label, &ev)?;
            Ok((ev.summary(), notes, outs))
        })?;
        let mut columns = Vec::new();
        let mut notes = String::new();
        let mut outs = Vec::new();
        for (c, (column, n, o)) in meta.configs.iter().zip(results) {
            columns.push((c.label.clone(), column));
            notes.push_str(&n);
            outs.extend(o);
        }
        let table = ReportTable::new(&columns).with_mean();
        let (csv, txt, n) = (self.out(REPORT_CSV), self.out(REPORT_TXT), self.out(EVAL_NOTES));
        table.save(&csv, &txt)?;
        write_text(&n, &notes)?;
        outs.extend([csv, txt, n]);
        Ok(outs)
    }

    fn write_hypotheses(&self, label: &str, ev: &Evaluation) -> CliResult<Vec<PathBuf>> {
        let mut outs = Vec::new();
        let mut emit = |name: String, text: String| -> CliResult<()> {
            let path = self.out(&name);
            write_text(&path, &text)?;
            outs.push(path);
            Ok(())
        };
        if let Some(h1) = &ev.h1 {
            let mut s = String::from("user_id,periods,distinct,stability\n");
            for r in &h1.records {
                s.push_str(&format!("{},{},{},{}\n", r.user_id, r.periods, r.distinct, r.stability));
            }
            emit(format!("h1_{label}.csv"), s)?;
        }
        if let Some(h2) = &ev.h2 {
            let mut s = String::from("coefficient,estimate,std_error,z,p_value\n");
            for c in &h2.coefficients {
                s.push_str(&format!("{},{},{},{},{}\n", c.name, c.estimate, c.std_error, c.z, c.p_value));
            }
            emit(format!("h2_{label}.csv"), s)?;
        }
        if let Some(h3) = &ev.h3 {
            let mut s = String::from("rank,moves\n");
            for (r, n) in h3.histogram.iter().enumerate() {
                s.push_str(&format!("{},{n}\n", r + 1));
            }
            emit(format!("h3_{label}.csv"), s)?;
        }
        if let Some(h4) = &ev.h4 {
            let mut s = String::from("stance,user_id,same_fraction\n");
            for (st, r) in &h4.by_stance {
                for (u, v) in &r.per_user {
                    s.push_str(&format!("{},{u},{v}\n", st.as_str()));
                }
            }
            emit(format!("h4_{label}.csv"), s)?;
        }
        Ok(outs)
    }

    fn render(&self, files: &BTreeMap<String, PathBuf>) -> CliResult<Vec<PathBuf>> {
        let meta: LandscapeMeta = read_json(&files[LANDSCAPE_META])?;
        let rp = &self.cfg.params.render;
        let outs = fan_out(&meta.configs, |i, c| {
            let points = landscape::load_landscape_points(&files[&c.points])?;
            let attractors = landscape::load_attractors(&files[&c.attractors])?;
            let grid = c
                .grid
                .as_ref()
                .map(|g| landscape::load_grid(&files[g], [c.hx, c.hy], c.n_samples))
                .transpose()?;
            let fig = render::render(
                &points,
                grid.as_ref(),
                &attractors,
                rp.sample_fraction,
                rp.contour_levels,
                self.cfg.seed.wrapping_add(i as u64),
            )?;
            let svg = self.out(&format!("landscape_{}.svg", c.label));
            let drawn = self.out(&format!("landscape_{}_drawn.csv", c.label));
            write_text(&svg, &fig.svg)?;
            render::write_drawn(&drawn, &fig.drawn)?;
            Ok([svg, drawn])
        })?;
        Ok(outs.into_iter().flatten().collect())
    }
}

/// Runs `f` on every configuration in its own thread; results keep input
/// order and the first error (in that order) wins.
fn fan_out<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> CliResult<R> + Sync) -> CliResult<Vec<R>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let f = &f;
                s.spawn(move || f(i, t))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("configuration worker panicked"))
            .collect()
    })
}

fn read_tweets(path: &Path) -> CliResult<Vec<Tweet>> {
    Ok(load_corpus(path, &CorpusFilter::default())?.tweets)
}

fn read_excluded(path: &Path) -> CliResult<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).expect("metadata serialises");
    text.push('\n');
    write_text(path, &text)?;
    Ok(path.to_path_buf())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Format {
            path: path.into(),
            line: e.line(),
            message: e.to_string(),
        }
        .into()
    })
}
