//! Encoder fine-tuning pairs and the candidate-model objective.
//!
//! Pairs of statements written by authors of the same stance keep the
//! untuned similarity; cross-stance pairs are pushed apart by a
//! [`SimilarityStrategy`].

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief_clusters::StanceMetrics;
use crate::error::{Error, Result};
use crate::ingest::EmbeddingFile;
use crate::stance::Stance;

#[derive(Debug, Clone, PartialEq)]
pub struct SentencePair {
    pub a_id: String,
    pub b_id: String,
    pub homogeneous: bool,
    pub base_sim: f64,
    pub target_sim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityStrategy {
    /// Cross-stance target is always -1.
    Min,
    /// Cross-stance target negates positive similarities.
    Invert,
}

impl FromStr for SimilarityStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(SimilarityStrategy::Min),
            "invert" => Ok(SimilarityStrategy::Invert),
            _ => Err(Error::param("strategy", format!("`{s}` is not min or invert"))),
        }
    }
}

pub fn target_similarity(homogeneous: bool, base_sim: f64, strategy: SimilarityStrategy) -> f64 {
    let base = base_sim.clamp(-1.0, 1.0);
    if homogeneous {
        return base;
    }
    match strategy {
        SimilarityStrategy::Min => -1.0,
        SimilarityStrategy::Invert if base > 0.0 => -base,
        SimilarityStrategy::Invert => base,
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Statements with both an author stance and an untuned embedding.
#[derive(Debug, Clone, Default)]
pub struct PairPool {
    pub ids: Vec<String>,
    pub stances: Vec<Stance>,
    pub vectors: Vec<Vec<f64>>,
}

impl PairPool {
    /// Joins statement stances with embeddings; statements lacking either are
    /// skipped. Ordered by statement id.
    pub fn new(statement_stances: &BTreeMap<String, Stance>, emb: &EmbeddingFile) -> PairPool {
        let index = emb.index();
        let mut pool = PairPool::default();
        for (id, stance) in statement_stances {
            if let Some(v) = index.get(id.as_str()) {
                pool.ids.push(id.clone());
                pool.stances.push(*stance);
                pool.vectors.push(v.to_vec());
            }
        }
        pool
    }

    pub fn of_stance(&self, s: Stance) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| self.stances[i] == s).collect()
    }

    fn pair(&self, i: usize, j: usize, strategy: SimilarityStrategy) -> SentencePair {
        let homogeneous = self.stances[i] == self.stances[j];
        let base_sim = cosine(&self.vectors[i], &self.vectors[j]);
        SentencePair {
            a_id: self.ids[i].clone(),
            b_id: self.ids[j].clone(),
            homogeneous,
            base_sim,
            target_sim: target_similarity(homogeneous, base_sim, strategy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub homog_per_stance: usize,
    pub heterog: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSample {
    pub pairs: Vec<SentencePair>,
    pub warnings: Vec<String>,
}

impl PairSample {
    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }
}

/// Candidate sets up to this size are enumerated; larger ones are sampled
/// by rejection.
const ENUMERATION_LIMIT: usize = 2_000_000;

/// Draws up to `want` distinct unordered pairs `(left[a], right[b])` (or
/// within `left` when `right` is `None`) that pass `accept`.
fn draw_pairs(
    left: &[usize],
    right: Option<&[usize]>,
    want: usize,
    rng: &mut ChaCha8Rng,
    mut accept: impl FnMut(usize, usize) -> bool,
) -> Vec<(usize, usize)> {
    let total = match right {
        Some(r) => left.len() * r.len(),
        None => left.len() * left.len().saturating_sub(1) / 2,
    };
    if want == 0 || total == 0 {
        return Vec::new();
    }
    if total <= ENUMERATION_LIMIT {
        let mut all = Vec::new();
        match right {
            Some(r) => {
                for &i in left {
                    for &j in r {
                        if accept(i, j) {
                            all.push((i, j));
                        }
                    }
                }
            }
            None => {
                for (a, &i) in left.iter().enumerate() {
                    for &j in &left[a + 1..] {
                        if accept(i, j) {
                            all.push((i, j));
                        }
                    }
                }
            }
        }
        if all.len() <= want {
            return all;
        }
        let mut chosen: Vec<(usize, usize)> = all.choose_multiple(rng, want).copied().collect();
        chosen.sort_unstable();
        return chosen;
    }
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut out = Vec::new();
    let max_attempts = 50 * want + 10_000;
    for _ in 0..max_attempts {
        if out.len() == want {
            break;
        }
        let (i, j) = match right {
            Some(r) => (left[rng.random_range(0..left.len())], r[rng.random_range(0..r.len())]),
            None => {
                let a = left[rng.random_range(0..left.len())];
                let b = left[rng.random_range(0..left.len())];
                if a == b {
                    continue;
                }
                (a.min(b), a.max(b))
            }
        };
        if seen.insert((i, j)) && accept(i, j) {
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

fn homogeneous_pairs(
    pool: &PairPool,
    per_stance: usize,
    strategy: SimilarityStrategy,
    rng: &mut ChaCha8Rng,
    sample: &mut PairSample,
) {
    for s in Stance::ALL {
        let members = pool.of_stance(s);
        let got = draw_pairs(&members, None, per_stance, rng, |_, _| true);
        if got.len() < per_stance {
            sample.warn(format!("only {} homogeneous {s} pairs of {per_stance} requested", got.len()));
        }
        sample.pairs.extend(got.into_iter().map(|(i, j)| pool.pair(i, j, strategy)));
    }
}

/// Random homogeneous pairs per stance plus random cross-stance pairs whose
/// untuned similarity is at least `cutoff`.
pub fn sample_random(
    pool: &PairPool,
    cutoff: f64,
    counts: PairCounts,
    strategy: SimilarityStrategy,
    seed: u64,
) -> PairSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = PairSample::default();
    homogeneous_pairs(pool, counts.homog_per_stance, strategy, &mut rng, &mut sample);
    let believers = pool.of_stance(Stance::Believer);
    let skeptics = pool.of_stance(Stance::Skeptic);
    let got = draw_pairs(&skeptics, Some(&believers), counts.heterog, &mut rng, |i, j| {
        cosine(&pool.vectors[i], &pool.vectors[j]) >= cutoff
    });
    if got.len() < counts.heterog {
        sample.warn(format!(
            "only {} heterogeneous pairs at cutoff {cutoff} of {} requested",
            got.len(),
            counts.heterog
        ));
    }
    sample.pairs.extend(got.into_iter().map(|(i, j)| pool.pair(i, j, strategy)));
    sample
}

/// Each skeptic statement paired with its `k` most similar believer
/// statements, plus random homogeneous pairs.
pub fn sample_knn(
    pool: &PairPool,
    k: usize,
    homog_per_stance: usize,
    strategy: SimilarityStrategy,
    seed: u64,
) -> Result<PairSample> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = PairSample::default();
    homogeneous_pairs(pool, homog_per_stance, strategy, &mut rng, &mut sample);
    let believers = pool.of_stance(Stance::Believer);
    if believers.len() < k {
        sample.warn(format!("{} believer statements for k = {k}; using all", believers.len()));
    }
    for s in pool.of_stance(Stance::Skeptic) {
        let mut scored: Vec<(f64, usize)> = believers
            .iter()
            .map(|&b| (cosine(&pool.vectors[s], &pool.vectors[b]), b))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        sample
            .pairs
            .extend(scored.into_iter().take(k).map(|(_, b)| pool.pair(s, b, strategy)));
    }
    Ok(sample)
}

/// Within each cluster of purity at least `purity_cutoff`, samples
/// `round(fraction * n(n-1)/2)` member pairs split evenly across believer,
/// skeptic and cross-stance pairs. Quota a pair type cannot fill moves to the
/// remaining types. `labels[i]` is the cluster of pool statement `i`.
pub fn sample_cluster(
    pool: &PairPool,
    labels: &[Option<usize>],
    purity_cutoff: f64,
    fraction: f64,
    strategy: SimilarityStrategy,
    seed: u64,
) -> Result<PairSample> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::param("fraction", "must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = PairSample::default();
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate().take(pool.ids.len()) {
        if let Some(c) = l {
            clusters.entry(*c).or_default().push(i);
        }
    }
    let mut qualifying = 0;
    for (cid, members) in clusters {
        let b: Vec<usize> = members.iter().copied().filter(|&i| pool.stances[i] == Stance::Believer).collect();
        let s: Vec<usize> = members.iter().copied().filter(|&i| pool.stances[i] == Stance::Skeptic).collect();
        let purity = b.len().max(s.len()) as f64 / members.len() as f64;
        if purity < purity_cutoff {
            continue;
        }
        qualifying += 1;
        let n = members.len();
        let want = (fraction * (n * (n - 1) / 2) as f64).round() as usize;
        // available pairs per type: believer, skeptic, cross
        let avail = [
            b.len() * b.len().saturating_sub(1) / 2,
            s.len() * s.len().saturating_sub(1) / 2,
            b.len() * s.len(),
        ];
        if avail.contains(&0) {
            sample.warn(format!("cluster {cid} lacks a pair type; rebalancing"));
        }
        let quotas = balanced_quotas(want, avail);
        let groups = [
            draw_pairs(&b, None, quotas[0], &mut rng, |_, _| true),
            draw_pairs(&s, None, quotas[1], &mut rng, |_, _| true),
            draw_pairs(&s, Some(&b), quotas[2], &mut rng, |_, _| true),
        ];
        for g in groups {
            sample.pairs.extend(g.into_iter().map(|(i, j)| pool.pair(i, j, strategy)));
        }
    }
    if qualifying == 0 {
        sample.warn(format!("no cluster reaches purity {purity_cutoff}"));
    }
    Ok(sample)
}

/// Splits `want` evenly over three capacities, moving any quota a type cannot
/// fill to the others. Remainders go to earlier types first.
pub fn balanced_quotas(want: usize, avail: [usize; 3]) -> [usize; 3] {
    let mut quotas = [0usize; 3];
    let mut left = want.min(avail.iter().sum());
    while left > 0 {
        let open: Vec<usize> = (0..3).filter(|&t| quotas[t] < avail[t]).collect();
        let share = (left / open.len()).max(1);
        for t in open {
            let give = share.min(avail[t] - quotas[t]).min(left);
            quotas[t] += give;
            left -= give;
            if left == 0 {
                break;
            }
        }
    }
    quotas
}

/// Raw per-stance measures for one candidate encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelScore {
    pub candidate: String,
    pub believer: StanceMetrics,
    pub skeptic: StanceMetrics,
}

impl ModelScore {
    fn measures(&self, s: Stance) -> [f64; 3] {
        let m = match s {
            Stance::Believer => &self.believer,
            Stance::Skeptic => &self.skeptic,
        };
        [m.num_clusters as f64, m.coverage, m.purity.unwrap_or(0.0)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub score: ModelScore,
    /// In [0, 3].
    pub objective: f64,
}

pub const MEASURE_NAMES: [&str; 3] = ["num_clusters", "coverage", "purity"];

/// Divides each measure by its maximum across candidates within a stance,
/// averages the two stances, and sums the three measures. A measure whose
/// maximum is zero contributes zero. Ranked by descending objective, ties
/// in input order.
pub fn model_objective(candidates: &[ModelScore]) -> Result<Vec<ScoredCandidate>> {
    if candidates.is_empty() {
        return Err(Error::param("candidates", "at least one candidate is required"));
    }
    let mut max = [[0.0f64; 3]; 2];
    for c in candidates {
        for (si, s) in Stance::ALL.iter().enumerate() {
            for (m, v) in c.measures(*s).into_iter().enumerate() {
                max[si][m] = max[si][m].max(v);
            }
        }
    }
    for (si, s) in Stance::ALL.iter().enumerate() {
        for (m, name) in MEASURE_NAMES.iter().enumerate() {
            if max[si][m] == 0.0 {
                log::warn!("{s} {name} is zero for every candidate; term set to 0");
            }
        }
    }
    let mut scored: Vec<ScoredCandidate> = candidates
        .iter()
        .map(|c| {
            let objective = (0..3)
                .map(|m| {
                    Stance::ALL
                        .iter()
                        .enumerate()
                        .map(|(si, s)| {
                            let top = max[si][m];
                            if top > 0.0 {
                                c.measures(*s)[m] / top
                            } else {
                                0.0
                            }
                        })
                        .sum::<f64>()
                        / 2.0
                })
                .sum();
            ScoredCandidate {
                score: c.clone(),
                objective,
            }
        })
        .collect();
    scored.sort_by(|a, b| b.objective.total_cmp(&a.objective));
    Ok(scored)
}

pub fn write_candidate_report(path: impl AsRef<Path>, ranked: &[ScoredCandidate]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(
        out,
        "candidate,believer_num_clusters,believer_coverage,believer_purity,\
skeptic_num_clusters,skeptic_coverage,skeptic_purity,objective"
    )
    .map_err(io)?;
    let purity = |p: Option<f64>| p.map_or_else(String::new, |v| v.to_string());
    for c in ranked {
        let (b, s) = (&c.score.believer, &c.score.skeptic);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.score.candidate,
            b.num_clusters,
            b.coverage,
            purity(b.purity),
            s.num_clusters,
            s.coverage,
            purity(s.purity),
            c.objective
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub const PAIR_HEADER: &str = "a_id\tb_id\ttarget_sim";

/// Pair file: header line, then `a_id<TAB>b_id<TAB>target_sim` per pair.
/// Similarities use the shortest representation that reads back exactly.
pub fn write_pairs(mut out: impl Write, pairs: &[SentencePair]) -> std::io::Result<()> {
    writeln!(out, "{PAIR_HEADER}")?;
    for p in pairs {
        writeln!(out, "{}\t{}\t{}", p.a_id, p.b_id, p.target_sim)?;
    }
    out.flush()
}

pub fn save_pairs(path: impl AsRef<Path>, pairs: &[SentencePair]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_pairs(BufWriter::new(file), pairs).map_err(|e| Error::io(path, e))
}

/// Reads `(a_id, b_id, target_sim)` rows, rejecting self pairs, repeated
/// unordered pairs and targets outside [-1, 1].
pub fn read_pairs(reader: impl BufRead, path: &Path) -> Result<Vec<(String, String, f64)>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fmt_err = |message: String| Error::Format {
            path: path.into(),
            line: i + 1,
            message,
        };
        if i == 0 {
            if line != PAIR_HEADER {
                return Err(fmt_err(format!("expected header `{PAIR_HEADER}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(fmt_err(format!("expected 3 fields, found {}", f.len())));
        }
        let sim: f64 = f[2].parse().map_err(|_| fmt_err(format!("bad similarity `{}`", f[2])))?;
        if !(-1.0..=1.0).contains(&sim) {
            return Err(fmt_err(format!("similarity {sim} outside [-1, 1]")));
        }
        if f[0] == f[1] {
            return Err(fmt_err(format!("self pair `{}`", f[0])));
        }
        let key = if f[0] < f[1] { (f[0], f[1]) } else { (f[1], f[0]) };
        if !seen.insert((key.0.to_string(), key.1.to_string())) {
            return Err(fmt_err(format!("duplicate pair `{}` / `{}`", f[0], f[1])));
        }
        out.push((f[0].to_string(), f[1].to_string(), sim));
    }
    Ok(out)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<(String, String, f64)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs(BufReader::new(file), path)
}

/// Shuffles pair order deterministically, so training batches mix types.
pub fn shuffle_pairs(pairs: &mut [SentencePair], seed: u64) {
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
}
