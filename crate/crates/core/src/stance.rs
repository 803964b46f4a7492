//! User stance from retweet affiliation: eligibility, clustering of the
//! user × retweeted-account matrix, and cluster label / purity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::{DensityParams, Labels};
use crate::error::{Error, Result};
use crate::ingest::Tweet;
use crate::projection::Pca;

/// Coarse position on the issue. Variant order is the label tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Believer,
    Skeptic,
}

impl Stance {
    pub const ALL: [Stance; 2] = [Stance::Believer, Stance::Skeptic];

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Believer => "believer",
            Stance::Skeptic => "skeptic",
        }
    }

    pub fn other(self) -> Stance {
        match self {
            Stance::Believer => Stance::Skeptic,
            Stance::Skeptic => Stance::Believer,
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "believer" | "believers" | "b" => Ok(Stance::Believer),
            "skeptic" | "skeptics" | "s" => Ok(Stance::Skeptic),
            other => Err(format!("unknown stance `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EligibilityRule {
    /// Minimum number of tweets (inclusive).
    pub min_tweets: usize,
    /// Retweet count must be strictly greater than this.
    pub min_retweets: usize,
    /// Binary cells instead of retweet counts.
    pub binary: bool,
}

impl Default for EligibilityRule {
    fn default() -> Self {
        EligibilityRule {
            min_tweets: 100,
            min_retweets: 1,
            binary: false,
        }
    }
}

/// Sparse user × retweeted-account matrix over eligible users.
#[derive(Debug, Clone, PartialEq)]
pub struct AffiliationMatrix {
    /// Sorted eligible user ids (row order).
    pub users: Vec<String>,
    /// Sorted retweeted account ids (column order).
    pub accounts: Vec<String>,
    /// Per row, `(column, value)` sorted by column.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl AffiliationMatrix {
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.accounts.len()];
        for &(c, x) in &self.rows[i] {
            v[c] = x;
        }
        v
    }
}

pub fn build_affiliation(tweets: &[Tweet], rule: EligibilityRule) -> Result<AffiliationMatrix> {
    let mut tweet_counts: HashMap<&str, usize> = HashMap::new();
    let mut retweets: HashMap<&str, BTreeMap<&str, usize>> = HashMap::new();
    for t in tweets {
        *tweet_counts.entry(&t.user_id).or_default() += 1;
        if let Some(rt) = &t.retweeted_user {
            *retweets
                .entry(&t.user_id)
                .or_default()
                .entry(rt)
                .or_default() += 1;
        }
    }
    let users: Vec<String> = tweet_counts
        .iter()
        .filter(|(u, &n)| {
            let rts: usize = retweets.get(*u).map_or(0, |m| m.values().sum());
            n >= rule.min_tweets && rts > rule.min_retweets
        })
        .map(|(u, _)| u.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if users.is_empty() {
        return Err(Error::NoEligibleUsers(format!(
            "{} users, none with >= {} tweets and > {} retweets",
            tweet_counts.len(),
            rule.min_tweets,
            rule.min_retweets
        )));
    }
    let accounts: Vec<String> = users
        .iter()
        .flat_map(|u| retweets[u.as_str()].keys().map(|a| a.to_string()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col: HashMap<&str, usize> = accounts
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    let rows = users
        .iter()
        .map(|u| {
            retweets[u.as_str()]
                .iter()
                .map(|(a, &n)| (col[a], if rule.binary { 1.0 } else { n as f64 }))
                .collect()
        })
        .collect();
    Ok(AffiliationMatrix {
        users,
        accounts,
        rows,
    })
}

/// Cluster id per matrix row; `None` is NOISE.
pub trait AffiliationClusterer {
    fn cluster(&self, matrix: &AffiliationMatrix, seed: u64) -> Result<Labels>;
}

/// Built-in baseline: L2-normalised rows (cosine geometry), a PCA projection,
/// then density clustering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityBaseline {
    /// Projected dimensions; `None` clusters in the full normalised space.
    pub dims: Option<usize>,
    pub density: DensityParams,
}

impl Default for DensityBaseline {
    fn default() -> Self {
        DensityBaseline {
            dims: Some(2),
            density: DensityParams {
                eps: 0.1,
                min_samples: 5,
                min_cluster_size: 10,
            },
        }
    }
}

impl AffiliationClusterer for DensityBaseline {
    fn cluster(&self, matrix: &AffiliationMatrix, _seed: u64) -> Result<Labels> {
        let n = matrix.users.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut v = matrix.dense_row(i);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                v
            })
            .collect();
        let all_zero = rows.iter().all(|r| r.iter().all(|&x| x == 0.0));
        if n < 2 || all_zero {
            log::warn!("affiliation matrix is degenerate ({n} users); every user is NOISE");
            return Ok(vec![None; n]);
        }
        let points = match self.dims {
            Some(d) if d < matrix.accounts.len() => {
                let pca = Pca::fit(&rows, d)?;
                rows.iter().map(|r| pca.transform(r)).collect()
            }
            _ => rows,
        };
        Ok(self.density.fit(&points))
    }
}

/// Cluster assignments computed elsewhere (`user_id,cluster_id` with `NOISE`
/// or a negative id for noise).
#[derive(Debug, Clone, Default)]
pub struct ImportedClusters {
    pub assignments: BTreeMap<String, Option<usize>>,
}

impl ImportedClusters {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rows = crate::ingest::read_user_table(path)?;
        let mut assignments = BTreeMap::new();
        for (i, (user, value)) in rows.into_iter().enumerate() {
            let id = parse_cluster_id(&value).ok_or_else(|| Error::Format {
                path: path.into(),
                line: i + 2,
                message: format!("bad cluster id `{value}`"),
            })?;
            assignments.insert(user, id);
        }
        Ok(ImportedClusters { assignments })
    }
}

pub fn parse_cluster_id(s: &str) -> Option<Option<usize>> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("noise") {
        return Some(None);
    }
    let v: i64 = s.parse().ok()?;
    Some(usize::try_from(v).ok())
}

impl AffiliationClusterer for ImportedClusters {
    fn cluster(&self, matrix: &AffiliationMatrix, _seed: u64) -> Result<Labels> {
        Ok(matrix
            .users
            .iter()
            .map(|u| self.assignments.get(u).copied().flatten())
            .collect())
    }
}

/// Majority class among labelled members; ties go to the earlier class in
/// [`Stance::ALL`]. `None` when no member is labelled.
pub fn cluster_label<'a>(
    members: impl IntoIterator<Item = &'a str>,
    gold: &BTreeMap<String, Stance>,
) -> Option<Stance> {
    let counts = class_counts(members, gold);
    let best = counts.iter().copied().max()?;
    if best == 0 {
        return None;
    }
    Stance::ALL
        .iter()
        .zip(counts)
        .find(|(_, c)| *c == best)
        .map(|(s, _)| *s)
}

/// Fraction of labelled members whose class equals the cluster label.
pub fn cluster_purity<'a>(
    members: impl IntoIterator<Item = &'a str> + Clone,
    gold: &BTreeMap<String, Stance>,
) -> Option<f64> {
    let counts = class_counts(members, gold);
    let total: usize = counts.iter().sum();
    let best = counts.iter().copied().max()?;
    (total > 0).then(|| best as f64 / total as f64)
}

fn class_counts<'a>(
    members: impl IntoIterator<Item = &'a str>,
    gold: &BTreeMap<String, Stance>,
) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for m in members {
        match gold.get(m) {
            Some(Stance::Believer) => counts[0] += 1,
            Some(Stance::Skeptic) => counts[1] += 1,
            None => {}
        }
    }
    counts
}

/// How clusters get their believer / skeptic names.
#[derive(Debug, Clone)]
pub enum NamingRule {
    /// A cluster takes the name of the seed list its members retweet most.
    SeedAccounts {
        believer: Vec<String>,
        skeptic: Vec<String>,
    },
    /// A cluster takes the majority gold label of its members.
    GoldMajority(BTreeMap<String, Stance>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceLabel {
    Believer,
    Skeptic,
    Unclustered,
}

impl StanceLabel {
    pub fn stance(self) -> Option<Stance> {
        match self {
            StanceLabel::Believer => Some(Stance::Believer),
            StanceLabel::Skeptic => Some(Stance::Skeptic),
            StanceLabel::Unclustered => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Believer => "believer",
            StanceLabel::Skeptic => "skeptic",
            StanceLabel::Unclustered => "unclustered",
        }
    }
}

impl From<Option<Stance>> for StanceLabel {
    fn from(s: Option<Stance>) -> Self {
        match s {
            Some(Stance::Believer) => StanceLabel::Believer,
            Some(Stance::Skeptic) => StanceLabel::Skeptic,
            None => StanceLabel::Unclustered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StanceAssignment {
    pub user_id: String,
    pub stance: StanceLabel,
    pub cluster_id: Option<usize>,
}

/// Names every cluster and assigns one stance per matrix row.
pub fn assign_stances(
    matrix: &AffiliationMatrix,
    labels: &[Option<usize>],
    rule: &NamingRule,
) -> Vec<StanceAssignment> {
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (row, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            members.entry(*c).or_default().push(row);
        }
    }
    let mut names: BTreeMap<usize, Option<Stance>> = BTreeMap::new();
    for (&cluster, rows) in &members {
        let name = match rule {
            NamingRule::GoldMajority(gold) => {
                cluster_label(rows.iter().map(|&r| matrix.users[r].as_str()), gold)
            }
            NamingRule::SeedAccounts { believer, skeptic } => {
                let score = |seeds: &[String]| -> f64 {
                    let cols: BTreeSet<usize> = seeds
                        .iter()
                        .filter_map(|s| matrix.accounts.binary_search(s).ok())
                        .collect();
                    rows.iter()
                        .flat_map(|&r| matrix.rows[r].iter())
                        .filter(|(c, _)| cols.contains(c))
                        .map(|(_, v)| v)
                        .sum()
                };
                let (b, s) = (score(believer), score(skeptic));
                if b > s {
                    Some(Stance::Believer)
                } else if s > b {
                    Some(Stance::Skeptic)
                } else {
                    None
                }
            }
        };
        if name.is_none() {
            log::warn!("cluster {cluster} matches no naming rule; members are unclustered");
        }
        names.insert(cluster, name);
    }
    matrix
        .users
        .iter()
        .zip(labels)
        .map(|(u, l)| StanceAssignment {
            user_id: u.clone(),
            stance: l.and_then(|c| names[&c]).into(),
            cluster_id: *l,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterQuality {
    pub cluster_id: usize,
    pub size: usize,
    pub label: Option<Stance>,
    pub purity: Option<f64>,
}

/// Label and purity of every cluster against gold labels.
pub fn cluster_quality(
    assignments: &[StanceAssignment],
    gold: &BTreeMap<String, Stance>,
) -> Vec<ClusterQuality> {
    let mut members: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for a in assignments {
        if let Some(c) = a.cluster_id {
            members.entry(c).or_default().push(&a.user_id);
        }
    }
    members
        .into_iter()
        .map(|(cluster_id, m)| ClusterQuality {
            cluster_id,
            size: m.len(),
            label: cluster_label(m.iter().copied(), gold),
            purity: cluster_purity(m.iter().copied(), gold),
        })
        .collect()
}

pub fn stance_map(assignments: &[StanceAssignment]) -> BTreeMap<String, Stance> {
    assignments
        .iter()
        .filter_map(|a| Some((a.user_id.clone(), a.stance.stance()?)))
        .collect()
}

pub fn write_assignments(path: impl AsRef<Path>, assignments: &[StanceAssignment]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "user_id,stance,cluster_id").map_err(io)?;
    for a in assignments {
        let c = a.cluster_id.map_or("NOISE".to_string(), |c| c.to_string());
        writeln!(out, "{},{},{}", a.user_id, a.stance.as_str(), c).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_assignments(path: impl AsRef<Path>) -> Result<Vec<StanceAssignment>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format {
            path: path.into(),
            line: 0,
            message: e.to_string(),
        })?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let fmt_err = |message: String| Error::Format {
            path: path.into(),
            line: i + 2,
            message,
        };
        let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
        if rec.len() < 3 {
            return Err(fmt_err("expected user_id,stance,cluster_id".into()));
        }
        let stance = match &rec[1] {
            "unclustered" => StanceLabel::Unclustered,
            s => Some(s.parse::<Stance>().map_err(fmt_err)?).into(),
        };
        let cluster_id =
            parse_cluster_id(&rec[2]).ok_or_else(|| fmt_err(format!("bad cluster `{}`", &rec[2])))?;
        out.push(StanceAssignment {
            user_id: rec[0].to_string(),
            stance,
            cluster_id,
        });
    }
    Ok(out)
}
