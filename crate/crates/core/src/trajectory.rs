//! Decay-weighted belief vectors per user and window.
//!
//! `y_t = Σ_s (1-α)^(t-s) x_s / Σ_s (1-α)^(t-s)` over the windows `s ≤ t`
//! in which the user has observations; windows without observations are
//! skipped in both sums.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// `1 - e^(-ln 2 / halflife)`: an observation `halflife` windows old weighs
/// half as much as the newest.
pub fn decay_alpha(halflife: f64) -> Result<f64> {
    if !(halflife > 0.0 && halflife.is_finite()) {
        return Err(Error::param("halflife", format!("must be positive and finite, got {halflife}")));
    }
    Ok(-(-std::f64::consts::LN_2 / halflife).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    /// In windows.
    pub halflife: f64,
    pub window_days: u32,
    pub min_history_days: u32,
    /// Start of window 0 (epoch seconds).
    pub origin: i64,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams {
            halflife: 1.0,
            window_days: 7,
            min_history_days: 7,
            origin: 0,
        }
    }
}

impl DecayParams {
    pub fn alpha(&self) -> Result<f64> {
        decay_alpha(self.halflife)
    }

    pub fn window_seconds(&self) -> i64 {
        i64::from(self.window_days) * SECONDS_PER_DAY
    }

    pub fn window_of(&self, ts: i64) -> i64 {
        (ts - self.origin).div_euclid(self.window_seconds())
    }

    pub fn window_end(&self, t: i64) -> i64 {
        self.origin + (t + 1) * self.window_seconds()
    }

    fn validate(&self) -> Result<()> {
        if self.window_days == 0 {
            return Err(Error::param("window_days", "must be at least 1"));
        }
        self.alpha().map(|_| ())
    }
}

/// A clustered (non-noise) statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub user_id: String,
    pub timestamp: i64,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVector {
    pub user_id: String,
    pub t: i64,
    pub vector: Vec<f64>,
    /// Statements in windows up to and including `t`.
    pub support: usize,
}

/// Normalised cluster counts; `None` for an empty bucket.
pub fn observed_vector(clusters: &[usize], dims: usize) -> Option<Vec<f64>> {
    if clusters.is_empty() {
        return None;
    }
    let mut v = vec![0.0; dims];
    for &c in clusters {
        v[c] += 1.0;
    }
    let n = clusters.len() as f64;
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// `y_t` from `(window, x)` observations (any order); windows after `t` are
/// ignored. `None` without observations at or before `t`.
pub fn belief_vector(history: &[(i64, Vec<f64>)], t: i64, alpha: f64) -> Option<Vec<f64>> {
    let dims = history.first()?.1.len();
    let mut num = vec![0.0; dims];
    let mut den = 0.0;
    for (s, x) in history.iter().filter(|(s, _)| *s <= t) {
        let w = (1.0 - alpha).powi((t - s) as i32);
        for (n, xi) in num.iter_mut().zip(x) {
            *n += w * xi;
        }
        den += w;
    }
    (den > 0.0).then(|| num.into_iter().map(|n| n / den).collect())
}

/// Per-user observed buckets, keyed by window.
pub type Buckets = BTreeMap<String, BTreeMap<i64, Vec<usize>>>;

pub fn bucket(observations: &[Observation], params: &DecayParams) -> Buckets {
    let mut out: Buckets = BTreeMap::new();
    for o in observations {
        out.entry(o.user_id.clone())
            .or_default()
            .entry(params.window_of(o.timestamp))
            .or_default()
            .push(o.cluster);
    }
    out
}

/// Belief vectors for every user and observed window, emitted once the user
/// has been active for `min_history_days` (first statement to window end).
pub fn trajectories(observations: &[Observation], dims: usize, params: &DecayParams) -> Result<Vec<BeliefVector>> {
    params.validate()?;
    if let Some(o) = observations.iter().find(|o| o.cluster >= dims) {
        return Err(Error::param("dims", format!("cluster {} outside {dims} dimensions", o.cluster)));
    }
    let first_seen = first_timestamps(observations);
    fold(&bucket(observations, params), &first_seen, dims, params)
}

fn first_timestamps(observations: &[Observation]) -> BTreeMap<&str, i64> {
    let mut first: BTreeMap<&str, i64> = BTreeMap::new();
    for o in observations {
        let e = first.entry(o.user_id.as_str()).or_insert(o.timestamp);
        *e = (*e).min(o.timestamp);
    }
    first
}

fn fold(
    buckets: &Buckets,
    first_seen: &BTreeMap<&str, i64>,
    dims: usize,
    params: &DecayParams,
) -> Result<Vec<BeliefVector>> {
    let keep = 1.0 - params.alpha()?;
    let min_history = i64::from(params.min_history_days) * SECONDS_PER_DAY;
    let mut out = Vec::new();
    for (user, windows) in buckets {
        let first = first_seen[user.as_str()];
        // running mean form of the weighted average: y += (x - y) / D
        let mut y = vec![0.0; dims];
        let mut den = 0.0;
        let mut support = 0;
        let mut prev: Option<i64> = None;
        for (&t, clusters) in windows {
            let x = observed_vector(clusters, dims).expect("bucket is non-empty");
            if let Some(p) = prev {
                den *= keep.powi((t - p) as i32);
            }
            den += 1.0;
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi += (xi - *yi) / den;
            }
            support += clusters.len();
            prev = Some(t);
            if params.window_end(t) - first >= min_history {
                out.push(BeliefVector {
                    user_id: user.clone(),
                    t,
                    vector: y.clone(),
                    support,
                });
            }
        }
    }
    Ok(out)
}

/// One run over several half-lives sharing the bucketing.
pub fn halflife_sweep(
    observations: &[Observation],
    dims: usize,
    base: &DecayParams,
    halflives: &[f64],
) -> Result<Vec<(f64, Vec<BeliefVector>)>> {
    base.validate()?;
    let buckets = bucket(observations, base);
    let first_seen = first_timestamps(observations);
    halflives
        .iter()
        .map(|&h| {
            let p = DecayParams { halflife: h, ..*base };
            p.validate()?;
            Ok((h, fold(&buckets, &first_seen, dims, &p)?))
        })
        .collect()
}

/// CSV: `user_id,t,support,weights` with `weights` as space-separated
/// `cluster:weight` entries for non-zero components.
pub fn write_trajectories(path: impl AsRef<Path>, vectors: &[BeliefVector]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "user_id,t,support,weights").map_err(io)?;
    for v in vectors {
        let weights: Vec<String> = v
            .vector
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(c, w)| format!("{c}:{w}"))
            .collect();
        writeln!(out, "{},{},{},{}", v.user_id, v.t, v.support, weights.join(" ")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_trajectories(path: impl AsRef<Path>, dims: usize) -> Result<Vec<BeliefVector>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate().skip(1) {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fmt_err = |m: &str| Error::Format {
            path: path.into(),
            line: i + 1,
            message: m.to_string(),
        };
        let f: Vec<&str> = line.splitn(4, ',').collect();
        if f.len() != 4 {
            return Err(fmt_err("expected user_id,t,support,weights"));
        }
        let mut vector = vec![0.0; dims];
        for entry in f[3].split_whitespace() {
            let (c, w) = entry.split_once(':').ok_or_else(|| fmt_err("bad weight entry"))?;
            let c: usize = c.parse().map_err(|_| fmt_err("bad cluster"))?;
            if c >= dims {
                return Err(fmt_err("cluster outside dimensions"));
            }
            vector[c] = w.parse().map_err(|_| fmt_err("bad weight"))?;
        }
        out.push(BeliefVector {
            user_id: f[0].to_string(),
            t: f[1].parse().map_err(|_| fmt_err("bad window"))?,
            support: f[2].parse().map_err(|_| fmt_err("bad support"))?,
            vector,
        });
    }
    Ok(out)
}
