//! Tests run on landscape trajectories: attractor stability, the logistic
//! model of leaving an attractor, where transitions land, and spatial
//! stance homophily.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::landscape::{nearest_attractor, Attractor, LandscapePoint};
use crate::stance::{Stance, StanceLabel};
use crate::stats::{histogram, mean, zscore};

pub const HIST_BINS: usize = 10;

/// Points grouped per user, each user's points in window order.
pub fn trajectories_of(points: &[LandscapePoint]) -> BTreeMap<&str, Vec<&LandscapePoint>> {
    let mut by_user: BTreeMap<&str, Vec<&LandscapePoint>> = BTreeMap::new();
    for p in points {
        by_user.entry(p.user_id.as_str()).or_default().push(p);
    }
    for v in by_user.values_mut() {
        v.sort_by_key(|p| p.t);
    }
    by_user
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRecord {
    pub user_id: String,
    pub periods: usize,
    pub distinct: usize,
    pub stability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult {
    pub records: Vec<StabilityRecord>,
    pub mean: f64,
    /// Ten equal bins over [0, 1].
    pub histogram: Vec<usize>,
}

/// `1 - distinct / periods` per user, over users with more than
/// `min_periods` emitted windows.
pub fn stability(user_id: &str, attractor_seq: &[usize]) -> StabilityRecord {
    let distinct = attractor_seq.iter().collect::<BTreeSet<_>>().len();
    let periods = attractor_seq.len();
    StabilityRecord {
        user_id: user_id.to_string(),
        periods,
        distinct,
        stability: 1.0 - distinct as f64 / periods as f64,
    }
}

pub fn h1_stability(points: &[LandscapePoint], attractors: &[Attractor], min_periods: usize) -> Result<StabilityResult> {
    let mut records = Vec::new();
    for (user, traj) in trajectories_of(points) {
        if traj.len() <= min_periods {
            continue;
        }
        let seq = traj
            .iter()
            .map(|p| nearest_attractor(p.xy(), attractors).map(|a| a.0))
            .collect::<Result<Vec<_>>>()?;
        records.push(stability(user, &seq));
    }
    if records.is_empty() {
        log::warn!("stability: no user has more than {min_periods} periods");
    }
    let s: Vec<f64> = records.iter().map(|r| r.stability).collect();
    Ok(StabilityResult {
        mean: if s.is_empty() { f64::NAN } else { mean(&s) },
        histogram: histogram(&s, 0.0, 1.0, HIST_BINS),
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEvent {
    pub user_id: String,
    pub t_from: i64,
    pub t_to: i64,
    pub origin: usize,
    pub destination: usize,
    /// Distance from the user's point at `t_from` to the origin attractor.
    pub distance: f64,
    /// Magnitude of the origin attractor.
    pub strength: f64,
    /// The two windows are not adjacent.
    pub gap: bool,
}

impl TransitionEvent {
    pub fn moved(&self) -> bool {
        self.origin != self.destination
    }
}

/// One event per pair of consecutive emitted windows of a user.
pub fn transition_events(points: &[LandscapePoint], attractors: &[Attractor]) -> Result<Vec<TransitionEvent>> {
    let magnitude: HashMap<usize, f64> = attractors.iter().map(|a| (a.id, a.magnitude)).collect();
    let mut events = Vec::new();
    for (user, traj) in trajectories_of(points) {
        let near = traj
            .iter()
            .map(|p| nearest_attractor(p.xy(), attractors))
            .collect::<Result<Vec<_>>>()?;
        for k in 1..traj.len() {
            let (origin, distance) = near[k - 1];
            events.push(TransitionEvent {
                user_id: user.to_string(),
                t_from: traj[k - 1].t,
                t_to: traj[k].t,
                origin,
                destination: near[k].0,
                distance,
                strength: magnitude[&origin],
                gap: traj[k].t - traj[k - 1].t > 1,
            });
        }
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    /// Intercept first, then one entry per covariate.
    pub coefficients: Vec<Coefficient>,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Estimates ran off towards infinity (perfect or quasi-complete
    /// separation); Wald statistics are meaningless.
    pub diverged: bool,
    pub n: usize,
}

impl LogitFit {
    pub fn coef(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

pub const GRADIENT_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
/// On standardised covariates no finite-data estimate gets near this.
const DIVERGENCE_BOUND: f64 = 25.0;

fn log1p_exp(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli log-likelihood of `beta` for design `x` (intercept included by
/// the caller) and 0/1 outcomes `y`.
pub fn log_likelihood(beta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y.iter()).map(|(&e, &yi)| yi * e - log1p_exp(e)).sum()
}

/// Gradient of [`log_likelihood`]: `Xᵀ(y - p)`.
pub fn gradient(beta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let p = (x * beta).map(sigmoid);
    x.transpose() * (y - p)
}

fn information(beta: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let w = (x * beta).map(|e| {
        let p = sigmoid(e);
        p * (1.0 - p)
    });
    let mut xw = x.clone();
    for (mut row, wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= *wi;
    }
    x.transpose() * xw
}

/// Newton-Raphson (IRLS) on a design that already carries its intercept
/// column. Stops once the gradient norm falls below [`GRADIENT_TOL`].
pub fn fit_logit_design(names: &[String], x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LogitFit> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(Error::Degenerate(format!("{n} observations for {k} parameters")));
    }
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Degenerate("outcome must be 0 or 1".into()));
    }
    if ones == 0 || ones == n {
        return Err(Error::Degenerate("outcome has a single class".into()));
    }
    let mut beta = DVector::zeros(k);
    let mut iterations = 0;
    let mut g = gradient(&beta, x, y);
    let mut diverged = false;
    while g.norm() >= GRADIENT_TOL && iterations < MAX_ITER {
        let Some(chol) = information(&beta, x).cholesky() else {
            diverged = true;
            break;
        };
        let step = chol.solve(&g);
        // halve until the likelihood does not drop; near the optimum the
        // change is below rounding, so allow a few ulps of slack
        let ll = log_likelihood(&beta, x, y);
        let floor = ll - 1e-12 * (1.0 + ll.abs());
        let mut t = 1.0;
        let mut next = &beta + &step;
        while log_likelihood(&next, x, y) < floor && t > 1e-6 {
            t *= 0.5;
            next = &beta + &step * t;
        }
        beta = next;
        iterations += 1;
        g = gradient(&beta, x, y);
        if beta.amax() > DIVERGENCE_BOUND {
            diverged = true;
            break;
        }
    }
    let gradient_norm = g.norm();
    let converged = gradient_norm < GRADIENT_TOL && !diverged;
    if !converged {
        diverged = true;
        log::warn!("logistic fit did not converge (gradient norm {gradient_norm:e}); separation likely");
    }
    let cov = information(&beta, x).try_inverse();
    let normal = Normal::standard();
    let coefficients = (0..k)
        .map(|j| {
            let se = cov.as_ref().map_or(f64::NAN, |c| c[(j, j)].sqrt());
            let z = beta[j] / se;
            Coefficient {
                name: names[j].clone(),
                estimate: beta[j],
                std_error: se,
                z,
                p_value: 2.0 * (1.0 - normal.cdf(z.abs())),
            }
        })
        .collect();
    Ok(LogitFit {
        coefficients,
        log_likelihood: log_likelihood(&beta, x, y),
        gradient_norm,
        iterations,
        converged,
        diverged,
        n,
    })
}

/// Logistic regression of `y` on standardised covariates plus an intercept.
pub fn logistic_regression(covariates: &[(&'static str, Vec<f64>)], y: &[bool]) -> Result<LogitFit> {
    let n = y.len();
    let mut cols = vec![vec![1.0; n]];
    let mut names = vec!["intercept".to_string()];
    for (name, v) in covariates {
        if v.len() != n {
            return Err(Error::param("covariates", format!("`{name}` has {} values for {n} outcomes", v.len())));
        }
        let (z, _, _) = zscore(v).ok_or(Error::ConstantCovariate(name))?;
        cols.push(z);
        names.push(name.to_string());
    }
    let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let yv = DVector::from_iterator(n, y.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    fit_logit_design(&names, &x, &yv)
}

/// Leaving the origin attractor against distance to it and its strength.
pub fn h2_regression(events: &[TransitionEvent], exclude_gaps: bool) -> Result<LogitFit> {
    let used: Vec<&TransitionEvent> = events.iter().filter(|e| !(exclude_gaps && e.gap)).collect();
    let y: Vec<bool> = used.iter().map(|e| e.moved()).collect();
    logistic_regression(
        &[
            ("distance", used.iter().map(|e| e.distance).collect()),
            ("strength", used.iter().map(|e| e.strength).collect()),
        ],
        &y,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRanks {
    /// Attractors considered (`min(top_k, available)`).
    pub k: usize,
    /// Fewer attractors than requested were available.
    pub short: bool,
    /// Destination rank among the other `k - 1`, 1 = nearest, one per move.
    pub ranks: Vec<usize>,
    /// `histogram[r - 1]` counts moves landing at rank `r`.
    pub histogram: Vec<usize>,
    pub fraction_top5: f64,
    /// Value of `fraction_top5` if destinations were uniform.
    pub expected_top5: f64,
    /// Moves with origin or destination outside the top `k`.
    pub excluded: usize,
}

pub const TOP5: usize = 5;

pub fn h3_transition_ranks(events: &[TransitionEvent], attractors: &[Attractor], top_k: usize) -> Result<TransitionRanks> {
    let mut top: Vec<&Attractor> = attractors.iter().collect();
    top.sort_by_key(|a| a.rank);
    top.truncate(top_k);
    let k = top.len();
    if k < 2 {
        return Err(Error::NoAttractors);
    }
    let short = k < top_k;
    if short {
        log::warn!("only {k} attractors available; ranking among {} instead of {}", k - 1, top_k - 1);
    }
    let index: HashMap<usize, usize> = top.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
    // order[o] lists the other attractors by distance from o, ties by rank
    let order: Vec<Vec<usize>> = (0..k)
        .map(|o| {
            let mut others: Vec<usize> = (0..k).filter(|&d| d != o).collect();
            let dist = |d: usize| (top[o].x - top[d].x).hypot(top[o].y - top[d].y);
            others.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(top[a].rank.cmp(&top[b].rank)));
            others
        })
        .collect();
    let mut ranks = Vec::new();
    let mut excluded = 0;
    for e in events.iter().filter(|e| e.moved()) {
        match (index.get(&e.origin), index.get(&e.destination)) {
            (Some(&o), Some(&d)) => ranks.push(order[o].iter().position(|&x| x == d).unwrap() + 1),
            _ => excluded += 1,
        }
    }
    let mut hist = vec![0; k - 1];
    for &r in &ranks {
        hist[r - 1] += 1;
    }
    let within = ranks.iter().filter(|&&r| r <= TOP5).count();
    Ok(TransitionRanks {
        k,
        short,
        fraction_top5: if ranks.is_empty() { f64::NAN } else { within as f64 / ranks.len() as f64 },
        expected_top5: TOP5.min(k - 1) as f64 / (k - 1) as f64,
        histogram: hist,
        ranks,
        excluded,
    })
}

/// Mean distance between a user's points in consecutive emitted windows.
pub fn mean_displacement(points: &[LandscapePoint]) -> Option<f64> {
    let d: Vec<f64> = trajectories_of(points)
        .values()
        .flat_map(|t| t.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)))
        .collect();
    (!d.is_empty()).then(|| mean(&d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomophilyStance {
    /// Same-stance neighbour fraction per user, by user id.
    pub per_user: Vec<(String, f64)>,
    pub mean: f64,
    pub histogram: Vec<usize>,
    /// Users of this stance with no labelled neighbour in any window.
    pub isolated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomophilyResult {
    pub radius: f64,
    pub by_stance: BTreeMap<Stance, HomophilyStance>,
}

pub const MAX_NEIGHBORS: usize = 20;

/// For each labelled point, up to `max_neighbors` nearest labelled points of
/// other users in the same window and within `radius`. Each user's score is
/// the share of those neighbours, pooled over windows, holding the same stance.
pub fn h4_homophily(points: &[LandscapePoint], radius: f64, max_neighbors: usize) -> Result<HomophilyResult> {
    if !(radius > 0.0) {
        return Err(Error::param("radius", format!("must be positive, got {radius}")));
    }
    let labelled: Vec<&LandscapePoint> = points.iter().filter(|p| p.stance.stance().is_some()).collect();
    let mut windows: BTreeMap<i64, Vec<&LandscapePoint>> = BTreeMap::new();
    for p in &labelled {
        windows.entry(p.t).or_default().push(p);
    }
    // (same, total) per user
    let mut tally: BTreeMap<&str, (Stance, usize, usize)> = BTreeMap::new();
    for p in &labelled {
        tally.entry(p.user_id.as_str()).or_insert((p.stance.stance().unwrap(), 0, 0));
    }
    for pts in windows.values() {
        let cell = |v: f64| (v / radius).floor() as i64;
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in pts.iter().enumerate() {
            buckets.entry((cell(p.x), cell(p.y))).or_default().push(i);
        }
        for p in pts {
            let (cx, cy) = (cell(p.x), cell(p.y));
            let mut near: Vec<(f64, &str, Stance)> = Vec::new();
            for bx in cx - 1..=cx + 1 {
                for by in cy - 1..=cy + 1 {
                    for &j in buckets.get(&(bx, by)).into_iter().flatten() {
                        let q = pts[j];
                        if q.user_id == p.user_id {
                            continue;
                        }
                        let d = (q.x - p.x).hypot(q.y - p.y);
                        if d <= radius {
                            near.push((d, &q.user_id, q.stance.stance().unwrap()));
                        }
                    }
                }
            }
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
            near.truncate(max_neighbors);
            let own = p.stance.stance().unwrap();
            let entry = tally.get_mut(p.user_id.as_str()).unwrap();
            entry.1 += near.iter().filter(|n| n.2 == own).count();
            entry.2 += near.len();
        }
    }
    let mut by_stance = BTreeMap::new();
    for s in Stance::ALL {
        let mut per_user = Vec::new();
        let mut isolated = 0;
        for (&u, &(st, same, total)) in &tally {
            if st != s {
                continue;
            }
            if total == 0 {
                isolated += 1;
            } else {
                per_user.push((u.to_string(), same as f64 / total as f64));
            }
        }
        let f: Vec<f64> = per_user.iter().map(|x| x.1).collect();
        by_stance.insert(
            s,
            HomophilyStance {
                mean: if f.is_empty() { f64::NAN } else { mean(&f) },
                histogram: histogram(&f, 0.0, 1.0, HIST_BINS),
                per_user,
                isolated,
            },
        );
    }
    Ok(HomophilyResult { radius, by_stance })
}

#[derive(Debug, Clone)]
pub struct EvalParams {
    pub min_periods: usize,
    pub exclude_gaps: bool,
    pub top_k: usize,
    pub max_neighbors: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            min_periods: 10,
            exclude_gaps: false,
            top_k: 20,
            max_neighbors: MAX_NEIGHBORS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub attractors: usize,
    pub h1: Option<StabilityResult>,
    pub events: Vec<TransitionEvent>,
    pub h2: Option<LogitFit>,
    pub h3: Option<TransitionRanks>,
    pub h4: Option<HomophilyResult>,
    /// Why a hypothesis could not be evaluated.
    pub skipped: Vec<(&'static str, String)>,
}

/// Runs every hypothesis; one that cannot be evaluated on this data is
/// recorded in `skipped` rather than failing the rest.
pub fn evaluate(points: &[LandscapePoint], attractors: &[Attractor], params: &EvalParams) -> Result<Evaluation> {
    if attractors.is_empty() {
        return Err(Error::NoAttractors);
    }
    let mut skipped = Vec::new();
    let h1 = keep(&mut skipped, "h1", h1_stability(points, attractors, params.min_periods));
    let events = transition_events(points, attractors)?;
    let h2 = keep(&mut skipped, "h2", h2_regression(&events, params.exclude_gaps));
    let h3 = keep(&mut skipped, "h3", h3_transition_ranks(&events, attractors, params.top_k));
    let radius = mean_displacement(points).ok_or_else(|| Error::Degenerate("no user has two windows".into()));
    let h4 = keep(&mut skipped, "h4", radius.and_then(|r| h4_homophily(points, r, params.max_neighbors)));
    Ok(Evaluation {
        attractors: attractors.len(),
        h1,
        events,
        h2,
        h3,
        h4,
        skipped,
    })
}

fn keep<T>(skipped: &mut Vec<(&'static str, String)>, name: &'static str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("{name} skipped: {e}");
            skipped.push((name, e.to_string()));
            None
        }
    }
}

impl Evaluation {
    /// Flat statistic name to value map, the unit of [`ReportTable`].
    pub fn summary(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("attractors".into(), self.attractors as f64);
        m.insert("events".into(), self.events.len() as f64);
        m.insert("moves".into(), self.events.iter().filter(|e| e.moved()).count() as f64);
        if let Some(h1) = &self.h1 {
            m.insert("h1_users".into(), h1.records.len() as f64);
            m.insert("h1_mean_stability".into(), h1.mean);
        }
        if let Some(h2) = &self.h2 {
            for c in h2.coefficients.iter().skip(1) {
                m.insert(format!("h2_beta_{}", c.name), c.estimate);
                m.insert(format!("h2_p_{}", c.name), c.p_value);
            }
            m.insert("h2_n".into(), h2.n as f64);
            m.insert("h2_diverged".into(), h2.diverged as u8 as f64);
        }
        if let Some(h3) = &self.h3 {
            m.insert("h3_moves".into(), h3.ranks.len() as f64);
            m.insert("h3_fraction_top5".into(), h3.fraction_top5);
            m.insert("h3_expected_top5".into(), h3.expected_top5);
            m.insert("h3_excluded".into(), h3.excluded as f64);
        }
        if let Some(h4) = &self.h4 {
            m.insert("h4_radius".into(), h4.radius);
            for (s, r) in &h4.by_stance {
                m.insert(format!("h4_{}_same_fraction", s.as_str()), r.mean);
                m.insert(format!("h4_{}_isolated", s.as_str()), r.isolated as f64);
            }
        }
        m
    }
}

/// Statistics as rows, one column per configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportTable {
    pub configs: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl ReportTable {
    pub fn new(columns: &[(String, BTreeMap<String, f64>)]) -> Self {
        let mut names: Vec<String> = Vec::new();
        for (_, stats) in columns {
            for k in stats.keys() {
                if !names.contains(k) {
                    names.push(k.clone());
                }
            }
        }
        let rows = names
            .into_iter()
            .map(|n| {
                let vals = columns.iter().map(|(_, s)| s.get(&n).copied().filter(|v| !v.is_nan())).collect();
                (n, vals)
            })
            .collect();
        ReportTable {
            configs: columns.iter().map(|c| c.0.clone()).collect(),
            rows,
        }
    }

    /// Appends a `mean` column averaging each row's present values.
    pub fn with_mean(mut self) -> Self {
        self.configs.push("mean".into());
        for (_, vals) in &mut self.rows {
            let present: Vec<f64> = vals.iter().flatten().copied().collect();
            vals.push((!present.is_empty()).then(|| mean(&present)));
        }
        self
    }

    fn cell(v: Option<f64>) -> String {
        v.map(|x| format!("{x:.6}")).unwrap_or_default()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("statistic");
        for c in &self.configs {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (name, vals) in &self.rows {
            s.push_str(name);
            for v in vals {
                s.push(',');
                s.push_str(&Self::cell(*v));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = vec![std::iter::once("statistic".to_string()).chain(self.configs.iter().cloned()).collect()];
        for (name, vals) in &self.rows {
            grid.push(std::iter::once(name.clone()).chain(vals.iter().map(|v| Self::cell(*v))).collect());
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for row in &grid {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c == 0 {
                    let _ = write!(line, "{cell:<w$}", w = widths[0]);
                } else {
                    let _ = write!(line, "  {cell:>w$}", w = widths[c]);
                }
            }
            s.push_str(line.trim_end());
            s.push('\n');
        }
        s
    }

    pub fn save(&self, csv_path: impl AsRef<Path>, text_path: impl AsRef<Path>) -> Result<()> {
        let (c, t) = (csv_path.as_ref(), text_path.as_ref());
        fs::write(c, self.to_csv()).map_err(|e| Error::io(c, e))?;
        fs::write(t, self.to_text()).map_err(|e| Error::io(t, e))
    }
}

/// Flips believer and skeptic labels; unclustered points stay as they are.
pub fn swap_stances(points: &[LandscapePoint]) -> Vec<LandscapePoint> {
    points
        .iter()
        .map(|p| LandscapePoint {
            stance: match p.stance {
                StanceLabel::Believer => StanceLabel::Skeptic,
                StanceLabel::Skeptic => StanceLabel::Believer,
                StanceLabel::Unclustered => StanceLabel::Unclustered,
            },
            ..p.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn attractor(id: usize, x: f64, y: f64, magnitude: f64) -> Attractor {
        Attractor {
            id,
            grid_ix: 0,
            grid_iy: 0,
            x,
            y,
            magnitude,
            rank: id + 1,
        }
    }

    fn pt(u: &str, t: i64, x: f64, y: f64, stance: StanceLabel) -> LandscapePoint {
        LandscapePoint {
            user_id: u.into(),
            t,
            x,
            y,
            stance,
        }
    }

    #[test]
    fn stability_examples() {
        assert_eq!(stability("u", &[0, 0, 0, 0]).stability, 0.75);
        assert_eq!(stability("u", &[0, 1, 0, 1]).stability, 0.5);
        assert_eq!(stability("u", &[0, 1, 2, 3]).stability, 0.0);
    }

    #[test]
    fn h1_filters_short_trajectories() {
        let a = vec![attractor(0, 0.0, 0.0, 1.0), attractor(1, 10.0, 0.0, 0.5)];
        let mut pts: Vec<LandscapePoint> = (0..12).map(|t| pt("long", t, if t < 6 { 0.1 } else { 9.0 }, 0.0, StanceLabel::Believer)).collect();
        pts.extend((0..10).map(|t| pt("short", t, 0.0, 0.0, StanceLabel::Skeptic)));
        let r = h1_stability(&pts, &a, 10).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!((r.records[0].periods, r.records[0].distinct), (12, 2));
        assert!((r.mean - (1.0 - 2.0 / 12.0)).abs() < 1e-15);
        assert_eq!(r.histogram.iter().sum::<usize>(), 1);
        let none = h1_stability(&pts, &a, 20).unwrap();
        assert!(none.records.is_empty() && none.mean.is_nan());
    }

    #[test]
    fn transition_events_flag_gaps() {
        let a = vec![attractor(0, 0.0, 0.0, 1.0), attractor(1, 10.0, 0.0, 0.5)];
        let pts = vec![
            pt("u", 3, 1.0, 0.0, StanceLabel::Believer),
            pt("u", 1, 0.0, 2.0, StanceLabel::Believer),
            pt("u", 4, 9.0, 0.0, StanceLabel::Believer),
        ];
        let ev = transition_events(&pts, &a).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].t_from, ev[0].t_to, ev[0].gap, ev[0].moved()), (1, 3, true, false));
        assert_eq!(ev[0].distance, 2.0);
        assert_eq!((ev[1].gap, ev[1].moved(), ev[1].strength), (false, true, 1.0));
    }

    fn planted(seed: u64, n: usize, b: [f64; 3]) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x1 = Vec::new();
        let mut x2 = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.sample(rand_distr::StandardNormal);
            let c: f64 = rng.sample(rand_distr::StandardNormal);
            y.push(rng.random::<f64>() < sigmoid(b[0] + b[1] * a + b[2] * c));
            x1.push(a);
            x2.push(c);
        }
        (x1, x2, y)
    }

    #[test]
    fn logistic_recovers_planted_coefficients() {
        let (x1, x2, y) = planted(11, 5000, [-0.5, 1.0, -1.0]);
        let fit = logistic_regression(&[("distance", x1), ("strength", x2)], &y).unwrap();
        assert!(fit.converged && !fit.diverged);
        assert!(fit.gradient_norm < GRADIENT_TOL);
        assert!((fit.coef("distance").unwrap().estimate - 1.0).abs() < 0.15);
        assert!((fit.coef("strength").unwrap().estimate + 1.0).abs() < 0.15);
        assert!(fit.coef("distance").unwrap().p_value < 1e-10);
    }

    #[test]
    fn logistic_matches_closed_form_single_binary_covariate() {
        // with one binary covariate the MLE reproduces the two group log-odds
        let x: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
        let y: Vec<bool> = (0..40).map(|i| if i < 20 { i < 5 } else { i < 35 }).collect();
        let xm = DMatrix::from_fn(40, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        let yv = DVector::from_iterator(40, y.iter().map(|&b| b as u8 as f64));
        let fit = fit_logit_design(&["intercept".into(), "g".into()], &xm, &yv).unwrap();
        let lo0 = (5.0f64 / 15.0).ln();
        let lo1 = (15.0f64 / 5.0).ln();
        assert!((fit.coefficients[0].estimate - lo0).abs() < 1e-9);
        assert!((fit.coefficients[1].estimate - (lo1 - lo0)).abs() < 1e-9);
        let se = (1.0 / 5.0 + 1.0 / 15.0 + 1.0 / 15.0 + 1.0 / 5.0f64).sqrt();
        assert!((fit.coefficients[1].std_error - se).abs() < 1e-9);
    }

    #[test]
    fn separation_and_constant_covariates() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<bool> = (0..50).map(|i| i >= 25).collect();
        let fit = logistic_regression(&[("distance", x.clone())], &y).unwrap();
        assert!(fit.diverged);
        let err = logistic_regression(&[("distance", x), ("strength", vec![0.3; 50])], &y).unwrap_err();
        assert!(err.to_string().contains("strength"));
        assert!(logistic_regression(&[("distance", (0..5).map(f64::from).collect())], &[true; 5]).is_err());
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let (x1, x2, y) = planted(3, 300, [0.2, 0.7, -1.2]);
        let x = DMatrix::from_fn(300, 3, |i, j| [1.0, x1[i], x2[i]][j]);
        let yv = DVector::from_iterator(300, y.iter().map(|&b| b as u8 as f64));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let beta = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let g = gradient(&beta, &x, &yv);
            for j in 0..3 {
                let mut up = beta.clone();
                let mut dn = beta.clone();
                up[j] += 1e-5;
                dn[j] -= 1e-5;
                let fd = (log_likelihood(&up, &x, &yv) - log_likelihood(&dn, &x, &yv)) / 2e-5;
                assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0), "{fd} vs {}", g[j]);
            }
        }
    }

    fn ring(k: usize) -> Vec<Attractor> {
        (0..k)
            .map(|i| {
                let a = i as f64 * 2.0 * std::f64::consts::PI / k as f64;
                attractor(i, (i as f64 + 1.0) * a.cos(), (i as f64 + 1.0) * a.sin(), 1.0 / (i as f64 + 1.0))
            })
            .collect()
    }

    fn event(o: usize, d: usize) -> TransitionEvent {
        TransitionEvent {
            user_id: "u".into(),
            t_from: 0,
            t_to: 1,
            origin: o,
            destination: d,
            distance: 0.0,
            strength: 1.0,
            gap: false,
        }
    }

    #[test]
    fn h3_ranks_follow_distances() {
        let a = vec![attractor(0, 0.0, 0.0, 1.0), attractor(1, 1.0, 0.0, 0.9), attractor(2, 3.0, 0.0, 0.8), attractor(3, 50.0, 0.0, 0.1)];
        let ev = vec![event(0, 1), event(0, 2), event(2, 0), event(1, 1), event(0, 3)];
        let r = h3_transition_ranks(&ev, &a, 3).unwrap();
        assert_eq!(r.ranks, vec![1, 2, 2]);
        assert_eq!(r.excluded, 1);
        assert_eq!(r.histogram, vec![1, 2]);
        assert_eq!(r.expected_top5, 1.0);
        assert!(!r.short);
        let r = h3_transition_ranks(&ev, &a, 20).unwrap();
        assert!(r.short);
        assert_eq!(r.k, 4);
    }

    #[test]
    fn h3_uniform_destinations_hit_expected_fraction() {
        let a = ring(20);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ev: Vec<TransitionEvent> = (0..20_000)
            .map(|_| {
                let o = rng.random_range(0..20);
                let mut d = rng.random_range(0..19);
                if d >= o {
                    d += 1;
                }
                event(o, d)
            })
            .collect();
        let r = h3_transition_ranks(&ev, &a, 20).unwrap();
        assert!((r.fraction_top5 - 5.0 / 19.0).abs() < 0.02);
        assert!((r.expected_top5 - 5.0 / 19.0).abs() < 1e-15);
    }

    #[test]
    fn homophily_examples() {
        let pts = vec![
            pt("a", 0, 0.0, 0.0, StanceLabel::Believer),
            pt("b", 0, 0.5, 0.0, StanceLabel::Believer),
            pt("c", 0, 0.0, 0.6, StanceLabel::Skeptic),
            pt("d", 0, 9.0, 9.0, StanceLabel::Skeptic),
            pt("e", 0, 0.1, 0.1, StanceLabel::Unclustered),
            pt("a", 1, 0.0, 0.0, StanceLabel::Believer),
        ];
        let r = h4_homophily(&pts, 1.0, 20).unwrap();
        let b = &r.by_stance[&Stance::Believer];
        assert_eq!(b.per_user, vec![("a".to_string(), 0.5), ("b".to_string(), 0.5)]);
        let s = &r.by_stance[&Stance::Skeptic];
        assert_eq!(s.per_user, vec![("c".to_string(), 0.0)]);
        assert_eq!(s.isolated, 1);
        let r1 = h4_homophily(&pts, 1.0, 1).unwrap();
        // a's single nearest is b, b's is a, c's is a
        assert_eq!(r1.by_stance[&Stance::Believer].mean, 1.0);
        assert!(h4_homophily(&pts, 0.0, 20).is_err());
    }

    #[test]
    fn mean_displacement_over_adjacent_windows() {
        let pts = vec![
            pt("a", 0, 0.0, 0.0, StanceLabel::Believer),
            pt("a", 1, 3.0, 4.0, StanceLabel::Believer),
            pt("b", 5, 1.0, 1.0, StanceLabel::Believer),
            pt("b", 2, 1.0, 0.0, StanceLabel::Believer),
        ];
        assert_eq!(mean_displacement(&pts), Some(3.0));
        assert_eq!(mean_displacement(&pts[..1]), None);
    }

    #[test]
    fn report_table_layout() {
        let mut a = BTreeMap::new();
        a.insert("h1_mean_stability".to_string(), 0.8);
        a.insert("attractors".to_string(), 5.0);
        let mut b = BTreeMap::new();
        b.insert("attractors".to_string(), 4.0);
        b.insert("h3_fraction_top5".to_string(), f64::NAN);
        let t = ReportTable::new(&[("w7".into(), a), ("w14".into(), b)]);
        assert_eq!(
            t.to_csv(),
            "statistic,w7,w14\nattractors,5.000000,4.000000\nh1_mean_stability,0.800000,\nh3_fraction_top5,,\n"
        );
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("attractors       "));
        assert!(lines[1].ends_with("5.000000  4.000000"));
        assert!(lines[2].ends_with("0.800000"));
        let m = t.with_mean();
        assert_eq!(m.rows[0].1[2], Some(4.5));
        assert_eq!(m.rows[1].1[2], Some(0.8));
        assert_eq!(m.rows[2].1[2], None);
    }

    #[test]
    fn null_model_coefficients_are_insignificant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut hits = 0;
        for _ in 0..20 {
            let (x1, x2, _) = planted(rng.random(), 2000, [0.0, 0.0, 0.0]);
            let y: Vec<bool> = (0..2000).map(|_| rng.random::<f64>() < 0.3).collect();
            let fit = logistic_regression(&[("distance", x1), ("strength", x2)], &y).unwrap();
            hits += fit.coefficients[1..].iter().filter(|c| c.estimate.abs() < 2.0 * c.std_error).count();
        }
        // 40 draws at a nominal 95% rate
        assert!(hits >= 34, "{hits}");
    }

    #[test]
    fn evaluate_records_skipped_hypotheses() {
        let a = vec![attractor(0, 0.0, 0.0, 1.0), attractor(1, 5.0, 0.0, 0.5)];
        let pts = vec![pt("a", 0, 0.0, 0.0, StanceLabel::Believer), pt("a", 1, 4.0, 0.0, StanceLabel::Believer)];
        let e = evaluate(&pts, &a, &EvalParams::default()).unwrap();
        assert!(e.h1.as_ref().unwrap().records.is_empty() && e.h2.is_none());
        assert!(e.skipped.iter().any(|s| s.0 == "h2"));
        assert_eq!(e.h3.as_ref().unwrap().ranks, vec![1]);
        assert_eq!(e.summary()["moves"], 1.0);
        assert!(matches!(evaluate(&pts, &[], &EvalParams::default()), Err(Error::NoAttractors)));
    }

    fn random_points(seed: u64, n: usize) -> Vec<LandscapePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let stance = match rng.random_range(0..3) {
                    0 => StanceLabel::Believer,
                    1 => StanceLabel::Skeptic,
                    _ => StanceLabel::Unclustered,
                };
                pt(&format!("u{}", i % 17), (i / 17) as i64, rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), stance)
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn homophily_swaps_with_labels(seed in any::<u64>(), radius in 0.2f64..2.0) {
            let pts = random_points(seed, 120);
            let r = h4_homophily(&pts, radius, MAX_NEIGHBORS).unwrap();
            let s = h4_homophily(&swap_stances(&pts), radius, MAX_NEIGHBORS).unwrap();
            prop_assert_eq!(&r.by_stance[&Stance::Believer], &s.by_stance[&Stance::Skeptic]);
            prop_assert_eq!(&r.by_stance[&Stance::Skeptic], &s.by_stance[&Stance::Believer]);
        }

        #[test]
        fn stability_lies_in_unit_interval(seq in proptest::collection::vec(0usize..6, 1..40)) {
            let r = stability("u", &seq);
            prop_assert!((0.0..1.0).contains(&r.stability));
            prop_assert!(r.distinct >= 1 && r.distinct <= r.periods);
        }
    }
}
