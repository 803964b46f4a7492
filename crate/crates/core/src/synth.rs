//! Seeded synthetic data: Gaussian mixtures, planted logistic events,
//! stance blobs, and a full agent world (tweets, parses, embeddings) whose
//! users walk between planted attractors.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::ingest::{DepSentence, EmbeddingFile, Token, Tweet};
use crate::landscape::LandscapePoint;
use crate::stance::{Stance, StanceLabel};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss2(r: &mut ChaCha8Rng) -> [f64; 2] {
    [r.sample(StandardNormal), r.sample(StandardNormal)]
}

/// `n` points from an isotropic 2D mixture.
pub fn gaussian_mixture(seed: u64, means: &[[f64; 2]], sds: &[f64], weights: &[f64], n: usize) -> Vec<[f64; 2]> {
    let mut r = rng(seed);
    let total: f64 = weights.iter().sum();
    (0..n)
        .map(|_| {
            let mut u = r.random::<f64>() * total;
            let mut k = 0;
            while k + 1 < weights.len() && u >= weights[k] {
                u -= weights[k];
                k += 1;
            }
            let z = gauss2(&mut r);
            [means[k][0] + sds[k] * z[0], means[k][1] + sds[k] * z[1]]
        })
        .collect()
}

/// A heavy central component flanked by two lighter ones on opposite
/// diagonals; the means are jittered per seed. Returns points and means.
pub fn three_peak_mixture(seed: u64, n: usize) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let mut r = rng(seed ^ 0x5eed);
    let mut jitter = || r.random_range(-1.5..1.5);
    let means = vec![
        [jitter(), jitter()],
        [-12.0 + jitter(), -12.0 + jitter()],
        [12.0 + jitter(), 12.0 + jitter()],
    ];
    let pts = gaussian_mixture(seed, &means, &[1.0; 3], &[0.6, 0.2, 0.2], n);
    (pts, means)
}

/// Outcomes drawn from `sigmoid(b0 + b1 x1 + b2 x2)` with standard normal
/// covariates.
pub fn planted_logistic(seed: u64, n: usize, beta: [f64; 3]) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let mut r = rng(seed);
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = r.sample(StandardNormal);
        let b: f64 = r.sample(StandardNormal);
        let eta = beta[0] + beta[1] * a + beta[2] * b;
        y.push(r.random::<f64>() < 1.0 / (1.0 + (-eta).exp()));
        x1.push(a);
        x2.push(b);
    }
    (x1, x2, y)
}

/// Believers around `(-gap/2, 0)` and skeptics around `(gap/2, 0)`, unit
/// spread, one point per user per window.
pub fn two_blobs(seed: u64, users_per_stance: usize, windows: i64, gap: f64) -> Vec<LandscapePoint> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for t in 0..windows {
        for (s, cx) in [(StanceLabel::Believer, -gap / 2.0), (StanceLabel::Skeptic, gap / 2.0)] {
            for u in 0..users_per_stance {
                let z = gauss2(&mut r);
                out.push(LandscapePoint {
                    user_id: format!("{}{u:04}", &s.as_str()[..1]),
                    t,
                    x: cx + z[0],
                    y: z[1],
                    stance: s,
                });
            }
        }
    }
    out
}

/// Subject, verb lemma, verb form, object.
type Proposition = (&'static str, &'static str, &'static str, &'static str);

/// Two propositions per pole of the belief triangle.
pub const PROPOSITIONS: [[Proposition; 2]; 3] = [
    [("emissions", "drive", "drive", "warming"), ("glaciers", "lose", "lose", "ice")],
    [("models", "exaggerate", "exaggerate", "risk"), ("sun", "control", "controls", "climate")],
    [("taxes", "hurt", "hurt", "families"), ("renewables", "create", "create", "jobs")],
];

#[derive(Debug, Clone)]
pub struct WorldParams {
    pub seed: u64,
    /// Agents per planted attractor: centre, north, south, east, west.
    pub agents: [usize; 5],
    pub windows: i64,
    pub statements_per_window: usize,
    pub retweets_per_window: usize,
    pub embedding_dim: usize,
    /// Distance of the four outer attractors from the centre, in the unit
    /// triangle of pole mixtures (inradius 0.5).
    pub spread: f64,
    /// Per-window chance of leaving each attractor.
    pub hazard: [f64; 5],
    /// Pull towards the target per window, and latent noise.
    pub pull: f64,
    pub latent_sd: f64,
    /// Chance that a retweet goes to the other side's accounts.
    pub crossover: f64,
    pub embedding_sd: f64,
    /// Window index of the first window (windows start at epoch multiples of
    /// seven days).
    pub first_window: i64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            seed: 7,
            agents: [140, 80, 80, 100, 100],
            windows: 12,
            statements_per_window: 30,
            retweets_per_window: 3,
            embedding_dim: 16,
            spread: 0.42,
            hazard: [0.015, 0.12, 0.12, 0.02, 0.02],
            pull: 0.7,
            latent_sd: 0.03,
            crossover: 0.03,
            embedding_sd: 0.15,
            first_window: 2557,
        }
    }
}

impl WorldParams {
    /// A small world that still runs every stage.
    pub fn small(seed: u64) -> Self {
        WorldParams {
            seed,
            agents: [24, 14, 14, 18, 18],
            statements_per_window: 6,
            embedding_dim: 8,
            ..WorldParams::default()
        }
    }
}

/// Planted attractor positions in the latent plane.
pub fn planted_attractors(spread: f64) -> [[f64; 2]; 5] {
    [[0.0, 0.0], [0.0, spread], [0.0, -spread], [spread, 0.0], [-spread, 0.0]]
}

/// Stance that lives at each planted attractor.
pub const ATTRACTOR_STANCE: [Stance; 5] = [Stance::Believer, Stance::Believer, Stance::Believer, Stance::Skeptic, Stance::Skeptic];

/// Attractors an agent may head for next.
fn next_targets(from: usize) -> &'static [usize] {
    match from {
        0 => &[1, 2],
        1 | 2 => &[0],
        3 => &[4],
        _ => &[3],
    }
}

const TRIANGLE: [[f64; 2]; 3] = [[0.0, 1.0], [-0.866_025_403_784_438_6, -0.5], [0.866_025_403_784_438_6, -0.5]];

/// Mixture weights over the three poles at a latent position, clipped to the
/// triangle.
pub fn pole_weights(p: [f64; 2]) -> [f64; 3] {
    let [a, b, c] = TRIANGLE;
    let det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
    let w0 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / det;
    let w1 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / det;
    let w = [w0.max(0.0), w1.max(0.0), (1.0 - w0 - w1).max(0.0)];
    let s: f64 = w.iter().sum();
    w.map(|x| x / s)
}

#[derive(Debug, Clone)]
pub struct World {
    pub tweets: Vec<Tweet>,
    pub parses: Vec<DepSentence>,
    /// Keyed by the statement id the extractor will produce.
    pub embeddings: EmbeddingFile,
    pub gold: BTreeMap<String, Stance>,
    pub believer_accounts: Vec<String>,
    pub skeptic_accounts: Vec<String>,
    /// Planted target attractor per agent per window.
    pub targets: BTreeMap<String, Vec<usize>>,
}

impl World {
    pub fn attractor_count(&self) -> usize {
        5
    }
}

fn sentence(tweet_id: &str, prop: &Proposition) -> DepSentence {
    let tok = |index, form: &str, lemma: &str, upos: &str, feats: &str, head, deprel: &str, space_after| Token {
        index,
        form: form.to_string(),
        lemma: lemma.to_string(),
        upos: upos.into(),
        feats: feats.into(),
        head,
        deprel: deprel.into(),
        space_after,
    };
    let (subj, lemma, form, obj) = *prop;
    let mut subject = subj.to_string();
    subject[..1].make_ascii_uppercase();
    DepSentence {
        tweet_id: tweet_id.to_string(),
        sent_index: 0,
        tokens: vec![
            tok(1, &subject, subj, "NOUN", "", 2, "nsubj", true),
            tok(2, form, lemma, "VERB", "", 0, "root", true),
            tok(3, obj, obj, "NOUN", "", 2, "obj", false),
            tok(4, ".", ".", "PUNCT", "", 2, "punct", false),
        ],
    }
}

/// Agents follow noisy pulls towards planted attractors, occasionally
/// retargeting to a neighbouring attractor of their own stance (less often
/// from better-populated attractors). Each window an agent states
/// propositions drawn from the pole mixture at its position and retweets
/// accounts of its stance.
pub fn agent_world(p: &WorldParams) -> World {
    let mut r = rng(p.seed);
    let attractors = planted_attractors(p.spread);
    let week = 7 * crate::trajectory::SECONDS_PER_DAY;
    let believer_accounts: Vec<String> = (1..=5).map(|i| format!("climate_desk{i}")).collect();
    let skeptic_accounts: Vec<String> = (1..=5).map(|i| format!("free_voice{i}")).collect();

    // proposition embedding centres on a circle in the first two dimensions
    let dim = p.embedding_dim.max(2);
    let centres: Vec<Vec<f64>> = (0..6)
        .map(|k| {
            let a = k as f64 * std::f64::consts::PI / 3.0;
            let mut c = vec![0.0; dim];
            c[0] = 3.0 * a.cos();
            c[1] = 3.0 * a.sin();
            for x in c.iter_mut().skip(2) {
                *x = r.random_range(-0.2..0.2);
            }
            c
        })
        .collect();
    let noise = Normal::new(0.0, p.embedding_sd).expect("finite sd");

    let mut tweets = Vec::new();
    let mut parses = Vec::new();
    let mut embeddings = EmbeddingFile::new(dim);
    let mut gold = BTreeMap::new();
    let mut targets = BTreeMap::new();
    let mut next_id = 0usize;
    let mut agent = 0usize;
    for (home, &count) in p.agents.iter().enumerate() {
        for _ in 0..count {
            let user = format!("u{agent:04}");
            agent += 1;
            let stance = ATTRACTOR_STANCE[home];
            gold.insert(user.clone(), stance);
            let accounts = match stance {
                Stance::Believer => (&believer_accounts, &skeptic_accounts),
                Stance::Skeptic => (&skeptic_accounts, &believer_accounts),
            };
            let mut target = home;
            let z = gauss2(&mut r);
            let mut pos = [attractors[home][0] + p.latent_sd * z[0], attractors[home][1] + p.latent_sd * z[1]];
            let mut history = Vec::new();
            for w in 0..p.windows {
                if w > 0 {
                    if r.random::<f64>() < p.hazard[target] {
                        target = *next_targets(target).choose(&mut r).expect("non-empty");
                    }
                    let z = gauss2(&mut r);
                    for d in 0..2 {
                        pos[d] += p.pull * (attractors[target][d] - pos[d]) + p.latent_sd * z[d];
                    }
                }
                history.push(target);
                let weights = pole_weights(pos);
                let start = (p.first_window + w) * week;
                for _ in 0..p.statements_per_window {
                    let mut u = r.random::<f64>();
                    let mut pole = 0;
                    while pole < 2 && u >= weights[pole] {
                        u -= weights[pole];
                        pole += 1;
                    }
                    let which = r.random_range(0..2);
                    let prop = &PROPOSITIONS[pole][which];
                    let id = format!("t{next_id:07}");
                    next_id += 1;
                    let s = sentence(&id, prop);
                    tweets.push(Tweet {
                        tweet_id: id.clone(),
                        user_id: user.clone(),
                        timestamp: start + r.random_range(0..week),
                        text: s.text(),
                        retweeted_user: None,
                        lang: "en".into(),
                    });
                    let c = &centres[pole * 2 + which];
                    embeddings
                        .rows
                        .push((format!("{id}:0:2"), c.iter().map(|x| x + noise.sample(&mut r)).collect()));
                    parses.push(s);
                }
                for _ in 0..p.retweets_per_window {
                    let pool = if r.random::<f64>() < p.crossover { accounts.1 } else { accounts.0 };
                    let acct = pool.choose(&mut r).expect("non-empty").clone();
                    let id = format!("t{next_id:07}");
                    next_id += 1;
                    tweets.push(Tweet {
                        tweet_id: id,
                        user_id: user.clone(),
                        timestamp: start + r.random_range(0..week),
                        text: format!("RT @{acct}: new post"),
                        retweeted_user: Some(acct),
                        lang: "en".into(),
                    });
                }
            }
            targets.insert(user, history);
        }
    }
    World {
        tweets,
        parses,
        embeddings,
        gold,
        believer_accounts,
        skeptic_accounts,
        targets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pole_weights_are_barycentric() {
        for (i, v) in TRIANGLE.iter().enumerate() {
            let w = pole_weights(*v);
            assert!((w[i] - 1.0).abs() < 1e-12);
        }
        let w = pole_weights([0.0, 0.0]);
        assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-12));
        let out = pole_weights([0.0, 5.0]);
        assert_eq!(out, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn mixtures_are_seeded() {
        let (a, m) = three_peak_mixture(3, 100);
        assert_eq!(a, three_peak_mixture(3, 100).0);
        assert_ne!(a, three_peak_mixture(4, 100).0);
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn small_world_is_consistent() {
        let w = agent_world(&WorldParams::small(1));
        let p = WorldParams::small(1);
        let agents: usize = p.agents.iter().sum();
        let per_agent = (p.statements_per_window + p.retweets_per_window) * p.windows as usize;
        assert_eq!(w.tweets.len(), agents * per_agent);
        assert_eq!(w.parses.len(), w.embeddings.rows.len());
        assert!(w.parses.iter().all(|s| s.validate().is_ok()));
        assert_eq!(w.gold.len(), agents);
        let t = &w.tweets[0];
        let ex = crate::svo::extract_svo(&w.parses[0], t);
        assert_eq!(ex.statements[0].statement_id, w.embeddings.rows[0].0);
    }
}
