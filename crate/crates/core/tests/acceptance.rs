//! Acceptance criteria, one line each. Run with
//! `cargo test -p belief-landscape --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use belief_landscape::hypotheses::{
    gradient, h1_stability, h3_transition_ranks, h4_homophily, log_likelihood, logistic_regression, mean_displacement,
    swap_stances, TransitionEvent, GRADIENT_TOL, MAX_NEIGHBORS,
};
use belief_landscape::ingest::{load_corpus, load_parses, write_corpus, write_parses, CorpusFilter, DepSentence, EmbeddingFile};
use belief_landscape::landscape::{
    bandwidth, find_maxima, kde2d, kde2d_on, linspace, Attractor, DensityGrid, LandscapePoint, DEFAULT_GRID,
};
use belief_landscape::pipeline::{self, Params};
use belief_landscape::stance::{cluster_label, cluster_purity, Stance, StanceLabel};
use belief_landscape::stats::trapezoid_2d;
use belief_landscape::svo::extract_tweet;
use belief_landscape::synth::{agent_world, planted_logistic, three_peak_mixture, two_blobs, WorldParams};
use belief_landscape::trajectory::{belief_vector, decay_alpha, trajectories, DecayParams, Observation};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn decay_kernel() -> Outcome {
    for h in 1..=6 {
        let a = decay_alpha(h as f64).map_err(|e| e.to_string())?;
        let half = (1.0 - a).powi(h);
        check((half - 0.5).abs() < 1e-12, || format!("halflife {h}: (1-a)^h = {half}"))?;
    }
    // constant input through the full windowing fold
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = DecayParams {
        halflife: 2.5,
        ..DecayParams::default()
    };
    let week = 7 * 86_400;
    let mut obs = Vec::new();
    for u in 0..50 {
        for _ in 0..rng.random_range(1..40) {
            let t = rng.random_range(0..30) * week + rng.random_range(0..week);
            // two statements in cluster 0 and one in cluster 1 per window
            for c in [0, 0, 1] {
                obs.push(Observation {
                    user_id: format!("u{u}"),
                    timestamp: t,
                    cluster: c,
                });
            }
        }
    }
    let c = [2.0 / 3.0, 1.0 / 3.0];
    for v in trajectories(&obs, 2, &params).map_err(|e| e.to_string())? {
        check(v.vector == c, || format!("constant input drifted to {:?}", v.vector))?;
    }
    // two-step hand example against a direct weighted sum
    let hist = vec![(0, vec![0.0, 1.0]), (1, vec![1.0, 0.0])];
    let y = belief_vector(&hist, 1, 0.5).ok_or("no output")?;
    let brute: Vec<f64> = (0..2).map(|k| (1.0 * hist[1].1[k] + 0.5 * hist[0].1[k]) / 1.5).collect();
    for k in 0..2 {
        check((y[k] - brute[k]).abs() < 1e-12, || format!("y1 = {y:?}, expected {brute:?}"))?;
        check((y[k] - [2.0 / 3.0, 1.0 / 3.0][k]).abs() < 1e-12, || format!("y1 = {y:?}"))?;
    }
    Ok("halving exact to 1e-12 for h=1..6; constant fixed point exact; two-step example matches".into())
}

fn normal_cloud(seed: u64, n: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal)])
        .collect()
}

fn kde_correctness() -> Outcome {
    let pts = normal_cloud(3, 1000);
    let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    let (hx, hy) = (bandwidth(&xs).map_err(|e| e.to_string())?, bandwidth(&ys).map_err(|e| e.to_string())?);
    let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g = kde2d_on(&pts, [hx, hy], (lo(&xs) - 5.0 * hx, hi(&xs) + 5.0 * hx), (lo(&ys) - 5.0 * hy, hi(&ys) + 5.0 * hy), DEFAULT_GRID)
        .map_err(|e| e.to_string())?;
    let integral = trapezoid_2d(&g.xs, &g.ys, |i, j| g.at(i, j));
    check((integral - 1.0).abs() <= 0.01, || format!("integral {integral}"))?;

    let mut sym: Vec<[f64; 2]> = pts.iter().take(300).copied().collect();
    sym.extend(pts.iter().take(300).map(|p| [-p[0], p[1]]));
    let gs = kde2d(&sym, DEFAULT_GRID, 1.0).map_err(|e| e.to_string())?;
    let n = gs.n_grid;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((gs.at(i, j) - gs.at(n - 1 - i, j)).abs());
        }
    }
    check(worst < 1e-12, || format!("x-negation asymmetry {worst:e}"))?;

    let big = normal_cloud(4, 10_000);
    let start = Instant::now();
    let g1 = kde2d(&big, DEFAULT_GRID, 1.0).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let mut shuffled = big.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, rng.random_range(0..=i));
    }
    let g2 = kde2d(&shuffled, DEFAULT_GRID, 1.0).map_err(|e| e.to_string())?;
    check(g1.values.iter().zip(&g2.values).all(|(a, b)| a.to_bits() == b.to_bits()), || "permutation changed bits".into())?;
    check(took < Duration::from_secs(5), || format!("10k points took {took:?}"))?;
    Ok(format!(
        "integral {integral:.5}; asymmetry {worst:.1e}; permutation bit-exact; 10k points in {:.0} ms",
        took.as_secs_f64() * 1e3
    ))
}

/// Strict local maxima found by comparing each interior cell with its four
/// axis neighbours.
fn scan_peaks(g: &DensityGrid) -> Vec<(usize, usize)> {
    let n = g.n_grid;
    let mut out = Vec::new();
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let v = g.at(i, j);
            if v > g.at(i - 1, j) && v > g.at(i + 1, j) && v > g.at(i, j - 1) && v > g.at(i, j + 1) {
                out.push((i, j));
            }
        }
    }
    out
}

fn peak_detection() -> Outcome {
    let mut three = 0;
    for seed in 0..100u64 {
        let (pts, means) = three_peak_mixture(seed, 2500);
        let g = kde2d(&pts, DEFAULT_GRID, 1.0).map_err(|e| e.to_string())?;
        let mut peaks = find_maxima(&g);
        peaks.sort_unstable();
        check(peaks == scan_peaks(&g), || format!("seed {seed}: sign test disagrees with scan"))?;
        if peaks.len() != 3 {
            continue;
        }
        let (dx, dy) = (g.xs[1] - g.xs[0], g.ys[1] - g.ys[0]);
        let cell = |m: [f64; 2]| (((m[0] - g.xs[0]) / dx).round() as i64, ((m[1] - g.ys[0]) / dy).round() as i64);
        let matched = means.iter().all(|&m| {
            let (mi, mj) = cell(m);
            peaks.iter().any(|&(i, j)| (i as i64 - mi).abs() <= 1 && (j as i64 - mj).abs() <= 1)
        });
        if matched {
            three += 1;
        }
    }
    check(three >= 95, || format!("{three}/100 fixtures with three well-placed peaks"))?;

    // a flat-topped surface: cells on the plateau tie with their neighbours
    let n = 40;
    let xs = linspace(-2.0, 2.0, n);
    let values = (0..n * n)
        .map(|k| {
            let (x, y) = (xs[k / n], xs[k % n]);
            (1.5 - x * x - y * y).clamp(0.0, 1.0)
        })
        .collect();
    let plateau = DensityGrid {
        n_grid: n,
        xs: xs.clone(),
        ys: xs,
        hx: 1.0,
        hy: 1.0,
        values,
        n_samples: 1,
    };
    let found = find_maxima(&plateau);
    check(found.is_empty() && scan_peaks(&plateau).is_empty(), || format!("plateau gave {found:?}"))?;
    Ok(format!("{three}/100 fixtures with 3 peaks within one cell; plateau 0 peaks"))
}

fn stability_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let attractors: Vec<Attractor> = (0..8)
        .map(|i| Attractor {
            id: i,
            grid_ix: 0,
            grid_iy: 0,
            x: 10.0 * i as f64,
            y: 0.0,
            magnitude: 1.0,
            rank: i + 1,
        })
        .collect();
    let mut points = Vec::new();
    let mut expected = BTreeMap::new();
    for u in 0..1000 {
        let periods = rng.random_range(1..30);
        let k = rng.random_range(1..=8);
        let seq: Vec<usize> = (0..periods).map(|_| rng.random_range(0..k)).collect();
        for (t, &a) in seq.iter().enumerate() {
            points.push(LandscapePoint {
                user_id: format!("u{u:04}"),
                t: t as i64,
                x: 10.0 * a as f64 + rng.random_range(-1.0..1.0),
                y: rng.random_range(-1.0..1.0),
                stance: StanceLabel::Unclustered,
            });
        }
        if periods > 10 {
            let mut d = seq.clone();
            d.sort_unstable();
            d.dedup();
            expected.insert(format!("u{u:04}"), 1.0 - d.len() as f64 / periods as f64);
        }
    }
    let r = h1_stability(&points, &attractors, 10).map_err(|e| e.to_string())?;
    let got: BTreeMap<String, f64> = r.records.iter().map(|x| (x.user_id.clone(), x.stability)).collect();
    check(got == expected, || format!("{} records differ from brute force", got.len()))?;
    Ok(format!("{} eligible trajectories match brute-force distinct counts", got.len()))
}

fn logistic_regression_check() -> Outcome {
    let (d, s, y) = planted_logistic(2024, 5000, [-0.5, 1.0, -1.0]);
    let fit = logistic_regression(&[("distance", d.clone()), ("strength", s.clone())], &y).map_err(|e| e.to_string())?;
    let bd = fit.coef("distance").unwrap().estimate;
    let bs = fit.coef("strength").unwrap().estimate;
    check((bd - 1.0).abs() <= 0.15 && (bs + 1.0).abs() <= 0.15, || format!("betas {bd}, {bs}"))?;
    check(fit.gradient_norm < GRADIENT_TOL, || format!("gradient norm {:e}", fit.gradient_norm))?;

    let n = y.len();
    let x = DMatrix::from_fn(n, 3, |i, j| [1.0, d[i], s[i]][j]);
    let yv = DVector::from_iterator(n, y.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let beta = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let g = gradient(&beta, &x, &yv);
        for j in 0..3 {
            let step = 1e-5;
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += step;
            down[j] -= step;
            let fd = (log_likelihood(&up, &x, &yv) - log_likelihood(&down, &x, &yv)) / (2.0 * step);
            worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
        }
    }
    check(worst <= 1e-6, || format!("finite-difference relative error {worst:e}"))?;
    Ok(format!(
        "beta_d {bd:.3}, beta_s {bs:.3}; gradient norm {:.1e}; FD error {worst:.1e}",
        fit.gradient_norm
    ))
}

fn h3_ranks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let attractors: Vec<Attractor> = (0..20)
        .map(|i| Attractor {
            id: i,
            grid_ix: 0,
            grid_iy: 0,
            x: rng.random_range(-10.0..10.0),
            y: rng.random_range(-10.0..10.0),
            magnitude: 1.0 / (i + 1) as f64,
            rank: i + 1,
        })
        .collect();
    let events: Vec<TransitionEvent> = (0..100_000)
        .map(|_| {
            let o = rng.random_range(0..20);
            let mut d = rng.random_range(0..19);
            if d >= o {
                d += 1;
            }
            TransitionEvent {
                user_id: String::new(),
                t_from: 0,
                t_to: 1,
                origin: o,
                destination: d,
                distance: 0.0,
                strength: 0.0,
                gap: false,
            }
        })
        .collect();
    let r = h3_transition_ranks(&events, &attractors, 20).map_err(|e| e.to_string())?;
    let exact = 5.0 / 19.0;
    check(r.expected_top5 == exact, || format!("expectation {}", r.expected_top5))?;
    check((r.fraction_top5 - exact).abs() <= 0.02, || format!("fraction {}", r.fraction_top5))?;
    check(r.histogram.iter().sum::<usize>() == 100_000, || "histogram mass".into())?;
    Ok(format!("fraction rank<=5 {:.4} vs 5/19 = {exact:.4} over 100k moves", r.fraction_top5))
}

/// Same-stance neighbour share per user by scanning every pair.
fn homophily_oracle(points: &[LandscapePoint], radius: f64) -> BTreeMap<String, f64> {
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in points {
        let mut near: Vec<(f64, &str, StanceLabel)> = points
            .iter()
            .filter(|q| q.t == p.t && q.user_id != p.user_id)
            .map(|q| (((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt(), q.user_id.as_str(), q.stance))
            .filter(|n| n.0 <= radius)
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        near.truncate(MAX_NEIGHBORS);
        let e = tally.entry(p.user_id.clone()).or_default();
        e.0 += near.iter().filter(|n| n.2 == p.stance).count();
        e.1 += near.len();
    }
    tally.into_iter().filter(|x| x.1 .1 > 0).map(|(u, (s, t))| (u, s as f64 / t as f64)).collect()
}

fn h4_homophily_check() -> Outcome {
    let points = two_blobs(12, 150, 6, 20.0);
    let radius = mean_displacement(&points).ok_or("no displacement")?;
    let r = h4_homophily(&points, radius, MAX_NEIGHBORS).map_err(|e| e.to_string())?;
    let oracle = homophily_oracle(&points, radius);
    let mut got = BTreeMap::new();
    for h in r.by_stance.values() {
        for (u, f) in &h.per_user {
            got.insert(u.clone(), *f);
        }
    }
    check(
        got.len() == oracle.len() && got.iter().all(|(u, f)| (oracle[u] - f).abs() < 1e-12),
        || "per-user fractions differ from the neighbour scan".into(),
    )?;
    let b = r.by_stance[&Stance::Believer].mean;
    let s = r.by_stance[&Stance::Skeptic].mean;
    check(b > 0.95 && s > 0.95, || format!("homophily {b}, {s}"))?;
    let swapped = h4_homophily(&swap_stances(&points), radius, MAX_NEIGHBORS).map_err(|e| e.to_string())?;
    check(
        swapped.by_stance[&Stance::Believer] == r.by_stance[&Stance::Skeptic]
            && swapped.by_stance[&Stance::Skeptic] == r.by_stance[&Stance::Believer],
        || "label swap is not exact".into(),
    )?;
    Ok(format!("believer {b:.4}, skeptic {s:.4} (radius {radius:.3}); oracle and swap exact"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn svo_extraction() -> Outcome {
    type Tuple = (String, String, String, bool, bool);
    let text = std::fs::read_to_string(data("curated_gold.tsv")).map_err(|e| e.to_string())?;
    let mut gold: BTreeMap<String, Vec<Tuple>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        gold.entry(f[0].into())
            .or_default()
            .push((f[1].into(), f[2].into(), f[3].into(), f[4] == "true", f[5] == "true"));
    }
    let corpus = load_corpus(data("curated_tweets.jsonl"), &CorpusFilter::default()).map_err(|e| e.to_string())?;
    let parses = load_parses(data("curated.conllu")).map_err(|e| e.to_string())?;
    let mut by_tweet: BTreeMap<String, Vec<DepSentence>> = BTreeMap::new();
    for s in parses.sentences {
        by_tweet.entry(s.tweet_id.clone()).or_default().push(s);
    }
    let mut hits = 0;
    let mut total = 0;
    let mut spurious = 0;
    let mut got_all: BTreeMap<String, Vec<Tuple>> = BTreeMap::new();
    for t in &corpus.tweets {
        let got: Vec<Tuple> = extract_tweet(&by_tweet[&t.tweet_id], t)
            .statements
            .into_iter()
            .map(|s| (s.subject, s.verb, s.object, s.negated, s.attribute))
            .collect();
        let want = gold.get(&t.tweet_id).cloned().unwrap_or_default();
        total += want.len();
        hits += want.iter().filter(|w| got.contains(w)).count();
        spurious += got.iter().filter(|g| !want.contains(g)).count();
        got_all.insert(t.tweet_id.clone(), got);
    }
    let accuracy = hits as f64 / (total + spurious) as f64;
    check(accuracy >= 0.8, || format!("accuracy {accuracy}"))?;
    for q in ["c02", "c13", "c29", "c46"] {
        check(got_all[q].is_empty(), || format!("question {q} produced {:?}", got_all[q]))?;
    }
    for n in ["c03", "c04", "c07", "c17", "c24", "c35", "c44"] {
        let want: Vec<bool> = gold[n].iter().map(|g| g.3).collect();
        let got: Vec<bool> = got_all[n].iter().map(|g| g.3).collect();
        check(want == got, || format!("negation {n}: {got:?} vs {want:?}"))?;
    }
    Ok(format!("{hits}/{} tuples ({:.1}%); questions 4/4 empty; negation 7/7 exact", total + spurious, accuracy * 100.0))
}

fn purity_and_label() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..1000 {
        let gold: BTreeMap<String, Stance> = (0..100)
            .filter_map(|u| match rng.random_range(0..3) {
                0 => Some((format!("u{u}"), Stance::Believer)),
                1 => Some((format!("u{u}"), Stance::Skeptic)),
                _ => None,
            })
            .collect();
        let members: Vec<String> = (0..rng.random_range(0..60)).map(|_| format!("u{}", rng.random_range(0..100))).collect();
        let (mut b, mut s) = (0usize, 0usize);
        for m in &members {
            match gold.get(m) {
                Some(Stance::Believer) => b += 1,
                Some(Stance::Skeptic) => s += 1,
                None => {}
            }
        }
        let want_label = if b + s == 0 {
            None
        } else if b >= s {
            Some(Stance::Believer)
        } else {
            Some(Stance::Skeptic)
        };
        let want_purity = (b + s > 0).then(|| b.max(s) as f64 / (b + s) as f64);
        let ids = members.iter().map(String::as_str);
        check(cluster_label(ids.clone(), &gold) == want_label, || format!("trial {trial}: label"))?;
        check(cluster_purity(ids, &gold) == want_purity, || format!("trial {trial}: purity"))?;
    }
    Ok("1000 random clusterings match brute-force counts".into())
}

fn end_to_end() -> Outcome {
    let world = agent_world(&WorldParams::default());
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    // fixtures go through the same file formats a run would read
    let corpus_path = dir.path().join("tweets.jsonl");
    let parse_path = dir.path().join("parses.conllu");
    let emb_path = dir.path().join("embeddings.txt");
    write_corpus(&corpus_path, &world.tweets).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_parses(&mut buf, &world.parses).map_err(|e| e.to_string())?;
    std::fs::write(&parse_path, buf).map_err(|e| e.to_string())?;
    world.embeddings.save(&emb_path).map_err(|e| e.to_string())?;

    let params = Params {
        trajectory: belief_landscape::pipeline::TrajectoryParams {
            halflives: vec![3.0],
            ..Params::fixtures().trajectory
        },
        ..Params::fixtures()
    };
    let tweets = load_corpus(&corpus_path, &CorpusFilter::default()).map_err(|e| e.to_string())?.tweets;
    let parses = load_parses(&parse_path).map_err(|e| e.to_string())?.sentences;
    let emb = EmbeddingFile::load(&emb_path).map_err(|e| e.to_string())?;
    let statements = pipeline::extract_all(&tweets, &parses).statements;
    let stance_params = belief_landscape::pipeline::StanceParams {
        believer_seeds: world.believer_accounts.clone(),
        skeptic_seeds: world.skeptic_accounts.clone(),
        ..params.stance.clone()
    };
    let assignments = pipeline::assign_user_stances(&tweets, &stance_params, None, None, 1).map_err(|e| e.to_string())?;
    let users = pipeline::user_stances(&assignments);
    let (_, focal) = pipeline::build_focal(&statements, &users, &params.catalog).map_err(|e| e.to_string())?;
    let (focal_emb, _) = pipeline::focal_embeddings(&focal.statements, &emb);
    let stmt_stances = pipeline::statement_stances(&focal.statements, &users);
    let (_, clusters) =
        pipeline::cluster_statements(&focal_emb, &params.cluster, &stmt_stances, None).map_err(|e| e.to_string())?;
    let obs = pipeline::observations(&focal.statements, &clusters.assignment, &BTreeSet::new());
    let grid = pipeline::trajectory_grid(&obs, clusters.clusters.len(), &params.trajectory).map_err(|e| e.to_string())?;
    let landscape =
        pipeline::build_landscape(&grid[0].1, &users, &params.landscape, None, 1).map_err(|e| e.to_string())?;
    let eval = pipeline::evaluate_landscape(&landscape, &params.hypotheses).map_err(|e| e.to_string())?;

    let k = landscape.attractors.len();
    let h1 = eval.h1.as_ref().ok_or("stability not evaluated")?;
    let h2 = eval.h2.as_ref().ok_or_else(|| format!("regression not evaluated: {:?} {:?}", eval.skipped, eval.summary()))?;
    let h4 = eval.h4.as_ref().ok_or("homophily not evaluated")?;
    let bd = h2.coef("distance").unwrap();
    let bs = h2.coef("strength").unwrap();
    let hb = h4.by_stance[&Stance::Believer].mean;
    let hs = h4.by_stance[&Stance::Skeptic].mean;
    let detail = format!(
        "{k} attractors; stability {:.3} over {} users; beta_d {:.3} (p {:.1e}), beta_s {:.3} (p {:.1e}); homophily {hb:.3}/{hs:.3}",
        h1.mean,
        h1.records.len(),
        bd.estimate,
        bd.p_value,
        bs.estimate,
        bs.p_value
    );
    check((4..=6).contains(&k), || format!("attractor count: {detail}"))?;
    check(h1.mean > 0.7, || format!("stability: {detail}"))?;
    check(
        !h2.diverged && bd.estimate > 0.0 && bd.p_value < 0.01 && bs.estimate < 0.0 && bs.p_value < 0.01,
        || format!("regression (diverged {}, converged {}, iters {}): {detail}", h2.diverged, h2.converged, h2.iterations),
    )?;
    check(hb > 0.9 && hs > 0.9, || format!("homophily: {detail}"))?;
    Ok(detail)
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("decay kernel", Duration::from_secs(1), decay_kernel),
        ("kde correctness", Duration::from_secs(5), kde_correctness),
        ("peak detection", Duration::from_secs(10), peak_detection),
        ("stability formula", Duration::from_secs(1), stability_formula),
        ("logistic regression", Duration::from_secs(5), logistic_regression_check),
        ("h3 rank analysis", Duration::from_secs(5), h3_ranks),
        ("h4 homophily", Duration::from_secs(5), h4_homophily_check),
        ("svo extraction", Duration::from_secs(1), svo_extraction),
        ("purity and label", Duration::from_secs(1), purity_and_label),
        ("end-to-end recovery", Duration::from_secs(60), end_to_end),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = outcome.and_then(|d| {
            if took <= limit {
                Ok(d)
            } else {
                Err(format!("took {took:?}, limit {limit:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS  {name:<22} {:>8.3}s  {detail}", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<22} {:>8.3}s  {why}", took.as_secs_f64());
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
