use belief_landscape::landscape::{find_maxima, kde2d, kde2d_on, threshold_attractors, LandscapePoint};
use belief_landscape::stance::StanceLabel;
use belief_landscape::synth::two_blobs;
use blf::render::{render, stance_colour, Figure};

fn points(n: usize) -> Vec<LandscapePoint> {
    (0..n)
        .map(|i| LandscapePoint {
            user_id: format!("u{i}"),
            t: (i % 3) as i64,
            x: (i as f64 * 0.37).sin(),
            y: (i as f64 * 0.11).cos(),
            stance: [StanceLabel::Believer, StanceLabel::Skeptic, StanceLabel::Unclustered][i % 3],
        })
        .collect()
}

fn kinds(f: &Figure, kind: &str) -> usize {
    f.drawn.iter().filter(|d| d.kind == kind).count()
}

#[test]
fn full_fraction_draws_every_point_in_its_stance_colour() {
    let pts = points(100);
    let fig = render(&pts, None, &[], 1.0, 5, 1).unwrap();
    assert_eq!(kinds(&fig, "point"), 100);
    assert_eq!(fig.svg.matches("<circle").count(), 100);
    for s in [StanceLabel::Believer, StanceLabel::Skeptic, StanceLabel::Unclustered] {
        let want = pts.iter().filter(|p| p.stance == s).count();
        assert_eq!(fig.svg.matches(&format!("fill=\"{}\"", stance_colour(s))).count(), want);
    }
}

#[test]
fn small_fraction_draws_a_seeded_subset() {
    let pts = points(1000);
    let a = render(&pts, None, &[], 0.05, 5, 11).unwrap();
    let b = render(&pts, None, &[], 0.05, 5, 12).unwrap();
    assert_eq!(kinds(&a, "point"), 50);
    assert_ne!(a.drawn, b.drawn);
    assert_eq!(a.drawn, render(&pts, None, &[], 0.05, 5, 11).unwrap().drawn);
}

#[test]
fn two_blobs_get_two_contour_systems_and_markers_at_their_centres() {
    let pts = two_blobs(4, 150, 6, 20.0);
    let xy: Vec<[f64; 2]> = pts.iter().map(LandscapePoint::xy).collect();
    // a blob-scale bandwidth, so the peaks sit on the planted centres
    let grid = kde2d_on(&xy, [1.0, 1.0], (-16.0, 16.0), (-6.0, 6.0), 101).unwrap();
    let attractors = threshold_attractors(&grid, &find_maxima(&grid), 0.1 * grid.max());
    let fig = render(&pts, Some(&grid), &attractors, 0.1, 1, 2).unwrap();
    let markers: Vec<_> = fig.drawn.iter().filter(|d| d.kind == "attractor").collect();
    assert_eq!(markers.len(), 2, "{markers:?}");
    let cell = grid.xs[1] - grid.xs[0];
    for centre in [-10.0, 10.0] {
        assert!(
            markers.iter().any(|m| (m.x - centre).abs() < 0.25 + cell && m.y.abs() < 0.25 + cell),
            "no marker near ({centre}, 0): {markers:?}"
        );
    }
    // the single half-maximum level traces one closed ring per blob
    let rings: std::collections::BTreeMap<&str, Vec<f64>> = fig
        .drawn
        .iter()
        .filter(|d| d.kind == "contour")
        .fold(Default::default(), |mut m, d| {
            m.entry(d.key.as_str()).or_default().push(d.x);
            m
        });
    assert_eq!(rings.len(), 2);
    let sides: Vec<bool> = rings.values().map(|xs| xs.iter().all(|&x| x < 0.0)).collect();
    assert!(rings.values().all(|xs| xs.iter().all(|&x| x < 0.0) || xs.iter().all(|&x| x > 0.0)));
    assert!(sides.contains(&true) && sides.contains(&false));
    assert!(fig.svg.contains(">1</text>") && fig.svg.contains(">2</text>"));
}

#[test]
fn wide_bandwidth_markers_follow_the_attractors() {
    let pts = two_blobs(4, 150, 6, 20.0);
    let xy: Vec<[f64; 2]> = pts.iter().map(LandscapePoint::xy).collect();
    let grid = kde2d(&xy, 100, 3.0).unwrap();
    let attractors = threshold_attractors(&grid, &find_maxima(&grid), 0.0);
    let fig = render(&pts, Some(&grid), &attractors, 0.1, 4, 2).unwrap();
    let markers: Vec<_> = fig.drawn.iter().filter(|d| d.kind == "attractor").collect();
    assert_eq!(markers.len(), attractors.len());
    for a in &attractors {
        assert!(markers.iter().any(|m| m.x == a.x && m.y == a.y && m.label == a.rank.to_string()));
    }
    assert!(fig.svg.contains("<path data-level"));
}

#[test]
fn empty_landscape_is_a_blank_canvas_with_a_warning() {
    let fig = render(&[], None, &[], 0.5, 5, 0).unwrap();
    assert!(fig.drawn.is_empty());
    assert!(fig.svg.contains("class=\"warning\""));
    assert!(fig.svg.trim_end().ends_with("</svg>"));
}
