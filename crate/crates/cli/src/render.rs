//! SVG drawing of one landscape: density contours, a seeded sample of user
//! points coloured by stance, and ranked attractor markers.

use std::fmt::Write as _;
use std::path::Path;

use belief_landscape::landscape::{Attractor, DensityGrid, LandscapePoint};
use belief_landscape::stance::StanceLabel;
use belief_landscape::Error;
use contour::ContourBuilder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

const SIZE: f64 = 800.0;
const PAD: f64 = 40.0;

pub fn stance_colour(s: StanceLabel) -> &'static str {
    match s {
        StanceLabel::Believer => "#1f77b4",
        StanceLabel::Skeptic => "#d62728",
        StanceLabel::Unclustered => "#7f7f7f",
    }
}

/// One drawn element, as listed in the companion CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Drawn {
    pub kind: &'static str,
    pub key: String,
    pub x: f64,
    pub y: f64,
    pub value: Option<f64>,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct Figure {
    pub svg: String,
    pub drawn: Vec<Drawn>,
}

/// Number of points drawn for a sampling fraction.
pub fn sample_size(n: usize, fraction: f64) -> usize {
    if n == 0 || fraction <= 0.0 {
        return 0;
    }
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

/// Contour levels evenly spaced strictly between zero and the maximum.
pub fn contour_levels(max: f64, levels: usize) -> Vec<f64> {
    if max <= 0.0 || !max.is_finite() {
        return Vec::new();
    }
    (1..=levels).map(|i| i as f64 * max / (levels + 1) as f64).collect()
}

/// Contour polylines in data coordinates, as `(level, points)`.
pub fn contour_lines(grid: &DensityGrid, levels: &[f64]) -> Vec<(f64, Vec<[f64; 2]>)> {
    let n = grid.n_grid;
    if n < 2 || levels.is_empty() {
        return Vec::new();
    }
    // the builder wants rows of constant y with x varying fastest
    let mut values = vec![0.0; n * n];
    for ix in 0..n {
        for iy in 0..n {
            values[iy * n + ix] = grid.at(ix, iy);
        }
    }
    let dx = grid.xs[1] - grid.xs[0];
    let dy = grid.ys[1] - grid.ys[0];
    // traced coordinates put sample i at i + 0.5
    let builder = ContourBuilder::new(n, n, true)
        .x_origin(grid.xs[0] - 0.5 * dx)
        .x_step(dx)
        .y_origin(grid.ys[0] - 0.5 * dy)
        .y_step(dy);
    let Ok(lines) = builder.lines(&values, levels) else {
        log::warn!("contour tracing failed; drawing without contours");
        return Vec::new();
    };
    let mut out = Vec::new();
    for line in lines {
        for ls in line.geometry().0.iter() {
            out.push((line.threshold(), ls.0.iter().map(|c| [c.x, c.y]).collect()));
        }
    }
    out
}

struct Frame {
    x0: f64,
    y0: f64,
    scale_x: f64,
    scale_y: f64,
}

impl Frame {
    fn new((x0, x1): (f64, f64), (y0, y1): (f64, f64)) -> Self {
        let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
        Frame {
            x0,
            y0,
            scale_x: (SIZE - 2.0 * PAD) / span(x0, x1),
            scale_y: (SIZE - 2.0 * PAD) / span(y0, y1),
        }
    }

    fn px(&self, [x, y]: [f64; 2]) -> (f64, f64) {
        (PAD + (x - self.x0) * self.scale_x, SIZE - PAD - (y - self.y0) * self.scale_y)
    }
}

fn bounds(points: &[LandscapePoint], grid: Option<&DensityGrid>, attractors: &[Attractor]) -> ((f64, f64), (f64, f64)) {
    if let Some(g) = grid {
        return (g.x_range(), g.y_range());
    }
    let xy = points.iter().map(LandscapePoint::xy).chain(attractors.iter().map(|a| [a.x, a.y]));
    let (mut xr, mut yr) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for [x, y] in xy {
        xr = (xr.0.min(x), xr.1.max(x));
        yr = (yr.0.min(y), yr.1.max(y));
    }
    if !xr.0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    (xr, yr)
}

pub fn render(
    points: &[LandscapePoint],
    grid: Option<&DensityGrid>,
    attractors: &[Attractor],
    sample_fraction: f64,
    levels: usize,
    seed: u64,
) -> CliResult<Figure> {
    if !(0.0..=1.0).contains(&sample_fraction) {
        return Err(CliError::Config(format!(
            "render.sample_fraction must lie in [0, 1], got {sample_fraction}"
        )));
    }
    let mut svg = String::new();
    let mut drawn = Vec::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);

    if points.is_empty() && attractors.is_empty() {
        log::warn!("empty landscape; writing a blank canvas");
        let _ = writeln!(
            svg,
            r#"<text class="warning" x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="16">empty landscape: no points to draw</text>"#,
            SIZE / 2.0,
            SIZE / 2.0
        );
        svg.push_str("</svg>\n");
        return Ok(Figure { svg, drawn });
    }

    let (xr, yr) = bounds(points, grid, attractors);
    let frame = Frame::new(xr, yr);

    if let Some(g) = grid {
        let _ = writeln!(svg, r#"<g class="contours" fill="none" stroke="grey" stroke-width="0.8">"#);
        for (i, (level, line)) in contour_lines(g, &contour_levels(g.max(), levels)).into_iter().enumerate() {
            let mut d = String::new();
            for (k, p) in line.iter().enumerate() {
                let (px, py) = frame.px(*p);
                let _ = write!(d, "{}{px:.2} {py:.2}", if k == 0 { "M" } else { " L" });
            }
            let _ = writeln!(svg, r#"<path data-level="{level}" d="{d}"/>"#);
            for p in line {
                drawn.push(Drawn {
                    kind: "contour",
                    key: i.to_string(),
                    x: p[0],
                    y: p[1],
                    value: Some(level),
                    label: String::new(),
                });
            }
        }
        svg.push_str("</g>\n");
    }

    let m = sample_size(points.len(), sample_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, points.len(), m).into_vec();
    chosen.sort_unstable();
    svg.push_str("<g class=\"points\">\n");
    for i in chosen {
        let p = &points[i];
        let (px, py) = frame.px(p.xy());
        let _ = writeln!(
            svg,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
            stance_colour(p.stance)
        );
        drawn.push(Drawn {
            kind: "point",
            key: format!("{}@{}", p.user_id, p.t),
            x: p.x,
            y: p.y,
            value: None,
            label: p.stance.as_str().to_string(),
        });
    }
    svg.push_str("</g>\n<g class=\"attractors\" font-family=\"sans-serif\" font-size=\"12\">\n");
    for a in attractors {
        let (px, py) = frame.px([a.x, a.y]);
        let _ = writeln!(
            svg,
            r#"<path d="M{} {py:.2} L{} {py:.2} M{px:.2} {} L{px:.2} {}" stroke="black" stroke-width="2"/>"#,
            px - 6.0,
            px + 6.0,
            py - 6.0,
            py + 6.0
        );
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, px + 8.0, py - 8.0, a.rank);
        drawn.push(Drawn {
            kind: "attractor",
            key: a.id.to_string(),
            x: a.x,
            y: a.y,
            value: Some(a.magnitude),
            label: a.rank.to_string(),
        });
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(Figure { svg, drawn })
}

pub fn write_drawn(path: &Path, drawn: &[Drawn]) -> CliResult<()> {
    let csv_err = |e: csv::Error| Error::Format {
        path: path.into(),
        line: 0,
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["kind", "key", "x", "y", "value", "label"]).map_err(csv_err)?;
    for d in drawn {
        w.write_record([
            d.kind.to_string(),
            d.key.clone(),
            d.x.to_string(),
            d.y.to_string(),
            d.value.map(|v| v.to_string()).unwrap_or_default(),
            d.label.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
