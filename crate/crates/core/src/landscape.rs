//! The belief landscape: 2D projection of belief vectors, a Gaussian kernel
//! density surface over it, and its attractors (thresholded local maxima).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::projection::Pca;
use crate::stance::StanceLabel;
use crate::stats::{quantile, sample_sd};
use crate::trajectory::BeliefVector;

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapePoint {
    pub user_id: String,
    pub t: i64,
    pub x: f64,
    pub y: f64,
    pub stance: StanceLabel,
}

impl LandscapePoint {
    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// How belief vectors reach the plane.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorProjection {
    /// Principal axes fitted on a seeded random `train_fraction` of the
    /// vectors, then applied to all of them.
    Pca { train_fraction: f64 },
    /// Coordinates computed elsewhere, keyed by `(user_id, t)`.
    Import(BTreeMap<(String, i64), [f64; 2]>),
}

pub fn project_vectors(
    vectors: &[BeliefVector],
    method: &VectorProjection,
    stance_of: impl Fn(&str) -> StanceLabel,
    seed: u64,
) -> Result<Vec<LandscapePoint>> {
    let Some(first) = vectors.first() else {
        return Err(Error::Degenerate("no belief vectors to project".into()));
    };
    let dim = first.vector.len();
    if dim < 2 {
        return Err(Error::param("dim", format!("belief vectors have {dim} dimension(s); at least 2 needed")));
    }
    let coords: Vec<[f64; 2]> = match method {
        VectorProjection::Pca { train_fraction } => {
            if !(*train_fraction > 0.0 && *train_fraction <= 1.0) {
                return Err(Error::param("train_fraction", "must lie in (0, 1]"));
            }
            let n = vectors.len();
            let m = ((train_fraction * n as f64).ceil() as usize).clamp(n.min(2), n);
            let rows: Vec<Vec<f64>> = if m == n {
                vectors.iter().map(|v| v.vector.clone()).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| vectors[i].vector.clone()).collect()
            };
            let pca = Pca::fit(&rows, 2)?;
            vectors.iter().map(|v| pca.transform_2d(&v.vector)).collect()
        }
        VectorProjection::Import(map) => vectors
            .iter()
            .map(|v| {
                map.get(&(v.user_id.clone(), v.t)).copied().ok_or_else(|| {
                    Error::Degenerate(format!("no imported coordinates for {} at {}", v.user_id, v.t))
                })
            })
            .collect::<Result<_>>()?,
    };
    Ok(vectors
        .iter()
        .zip(coords)
        .map(|(v, [x, y])| LandscapePoint {
            user_id: v.user_id.clone(),
            t: v.t,
            x,
            y,
            stance: stance_of(&v.user_id),
        })
        .collect())
}

/// `4 · 1.06 · min(sd, IQR / 1.34) · n^(-1/5)` with the sample standard
/// deviation and the type-7 interquartile range.
pub fn bandwidth(samples: &[f64]) -> Result<f64> {
    let (sd, iqr) = spread(samples)?;
    if sd == 0.0 || iqr == 0.0 {
        return Err(Error::Degenerate(format!("zero spread (sd {sd}, iqr {iqr})")));
    }
    Ok(scale_bandwidth(sd.min(iqr / 1.34), samples.len()))
}

/// As [`bandwidth`], but when exactly one of the two spreads is zero the
/// other is used (with a warning).
pub fn bandwidth_or_fallback(samples: &[f64]) -> Result<f64> {
    let (sd, iqr) = spread(samples)?;
    let s = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => {
            log::warn!("interquartile range is zero; bandwidth uses the standard deviation");
            sd
        }
        (false, true) => iqr / 1.34,
        (false, false) => return Err(Error::Degenerate("constant sample".into())),
    };
    Ok(scale_bandwidth(s, samples.len()))
}

fn spread(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Degenerate(format!("{} sample(s); at least 2 needed", samples.len())));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    Ok((sample_sd(&sorted), iqr))
}

fn scale_bandwidth(s: f64, n: usize) -> f64 {
    4.0 * 1.06 * s * (n as f64).powf(-0.2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub n_grid: usize,
    /// Grid coordinates per axis, ends included.
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub hx: f64,
    pub hy: f64,
    /// `values[ix * n_grid + iy]`.
    pub values: Vec<f64>,
    pub n_samples: usize,
}

impl DensityGrid {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.n_grid + iy]
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.n_grid - 1])
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.ys[0], self.ys[self.n_grid - 1])
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

pub const DEFAULT_GRID: usize = 100;

/// Density over the data range widened by `margin` bandwidths per side.
pub fn kde2d(points: &[[f64; 2]], n_grid: usize, margin: f64) -> Result<DensityGrid> {
    let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
    let hx = bandwidth(&xs).map_err(|e| axis_err("x", e))?;
    let hy = bandwidth(&ys).map_err(|e| axis_err("y", e))?;
    let (x0, x1) = min_max(&xs);
    let (y0, y1) = min_max(&ys);
    kde2d_on(
        points,
        [hx, hy],
        (x0 - margin * hx, x1 + margin * hx),
        (y0 - margin * hy, y1 + margin * hy),
        n_grid,
    )
}

fn axis_err(axis: &str, e: Error) -> Error {
    Error::Degenerate(format!("{axis} axis: {e}"))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Evenly spaced `n` values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
}

/// Density with given bandwidths and grid limits. Points are summed in a
/// canonical order, so any permutation of the input gives identical bits.
pub fn kde2d_on(
    points: &[[f64; 2]],
    [hx, hy]: [f64; 2],
    x_lims: (f64, f64),
    y_lims: (f64, f64),
    n_grid: usize,
) -> Result<DensityGrid> {
    if points.is_empty() {
        return Err(Error::Degenerate("no points".into()));
    }
    if !(hx > 0.0 && hy > 0.0) {
        return Err(Error::param("bandwidth", "must be positive"));
    }
    if n_grid < 3 {
        return Err(Error::param("n_grid", "must be at least 3"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let gx = linspace(x_lims.0, x_lims.1, n_grid);
    let gy = linspace(y_lims.0, y_lims.1, n_grid);
    let n = sorted.len();
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let ax = DMatrix::from_fn(n_grid, n, |i, s| phi((gx[i] - sorted[s][0]) / hx));
    let ay = DMatrix::from_fn(n_grid, n, |j, s| phi((gy[j] - sorted[s][1]) / hy));
    let dens = ax * ay.transpose() / (n as f64 * hx * hy);
    let values = (0..n_grid * n_grid)
        .map(|k| dens[(k / n_grid, k % n_grid)])
        .collect();
    Ok(DensityGrid {
        n_grid,
        xs: gx,
        ys: gy,
        hx,
        hy,
        values,
        n_samples: n,
    })
}

/// Interior positions `i` of `v` where the second difference of the signs of
/// the first differences is -2. Plateaus are never maxima.
pub fn maxima_1d(v: &[f64]) -> Vec<usize> {
    let sgn: Vec<i8> = v
        .windows(2)
        .map(|w| match w[1].partial_cmp(&w[0]) {
            Some(std::cmp::Ordering::Greater) => 1,
            Some(std::cmp::Ordering::Less) => -1,
            _ => 0,
        })
        .collect();
    sgn.windows(2)
        .enumerate()
        .filter(|(_, s)| s[1] - s[0] == -2)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Cells that are 1D maxima along both their row and their column.
pub fn find_maxima(grid: &DensityGrid) -> Vec<(usize, usize)> {
    let n = grid.n_grid;
    let mut along_x = vec![false; n * n];
    for iy in 0..n {
        let line: Vec<f64> = (0..n).map(|ix| grid.at(ix, iy)).collect();
        for ix in maxima_1d(&line) {
            along_x[ix * n + iy] = true;
        }
    }
    let mut peaks = Vec::new();
    for ix in 0..n {
        let line: Vec<f64> = (0..n).map(|iy| grid.at(ix, iy)).collect();
        for iy in maxima_1d(&line) {
            if along_x[ix * n + iy] {
                peaks.push((ix, iy));
            }
        }
    }
    peaks
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attractor {
    /// Equal to `rank - 1`.
    pub id: usize,
    pub grid_ix: usize,
    pub grid_iy: usize,
    pub x: f64,
    pub y: f64,
    /// Density at the cell: the attractor's strength.
    pub magnitude: f64,
    /// 1 for the strongest.
    pub rank: usize,
}

pub const DEFAULT_MAGNITUDE_CUTOFF: f64 = 0.2;

/// Peaks with density strictly above `cutoff`, ranked by descending
/// magnitude with ties in grid order.
pub fn threshold_attractors(grid: &DensityGrid, peaks: &[(usize, usize)], cutoff: f64) -> Vec<Attractor> {
    let mut kept: Vec<(usize, usize, f64)> = peaks
        .iter()
        .map(|&(ix, iy)| (ix, iy, grid.at(ix, iy)))
        .filter(|p| p.2 > cutoff)
        .collect();
    kept.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    if kept.is_empty() {
        log::warn!("no density peak exceeds {cutoff}");
    }
    kept.into_iter()
        .enumerate()
        .map(|(r, (ix, iy, m))| Attractor {
            id: r,
            grid_ix: ix,
            grid_iy: iy,
            x: grid.xs[ix],
            y: grid.ys[iy],
            magnitude: m,
            rank: r + 1,
        })
        .collect()
}

/// Nearest attractor by Euclidean distance; ties go to the better rank.
pub fn nearest_attractor(p: [f64; 2], attractors: &[Attractor]) -> Result<(usize, f64)> {
    attractors
        .iter()
        .map(|a| (a, ((p[0] - a.x).powi(2) + (p[1] - a.y).powi(2)).sqrt()))
        .min_by(|(a, da), (b, db)| da.total_cmp(db).then(a.rank.cmp(&b.rank)))
        .map(|(a, d)| (a.id, d))
        .ok_or(Error::NoAttractors)
}

pub fn write_grid(path: impl AsRef<Path>, grid: &DensityGrid) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "i,j,x,y,value").map_err(io)?;
    for i in 0..grid.n_grid {
        for j in 0..grid.n_grid {
            writeln!(out, "{i},{j},{},{},{}", grid.xs[i], grid.ys[j], grid.at(i, j)).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn write_attractors(path: impl AsRef<Path>, attractors: &[Attractor]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "id,x,y,magnitude,rank,grid_i,grid_j").map_err(io)?;
    for a in attractors {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            a.id, a.x, a.y, a.magnitude, a.rank, a.grid_ix, a.grid_iy
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_points(path: impl AsRef<Path>, points: &[LandscapePoint]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "user_id,t,x,y,stance").map_err(io)?;
    for p in points {
        writeln!(out, "{},{},{},{},{}", p.user_id, p.t, p.x, p.y, p.stance.as_str()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads `user_id,t,x,y[,…]` rows (header required).
pub fn load_points(path: impl AsRef<Path>) -> Result<BTreeMap<(String, i64), [f64; 2]>> {
    let mut out = BTreeMap::new();
    for_each_row(path.as_ref(), 4, |row| {
        out.insert((row.text(0).to_string(), row.int(1)?), [row.num(2)?, row.num(3)?]);
        Ok(())
    })?;
    Ok(out)
}

/// Reads back a file written by [`write_points`].
pub fn load_landscape_points(path: impl AsRef<Path>) -> Result<Vec<LandscapePoint>> {
    let mut out = Vec::new();
    for_each_row(path.as_ref(), 5, |row| {
        let stance = match row.text(4) {
            "believer" => StanceLabel::Believer,
            "skeptic" => StanceLabel::Skeptic,
            "unclustered" => StanceLabel::Unclustered,
            other => return Err(row.error(format!("unknown stance `{other}`"))),
        };
        out.push(LandscapePoint {
            user_id: row.text(0).to_string(),
            t: row.int(1)?,
            x: row.num(2)?,
            y: row.num(3)?,
            stance,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Reads back a file written by [`write_attractors`].
pub fn load_attractors(path: impl AsRef<Path>) -> Result<Vec<Attractor>> {
    let mut out = Vec::new();
    for_each_row(path.as_ref(), 7, |row| {
        out.push(Attractor {
            id: row.int(0)? as usize,
            x: row.num(1)?,
            y: row.num(2)?,
            magnitude: row.num(3)?,
            rank: row.int(4)? as usize,
            grid_ix: row.int(5)? as usize,
            grid_iy: row.int(6)? as usize,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Reads back a file written by [`write_grid`]. Bandwidths and the sample
/// count are not part of the file and are passed in.
pub fn load_grid(path: impl AsRef<Path>, [hx, hy]: [f64; 2], n_samples: usize) -> Result<DensityGrid> {
    let path = path.as_ref();
    let mut cells = Vec::new();
    for_each_row(path, 5, |row| {
        cells.push((row.int(0)?, row.int(1)?, row.num(2)?, row.num(3)?, row.num(4)?));
        Ok(())
    })?;
    let n = (cells.len() as f64).sqrt().round() as usize;
    let bad = |m: String| Error::Format {
        path: path.into(),
        line: 0,
        message: m,
    };
    if n < 3 || n * n != cells.len() {
        return Err(bad(format!("{} cells do not form a square grid", cells.len())));
    }
    let mut xs = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut values = vec![0.0; n * n];
    for (k, &(i, j, x, y, v)) in cells.iter().enumerate() {
        if i != (k / n) as i64 || j != (k % n) as i64 {
            return Err(bad(format!("cell {k} is ({i},{j}); expected row-major order")));
        }
        xs[k / n] = x;
        ys[k % n] = y;
        values[k] = v;
    }
    Ok(DensityGrid {
        n_grid: n,
        xs,
        ys,
        hx,
        hy,
        values,
        n_samples,
    })
}

struct Row<'a> {
    path: &'a Path,
    line: usize,
    rec: csv::StringRecord,
}

impl Row<'_> {
    fn error(&self, message: String) -> Error {
        Error::Format {
            path: self.path.into(),
            line: self.line,
            message,
        }
    }

    fn text(&self, k: usize) -> &str {
        &self.rec[k]
    }

    fn num(&self, k: usize) -> Result<f64> {
        self.rec[k].parse().map_err(|_| self.error(format!("bad number `{}`", &self.rec[k])))
    }

    fn int(&self, k: usize) -> Result<i64> {
        self.rec[k].parse().map_err(|_| self.error(format!("bad integer `{}`", &self.rec[k])))
    }
}

fn for_each_row(path: &Path, min_cols: usize, mut f: impl FnMut(&Row) -> Result<()>) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(e) => Error::io(path, e),
            other => Error::Format {
                path: path.into(),
                line: 0,
                message: format!("{other:?}"),
            },
        })?;
    for (i, rec) in rdr.records().enumerate() {
        let row = Row {
            path,
            line: i + 2,
            rec: csv::StringRecord::new(),
        };
        let rec = rec.map_err(|e| row.error(e.to_string()))?;
        if rec.len() < min_cols {
            return Err(row.error(format!("expected at least {min_cols} columns, found {}", rec.len())));
        }
        f(&Row { rec, ..row })?;
    }
    Ok(())
}
