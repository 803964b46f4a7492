//! Principal-component projection and coordinate files.
//!
//! PCA is the built-in projection baseline for both the statement embedding
//! and the belief landscape. Externally computed coordinates can be imported
//! in its place.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// A fitted linear projection onto the leading principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-length principal axes, largest variance first.
    pub axes: Vec<Vec<f64>>,
    /// Variance along each axis.
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn fit(rows: &[Vec<f64>], n_components: usize) -> Result<Pca> {
        let Some(first) = rows.first() else {
            return Err(Error::Degenerate("no rows to project".into()));
        };
        let dim = first.len();
        if dim < n_components {
            return Err(Error::param(
                "dim",
                format!("input dimension {dim} is below the {n_components} projected dimensions"),
            ));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Degenerate("rows of unequal dimension".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        let mut centered = vec![0.0; dim];
        for r in rows {
            for (c, (x, m)) in centered.iter_mut().zip(r.iter().zip(&mean)) {
                *c = x - m;
            }
            for i in 0..dim {
                let ci = centered[i];
                if ci == 0.0 {
                    continue;
                }
                for j in i..dim {
                    cov[(i, j)] += ci * centered[j];
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov[(i, j)] / n;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut axes = Vec::with_capacity(n_components);
        let mut variances = Vec::with_capacity(n_components);
        for &k in order.iter().take(n_components) {
            let mut axis: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            // sign convention: the largest-magnitude loading is positive
            let pivot = axis
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() + 1e-12 { x } else { best });
            if pivot < 0.0 {
                axis.iter_mut().for_each(|x| *x = -*x);
            }
            axes.push(axis);
            variances.push(eig.eigenvalues[k].max(0.0));
        }
        Ok(Pca {
            mean,
            axes,
            variances,
        })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        self.axes
            .iter()
            .map(|axis| {
                axis.iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(a, (x, m))| a * (x - m))
                    .sum()
            })
            .collect()
    }

    pub fn transform_2d(&self, row: &[f64]) -> [f64; 2] {
        let v = self.transform(row);
        [v[0], v.get(1).copied().unwrap_or(0.0)]
    }
}

/// Fits a two-axis PCA on `rows` and projects every row.
pub fn pca_2d(rows: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let pca = Pca::fit(rows, 2)?;
    Ok(rows.iter().map(|r| pca.transform_2d(r)).collect())
}

/// Reads `id,x,y` coordinates (header row required).
pub fn load_coordinates(path: impl AsRef<Path>) -> Result<BTreeMap<String, [f64; 2]>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format {
            path: path.into(),
            line: 0,
            message: e.to_string(),
        })?;
    let mut out = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let fmt_err = |message: String| Error::Format {
            path: path.into(),
            line: i + 2,
            message,
        };
        let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
        if rec.len() < 3 {
            return Err(fmt_err("expected id,x,y".into()));
        }
        let x: f64 = rec[1].parse().map_err(|_| fmt_err(format!("bad x `{}`", &rec[1])))?;
        let y: f64 = rec[2].parse().map_err(|_| fmt_err(format!("bad y `{}`", &rec[2])))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(fmt_err("non-finite coordinate".into()));
        }
        out.insert(rec[0].to_string(), [x, y]);
    }
    Ok(out)
}

pub fn write_coordinates<'a>(
    path: impl AsRef<Path>,
    header: &str,
    coords: impl IntoIterator<Item = (&'a str, [f64; 2])>,
) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{header},x,y").map_err(io)?;
    for (id, [x, y]) in coords {
        writeln!(out, "{id},{x},{y}").map_err(io)?;
    }
    out.flush().map_err(io)
}
