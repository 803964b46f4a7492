//! Density-based clustering with noise (radius reachability with a minimum
//! neighbour count), used wherever the pipeline needs "clusters + NOISE".

use std::collections::HashMap;

/// Cluster label per point; `None` is noise.
pub type Labels = Vec<Option<usize>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams {
    /// Neighbourhood radius.
    pub eps: f64,
    /// Neighbours (including the point itself) needed for a core point.
    pub min_samples: usize,
    /// Clusters smaller than this are returned to noise.
    pub min_cluster_size: usize,
}

impl DensityParams {
    /// Clusters `points` (all of equal dimension). Points are visited in index
    /// order, so the labelling is deterministic and cluster ids are numbered
    /// by their first member.
    pub fn fit(&self, points: &[Vec<f64>]) -> Labels {
        let labels = if points.iter().all(|p| p.len() == 2) {
            self.fit_planar(points)
        } else {
            self.fit_sequential(points)
        };
        drop_small_clusters(labels, self.min_cluster_size)
    }

    /// Breadth-first expansion from each unvisited core point.
    fn fit_sequential(&self, points: &[Vec<f64>]) -> Labels {
        let index = NeighborIndex::new(points, self.eps);
        let n = points.len();
        let mut labels: Vec<Option<usize>> = vec![None; n];
        let mut visited = vec![false; n];
        // each point enters the expansion queue at most once
        let mut queued = vec![false; n];
        let mut next_id = 0;
        let mut queue = Vec::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            visited[start] = true;
            let neighbors = index.within(points, start);
            if neighbors.len() < self.min_samples {
                continue;
            }
            let id = next_id;
            next_id += 1;
            labels[start] = Some(id);
            queue.clear();
            queued[start] = true;
            for r in neighbors {
                if !queued[r] {
                    queued[r] = true;
                    queue.push(r);
                }
            }
            while let Some(q) = queue.pop() {
                if labels[q].is_none() {
                    labels[q] = Some(id);
                }
                if visited[q] {
                    continue;
                }
                visited[q] = true;
                let nq = index.within(points, q);
                if nq.len() >= self.min_samples {
                    for r in nq {
                        if !queued[r] {
                            queued[r] = true;
                            queue.push(r);
                        }
                    }
                }
            }
        }
        labels
    }

    /// Same labelling as [`Self::fit_sequential`] for planar points. Cores are
    /// joined by union-find over a grid whose cells fit inside the radius, and
    /// a border point takes the lowest cluster id among its core neighbours,
    /// which is the cluster the sequential expansion reaches first.
    fn fit_planar(&self, points: &[Vec<f64>]) -> Labels {
        let n = points.len();
        let grid = FineGrid::new(points, self.eps);
        let eps2 = self.eps * self.eps;
        let d2 = |a: usize, b: usize| (points[a][0] - points[b][0]).powi(2) + (points[a][1] - points[b][1]).powi(2);

        let mut core = vec![false; n];
        for (&cell, members) in &grid.cells {
            if members.len() >= self.min_samples {
                members.iter().for_each(|&i| core[i] = true);
                continue;
            }
            for &i in members {
                let mut count = 0;
                'scan: for other in grid.around(cell) {
                    for &j in other {
                        if d2(i, j) <= eps2 {
                            count += 1;
                            if count >= self.min_samples {
                                break 'scan;
                            }
                        }
                    }
                }
                core[i] = count >= self.min_samples;
            }
        }

        let mut sets = UnionFind::new(n);
        for (&cell, members) in &grid.cells {
            let cores: Vec<usize> = members.iter().copied().filter(|&i| core[i]).collect();
            let Some(&first) = cores.first() else { continue };
            for &i in &cores[1..] {
                sets.union(first, i);
            }
            for other in grid.around(cell) {
                for &j in other.iter().filter(|&&j| core[j]) {
                    let (a, b) = (sets.find(first), sets.find(j));
                    if a == b {
                        continue;
                    }
                    if cores.iter().any(|&i| d2(i, j) <= eps2) {
                        sets.union(first, j);
                    }
                }
            }
        }

        // clusters are numbered by their lowest core index
        let mut id_of_root = HashMap::new();
        let mut labels: Labels = vec![None; n];
        for i in (0..n).filter(|&i| core[i]) {
            let root = sets.find(i);
            let next = id_of_root.len();
            labels[i] = Some(*id_of_root.entry(root).or_insert(next));
        }
        for i in (0..n).filter(|&i| !core[i]) {
            let cell = grid.cell_of(&points[i]);
            labels[i] = grid
                .around(cell)
                .flat_map(|m| m.iter())
                .filter(|&&j| core[j] && d2(i, j) <= eps2)
                .filter_map(|&j| labels[j])
                .min();
        }
        labels
    }
}

/// Planar grid with cell side `eps / sqrt(2)`: two points sharing a cell are
/// always within `eps`, and neighbours lie at most two cells away.
struct FineGrid {
    side: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl FineGrid {
    fn new(points: &[Vec<f64>], eps: f64) -> Self {
        let side = eps / std::f64::consts::SQRT_2;
        let mut grid = FineGrid {
            side,
            cells: HashMap::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let c = grid.cell_of(p);
            grid.cells.entry(c).or_default().push(i);
        }
        grid
    }

    fn cell_of(&self, p: &[f64]) -> (i64, i64) {
        ((p[0] / self.side).floor() as i64, (p[1] / self.side).floor() as i64)
    }

    fn around(&self, (cx, cy): (i64, i64)) -> impl Iterator<Item = &Vec<usize>> {
        (-2..=2).flat_map(move |dx| (-2..=2).filter_map(move |dy| self.cells.get(&(cx + dx, cy + dy))))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Sends clusters below `min_size` to noise and renumbers the rest densely in
/// order of first appearance.
pub fn drop_small_clusters(labels: Labels, min_size: usize) -> Labels {
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for l in labels.iter().flatten() {
        *sizes.entry(*l).or_default() += 1;
    }
    let mut remap: HashMap<usize, usize> = HashMap::new();
    labels
        .into_iter()
        .map(|l| {
            let l = l?;
            if sizes[&l] < min_size {
                return None;
            }
            let next = remap.len();
            Some(*remap.entry(l).or_insert(next))
        })
        .collect()
}

pub fn cluster_count(labels: &[Option<usize>]) -> usize {
    labels.iter().flatten().max().map_or(0, |m| m + 1)
}

/// Uniform grid over the first two coordinates with cell side `eps`; exact
/// distance checks use every coordinate.
struct NeighborIndex {
    eps: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl NeighborIndex {
    fn new(points: &[Vec<f64>], eps: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::cell(p, eps)).or_default().push(i);
        }
        NeighborIndex { eps, cells }
    }

    fn cell(p: &[f64], eps: f64) -> (i64, i64) {
        let c = |x: Option<&f64>| (x.copied().unwrap_or(0.0) / eps).floor() as i64;
        (c(p.first()), c(p.get(1)))
    }

    fn within(&self, points: &[Vec<f64>], i: usize) -> Vec<usize> {
        let p = &points[i];
        let (cx, cy) = Self::cell(p, self.eps);
        let eps2 = self.eps * self.eps;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(members) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &j in members {
                        let d2: f64 = p
                            .iter()
                            .zip(&points[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        if d2 <= eps2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(rng: &mut ChaCha8Rng, cx: f64, cy: f64, n: usize, r: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| vec![cx + rng.random_range(-r..r), cy + rng.random_range(-r..r)])
            .collect()
    }

    #[test]
    fn separates_two_blobs_and_marks_outlier() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = blob(&mut rng, 0.0, 0.0, 60, 0.5);
        pts.extend(blob(&mut rng, 10.0, 10.0, 60, 0.5));
        pts.push(vec![5.0, -5.0]);
        let params = DensityParams {
            eps: 0.5,
            min_samples: 4,
            min_cluster_size: 10,
        };
        let labels = params.fit(&pts);
        assert_eq!(cluster_count(&labels), 2);
        assert!(labels[..60].iter().all(|l| *l == Some(0)));
        assert!(labels[60..120].iter().all(|l| *l == Some(1)));
        assert_eq!(labels[120], None);
    }

    #[test]
    fn sparse_scatter_is_all_noise() {
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![(i % 10) as f64 * 3.0, (i / 10) as f64 * 3.0])
            .collect();
        let params = DensityParams {
            eps: 1.0,
            min_samples: 3,
            min_cluster_size: 1,
        };
        assert!(params.fit(&pts).iter().all(Option::is_none));
    }

    #[test]
    fn grid_index_agrees_with_brute_force_neighbors() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let idx = NeighborIndex::new(&pts, 0.4);
        for i in 0..pts.len() {
            let brute: Vec<usize> = (0..pts.len())
                .filter(|&j| {
                    pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= 0.16
                })
                .collect();
            assert_eq!(idx.within(&pts, i), brute);
        }
    }

    #[test]
    fn planar_grid_matches_sequential_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..40 {
            let mut pts = Vec::new();
            for _ in 0..rng.random_range(1..5) {
                let (cx, cy) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                let r = rng.random_range(0.1..1.0);
                let size = rng.random_range(5..120);
                pts.extend(blob(&mut rng, cx, cy, size, r));
            }
            pts.extend((0..30).map(|_| vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]));
            let params = DensityParams {
                eps: rng.random_range(0.05..0.6),
                min_samples: rng.random_range(1..12),
                min_cluster_size: 1,
            };
            assert_eq!(params.fit_planar(&pts), params.fit_sequential(&pts), "trial {trial}");
        }
    }

    #[test]
    fn small_clusters_are_dropped_and_renumbered() {
        let labels = vec![Some(0), Some(1), Some(1), Some(2), Some(2), None];
        assert_eq!(
            drop_small_clusters(labels, 2),
            vec![None, Some(0), Some(0), Some(1), Some(1), None]
        );
    }
}
