//! Small descriptive-statistics helpers shared by the landscape and the
//! hypothesis tests.

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (divisor `n - 1`); zero for fewer than two values.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Type-7 (linear interpolation) quantile of an ascending slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Centres and scales `v` to unit sample variance; `None` when `v` is constant.
pub fn zscore(v: &[f64]) -> Option<(Vec<f64>, f64, f64)> {
    if v.iter().all(|&x| x == v[0]) {
        return None;
    }
    let (m, s) = (mean(v), sample_sd(v));
    if !(s > 0.0) {
        return None;
    }
    Some((v.iter().map(|x| (x - m) / s).collect(), m, s))
}

/// Trapezoid rule over a rectilinear grid.
pub fn trapezoid_2d(xs: &[f64], ys: &[f64], f: impl Fn(usize, usize) -> f64) -> f64 {
    let w = |g: &[f64], i: usize| {
        let left = if i > 0 { g[i] - g[i - 1] } else { 0.0 };
        let right = if i + 1 < g.len() { g[i + 1] - g[i] } else { 0.0 };
        0.5 * (left + right)
    };
    let mut total = 0.0;
    for i in 0..xs.len() {
        for j in 0..ys.len() {
            total += w(xs, i) * w(ys, j) * f(i, j);
        }
    }
    total
}

/// Counts of `values` in `bins` equal-width bins spanning `[lo, hi]`; the top
/// edge falls into the last bin and out-of-range values are clamped.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in values {
        let k = ((v - lo) / (hi - lo) * bins as f64).floor();
        counts[(k.max(0.0) as usize).min(bins - 1)] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_match_linear_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 0.75), 4.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.5), 7.0);
    }

    #[test]
    fn spread_and_zscore() {
        assert!((sample_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
        let (z, m, s) = zscore(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(z, vec![-1.0, 0.0, 1.0]);
        assert!(zscore(&[3.0, 3.0]).is_none());
        assert!(zscore(&[0.3; 50]).is_none());
    }

    #[test]
    fn trapezoid_and_histogram() {
        let g: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        assert!((trapezoid_2d(&g, &g, |i, j| g[i] + g[j]) - 1.0).abs() < 1e-12);
        assert_eq!(histogram(&[0.0, 0.5, 0.99, 1.0, -3.0], 0.0, 1.0, 2), vec![2, 3]);
    }
}
