//! Block statistics for correlated Monte Carlo series.

/// Standard error of the mean with naive variance.
pub fn naive_error(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Flyvbjerg–Petersen reblocking: the largest standard-error estimate over
/// pairwise-averaging levels that still hold at least 8 points.
pub fn blocking_error(x: &[f64]) -> f64 {
    let mut level: Vec<f64> = x.to_vec();
    let mut best = naive_error(&level);
    while level.len() >= 16 {
        level = level.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
        best = best.max(naive_error(&level));
    }
    best
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample Pearson correlation; 1 when both series are constant and equal.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return if saa == sbb { 1.0 } else { 0.0 };
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}
