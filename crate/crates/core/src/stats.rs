//! Small statistical helpers shared by validation code and the CLI.

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Ordinary least-squares line `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least-squares slope of `ln f(θ)` against `ln θ` on `points` log-spaced
/// abscissae spanning `[lo, hi]`.
pub fn log_log_slope<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> f64 {
    let step = (hi / lo).ln() / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|i| lo.ln() + step * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x.exp()).ln()).collect();
    linear_fit(&xs, &ys).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_uniform_grid() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_one_sample(&xs, |x| x);
        assert!((d - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn ks_two_sample_basics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b = [5.0, 6.0, 7.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
        let c = [1.5, 2.5, 3.5, 4.5];
        assert!((ks_two_sample(&a, &c) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn power_law_slope() {
        let s = log_log_slope(|x| 3.0 * x.powf(-1.5), 1e-3, 1e2, 50);
        assert!((s + 1.5).abs() < 1e-12);
    }
}
