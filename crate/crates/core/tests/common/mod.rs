//! Oracles shared by the integration tests; deliberately independent of the
//! library's own quadrature and statistics helpers.
#![allow(dead_code)]

/// Adaptive Simpson on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol || diff.abs() <= 1e-15 * (left + right).abs() {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫_lo^hi f(θ) dθ` through `θ = eᵘ`, split into pieces of width ≤ 1/8 in `u`.
pub fn log_integral<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    let pieces = ((8.0 * (b - a)).ceil() as usize).max(1);
    let g = |u: f64| {
        let t = u.exp();
        f(t) * t
    };
    (0..pieces)
        .map(|i| {
            let (x, y) = (a + (b - a) * i as f64 / pieces as f64, a + (b - a) * (i + 1) as f64 / pieces as f64);
            simpson(&g, x, y, tol / pieces as f64)
        })
        .sum()
}

/// Least-squares slope of `ln f` against `ln θ` on a geometric grid.
pub fn loglog_slope<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let n = 101;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64;
            (x, f(x.exp()).ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Sup distance between the empirical CDF of `xs` and `cdf`.
pub fn ks<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
