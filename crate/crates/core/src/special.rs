//! Series used by the closed-form weight sums.

/// Trigamma `ψ'(x) = Σ_{k≥0} 1/(x+k)²` for `x > 0`.
pub(crate) fn trigamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    // asymptotic tail with Bernoulli coefficients
    let tail = r
        + r2 / 2.0
        + r * r2 * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0 - r2 * 5.0 / 66.0))));
    acc + tail
}

/// `Σ_{t=lo}^{hi} 1/(t+1)²` for `0 ≤ lo`, `hi = None` meaning `+∞`.
pub(crate) fn inverse_square_sum(lo: i64, hi: Option<i64>) -> f64 {
    debug_assert!(lo >= 0);
    match hi {
        Some(h) if h < lo => 0.0,
        Some(h) if h - lo <= 4096 => (lo..=h).rev().map(|t| 1.0 / ((t + 1) as f64).powi(2)).sum(),
        Some(h) => trigamma((lo + 1) as f64) - trigamma((h + 2) as f64),
        None => trigamma((lo + 1) as f64),
    }
}
