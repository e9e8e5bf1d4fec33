//! Goodness-of-fit and tail-probability helpers used by the verification
//! experiments.

use alloc::vec::Vec;

/// Asymptotic Kolmogorov–Smirnov coefficient at the 1% level.
pub const KS_COEFF_1PCT: f64 = 1.63;

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut xs = sample.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    xs
}

/// One-sample statistic `sup_x |F_n(x) - F(x)|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let xs = sorted(sample);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Two-sample statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (xs, ys) = (sorted(a), sorted(b));
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// 1% critical value for a one-sample test on `n` observations.
pub fn ks_critical_1pct(n: usize) -> f64 {
    KS_COEFF_1PCT / libm::sqrt(n as f64)
}

/// 1% critical value for a two-sample test.
pub fn ks_two_sample_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_COEFF_1PCT * libm::sqrt((n + m) / (n * m))
}

pub fn exponential_cdf(rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -libm::expm1(-rate * x)
    }
}

pub fn exponential_tail(rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        libm::exp(-rate * x)
    }
}

/// Fraction of the sample strictly above `z`.
pub fn tail_fraction(sample: &[f64], z: f64) -> f64 {
    sample.iter().filter(|&&x| x > z).count() as f64 / sample.len() as f64
}

/// `z_score` standard errors of the difference of two independent binomial
/// proportions.
pub fn binomial_tolerance(p1: f64, n1: usize, p2: f64, n2: usize, z_score: f64) -> f64 {
    z_score * libm::sqrt(p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
