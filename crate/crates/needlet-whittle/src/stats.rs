//! Goodness-of-fit and normality statistics.

use crate::special::chi_square_cdf;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Population skewness and (non-excess) kurtosis.
pub fn skew_kurtosis(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = mean(x);
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2))
}

/// JB = n/6 (S² + (K−3)²/4).
pub fn jarque_bera(x: &[f64]) -> f64 {
    let (s, k) = skew_kurtosis(x);
    x.len() as f64 / 6.0 * (s * s + (k - 3.0).powi(2) / 4.0)
}

/// χ²₂ upper 0.001 quantile, −2 ln 0.001.
pub const JB_CRITICAL_0_001: f64 = 13.815510557964274;

/// Two-sided one-sample Kolmogorov–Smirnov statistic D_n.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov tail Q(t) = 2 Σ (−1)^{k−1} e^{−2k²t²}.
pub fn kolmogorov_q(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value with Stephens' finite-n correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let d = ks_statistic(sample, cdf);
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, sample.len()),
    }
}

/// KS test against χ²_k.
pub fn ks_chi_square(sample: &[f64], k: f64) -> KsResult {
    ks_test(sample, |x| chi_square_cdf(k, x))
}

/// Normal quantile via statrs.
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}
