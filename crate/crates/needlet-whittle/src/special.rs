//! Special functions used by the closed-form constants and the test statistics.

use std::f64::consts::PI;

pub use statrs::function::gamma::{digamma, gamma, ln_gamma};

/// Trigamma function ψ'(x) for x > 0.
pub fn trigamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    let mut z = x;
    let mut acc = 0.0;
    while z < 12.0 {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    // Asymptotic series with Bernoulli numbers B2..B12.
    let r = 1.0 / z;
    let r2 = r * r;
    let series = r
        + 0.5 * r2
        + r * r2
            * (1.0 / 6.0
                - r2 * (1.0 / 30.0
                    - r2 * (1.0 / 42.0
                        - r2 * (1.0 / 30.0 - r2 * (5.0 / 66.0 - r2 * 691.0 / 2730.0)))));
    acc + series
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(a, x)
}

/// CDF of the chi-square law with `k` degrees of freedom.
pub fn chi_square_cdf(k: f64, x: f64) -> f64 {
    gamma_p(0.5 * k, 0.5 * x)
}

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Legendre polynomial P_l(x) by the three-term recurrence.
pub fn legendre_p(l: usize, x: f64) -> f64 {
    legendre_with_derivative(l, x).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trigamma_known_values() {
        assert_relative_eq!(trigamma(1.0), PI * PI / 6.0, max_relative = 1e-13);
        assert_relative_eq!(trigamma(0.5), PI * PI / 2.0, max_relative = 1e-13);
        assert_relative_eq!(trigamma(3.5), 0.330357756100235, max_relative = 1e-12);
        assert_relative_eq!(trigamma(40.0), 0.025315103841291, max_relative = 1e-12);
    }

    #[test]
    fn digamma_and_gamma_values() {
        assert_relative_eq!(digamma(1.0), -0.5772156649015329, max_relative = 1e-13);
        assert_relative_eq!(digamma(3.5), 1.103_156_640_645_243, max_relative = 1e-13);
        assert_relative_eq!(gamma(3.5), 3.3233509704478426, max_relative = 1e-13);
        assert_relative_eq!(gamma(0.5), PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn chi_square_cdf_values() {
        assert_relative_eq!(
            chi_square_cdf(2.0, 2.0),
            1.0 - (-1.0f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            chi_square_cdf(3.0, 3.0),
            0.608_374_823_728_911,
            max_relative = 1e-10
        );
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = w.iter().sum();
        assert_relative_eq!(s, 2.0, max_relative = 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert_relative_eq!(m, 2.0 / 23.0, max_relative = 1e-12);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn legendre_values() {
        assert_relative_eq!(
            legendre_p(2, 0.3),
            0.5 * (3.0 * 0.09 - 1.0),
            max_relative = 1e-14
        );
    }
}
