//! Angular power spectrum models C_l = l^{-α₀} G(l).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correction term multiplying the pure power law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Correction {
    /// G(l) = G₀.
    None,
    /// G(l) = G₀(1 + κ/l), κ > −1.
    Kappa { kappa: f64 },
    /// G(l) = G₀ l^{q−p} P(l)/Q(l) with P, Q of degrees p, q; coefficients in ascending powers.
    Rational {
        p_coeffs: Vec<f64>,
        q_coeffs: Vec<f64>,
    },
}

/// Parametric spectrum C_l = l^{-α₀} G(l).
///
/// For rational models `alpha0` is the effective index, so the raw exponent of
/// l^{-α}P(l)/Q(l) is α₀ + deg P − deg Q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrumModel {
    pub alpha0: f64,
    pub g0: f64,
    pub correction: Correction,
}

const POSITIVITY_CHECK_LIMIT: usize = 10_000;

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn degree(coeffs: &[f64]) -> usize {
    coeffs.len().saturating_sub(1)
}

impl PowerSpectrumModel {
    pub fn new(alpha0: f64, g0: f64, correction: Correction) -> Result<Self> {
        let m = PowerSpectrumModel {
            alpha0,
            g0,
            correction,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn power_law(alpha0: f64, g0: f64) -> Result<Self> {
        Self::new(alpha0, g0, Correction::None)
    }

    pub fn with_kappa(alpha0: f64, g0: f64, kappa: f64) -> Result<Self> {
        Self::new(alpha0, g0, Correction::Kappa { kappa })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0.is_finite() && self.alpha0 > 2.0) {
            return Err(Error::domain(format!(
                "alpha0 must be > 2, got {}",
                self.alpha0
            )));
        }
        if !(self.g0.is_finite() && self.g0 > 0.0) {
            return Err(Error::domain(format!("g0 must be > 0, got {}", self.g0)));
        }
        match &self.correction {
            Correction::None => {}
            Correction::Kappa { kappa } => {
                if !(kappa.is_finite() && *kappa > -1.0) {
                    return Err(Error::domain(format!("kappa must be > -1, got {kappa}")));
                }
            }
            Correction::Rational { p_coeffs, q_coeffs } => {
                for (name, c) in [("P", p_coeffs), ("Q", q_coeffs)] {
                    if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                        return Err(Error::domain(format!("{name} needs finite coefficients")));
                    }
                    if *c.last().unwrap() <= 0.0 {
                        return Err(Error::domain(format!(
                            "{name} leading coefficient must be > 0"
                        )));
                    }
                    if let Some(l) =
                        (1..=POSITIVITY_CHECK_LIMIT).find(|&l| poly(c, l as f64) <= 0.0)
                    {
                        return Err(Error::domain(format!("{name}({l}) is not positive")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Continuous G(u) for u ≥ 1.
    pub fn g_at(&self, u: f64) -> f64 {
        match &self.correction {
            Correction::None => self.g0,
            Correction::Kappa { kappa } => self.g0 * (1.0 + kappa / u),
            Correction::Rational { p_coeffs, q_coeffs } => {
                let shift = degree(q_coeffs) as f64 - degree(p_coeffs) as f64;
                self.g0 * (poly(p_coeffs, u) / poly(q_coeffs, u) * u.powf(shift))
            }
        }
    }

    /// Limit of G(l) as l → ∞.
    pub fn g_limit(&self) -> f64 {
        match &self.correction {
            Correction::Rational { p_coeffs, q_coeffs } => {
                self.g0 * (p_coeffs.last().unwrap() / q_coeffs.last().unwrap())
            }
            _ => self.g0,
        }
    }

    pub fn g_of_l(&self, l: usize) -> Result<f64> {
        if l == 0 {
            return Err(Error::domain("the monopole l = 0 is excluded"));
        }
        Ok(self.g_at(l as f64))
    }

    pub fn c_l(&self, l: usize) -> Result<f64> {
        if l == 0 {
            return Err(Error::domain("the monopole l = 0 is excluded"));
        }
        Ok(self.c_l_unchecked(l))
    }

    /// C_l for l ≥ 1 without the monopole check.
    pub fn c_l_unchecked(&self, l: usize) -> f64 {
        let u = l as f64;
        match &self.correction {
            Correction::None => self.g0 * u.powf(-self.alpha0),
            Correction::Kappa { kappa } => self.g0 * ((1.0 + kappa / u) * u.powf(-self.alpha0)),
            Correction::Rational { p_coeffs, q_coeffs } => {
                let raw = self.alpha0 + degree(p_coeffs) as f64 - degree(q_coeffs) as f64;
                self.g0 * (u.powf(-raw) * poly(p_coeffs, u) / poly(q_coeffs, u))
            }
        }
    }

    /// C_1..=C_{l_max}, index l − 1.
    pub fn spectrum(&self, l_max: usize) -> Vec<f64> {
        (1..=l_max).map(|l| self.c_l_unchecked(l)).collect()
    }

    pub fn check_regularity(&self, l_max: usize, r_max: usize) -> Result<RegularityReport> {
        if l_max < 16 {
            return Err(Error::domain("check_regularity needs l_max >= 16"));
        }
        if r_max > 4 {
            return Err(Error::domain("check_regularity supports r <= 4"));
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for l in 1..=l_max {
            let g = self.g_at(l as f64);
            lo = lo.min(g);
            hi = hi.max(g);
        }
        const POINTS: usize = 64;
        let grid: Vec<f64> = (0..POINTS)
            .map(|i| (l_max as f64).powf(i as f64 / (POINTS - 1) as f64))
            .collect();
        let mut derivatives = Vec::with_capacity(r_max);
        for r in 1..=r_max {
            let mut scaled = Vec::with_capacity(POINTS);
            let mut noise = 0.0f64;
            for &u in &grid {
                let h = (1e-4 * u).max(1e-6);
                let d = central_difference(|x| self.g_at(x), u, h, r);
                scaled.push(d.abs() * u.powi(r as i32));
                let round = 4.0
                    * f64::EPSILON
                    * self.g_at(u).abs()
                    * 2f64.powi(r as i32)
                    * (u / h).powi(r as i32);
                noise = noise.max(round);
            }
            let third = POINTS / 3;
            let head = scaled[..third].iter().cloned().fold(0.0, f64::max);
            let tail = scaled[POINTS - third..].iter().cloned().fold(0.0, f64::max);
            let sup = scaled.iter().cloned().fold(0.0, f64::max);
            let bounded = tail <= head.max(noise) * (1.0 + 1e-6) + 1e-300;
            derivatives.push(DerivativeCheck {
                order: r,
                sup_scaled: sup,
                ok: bounded && sup.is_finite(),
                noise_dominated: noise > 0.5 * sup && sup > 0.0,
            });
        }
        Ok(RegularityReport {
            c0_lower: lo,
            c0_upper: hi,
            derivatives,
        })
    }
}

fn central_difference(f: impl Fn(f64) -> f64, u: f64, h: f64, r: usize) -> f64 {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for k in 0..=r {
        let x = u + (r as f64 / 2.0 - k as f64) * h;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(x);
        binom = binom * (r - k) as f64 / (k + 1) as f64;
    }
    acc / h.powi(r as i32)
}

/// Finite-difference check of |G^{(r)}(u)| u^r ≤ c_r on a log grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub c0_lower: f64,
    pub c0_upper: f64,
    pub derivatives: Vec<DerivativeCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    pub order: usize,
    pub sup_scaled: f64,
    pub ok: bool,
    /// Rounding noise of the difference quotient is comparable to the signal.
    pub noise_dominated: bool,
}

impl RegularityReport {
    pub fn all_ok(&self) -> bool {
        self.derivatives.iter().all(|d| d.ok)
    }
}
