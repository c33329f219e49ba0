//! Harmonic coefficients of isotropic Gaussian fields and the empirical power spectrum.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::degree_stream;
use crate::spectrum::PowerSpectrumModel;

/// Largest degree simulated unless a caller raises the cap.
pub const DEFAULT_L_MAX_CAP: usize = 8192;

/// Harmonic coefficients a_lm, 1 ≤ l ≤ l_max, stored for m ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmSet {
    pub l_max: usize,
    pub seed: u64,
    coeffs: Vec<Complex64>,
}

fn row_offset(l: usize) -> usize {
    (l - 1) * (l + 2) / 2
}

impl AlmSet {
    pub fn zeros(l_max: usize, seed: u64) -> Self {
        AlmSet {
            l_max,
            seed,
            coeffs: vec![Complex64::new(0.0, 0.0); row_offset(l_max + 1)],
        }
    }

    pub(crate) fn from_raw(l_max: usize, seed: u64, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != row_offset(l_max + 1) {
            return Err(Error::Format(format!(
                "expected {} coefficients for l_max={l_max}, found {}",
                row_offset(l_max + 1),
                coeffs.len()
            )));
        }
        Ok(AlmSet {
            l_max,
            seed,
            coeffs,
        })
    }

    pub fn raw(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficients a_l0..a_ll.
    pub fn row(&self, l: usize) -> &[Complex64] {
        let o = row_offset(l);
        &self.coeffs[o..o + l + 1]
    }

    /// a_lm for −l ≤ m ≤ l, using a_{l,−m} = (−1)^m conj(a_lm).
    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        let a = self.row(l)[m.unsigned_abs() as usize];
        if m >= 0 {
            a
        } else if m % 2 == 0 {
            a.conj()
        } else {
            -a.conj()
        }
    }

    /// Sets a_lm for m ≥ 0; the imaginary part of a_l0 is discarded.
    pub fn set(&mut self, l: usize, m: usize, value: Complex64) {
        let v = if m == 0 {
            Complex64::new(value.re, 0.0)
        } else {
            value
        };
        self.coeffs[row_offset(l) + m] = v;
    }
}

pub fn simulate_alm(model: &PowerSpectrumModel, l_max: usize, seed: u64) -> Result<AlmSet> {
    simulate_alm_capped(model, l_max, seed, DEFAULT_L_MAX_CAP)
}

/// Draws a_l0 ~ N(0, C_l) and Re, Im a_lm ~ N(0, C_l/2) for m ≥ 1.
///
/// Degree l reads its own ChaCha8 stream, so the draw does not depend on
/// thread scheduling. Normals come from the ziggurat sampler of `rand_distr`.
pub fn simulate_alm_capped(
    model: &PowerSpectrumModel,
    l_max: usize,
    seed: u64,
    cap: usize,
) -> Result<AlmSet> {
    if l_max < 1 {
        return Err(Error::domain("l_max must be >= 1"));
    }
    if l_max > cap {
        return Err(Error::Resource(format!(
            "l_max={l_max} exceeds the cap {cap}"
        )));
    }
    let coeffs: Vec<Complex64> = (1..=l_max)
        .into_par_iter()
        .flat_map_iter(|l| {
            let mut rng = degree_stream(seed, l as u64);
            let sd = model.c_l_unchecked(l).sqrt();
            let half = sd * std::f64::consts::FRAC_1_SQRT_2;
            let mut row = Vec::with_capacity(l + 1);
            let z: f64 = StandardNormal.sample(&mut rng);
            row.push(Complex64::new(sd * z, 0.0));
            for _ in 1..=l {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                row.push(Complex64::new(half * re, half * im));
            }
            row
        })
        .collect();
    AlmSet::from_raw(l_max, seed, coeffs)
}

/// Ĉ_l for 1 ≤ l ≤ l_max.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSpectrum {
    pub l_max: usize,
    c_hat: Vec<f64>,
}

impl EmpiricalSpectrum {
    /// Builds from values ordered l = 1..=l_max.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("empty spectrum"));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain(format!(
                "c_hat[{}] = {} is not a finite non-negative value",
                i + 1,
                values[i]
            )));
        }
        Ok(EmpiricalSpectrum {
            l_max: values.len(),
            c_hat: values,
        })
    }

    pub fn c_hat(&self, l: usize) -> f64 {
        self.c_hat[l - 1]
    }

    /// Values ordered l = 1..=l_max.
    pub fn values(&self) -> &[f64] {
        &self.c_hat
    }

    /// Noise-free spectrum Ĉ_l = C_l.
    pub fn noise_free(model: &PowerSpectrumModel, l_max: usize) -> Self {
        EmpiricalSpectrum {
            l_max,
            c_hat: model.spectrum(l_max),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        EmpiricalSpectrum {
            l_max: self.l_max,
            c_hat: self.c_hat.iter().map(|c| c * s).collect(),
        }
    }

    pub fn truncated(&self, l_max: usize) -> Self {
        let l = l_max.min(self.l_max);
        EmpiricalSpectrum {
            l_max: l,
            c_hat: self.c_hat[..l].to_vec(),
        }
    }
}

/// Ĉ_l = (a_l0² + 2 Σ_{m≥1} |a_lm|²)/(2l+1).
pub fn empirical_cl(alm: &AlmSet) -> EmpiricalSpectrum {
    let c_hat = (1..=alm.l_max)
        .map(|l| {
            let row = alm.row(l);
            let tail: f64 = row[1..].iter().map(|a| a.norm_sqr()).sum();
            (row[0].re * row[0].re + 2.0 * tail) / (2 * l + 1) as f64
        })
        .collect();
    EmpiricalSpectrum {
        l_max: alm.l_max,
        c_hat,
    }
}

/// Exact sampling moments of Ĉ_l.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChatMoments {
    pub mean: f64,
    pub variance: f64,
    pub cum4: f64,
}

pub fn chat_moments(model: &PowerSpectrumModel, l: usize) -> Result<ChatMoments> {
    let c = model.c_l(l)?;
    let k = (2 * l + 1) as f64;
    Ok(ChatMoments {
        mean: c,
        variance: 2.0 * c * c / k,
        cum4: 48.0 * c.powi(4) / k.powi(3),
    })
}
