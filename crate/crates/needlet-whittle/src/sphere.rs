//! Real-space needlet coefficients β_jk on Gauss–Legendre × uniform-φ cubature grids.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harmonic::{empirical_cl, simulate_alm, AlmSet};
use crate::io::fmt_real;
use crate::needlet::{lambda_hat, NeedletWindow, Truncation};
use crate::rng::split_seed;
use crate::special::{gauss_legendre, legendre_p};
use crate::spectrum::PowerSpectrumModel;

/// Largest grid built unless a caller raises the cap.
pub const DEFAULT_POINT_CAP: usize = 1_000_000;

/// Iso-latitude grid: Gauss–Legendre rings in cos θ, `n_phi` equispaced points per ring.
///
/// Points are ordered ring by ring; weight = GL weight × 2π/n_phi.
#[derive(Debug, Clone, PartialEq)]
pub struct CubatureGrid {
    pub j: i32,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Largest degree L with Σ_k λ_k |F(ξ_k)|² = ∫|F|² exactly for F band-limited to L.
    pub band_limit: usize,
    theta: Vec<f64>,
    ring_weight: Vec<f64>,
}

impl CubatureGrid {
    pub fn new(j: i32, n_theta: usize, n_phi: usize, cap: usize) -> Result<Self> {
        if n_theta < 1 || n_phi < 1 {
            return Err(Error::domain(
                "grid needs at least one ring and one point per ring",
            ));
        }
        let count = n_theta.saturating_mul(n_phi);
        if count > cap {
            return Err(Error::Resource(format!(
                "grid with {count} points exceeds the cap {cap}"
            )));
        }
        let (x, w) = gauss_legendre(n_theta);
        let theta = x.iter().rev().map(|c| c.acos()).collect();
        let ring_weight = w
            .iter()
            .rev()
            .map(|w| w * 2.0 * PI / n_phi as f64)
            .collect();
        let band_limit = (n_theta - 1).min((n_phi - 1) / 2);
        Ok(CubatureGrid {
            j,
            n_theta,
            n_phi,
            band_limit,
            theta,
            ring_weight,
        })
    }

    pub fn count(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn ring_colatitudes(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_phi as f64
    }

    /// (θ, φ) of point `k`.
    pub fn point(&self, k: usize) -> (f64, f64) {
        (self.theta[k / self.n_phi], self.phi(k % self.n_phi))
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.ring_weight[k / self.n_phi]
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.ring_weight
            .iter()
            .flat_map(move |&w| std::iter::repeat_n(w, self.n_phi))
    }
}

/// Grid with N_j ≈ B^{2j}: ⌈B^j/√2⌉ rings of twice as many points.
pub fn build_grid(j: i32, b: f64) -> Result<CubatureGrid> {
    build_grid_capped(j, b, DEFAULT_POINT_CAP)
}

pub fn build_grid_capped(j: i32, b: f64, cap: usize) -> Result<CubatureGrid> {
    if !(b > 1.0) {
        return Err(Error::domain("B must be > 1"));
    }
    let n_theta = (b.powi(j) / std::f64::consts::SQRT_2).ceil().max(2.0) as usize;
    CubatureGrid::new(j, n_theta, 2 * n_theta, cap)
}

/// Smallest grid of this family whose exactness degree is `band_limit`.
pub fn build_grid_band_limited(j: i32, band_limit: usize) -> Result<CubatureGrid> {
    CubatureGrid::new(j, band_limit + 1, 2 * band_limit + 2, DEFAULT_POINT_CAP)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaCoefficients {
    pub j: i32,
    pub p: u32,
    /// β_jk in grid order.
    pub values: Vec<f64>,
    /// Degrees used in the synthesis.
    pub l_max: usize,
}

impl BetaCoefficients {
    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Orthonormal associated Legendre values P̃_lm(cos θ), m fixed, l = m..=l_max.
fn legendre_column(m: usize, l_max: usize, cos_t: f64, sin_t: f64, pmm: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(pmm);
    if m < l_max {
        out.push((2.0 * m as f64 + 3.0).sqrt() * cos_t * pmm);
    }
    let mf = m as f64;
    for l in m + 2..=l_max {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let l1 = lf - 1.0;
        let b = ((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt();
        let n = out.len();
        out.push(a * (cos_t * out[n - 1] - b * out[n - 2]));
    }
    let _ = sin_t;
}

/// Field Σ_l filter[l] Σ_m a_lm Y_lm on every grid point, filter indexed by l.
pub fn synthesize_filtered(alm: &AlmSet, grid: &CubatureGrid, filter: &[f64]) -> Result<Vec<f64>> {
    let l_max = filter.len() - 1;
    if l_max > alm.l_max {
        return Err(Error::domain(format!(
            "filter reaches l={l_max} but coefficients stop at {}",
            alm.l_max
        )));
    }
    if l_max > grid.band_limit {
        return Err(Error::BandLimit {
            l_max,
            band_limit: grid.band_limit,
        });
    }
    let n_phi = grid.n_phi;
    let rings: Vec<Vec<f64>> = grid
        .theta
        .par_iter()
        .map(|&theta| {
            let (sin_t, cos_t) = theta.sin_cos();
            let mut g = vec![Complex64::new(0.0, 0.0); l_max + 1];
            let mut col = Vec::with_capacity(l_max + 1);
            let mut pmm = 0.5 / PI.sqrt();
            for (m, gm) in g.iter_mut().enumerate() {
                if m > 0 {
                    pmm *= -((2.0 * m as f64 + 1.0) / (2.0 * m as f64)).sqrt() * sin_t;
                }
                if pmm == 0.0 {
                    break;
                }
                legendre_column(m, l_max, cos_t, sin_t, pmm, &mut col);
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, p) in col.iter().enumerate() {
                    let l = m + i;
                    if l == 0 || filter[l] == 0.0 {
                        continue;
                    }
                    acc += alm.row(l)[m] * (filter[l] * p);
                }
                *gm = acc;
            }
            (0..n_phi)
                .map(|k| {
                    let phi = 2.0 * PI * k as f64 / n_phi as f64;
                    let step = Complex64::from_polar(1.0, phi);
                    let mut rot = step;
                    let mut s = g[0].re;
                    for gm in &g[1..] {
                        s += 2.0 * (gm * rot).re;
                        rot *= step;
                    }
                    s
                })
                .collect()
        })
        .collect();
    Ok(rings.into_iter().flatten().collect())
}

/// β_jk = √λ_k Σ_l f_p(l/B^j) Σ_m a_lm Y_lm(ξ_k).
pub fn synthesize_beta(
    alm: &AlmSet,
    grid: &CubatureGrid,
    p: u32,
    b: f64,
    l_max: usize,
) -> Result<BetaCoefficients> {
    let window = NeedletWindow::mexican(p, b)?;
    let j = grid.j;
    let (_, cutoff) = window.support(j);
    if l_max < cutoff || alm.l_max < cutoff {
        return Err(Error::Truncation {
            j,
            l_max: l_max.min(alm.l_max),
            needed: cutoff,
        });
    }
    let bj = b.powi(j);
    let filter: Vec<f64> = (0..=cutoff)
        .map(|l| {
            if l == 0 {
                0.0
            } else {
                window.window(l as f64 / bj)
            }
        })
        .collect();
    let field = synthesize_filtered(alm, grid, &filter)?;
    let values = field
        .iter()
        .zip(grid.weights())
        .map(|(f, w)| w.sqrt() * f)
        .collect();
    Ok(BetaCoefficients {
        j,
        p,
        values,
        l_max: cutoff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameCheck {
    pub j: i32,
    pub seed: u64,
    pub grid_points: usize,
    pub sum_beta_sq: f64,
    pub lambda_hat: f64,
    pub relative_gap: f64,
}

/// Σ_k β_jk² against Λ̂_j for one simulated field on a grid resolving level j
/// with band limit `oversample` × the window cutoff.
pub fn frame_check(
    model: &PowerSpectrumModel,
    j: i32,
    p: u32,
    b: f64,
    seed: u64,
    oversample: f64,
) -> Result<FrameCheck> {
    let window = NeedletWindow::mexican(p, b)?;
    let (_, cutoff) = window.support(j);
    let alm = simulate_alm(model, cutoff, seed)?;
    let grid = build_grid_band_limited(j, (cutoff as f64 * oversample.max(1.0)).ceil() as usize)?;
    let beta = synthesize_beta(&alm, &grid, p, b, cutoff)?;
    let lam = lambda_hat(&empirical_cl(&alm), &window, j, Truncation::Strict)?;
    let s = beta.sum_sq();
    Ok(FrameCheck {
        j,
        seed,
        grid_points: grid.count(),
        sum_beta_sq: s,
        lambda_hat: lam,
        relative_gap: (s - lam).abs() / lam,
    })
}

/// Corr(β_jk, β_j'k') at geodesic distance d from the harmonic series.
pub fn exact_beta_correlation(
    model: &PowerSpectrumModel,
    j1: i32,
    j2: i32,
    p: u32,
    b: f64,
    d: f64,
) -> Result<f64> {
    let w = NeedletWindow::mexican(p, b)?;
    let hi = w.support(j1).1.max(w.support(j2).1);
    let (b1, b2) = (b.powi(j1), b.powi(j2));
    let cos_d = d.cos();
    let (mut num, mut v1, mut v2) = (0.0, 0.0, 0.0);
    for l in 1..=hi {
        let x = l as f64;
        let base = (2 * l + 1) as f64 * model.c_l_unchecked(l);
        let f1 = w.window(x / b1);
        let f2 = w.window(x / b2);
        num += f1 * f2 * base * legendre_p(l, cos_d);
        v1 += f1 * f1 * base;
        v2 += f2 * f2 * base;
    }
    Ok(num / (v1 * v2).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationBin {
    /// Bin range in units of B^{min(j, j')}·d.
    pub u_lo: f64,
    pub u_hi: f64,
    pub pairs: usize,
    pub mean_corr: f64,
    pub max_abs_corr: f64,
    /// Harmonic-series correlation at the bin centre.
    pub exact_corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSummary {
    pub j1: i32,
    pub j2: i32,
    pub n_seeds: usize,
    pub bins: Vec<CorrelationBin>,
    /// 4p + 2 − α₀.
    pub theory_exponent: f64,
    /// Decay exponent fitted on the Monte Carlo bins above the noise floor.
    pub fitted_exponent: Option<f64>,
    /// Decay exponent fitted on the harmonic-series correlation.
    pub exact_exponent: Option<f64>,
    pub noise_floor: f64,
    /// max |corr| over pairs within 1% of antipodal.
    pub antipodal_max_abs_corr: f64,
    /// mean |corr| over the same pairs.
    pub antipodal_mean_abs_corr: f64,
    /// Correlation of a reference point with itself (1 up to rounding).
    pub self_corr: f64,
}

const REFERENCES: usize = 64;
const BIN_WIDTH: f64 = 0.25;

/// Least-squares slope of log envelope against log(1 + u), sign flipped.
pub fn envelope_exponent(u: &[f64], corr: &[f64], floor: f64) -> Option<f64> {
    let mut env = vec![0.0; corr.len()];
    let mut run = 0.0f64;
    for i in (0..corr.len()).rev() {
        run = run.max(corr[i].abs());
        env[i] = run;
    }
    let pts: Vec<(f64, f64)> = u
        .iter()
        .zip(&env)
        .filter(|(u, e)| **u >= 1.0 && **e > floor)
        .map(|(u, e)| ((1.0 + u).ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

fn geodesic(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2))
        .sqrt()
        .atan2(dot)
}

/// Monte Carlo correlation of β_jk and β_j'k' across seeds, binned by distance.
pub fn empirical_beta_correlation(
    model: &PowerSpectrumModel,
    j1: i32,
    j2: i32,
    p: u32,
    b: f64,
    n_seeds: usize,
    master_seed: u64,
) -> Result<CorrelationSummary> {
    if n_seeds < 3 {
        return Err(Error::domain("correlation needs at least 3 seeds"));
    }
    let w = NeedletWindow::mexican(p, b)?;
    let (c1, c2) = (w.support(j1).1, w.support(j2).1);
    let l_max = c1.max(c2);
    let g1 = build_grid_band_limited(j1, c1)?;
    let g2 = build_grid_band_limited(j2, c2)?;
    let refs: Vec<usize> = (0..REFERENCES.min(g1.count()))
        .map(|r| {
            let ring = (r * 2 + 1) * g1.n_theta / (2 * REFERENCES.min(g1.count()));
            ring * g1.n_phi + (r * 7919) % g1.n_phi
        })
        .collect();
    let n2 = g2.count();
    let mut sx = vec![0.0; refs.len()];
    let mut sxx = vec![0.0; refs.len()];
    let mut sy = vec![0.0; n2];
    let mut syy = vec![0.0; n2];
    let mut sxy = vec![0.0; refs.len() * n2];
    for s in 0..n_seeds {
        let alm = simulate_alm(model, l_max, split_seed(master_seed, s as u64))?;
        let x = synthesize_beta(&alm, &g1, p, b, l_max)?.values;
        let y = synthesize_beta(&alm, &g2, p, b, l_max)?.values;
        for (i, v) in y.iter().enumerate() {
            sy[i] += v;
            syy[i] += v * v;
        }
        sxy.par_chunks_mut(n2)
            .zip(refs.par_iter())
            .for_each(|(row, &r)| {
                let xr = x[r];
                for (acc, v) in row.iter_mut().zip(&y) {
                    *acc += xr * v;
                }
            });
        for (i, &r) in refs.iter().enumerate() {
            sx[i] += x[r];
            sxx[i] += x[r] * x[r];
        }
    }
    let n = n_seeds as f64;
    let scale = b.powi(j1.min(j2));
    let n_bins = (scale * PI / BIN_WIDTH).ceil() as usize + 1;
    let mut sum = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    let mut maxabs = vec![0.0f64; n_bins];
    let mut antipodal = 0.0f64;
    let (mut anti_sum, mut anti_n) = (0.0, 0usize);
    let mut self_corr = f64::NAN;
    let pts2: Vec<[f64; 3]> = (0..n2)
        .map(|k| {
            let (t, ph) = g2.point(k);
            unit_vector(t, ph)
        })
        .collect();
    for (i, &r) in refs.iter().enumerate() {
        let (t, ph) = g1.point(r);
        let a = unit_vector(t, ph);
        let vx = sxx[i] / n - (sx[i] / n).powi(2);
        for k in 0..n2 {
            let vy = syy[k] / n - (sy[k] / n).powi(2);
            let cov = sxy[i * n2 + k] / n - sx[i] / n * sy[k] / n;
            let c = cov / (vx * vy).sqrt();
            let d = geodesic(a, pts2[k]);
            let bin = ((scale * d / BIN_WIDTH) as usize).min(n_bins - 1);
            sum[bin] += c;
            count[bin] += 1;
            maxabs[bin] = maxabs[bin].max(c.abs());
            if d > 0.99 * PI {
                antipodal = antipodal.max(c.abs());
                anti_sum += c.abs();
                anti_n += 1;
            }
            if d < 1e-12 && i == 0 {
                self_corr = c;
            }
        }
    }
    let mut bins = Vec::new();
    for i in 0..n_bins {
        if count[i] == 0 {
            continue;
        }
        let (u_lo, u_hi) = (i as f64 * BIN_WIDTH, (i + 1) as f64 * BIN_WIDTH);
        let centre = 0.5 * (u_lo + u_hi) / scale;
        bins.push(CorrelationBin {
            u_lo,
            u_hi,
            pairs: count[i],
            mean_corr: sum[i] / count[i] as f64,
            max_abs_corr: maxabs[i],
            exact_corr: exact_beta_correlation(model, j1, j2, p, b, centre.min(PI))?,
        });
    }
    let u: Vec<f64> = bins.iter().map(|b| 0.5 * (b.u_lo + b.u_hi)).collect();
    let floor = 3.0 / (n * refs.len() as f64).sqrt();
    let mc: Vec<f64> = bins.iter().map(|b| b.mean_corr).collect();
    let ex: Vec<f64> = bins.iter().map(|b| b.exact_corr).collect();
    Ok(CorrelationSummary {
        j1,
        j2,
        n_seeds,
        theory_exponent: 4.0 * p as f64 + 2.0 - model.alpha0,
        fitted_exponent: envelope_exponent(&u, &mc, floor),
        exact_exponent: envelope_exponent(&u, &ex, 1e-13),
        noise_floor: floor,
        antipodal_max_abs_corr: antipodal,
        antipodal_mean_abs_corr: if anti_n > 0 {
            anti_sum / anti_n as f64
        } else {
            f64::NAN
        },
        self_corr,
        bins,
    })
}

/// CSV with columns `k,theta,phi,weight,beta`; `beta` is empty without coefficients.
pub fn write_grid_csv(
    w: impl std::io::Write,
    grid: &CubatureGrid,
    beta: Option<&BetaCoefficients>,
) -> Result<()> {
    if let Some(b) = beta {
        if b.values.len() != grid.count() {
            return Err(Error::domain("coefficients do not belong to this grid"));
        }
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "theta", "phi", "weight", "beta"])?;
    for k in 0..grid.count() {
        let (t, ph) = grid.point(k);
        let b = beta.map_or(String::new(), |b| fmt_real(b.values[k]));
        out.write_record([
            k.to_string(),
            fmt_real(t),
            fmt_real(ph),
            fmt_real(grid.weight(k)),
            b,
        ])?;
    }
    out.flush()?;
    Ok(())
}
