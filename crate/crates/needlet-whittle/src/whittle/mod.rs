//! Full-band and narrow-band Whittle minimum-contrast estimation of (α, G),
//! score/Hessian diagnostics and the plug-in procedure.

pub mod optimize;

use serde::Serialize;

use crate::asymptotics::{rho0_sq, sigma0_sq, tau_tildes, TABLE1_ALPHA0};
use crate::error::{Error, Result};
use crate::harmonic::EmpiricalSpectrum;
use crate::needlet::{
    round_half_up, JRange, LevelKernel, NeedletStatistics, NeedletWindow, Truncation,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub tol: f64,
    pub grid_points: usize,
    pub max_iter: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alpha_min: 2.001,
            alpha_max: 10.0,
            tol: 1e-6,
            grid_points: 64,
            max_iter: 200,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min < self.alpha_max
            && self.alpha_min.is_finite()
            && self.alpha_max.is_finite())
        {
            return Err(Error::domain("alpha search needs alpha_min < alpha_max"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("alpha search tolerance must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Band {
    Full,
    Narrow { j1: i32 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhittleFit {
    pub alpha_hat: f64,
    pub g_hat: f64,
    pub j_range_used: JRange,
    pub band: Band,
    pub contrast_trace: Vec<(f64, f64)>,
    pub score_at_hat: f64,
    pub hessian_at_hat: f64,
    pub converged: bool,
    pub iterations: usize,
    /// α̂ lies within 10·tol of a search bound.
    pub at_boundary: bool,
}

/// Precomputed K_j kernels for one window, level range and l_max.
#[derive(Debug, Clone)]
pub struct WhittleModel {
    pub window: NeedletWindow,
    pub j_range: JRange,
    pub l_max: usize,
    kernels: Vec<LevelKernel>,
    sum_n: f64,
}

impl WhittleModel {
    pub fn new(
        window: &NeedletWindow,
        j_range: JRange,
        l_max: usize,
        truncation: Truncation,
    ) -> Result<Self> {
        let kernels = j_range
            .levels()
            .map(|j| LevelKernel::new(window, j, l_max, j_range.c_b, truncation))
            .collect::<Result<Vec<_>>>()?;
        let sum_n = kernels.iter().map(|k| k.n_j).sum();
        Ok(WhittleModel {
            window: *window,
            j_range,
            l_max,
            kernels,
            sum_n,
        })
    }

    pub fn from_statistics(stats: &NeedletStatistics) -> Result<Self> {
        Self::new(&stats.window, stats.j_range, stats.l_max, stats.truncation)
    }

    pub fn kernels(&self) -> &[LevelKernel] {
        &self.kernels
    }

    pub fn lambdas(&self, spec: &EmpiricalSpectrum) -> Result<Vec<f64>> {
        self.kernels.iter().map(|k| k.lambda(spec)).collect()
    }

    pub fn contrast_fn<'a>(&'a self, lambdas: &'a [f64]) -> Result<Contrast<'a>> {
        if lambdas.len() != self.kernels.len() {
            return Err(Error::domain("one statistic per level is required"));
        }
        if !lambdas.iter().any(|&l| l > 0.0) {
            return Err(Error::DegenerateData);
        }
        Ok(Contrast {
            model: self,
            lambdas,
        })
    }

    pub fn fit(&self, lambdas: &[f64], band: Band, search: &SearchConfig) -> Result<WhittleFit> {
        search.validate()?;
        let c = self.contrast_fn(lambdas)?;
        let m = optimize::grid_golden(
            |a| c.contrast(a),
            search.alpha_min,
            search.alpha_max,
            search.grid_points,
            search.tol,
            search.max_iter,
        );
        let alpha_hat = m.x;
        let d = c.derivatives(alpha_hat);
        let edge = 10.0 * search.tol;
        Ok(WhittleFit {
            alpha_hat,
            g_hat: d.g_hat,
            j_range_used: self.j_range,
            band,
            contrast_trace: m.trace,
            score_at_hat: d.score,
            hessian_at_hat: d.hessian,
            converged: m.converged,
            iterations: m.iterations,
            at_boundary: alpha_hat - search.alpha_min < edge || search.alpha_max - alpha_hat < edge,
        })
    }
}

/// Profile quantities at one α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileDerivatives {
    pub g_hat: f64,
    pub contrast: f64,
    pub score: f64,
    pub hessian: f64,
}

/// The profiled contrast R(α) for fixed level statistics.
pub struct Contrast<'a> {
    model: &'a WhittleModel,
    lambdas: &'a [f64],
}

impl Contrast<'_> {
    /// Ĝ(α) = (ΣN_j)^{-1} Σ Λ̂_j / K_j(α).
    pub fn g_hat(&self, alpha: f64) -> f64 {
        let s: f64 = self
            .model
            .kernels
            .iter()
            .zip(self.lambdas)
            .map(|(k, l)| l / k.k(alpha))
            .sum();
        s / self.model.sum_n
    }

    /// R(α) = log Ĝ(α) + (ΣN_j)^{-1} Σ N_j log K_j(α).
    pub fn contrast(&self, alpha: f64) -> f64 {
        let mut g = 0.0;
        let mut lk = 0.0;
        for (k, l) in self.model.kernels.iter().zip(self.lambdas) {
            let kv = k.k(alpha);
            g += l / kv;
            lk += k.n_j * kv.ln();
        }
        (g / self.model.sum_n).ln() + lk / self.model.sum_n
    }

    /// (ΣN_j)^{-1} Σ [Λ̂_j/(G K_j) + N_j log(G K_j)] − 1; equals R(α) at G = Ĝ(α).
    pub fn two_parameter(&self, alpha: f64, g: f64) -> f64 {
        let s: f64 = self
            .model
            .kernels
            .iter()
            .zip(self.lambdas)
            .map(|(k, l)| {
                let gk = g * k.k(alpha);
                l / gk + k.n_j * gk.ln()
            })
            .sum();
        s / self.model.sum_n - 1.0
    }

    pub fn derivatives(&self, alpha: f64) -> ProfileDerivatives {
        let n = self.model.sum_n;
        let (mut g, mut g1, mut g2, mut lk, mut s_n, mut q_n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, &l) in self.model.kernels.iter().zip(self.lambdas) {
            let [k0, k1, k2] = k.k_derivs(alpha);
            g += l / k0;
            g1 -= l * k1 / (k0 * k0);
            g2 += l * (2.0 * k1 * k1 / (k0 * k0 * k0) - k2 / (k0 * k0));
            lk += k.n_j * k0.ln();
            s_n += k.n_j * k1 / k0;
            q_n += k.n_j * (k2 * k0 - k1 * k1) / (k0 * k0);
        }
        let (g, g1, g2) = (g / n, g1 / n, g2 / n);
        ProfileDerivatives {
            g_hat: g,
            contrast: g.ln() + lk / n,
            score: g1 / g + s_n / n,
            hessian: (g2 * g - g1 * g1) / (g * g) + q_n / n,
        }
    }
}

fn with_model<T>(stats: &NeedletStatistics, f: impl FnOnce(&Contrast) -> T) -> Result<T> {
    let model = WhittleModel::from_statistics(stats)?;
    let c = model.contrast_fn(&stats.lambda_hat)?;
    Ok(f(&c))
}

pub fn profile_g_hat(stats: &NeedletStatistics, alpha: f64) -> Result<f64> {
    with_model(stats, |c| c.g_hat(alpha))
}

pub fn contrast(stats: &NeedletStatistics, alpha: f64) -> Result<f64> {
    with_model(stats, |c| c.contrast(alpha))
}

pub fn score(stats: &NeedletStatistics, alpha: f64) -> Result<f64> {
    with_model(stats, |c| c.derivatives(alpha).score)
}

pub fn hessian(stats: &NeedletStatistics, alpha: f64) -> Result<f64> {
    with_model(stats, |c| c.derivatives(alpha).hessian)
}

/// Fits over j_range with K_j and Λ̂_j both summed over l ≤ spec.l_max.
pub fn fit_full_band(
    spec: &EmpiricalSpectrum,
    window: &NeedletWindow,
    j_range: JRange,
    search: &SearchConfig,
) -> Result<WhittleFit> {
    let model = WhittleModel::new(window, j_range, spec.l_max, Truncation::BandLimited)?;
    let lambdas = model.lambdas(spec)?;
    model.fit(&lambdas, Band::Full, search)
}

/// Bandwidth g(J_L) of the narrow band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GRule {
    /// g = J_L^{-3}.
    Default,
    Constant(f64),
}

impl GRule {
    pub fn value(&self, jl: i32) -> f64 {
        match self {
            GRule::Default => (jl as f64).powi(-3),
            GRule::Constant(g) => *g,
        }
    }
}

/// J₁ = round_half_up(J_L + log(1 − g)/log B), requiring at least two levels.
pub fn narrow_band_j1(jl: i32, b: f64, g: f64) -> Result<i32> {
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::domain(format!("g must lie in (0, 1), got {g}")));
    }
    let j1 = round_half_up(jl as f64 + (1.0 - g).ln() / b.ln());
    if j1 > jl - 1 || b.powi(jl) - b.powi(j1) < 1.0 {
        return Err(Error::NarrowBandDegenerate { j1, jl });
    }
    Ok(j1)
}

pub fn fit_narrow_band(
    spec: &EmpiricalSpectrum,
    window: &NeedletWindow,
    jl: i32,
    g_rule: GRule,
    c_b: f64,
    search: &SearchConfig,
) -> Result<WhittleFit> {
    let j1 = narrow_band_j1(jl, window.b, g_rule.value(jl))?;
    let model = WhittleModel::new(
        window,
        JRange::new(j1, jl, c_b)?,
        spec.l_max,
        Truncation::BandLimited,
    )?;
    let lambdas = model.lambdas(spec)?;
    model.fit(&lambdas, Band::Narrow { j1 }, search)
}

/// Snap distance for the ρ₀² row lookup when interpolation is off.
pub const PLUGIN_ROW_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PluginResult {
    pub alpha_standard: f64,
    pub used_mexican: bool,
    pub alpha_final: f64,
    pub p: u32,
    pub rho0_sq: f64,
    /// σ₀²(1+τ̃) at the pilot estimate; `None` when 4p ≤ α̂.
    pub sigma1_sq: Option<f64>,
    pub standard_fit: WhittleFit,
    pub mexican_fit: Option<WhittleFit>,
}

/// Refit with mexican needlets of order p when p > α̂_std/4.
pub fn uses_mexican(p: u32, alpha_standard: f64) -> bool {
    p as f64 > alpha_standard / 4.0
}

/// Pilot fit with standard needlets, mexican refit when p > α̂_std/4.
#[allow(clippy::too_many_arguments)]
pub fn plug_in(
    spec: &EmpiricalSpectrum,
    p: u32,
    b_std: f64,
    b_mex: f64,
    j_std: JRange,
    j_mex: JRange,
    search: &SearchConfig,
    interpolate: bool,
) -> Result<PluginResult> {
    let std_window = NeedletWindow::standard(b_std)?;
    let standard_fit = fit_full_band(spec, &std_window, j_std, search)?;
    let a = standard_fit.alpha_hat;
    let rho = if interpolate {
        rho0_sq(a, b_std, true)?
    } else {
        let row = TABLE1_ALPHA0
            .iter()
            .cloned()
            .min_by(|x, y| (x - a).abs().total_cmp(&(y - a).abs()))
            .unwrap();
        if (row - a).abs() > PLUGIN_ROW_TOLERANCE {
            return Err(Error::Lookup(format!(
                "alpha_hat={a} is not within {PLUGIN_ROW_TOLERANCE} of a table row"
            )));
        }
        rho0_sq(row, b_std, false)?
    };
    let used_mexican = uses_mexican(p, a);
    let sigma1_sq = if used_mexican {
        Some(sigma0_sq(p, a)? * (1.0 + tau_tildes(p, b_mex, a)?.tau_tilde))
    } else {
        None
    };
    let mexican_fit = if used_mexican {
        Some(fit_full_band(
            spec,
            &NeedletWindow::mexican(p, b_mex)?,
            j_mex,
            search,
        )?)
    } else {
        None
    };
    let alpha_final = mexican_fit.as_ref().map_or(a, |f| f.alpha_hat);
    Ok(PluginResult {
        alpha_standard: a,
        used_mexican,
        alpha_final,
        p,
        rho0_sq: rho,
        sigma1_sq,
        standard_fit,
        mexican_fit,
    })
}
