//! Needlet windows, normalized spectral moments K_j and the level statistics Λ̂_j.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::EmpiricalSpectrum;
use crate::special::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindowKind {
    /// f_p(x) = x^{2p} e^{−x²}.
    Mexican { p: u32 },
    /// Compactly supported b(x) on [1/B, B] built from the bump exp(−1/(1−t²)).
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeedletWindow {
    pub kind: WindowKind,
    pub b: f64,
}

/// How sums over l are cut at the largest available degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Truncation {
    /// Fail unless the part of the window beyond l_max is negligible.
    Strict,
    /// Sum over l ≤ l_max only.
    BandLimited,
}

/// Relative tail tolerance used by [`Truncation::Strict`].
pub const TAIL_TOLERANCE: f64 = 1e-12;

const CUTOFF_LEVEL: f64 = 1e-16;

fn check_b(b: f64) -> Result<()> {
    if b.is_finite() && b > 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("B must be > 1, got {b}")))
    }
}

impl NeedletWindow {
    pub fn mexican(p: u32, b: f64) -> Result<Self> {
        check_b(b)?;
        if p < 1 {
            return Err(Error::domain("p must be >= 1"));
        }
        Ok(NeedletWindow {
            kind: WindowKind::Mexican { p },
            b,
        })
    }

    pub fn standard(b: f64) -> Result<Self> {
        check_b(b)?;
        Ok(NeedletWindow {
            kind: WindowKind::Standard,
            b,
        })
    }

    pub fn p(&self) -> Option<u32> {
        match self.kind {
            WindowKind::Mexican { p } => Some(p),
            WindowKind::Standard => None,
        }
    }

    /// Squared window at frequency ratio x.
    pub fn window_sq(&self, x: f64) -> f64 {
        match self.kind {
            WindowKind::Mexican { p } => mexican_sq(p, x),
            WindowKind::Standard => standard_sq(self.b, x),
        }
    }

    /// Window (not squared) at x, as used in coefficient synthesis.
    pub fn window(&self, x: f64) -> f64 {
        match self.kind {
            WindowKind::Mexican { p } => {
                if x <= 0.0 {
                    0.0
                } else {
                    (2.0 * p as f64 * x.ln() - x * x).exp()
                }
            }
            WindowKind::Standard => standard_sq(self.b, x).sqrt(),
        }
    }

    /// Smallest and largest degree carrying weight at level j.
    pub fn support(&self, j: i32) -> (usize, usize) {
        let bj = self.b.powi(j);
        match self.kind {
            WindowKind::Mexican { p } => (1, (bj * mexican_cutoff(p)).ceil().max(1.0) as usize),
            WindowKind::Standard => {
                let lo = (bj / self.b).ceil().max(1.0) as usize;
                let hi = ((bj * self.b).ceil() - 1.0).max(0.0) as usize;
                (lo, hi)
            }
        }
    }
}

fn mexican_sq(p: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (4.0 * p as f64 * x.ln() - 2.0 * x * x).exp()
}

/// x* > √p with x^{4p} e^{−2x²} = 10⁻¹⁶ f_p²(√p).
pub fn mexican_cutoff(p: u32) -> f64 {
    let pf = p as f64;
    let target = CUTOFF_LEVEL.ln() + 2.0 * pf * pf.ln() - 2.0 * pf;
    let g = |x: f64| 4.0 * pf * x.ln() - 2.0 * x * x - target;
    let (mut lo, mut hi) = (pf.sqrt(), pf.sqrt() + 10.0);
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

struct BumpTable {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

fn bump_table() -> &'static BumpTable {
    static TABLE: OnceLock<BumpTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let (nodes, weights) = gauss_legendre(48);
        let mut t = BumpTable {
            nodes,
            weights,
            total: 0.0,
        };
        t.total = bump_integral(&t, -1.0, 1.0);
        t
    })
}

fn bump_integral(t: &BumpTable, a: f64, b: f64) -> f64 {
    const PANELS: usize = 8;
    let h = (b - a) / PANELS as f64;
    let mut s = 0.0;
    for k in 0..PANELS {
        let lo = a + k as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in t.nodes.iter().zip(&t.weights) {
            s += w * bump(mid + 0.5 * h * x);
        }
    }
    s * 0.5 * h
}

/// ψ(u) = ∫_{−1}^{u} bump / ∫_{−1}^{1} bump.
fn smooth_step(u: f64) -> f64 {
    if u <= -1.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let t = bump_table();
    bump_integral(t, -1.0, u) / t.total
}

/// φ_B(x): 1 on [0, 1/B], 0 on [1, ∞), smooth in between.
fn phi_b(b: f64, x: f64) -> f64 {
    if x <= 1.0 / b {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        smooth_step(1.0 - 2.0 * b / (b - 1.0) * (x - 1.0 / b))
    }
}

fn standard_sq(b: f64, x: f64) -> f64 {
    if x <= 1.0 / b || x >= b {
        return 0.0;
    }
    (phi_b(b, x / b) - phi_b(b, x)).max(0.0)
}

/// Level range [j0, jL] with N_j = c_B B^{2j}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JRange {
    pub j0: i32,
    pub jl: i32,
    pub c_b: f64,
}

impl JRange {
    pub fn new(j0: i32, jl: i32, c_b: f64) -> Result<Self> {
        if j0 > jl {
            return Err(Error::EmptyRange { j0, jl });
        }
        if !(c_b.is_finite() && c_b > 0.0) {
            return Err(Error::domain(format!("c_B must be > 0, got {c_b}")));
        }
        Ok(JRange { j0, jl, c_b })
    }

    pub fn levels(&self) -> impl Iterator<Item = i32> + Clone {
        self.j0..=self.jl
    }

    pub fn len(&self) -> usize {
        (self.jl - self.j0 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.jl < self.j0
    }

    pub fn n_j(&self, b: f64, j: i32) -> f64 {
        self.c_b * b.powi(2 * j)
    }

    pub fn with_c_b(self, c_b: f64) -> Self {
        JRange { c_b, ..self }
    }
}

/// Rounds half-way cases up, tolerating representation error in log ratios.
pub fn round_half_up(x: f64) -> i32 {
    (x + 0.5 + 1e-9).floor() as i32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JRangePolicy {
    /// J₀ = 1, J_L = round(log_B(l_max/B)).
    PaperDefault,
    /// The two threshold rules on f_p evaluated as written.
    Thresholds { eps1: f64, eps2: f64 },
}

/// The threshold pair quoted alongside the default rule.
pub fn default_thresholds(p: u32, b: f64) -> (f64, f64) {
    let bp = b.powi(-2 * p as i32);
    (
        bp * ((b - 1.0) / (b * b)).exp(),
        bp * (b * b * (b * b - 1.0)).exp(),
    )
}

pub fn select_j_range(
    l_max: usize,
    window: &NeedletWindow,
    policy: JRangePolicy,
) -> Result<JRange> {
    let b = window.b;
    if (l_max as f64) < b * b {
        return Err(Error::domain(format!(
            "l_max={l_max} must be at least B^2={}",
            b * b
        )));
    }
    let (j0, jl) = match policy {
        JRangePolicy::PaperDefault => (1, round_half_up((l_max as f64 / b).ln() / b.ln())),
        JRangePolicy::Thresholds { eps1, eps2 } => {
            let p = window.p().ok_or_else(|| {
                Error::domain("threshold rule is defined for mexican windows only")
            })? as f64;
            if !(eps1 > 0.0 && eps2 > 0.0) {
                return Err(Error::domain("thresholds must be positive"));
            }
            let ln_f = |x: f64| 2.0 * p * x.ln() - x * x;
            // Strict inequalities; ties within rounding count as equality.
            const TIE: f64 = 1e-9;
            const SCAN: std::ops::RangeInclusive<i32> = -64..=64;
            let j0 = SCAN
                .clone()
                .filter(|&j| ln_f(b.powi(-(j + 1))) > eps1.ln() + ln_f(b.powi(-j)) + TIE)
                .max()
                .ok_or_else(|| Error::domain("no level satisfies the lower threshold"))?;
            let big_l = l_max as f64;
            let jl = SCAN
                .filter(|&j| {
                    ln_f(big_l / b.powi(j)) < eps2.ln() + ln_f(big_l / b.powi(j - 1)) - TIE
                })
                .min()
                .ok_or_else(|| Error::domain("no level satisfies the upper threshold"))?;
            (j0, jl)
        }
    };
    JRange::new(j0, jl, 1.0)
}

/// Per-level weights w(l/B^j)(2l+1) and log l over the summation range.
#[derive(Debug, Clone)]
pub struct LevelKernel {
    pub j: i32,
    pub n_j: f64,
    l_lo: usize,
    weights: Vec<f64>,
    logs: Vec<f64>,
}

impl LevelKernel {
    pub fn new(
        window: &NeedletWindow,
        j: i32,
        l_max: usize,
        c_b: f64,
        truncation: Truncation,
    ) -> Result<Self> {
        let (lo, hi) = window.support(j);
        if truncation == Truncation::Strict && hi > l_max {
            let ok = match window.kind {
                WindowKind::Standard => false,
                WindowKind::Mexican { .. } => {
                    // Conservative at α = 2: larger α only shrinks the tail share.
                    let part = |a: usize, b: usize| -> f64 {
                        (a..=b)
                            .map(|l| weight(window, j, l) * (l as f64).powi(-2))
                            .sum()
                    };
                    let head = part(lo, l_max);
                    let tail = part(l_max + 1, hi);
                    head > 0.0 && tail <= TAIL_TOLERANCE * head
                }
            };
            if !ok {
                return Err(Error::Truncation {
                    j,
                    l_max,
                    needed: hi,
                });
            }
        }
        let hi = hi.min(l_max);
        let weights: Vec<f64> = (lo..=hi).map(|l| weight(window, j, l)).collect();
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::domain(format!(
                "level j={j} has no weight on 1..={l_max}"
            )));
        }
        let logs = (lo..=hi).map(|l| (l as f64).ln()).collect();
        Ok(LevelKernel {
            j,
            n_j: c_b * window.b.powi(2 * j),
            l_lo: lo,
            weights,
            logs,
        })
    }

    /// Degrees summed over.
    pub fn degrees(&self) -> std::ops::RangeInclusive<usize> {
        self.l_lo..=self.l_lo + self.weights.len() - 1
    }

    pub fn k(&self, alpha: f64) -> f64 {
        let s: f64 = self
            .weights
            .iter()
            .zip(&self.logs)
            .map(|(w, lg)| w * (-alpha * lg).exp())
            .sum();
        s / self.n_j
    }

    /// (K, dK/dα, d²K/dα²).
    pub fn k_derivs(&self, alpha: f64) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for (w, lg) in self.weights.iter().zip(&self.logs) {
            let t = w * (-alpha * lg).exp();
            acc[0] += t;
            acc[1] -= t * lg;
            acc[2] += t * lg * lg;
        }
        acc.map(|v| v / self.n_j)
    }

    /// Σ w(l/B^j)(2l+1)Ĉ_l over the kernel's degrees.
    pub fn lambda(&self, spec: &EmpiricalSpectrum) -> Result<f64> {
        let last = *self.degrees().end();
        if last > spec.l_max {
            return Err(Error::Truncation {
                j: self.j,
                l_max: spec.l_max,
                needed: last,
            });
        }
        let c = &spec.values()[self.l_lo - 1..last];
        Ok(self.weights.iter().zip(c).map(|(w, c)| w * c).sum())
    }
}

fn weight(window: &NeedletWindow, j: i32, l: usize) -> f64 {
    window.window_sq(l as f64 / window.b.powi(j)) * (2 * l + 1) as f64
}

pub fn k_j(
    window: &NeedletWindow,
    j: i32,
    alpha: f64,
    l_max: usize,
    c_b: f64,
    truncation: Truncation,
) -> Result<f64> {
    Ok(LevelKernel::new(window, j, l_max, c_b, truncation)?.k(alpha))
}

pub fn k_j_deriv(
    window: &NeedletWindow,
    j: i32,
    alpha: f64,
    l_max: usize,
    c_b: f64,
    order: u8,
    truncation: Truncation,
) -> Result<f64> {
    if !(1..=2).contains(&order) {
        return Err(Error::domain("derivative order must be 1 or 2"));
    }
    Ok(LevelKernel::new(window, j, l_max, c_b, truncation)?.k_derivs(alpha)[order as usize])
}

pub fn lambda_hat(
    spec: &EmpiricalSpectrum,
    window: &NeedletWindow,
    j: i32,
    truncation: Truncation,
) -> Result<f64> {
    LevelKernel::new(window, j, spec.l_max, 1.0, truncation)?.lambda(spec)
}

/// Λ̂_j over a level range, with the settings needed to rebuild K_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedletStatistics {
    pub j_range: JRange,
    pub lambda_hat: Vec<f64>,
    pub window: NeedletWindow,
    pub l_max: usize,
    pub truncation: Truncation,
}

impl NeedletStatistics {
    pub fn kernels(&self) -> Result<Vec<LevelKernel>> {
        self.j_range
            .levels()
            .map(|j| {
                LevelKernel::new(
                    &self.window,
                    j,
                    self.l_max,
                    self.j_range.c_b,
                    self.truncation,
                )
            })
            .collect()
    }

    pub fn n_j(&self, j: i32) -> f64 {
        self.j_range.n_j(self.window.b, j)
    }
}

pub fn compute_statistics(
    spec: &EmpiricalSpectrum,
    window: &NeedletWindow,
    j_range: JRange,
    truncation: Truncation,
) -> Result<NeedletStatistics> {
    let lambda_hat = j_range
        .levels()
        .map(|j| lambda_hat(spec, window, j, truncation))
        .collect::<Result<Vec<_>>>()?;
    Ok(NeedletStatistics {
        j_range,
        lambda_hat,
        window: *window,
        l_max: spec.l_max,
        truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::i_ps;
    use crate::spectrum::PowerSpectrumModel;
    use approx::assert_relative_eq;

    fn mex() -> NeedletWindow {
        NeedletWindow::mexican(2, 2.0).unwrap()
    }

    #[test]
    fn mexican_window_values() {
        let w = mex();
        assert_eq!(w.window_sq(0.0), 0.0);
        assert_relative_eq!(w.window_sq(1.0), (-2.0f64).exp(), max_relative = 1e-15);
        for p in 1..6 {
            let w = NeedletWindow::mexican(p, 2.0).unwrap();
            let s = (p as f64).sqrt();
            assert!(w.window(s) > w.window(s * 1.001) && w.window(s) > w.window(s * 0.999));
        }
    }

    #[test]
    fn cutoff_definition() {
        for p in 1..5 {
            let x = mexican_cutoff(p);
            let peak = mexican_sq(p, (p as f64).sqrt());
            assert_relative_eq!(mexican_sq(p, x) / peak, 1e-16, max_relative = 1e-9);
        }
    }

    #[test]
    fn standard_partition_of_unity() {
        for &b in &[2.0, 2f64.sqrt(), 2f64.powf(0.25)] {
            let w = NeedletWindow::standard(b).unwrap();
            let l_max = 2000usize;
            let mut l = b.ceil() as usize;
            while (l as f64) <= l_max as f64 / b {
                let mut s = 0.0;
                for j in 0..64 {
                    s += w.window_sq(l as f64 / b.powi(j));
                }
                assert!((s - 1.0).abs() < 1e-8, "B={b}, l={l}, sum={s}");
                l += 7;
            }
        }
    }

    #[test]
    fn standard_support_and_truncation() {
        let w = NeedletWindow::standard(2.0).unwrap();
        assert_eq!(w.window_sq(0.5), 0.0);
        assert_eq!(w.window_sq(2.0), 0.0);
        assert!(w.window_sq(1.0) > 0.0);
        assert!(matches!(
            k_j(&w, 6, 3.0, 100, 1.0, Truncation::Strict),
            Err(Error::Truncation { .. })
        ));
        assert!(k_j(&w, 5, 3.0, 100, 1.0, Truncation::Strict).is_ok());
    }

    #[test]
    fn k_j_matches_gamma_limit() {
        let k = k_j(&mex(), 8, 3.0, 8192, 1.0, Truncation::Strict).unwrap();
        let scaled = k * 2f64.powf(3.0 * 8.0);
        let closed = 2f64.powf(-3.5) * crate::special::gamma(3.5);
        assert_relative_eq!(i_ps(2, 3.0, 0, 1.0).unwrap(), closed, max_relative = 1e-12);
        assert_relative_eq!(scaled, i_ps(2, 3.0, 0, 1.0).unwrap(), max_relative = 0.01);
    }

    #[test]
    fn k_j_c_b_scaling() {
        let a = k_j(&mex(), 5, 3.0, 4096, 1.0, Truncation::Strict).unwrap();
        let b = k_j(&mex(), 5, 3.0, 4096, 2.0, Truncation::Strict).unwrap();
        assert_eq!(a, 2.0 * b);
    }

    #[test]
    fn mexican_strict_truncation() {
        assert!(matches!(
            k_j(&mex(), 9, 3.0, 1024, 1.0, Truncation::Strict),
            Err(Error::Truncation { .. })
        ));
        assert!(k_j(&mex(), 9, 3.0, 1024, 1.0, Truncation::BandLimited).is_ok());
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-4;
        for order in 1..=2u8 {
            let d = k_j_deriv(&mex(), 6, 3.0, 4096, 1.0, order, Truncation::Strict).unwrap();
            let f = |a: f64| k_j(&mex(), 6, a, 4096, 1.0, Truncation::Strict).unwrap();
            let fd = if order == 1 {
                (f(3.0 + h) - f(3.0 - h)) / (2.0 * h)
            } else {
                (f(3.0 + h) - 2.0 * f(3.0) + f(3.0 - h)) / (h * h)
            };
            let tol = if order == 1 { 1e-6 } else { 1e-4 };
            assert!((d - fd).abs() < tol * d.abs(), "order {order}: {d} vs {fd}");
        }
    }

    #[test]
    fn derivative_asymptotes() {
        let (p, alpha, b) = (2, 3.0, 2.0);
        let ratio1 = i_ps(p, alpha, 1, 1.0).unwrap() / i_ps(p, alpha, 0, 1.0).unwrap();
        let ratio2 = i_ps(p, alpha, 2, 1.0).unwrap() / i_ps(p, alpha, 0, 1.0).unwrap();
        for j in [8, 10] {
            let k = LevelKernel::new(&mex(), j, 1 << 14, 1.0, Truncation::Strict).unwrap();
            let [k0, k1, k2] = k.k_derivs(alpha);
            let jl = j as f64 * f64::ln(b);
            let want1 = jl + ratio1;
            assert!((-k1 / k0 / want1 - 1.0).abs() < 0.01);
            let want2 = jl * jl + 2.0 * jl * ratio1 + ratio2;
            assert!((k2 / k0 / want2 - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn j_range_paper_default() {
        let w = mex();
        let r = select_j_range(1024, &w, JRangePolicy::PaperDefault).unwrap();
        assert_eq!((r.j0, r.jl), (1, 9));
        let r = select_j_range(4, &w, JRangePolicy::PaperDefault).unwrap();
        assert_eq!((r.j0, r.jl), (1, 1));
        let r = select_j_range(8, &w, JRangePolicy::PaperDefault).unwrap();
        assert_eq!(r.jl, 2);
        assert!(select_j_range(3, &w, JRangePolicy::PaperDefault).is_err());
    }

    #[test]
    fn j_range_thresholds_verbatim() {
        let w = mex();
        let (e1, e2) = default_thresholds(2, 2.0);
        let r = select_j_range(1024, &w, JRangePolicy::Thresholds { eps1: e1, eps2: e2 }).unwrap();
        // B^{2 J0} < B + 1 and B^{2 JL} > L²(B²−1)/(B²(B²−1) − 4p log B).
        assert_eq!(r.j0, 0);
        assert_eq!(r.jl, 10);
    }

    #[test]
    fn noise_free_lambda_matches_k() {
        let m = PowerSpectrumModel::power_law(3.0, 1.7).unwrap();
        let spec = EmpiricalSpectrum::noise_free(&m, 4096);
        let r = JRange::new(1, 6, 1.0).unwrap();
        let st = compute_statistics(&spec, &mex(), r, Truncation::Strict).unwrap();
        for (i, j) in r.levels().enumerate() {
            let k = k_j(&mex(), j, 3.0, 4096, 1.0, Truncation::Strict).unwrap();
            assert_relative_eq!(st.lambda_hat[i], 1.7 * st.n_j(j) * k, max_relative = 1e-13);
        }
        let single = compute_statistics(
            &spec,
            &mex(),
            JRange::new(4, 4, 1.0).unwrap(),
            Truncation::Strict,
        )
        .unwrap();
        assert_eq!(
            single.lambda_hat,
            vec![lambda_hat(&spec, &mex(), 4, Truncation::Strict).unwrap()]
        );
    }

    #[test]
    fn lambda_of_zero_spectrum() {
        let spec = EmpiricalSpectrum::new(vec![0.0; 512]).unwrap();
        assert_eq!(
            lambda_hat(&spec, &mex(), 4, Truncation::Strict).unwrap(),
            0.0
        );
    }

    #[test]
    fn doubling_l_max_is_invisible_after_strict_check() {
        let m = PowerSpectrumModel::power_law(2.5, 1.0).unwrap();
        for j in 2..6 {
            let (_, hi) = mex().support(j);
            let a = k_j(&mex(), j, 2.5, hi, 1.0, Truncation::Strict).unwrap();
            let b = k_j(&mex(), j, 2.5, 2 * hi, 1.0, Truncation::Strict).unwrap();
            assert!((a / b - 1.0).abs() < 1e-10);
            let s1 = EmpiricalSpectrum::noise_free(&m, hi);
            let s2 = EmpiricalSpectrum::noise_free(&m, 2 * hi);
            let la = lambda_hat(&s1, &mex(), j, Truncation::Strict).unwrap();
            let lb = lambda_hat(&s2, &mex(), j, Truncation::Strict).unwrap();
            assert!((la / lb - 1.0).abs() < 1e-10);
        }
    }
}
