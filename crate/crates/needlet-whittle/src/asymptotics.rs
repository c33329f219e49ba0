//! Closed-form asymptotic constants: Gaussian moment integrals, level sums,
//! geometric sums and the variance/bias constants of the estimators.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{digamma, gamma, ln_gamma, trigamma};

/// W_{2a,b,s} = ∫₀^∞ t^{2a} e^{−bt²} log^s t dt.
pub fn gauss_moment_w(a: f64, b: f64, s: u8) -> Result<f64> {
    if !(a > -0.5) || !(b > 0.0) {
        return Err(Error::domain(format!(
            "W needs a > -1/2 and b > 0, got a={a}, b={b}"
        )));
    }
    let c = a + 0.5;
    let base = (-c * b.ln() + ln_gamma(c)).exp();
    let lb = b.ln();
    match s {
        0 => Ok(base / 2.0),
        1 => Ok(base / 4.0 * (digamma(c) - lb)),
        2 => {
            let d = digamma(c);
            Ok(base / 8.0 * (d * d + trigamma(c) - 2.0 * lb * d + lb * lb))
        }
        _ => Err(Error::domain("s must be 0, 1 or 2")),
    }
}

/// I_{p,s}(α) = (2/c_B) W_{4p+1−α, 2, s}.
pub fn i_ps(p: u32, alpha: f64, s: u8, c_b: f64) -> Result<f64> {
    let a = (4.0 * p as f64 + 1.0 - alpha) / 2.0;
    Ok(2.0 / c_b * gauss_moment_w(a, 2.0, s)?)
}

/// σ₀²(p, α₀) = 2/2^{4p−α₀} Γ(4p+1−α₀)/Γ²(2p−α₀/2+1).
pub fn sigma0_sq(p: u32, alpha0: f64) -> Result<f64> {
    let pf = p as f64;
    let a = 4.0 * pf + 1.0 - alpha0;
    let c = 2.0 * pf - alpha0 / 2.0 + 1.0;
    if !(a > 0.0 && c > 0.0) {
        return Err(Error::domain(format!(
            "sigma0_sq needs 4p+1-alpha0 > 0, got p={p}, alpha0={alpha0}"
        )));
    }
    Ok(2.0 * (ln_gamma(a) - 2.0 * ln_gamma(c) - (4.0 * pf - alpha0) * 2f64.ln()).exp())
}

/// τ_B(Δj) = B^{Δj(1−α₀)} cosh(Δj log B)^{−(4p−α₀+1)}.
pub fn tau_b(delta_j: i32, p: u32, b: f64, alpha0: f64) -> f64 {
    let d = delta_j as f64;
    let e = 4.0 * p as f64 - alpha0 + 1.0;
    (d * (1.0 - alpha0) * b.ln() - e * (d * b.ln()).cosh().ln()).exp()
}

/// Cross-level factor τ_{p,a₁,a₂}(Δj) for Σ f^{a₁}(l/B^j) f^{a₂}(l/B^{j+Δj}) l^n.
pub fn tau_cross(delta_j: i32, a1: f64, a2: f64, n: f64, p: u32, b: f64) -> f64 {
    let pf = p as f64;
    let bd = b.powi(delta_j);
    let e = (a1 + a2) * pf + (n + 1.0) / 2.0;
    ((a1 * bd + a2 / bd) / (a1 + a2)).powf(-e) * bd.powf((a1 - a2) * pf + (n + 1.0) / 2.0)
}

/// Leading term of Σ_l f_p^a(l/B^j) l^n.
pub fn sum_asymptote(a: f64, n: f64, p: u32, b: f64, j: i32) -> Result<f64> {
    let e = a * p as f64 + (n + 1.0) / 2.0;
    if !(e > 0.0) {
        return Err(Error::domain("sum asymptote needs ap + (n+1)/2 > 0"));
    }
    Ok(b.powf((n + 1.0) * j as f64) / (2.0 * a.powf(e)) * gamma(e))
}

/// Leading term of Σ_l f_p^{a₁}(l/B^j) f_p^{a₂}(l/B^{j+Δj}) l^n.
pub fn sum_asymptote_cross(
    a1: f64,
    a2: f64,
    n: f64,
    p: u32,
    b: f64,
    j: i32,
    delta_j: i32,
) -> Result<f64> {
    let a = a1 + a2;
    Ok(sum_asymptote(a, n, p, b, j)? * tau_cross(delta_j, a1, a2, n, p, b))
}

/// Σ_{j=j0}^{jL} B^{sj} (log B^j)^moment in closed form.
pub fn geometric_sum(s: f64, b: f64, j0: i32, jl: i32, moment: u8) -> Result<f64> {
    if !(s > 0.0 && b > 1.0) {
        return Err(Error::domain("geometric sums need s > 0 and B > 1"));
    }
    if j0 > jl {
        return Err(Error::EmptyRange { j0, jl });
    }
    let bs = b.powf(s);
    let q = bs / (bs - 1.0);
    let r = 1.0 / (bs - 1.0);
    let top = b.powf(s * jl as f64);
    let bottom = b.powf(s * (j0 - 1) as f64);
    let (jl, jm) = (jl as f64, (j0 - 1) as f64);
    let lb = b.ln();
    Ok(match moment {
        0 => q * (top - bottom),
        1 => q * lb * ((jl - r) * top - (jm - r) * bottom),
        2 => {
            let c = bs / ((bs - 1.0) * (bs - 1.0));
            q * lb * lb * (((jl - r).powi(2) + c) * top - ((jm - r).powi(2) + c) * bottom)
        }
        _ => return Err(Error::domain("moment must be 0, 1 or 2")),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VandZ {
    pub v: f64,
    /// B^{−2s·jL} V, to be compared with [`normal_z_limit`].
    pub z_limit_check: f64,
}

/// V = (Σ B^{sj})(Σ B^{sj} log² B^j) − (Σ B^{sj} log B^j)² in closed form.
pub fn v_and_z(s: f64, b: f64, j0: i32, jl: i32) -> Result<VandZ> {
    if j0 > jl {
        return Err(Error::EmptyRange { j0, jl });
    }
    let bs = b.powf(s);
    let pre = (bs * b.ln() / (bs - 1.0)).powi(2);
    let diff = b.powf(s * jl as f64) - b.powf(s * (j0 - 1) as f64);
    let count = (jl - j0 + 1) as f64;
    let v = pre
        * (bs / (bs - 1.0).powi(2) * diff * diff
            - b.powf(s * (jl + j0 - 1) as f64) * count * count);
    Ok(VandZ {
        v,
        z_limit_check: b.powf(-2.0 * s * jl as f64) * v,
    })
}

/// log²B · B^{3s}/(B^s − 1)⁴.
pub fn normal_z_limit(s: f64, b: f64) -> f64 {
    let bs = b.powf(s);
    b.ln().powi(2) * bs.powi(3) / (bs - 1.0).powi(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauTildes {
    pub tau0: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau_tilde: f64,
    pub w_p: f64,
}

pub fn tau_tildes(p: u32, b: f64, alpha0: f64) -> Result<TauTildes> {
    let e = 4.0 * p as f64 - alpha0;
    if !(e > 0.0) {
        return Err(Error::domain(format!(
            "tau constants need 4p - alpha0 > 0, got {e}"
        )));
    }
    let big_p = e + 1.0;
    let two_p = 2f64.powf(big_p);
    let tau0 = two_p / (b.powf(e + 2.0) - 1.0);
    let tau1 = two_p * (b.powf(e + 4.0) - 1.0) / (b.powf(e + 2.0) - 1.0).powi(2);
    let be = b.powf(e);
    let w_p = (b.powi(6) * be * (b.powf(big_p - 1.0) + 1.0)
        + b.powi(4) * be * (b.powi(3) * b.powf(e + 1.0) - 6.0)
        + b * b * (be + 1.0)
        + 1.0)
        / (b * b + 1.0);
    let tau2 = two_p * w_p / (b.powf(e + 1.0) - 1.0).powi(3);
    let b2 = b * b;
    let tau_tilde = ((b2 + 1.0) * (tau0 + tau2 + tau0 * tau2) + 2.0 * tau1 - tau1 * tau1) / b2;
    Ok(TauTildes {
        tau0,
        tau1,
        tau2,
        tau_tilde,
        w_p,
    })
}

/// Φ(B) = log²B · B²/(B²−1)² · (4/(B²−1) + 2(log B − 1)/log B).
pub fn phi_b(b: f64) -> f64 {
    let lb = b.ln();
    let b2 = b * b;
    lb * lb * b2 / (b2 - 1.0).powi(2) * (4.0 / (b2 - 1.0) + 2.0 * (lb - 1.0) / lb)
}

/// ς₀² = σ₀²(1+τ̃)(B²−1)³/(B⁴ log²B).
pub fn varsigma0_sq(p: u32, b: f64, alpha0: f64) -> Result<f64> {
    let s1 = sigma0_sq(p, alpha0)? * (1.0 + tau_tildes(p, b, alpha0)?.tau_tilde);
    Ok(s1 * (b * b - 1.0).powi(3) / (b.powi(4) * b.ln().powi(2)))
}

/// Limit of B^{J_L}(α̂ − α₀) under G(l) = G₀(1 + κ/l + …).
pub fn bias_coeff(p: u32, b: f64, alpha0: f64, kappa: f64) -> Result<f64> {
    let ratio = i_ps(p, alpha0 + 1.0, 0, 1.0)? / i_ps(p, alpha0, 0, 1.0)?;
    Ok(-ratio * b.ln() / (b + 1.0) * kappa)
}

/// Limiting variance σ₀²(1+τ̃)/Φ(B) of g^{1/2} B^{J_L}(α̂ − α₀) on the narrow band.
pub fn narrow_band_variance(p: u32, b: f64, alpha0: f64) -> Result<f64> {
    Ok(sigma0_sq(p, alpha0)? * (1.0 + tau_tildes(p, b, alpha0)?.tau_tilde) / phi_b(b))
}

/// Limit B² log²B/(B²−1)² of the contrast curvature at α̂.
pub fn hessian_limit(b: f64) -> f64 {
    let b2 = b * b;
    b2 * b.ln().powi(2) / (b2 - 1.0).powi(2)
}

/// K_j(α)/K_j(α₀) B^{(α−α₀)j} in the limit, from the Gamma form of I_{p,0}.
pub fn kj_ratio_exact(p: u32, alpha: f64, alpha0: f64) -> f64 {
    let pf = p as f64;
    (0.5 * (alpha0 - alpha) * 2f64.ln() + ln_gamma(2.0 * pf + 1.0 - alpha / 2.0)
        - ln_gamma(2.0 * pf + 1.0 - alpha0 / 2.0))
    .exp()
}

/// The simplified form (2(2p+1))^{(α₀−α)/2}; agrees with the exact ratio only for large p.
pub fn kj_ratio_simplified(p: u32, alpha: f64, alpha0: f64) -> f64 {
    (2.0 * (2.0 * p as f64 + 1.0)).powf((alpha0 - alpha) / 2.0)
}

/// All constants for one (p, B, α₀, κ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticConstants {
    pub p: u32,
    pub b: f64,
    pub alpha0: f64,
    pub sigma0_sq: f64,
    pub tau_tilde_0: f64,
    pub tau_tilde_1: f64,
    pub tau_tilde_2: f64,
    pub tau_tilde: f64,
    pub sigma1_sq: f64,
    pub varsigma0_sq: f64,
    pub phi_b: f64,
    pub narrow_band_variance: f64,
    pub hessian_limit: f64,
    pub bias_coeff: f64,
}

impl AsymptoticConstants {
    pub fn compute(p: u32, b: f64, alpha0: f64, kappa: f64) -> Result<Self> {
        if !(b > 1.0) {
            return Err(Error::domain("B must be > 1"));
        }
        let sigma0_sq = sigma0_sq(p, alpha0)?;
        let t = tau_tildes(p, b, alpha0)?;
        let sigma1_sq = sigma0_sq * (1.0 + t.tau_tilde);
        let phi = phi_b(b);
        Ok(AsymptoticConstants {
            p,
            b,
            alpha0,
            sigma0_sq,
            tau_tilde_0: t.tau0,
            tau_tilde_1: t.tau1,
            tau_tilde_2: t.tau2,
            tau_tilde: t.tau_tilde,
            sigma1_sq,
            varsigma0_sq: sigma1_sq * (b * b - 1.0).powi(3) / (b.powi(4) * b.ln().powi(2)),
            phi_b: phi,
            narrow_band_variance: sigma1_sq / phi,
            hessian_limit: hessian_limit(b),
            bias_coeff: bias_coeff(p, b, alpha0, kappa)?,
        })
    }

    /// (name, value) pairs in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("p", self.p as f64),
            ("B", self.b),
            ("alpha0", self.alpha0),
            ("sigma0_sq", self.sigma0_sq),
            ("tau_tilde_0", self.tau_tilde_0),
            ("tau_tilde_1", self.tau_tilde_1),
            ("tau_tilde_2", self.tau_tilde_2),
            ("tau_tilde", self.tau_tilde),
            ("sigma1_sq", self.sigma1_sq),
            ("varsigma0_sq", self.varsigma0_sq),
            ("phi_B", self.phi_b),
            ("narrow_band_variance", self.narrow_band_variance),
            ("hessian_limit", self.hessian_limit),
            ("bias_coeff", self.bias_coeff),
        ]
    }
}

/// Spectral indices indexing the rows of the comparison table.
pub const TABLE1_ALPHA0: [f64; 3] = [2.0, 3.0, 4.0];
/// Standard-needlet bandwidths 2^{1/4}, √2, 2.
pub const TABLE1_B: [f64; 3] = [1.189_207_115_002_721, std::f64::consts::SQRT_2, 2.0];
pub const TABLE1_P: [u32; 3] = [2, 3, 4];
/// ρ₀²(α₀, B) of the standard-needlet estimator, as printed.
pub const TABLE1_RHO0_SQ: [[f64; 3]; 3] =
    [[5.00, 2.24, 1.16], [5.04, 2.53, 1.34], [5.10, 2.64, 1.57]];
/// Mexican-needlet column (α₀, p), as printed.
pub const TABLE1_SIGMA: [[f64; 3]; 3] =
    [[0.62, 0.49, 0.42], [0.67, 0.51, 0.43], [0.75, 0.55, 0.45]];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1 {
    pub alpha0: [f64; 3],
    pub b: [f64; 3],
    pub p: [u32; 3],
    pub rho0_sq: [[f64; 3]; 3],
    pub sigma: [[f64; 3]; 3],
}

pub fn table1_constants() -> Table1 {
    Table1 {
        alpha0: TABLE1_ALPHA0,
        b: TABLE1_B,
        p: TABLE1_P,
        rho0_sq: TABLE1_RHO0_SQ,
        sigma: TABLE1_SIGMA,
    }
}

/// ρ₀²(α₀, B); exact grid hits only unless `interpolate`, which is bilinear in (α₀, log B).
pub fn rho0_sq(alpha0: f64, b: f64, interpolate: bool) -> Result<f64> {
    const EPS: f64 = 1e-3;
    let ia = TABLE1_ALPHA0.iter().position(|a| (a - alpha0).abs() < EPS);
    let ib = TABLE1_B.iter().position(|x| (x - b).abs() < EPS);
    if let (Some(i), Some(k)) = (ia, ib) {
        return Ok(TABLE1_RHO0_SQ[i][k]);
    }
    let out_of_grid =
        || Error::Lookup(format!("(alpha0={alpha0}, B={b}) is not on the table grid"));
    if !interpolate {
        return Err(out_of_grid());
    }
    let lb = b.ln();
    let lbs = TABLE1_B.map(f64::ln);
    if !(TABLE1_ALPHA0[0]..=TABLE1_ALPHA0[2]).contains(&alpha0)
        || !(lbs[0] - 1e-12..=lbs[2] + 1e-12).contains(&lb)
    {
        return Err(out_of_grid());
    }
    let i = if alpha0 <= TABLE1_ALPHA0[1] { 0 } else { 1 };
    let k = if lb <= lbs[1] { 0 } else { 1 };
    let ta = (alpha0 - TABLE1_ALPHA0[i]) / (TABLE1_ALPHA0[i + 1] - TABLE1_ALPHA0[i]);
    let tb = ((lb - lbs[k]) / (lbs[k + 1] - lbs[k])).clamp(0.0, 1.0);
    let r = &TABLE1_RHO0_SQ;
    Ok((1.0 - ta) * (1.0 - tb) * r[i][k]
        + ta * (1.0 - tb) * r[i + 1][k]
        + (1.0 - ta) * tb * r[i][k + 1]
        + ta * tb * r[i + 1][k + 1])
}
