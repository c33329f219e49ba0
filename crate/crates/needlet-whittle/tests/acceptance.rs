//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! Tolerances are pinned here and are not tuned to the observed values.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use needlet_whittle::asymptotics::{
    gauss_moment_w, geometric_sum, phi_b, sigma0_sq, sum_asymptote, table1_constants, tau_b,
    tau_tildes, TABLE1_RHO0_SQ, TABLE1_SIGMA,
};
use needlet_whittle::config::{BandSpec, ExperimentConfig};
use needlet_whittle::experiment::{run_experiment_with_threads, ExperimentSummary};
use needlet_whittle::harmonic::EmpiricalSpectrum;
use needlet_whittle::special::gauss_legendre;
use needlet_whittle::sphere::frame_check;
use needlet_whittle::stats::{ks_chi_square, JB_CRITICAL_0_001};
use needlet_whittle::whittle::{Band, GRule, WhittleModel};
use needlet_whittle::{
    empirical_cl, simulate_alm, JRange, NeedletWindow, PowerSpectrumModel, SearchConfig, Truncation,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

const MASTER_SEED: u64 = 20240101;

// Criterion tolerances.
const SIGMA_TABLE_TOL: f64 = 0.005;
const SUM_ASYMPTOTE_TOL: f64 = 0.01;
/// Relative errors below this are rounding noise and carry no ordering in j.
const SUM_RESOLUTION: f64 = 1e-12;
const TAU_SUM_TOL: f64 = 0.01;
const TAU_SUM_JL: i32 = 30;
const CONSISTENCY_SE: f64 = 3.0;
const CLT_VARIANCE_TOL: f64 = 0.25;
const BIAS_TOL: f64 = 0.30;
const NARROW_VARIANCE_TOL: f64 = 0.35;
const HESSIAN_TOL: f64 = 0.15;
const FRAME_TOL: f64 = 0.03;
const KS_LEVEL: f64 = 0.001;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn table_sigma() -> Outcome {
    let t = table1_constants();
    let mut worst = 0.0f64;
    let mut off = Vec::new();
    for (i, a0) in t.alpha0.iter().enumerate() {
        for (k, p) in t.p.iter().enumerate() {
            let v = sigma0_sq(*p, *a0).unwrap();
            let d = (round2(v) - t.sigma[i][k]).abs();
            worst = worst.max(d);
            if d > SIGMA_TABLE_TOL {
                off.push(format!("(alpha0={a0}, p={p}) {v:.5} vs {}", t.sigma[i][k]));
            }
        }
    }
    outcome(
        worst <= SIGMA_TABLE_TOL,
        format!(
            "max |round2(sigma0^2) - printed| = {worst:.4} over 9 cells; off: [{}]",
            off.join(", ")
        ),
    )
}

fn table_rho() -> Outcome {
    let verbatim = TABLE1_RHO0_SQ == [[5.00, 2.24, 1.16], [5.04, 2.53, 1.34], [5.10, 2.64, 1.57]]
        && TABLE1_SIGMA == [[0.62, 0.49, 0.42], [0.67, 0.51, 0.43], [0.75, 0.55, 0.45]];
    let t = table1_constants();
    let mut cells = 0;
    let mut below = 0;
    for (i, a0) in t.alpha0.iter().enumerate() {
        for p in t.p {
            for k in 0..3 {
                cells += 1;
                below += usize::from(sigma0_sq(p, *a0).unwrap() < t.rho0_sq[i][k]);
            }
        }
    }
    outcome(
        verbatim && below == cells,
        format!("verbatim={verbatim}, sigma < rho in {below}/{cells} (alpha0, p, B) cells"),
    )
}

fn sum_asymptotics() -> Outcome {
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut cases = 0;
    for a0 in [2.5, 3.0, 4.0] {
        for b in [SQRT_2, 2.0] {
            let w = NeedletWindow::mexican(2, b).unwrap();
            for (a, n) in [(2.0, 1.0 - a0), (4.0, 1.0 - 2.0 * a0)] {
                let mut prev = f64::INFINITY;
                let js: Vec<i32> = (1..40)
                    .filter(|j| (64.0..=512.0 + 1e-9).contains(&b.powi(*j)))
                    .collect();
                for j in js {
                    let bj = b.powi(j);
                    let top = (8.0 * bj).ceil() as usize;
                    let brute: f64 = (1..=top)
                        .map(|l| w.window(l as f64 / bj).powf(a) * (l as f64).powf(n))
                        .sum();
                    let err = (brute / sum_asymptote(a, n, 2, b, j).unwrap() - 1.0).abs();
                    worst = worst.max(err);
                    monotone &= err <= prev.max(SUM_RESOLUTION);
                    prev = err;
                    cases += 1;
                }
            }
        }
    }
    outcome(
        worst < SUM_ASYMPTOTE_TOL && monotone,
        format!("{cases} cases, max relative error {worst:.2e}, non-increasing in j above {SUM_RESOLUTION:e}: {monotone}"),
    )
}

fn tau_sums() -> Outcome {
    let (p, b, a0) = (2, 2.0f64, 3.0);
    let jl = TAU_SUM_JL;
    let j0 = -jl;
    let lb = b.ln();
    let mut s = [0.0f64; 3];
    for j in j0..=jl {
        let inner: f64 = (j0 - j..=jl - j)
            .map(|d| tau_b(d, p, b, a0) * b.powf(a0 * d as f64))
            .sum();
        for (m, acc) in s.iter_mut().enumerate() {
            *acc += b.powi(2 * j) * (j as f64 * lb).powi(m as i32) * inner;
        }
    }
    let t = tau_tildes(p, b, a0).unwrap();
    let b2 = b * b;
    let f = b.powi(2 * jl) * b2 / (b2 - 1.0);
    let jlf = jl as f64;
    let closed = [
        f * (1.0 + t.tau0),
        f * lb * ((1.0 + t.tau0) * jlf - (1.0 + t.tau1) / (b2 - 1.0)),
        f * lb
            * lb
            * ((1.0 + t.tau0) * jlf * jlf - 2.0 * (1.0 + t.tau1) / (b2 - 1.0) * jlf
                + (b2 + 1.0) / (b2 - 1.0).powi(2) * (1.0 + t.tau2)),
    ];
    let ratios: Vec<f64> = s.iter().zip(&closed).map(|(x, c)| x / c).collect();
    let pass = ratios.iter().all(|r| (r - 1.0).abs() <= TAU_SUM_TOL);
    outcome(
        pass,
        format!(
            "brute/closed at J_L={jl}: S0 {:.4}, S1 {:.4}, S2 {:.4}",
            ratios[0], ratios[1], ratios[2]
        ),
    )
}

fn run(config: &ExperimentConfig) -> ExperimentSummary {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    run_experiment_with_threads(config, threads).expect("experiment")
}

fn consistency(s: &ExperimentSummary) -> Outcome {
    let a = &s.aggregate;
    let dev = (a.mean_alpha - a.alpha0).abs();
    outcome(
        dev <= CONSISTENCY_SE * a.se_alpha,
        format!(
            "R={}, mean alpha_hat {:.6}, |dev| {dev:.2e} vs 3 SE {:.2e}",
            a.n_ok,
            a.mean_alpha,
            3.0 * a.se_alpha
        ),
    )
}

fn clt(s: &ExperimentSummary) -> Outcome {
    let a = &s.aggregate;
    let theory = a.theory_variance.expect("mexican window");
    let var_ok = (a.var_scaled / theory - 1.0).abs() <= CLT_VARIANCE_TOL;
    let jb_ok = a.jarque_bera < JB_CRITICAL_0_001;
    outcome(
        var_ok && jb_ok,
        format!(
            "Var(B^JL(a-a0)) {:.4} vs varsigma0^2 {theory:.4} (ratio {:.4}, {}); JB {:.3} < {JB_CRITICAL_0_001:.4}: {jb_ok}",
            a.var_scaled,
            a.var_scaled / theory,
            if var_ok { "within 25%" } else { "outside 25%" },
            a.jarque_bera
        ),
    )
}

fn bias(s: &ExperimentSummary) -> Outcome {
    let a = &s.aggregate;
    let theory = a.theory_bias.expect("kappa model");
    outcome(
        (a.scaled_bias / theory - 1.0).abs() <= BIAS_TOL,
        format!(
            "R={}, mean B^JL(a-a0) {:.4} vs closed form {theory:.4}",
            a.n_ok, a.scaled_bias
        ),
    )
}

fn narrow(full: &ExperimentSummary, nb: &ExperimentSummary) -> Outcome {
    let (f, n) = (&full.aggregate, &nb.aggregate);
    let smaller = n.scaled_bias.abs() < f.scaled_bias.abs();
    let theory = n.theory_variance.expect("mexican window");
    let var_ok = (n.var_scaled / theory - 1.0).abs() <= NARROW_VARIANCE_TOL;
    outcome(
        smaller && var_ok,
        format!(
            "|bias| narrow {:.4} < full {:.4}: {smaller}; Var(g^1/2 B^JL(a-a0)) {:.4} vs {theory:.4} (ratio {:.4})",
            n.scaled_bias.abs(),
            f.scaled_bias.abs(),
            n.var_scaled,
            n.var_scaled / theory
        ),
    )
}

fn hessian(s: &ExperimentSummary) -> Outcome {
    let a = &s.aggregate;
    outcome(
        (a.mean_hessian / a.theory_hessian - 1.0).abs() <= HESSIAN_TOL,
        format!(
            "mean hessian {:.4} vs B^2 log^2 B/(B^2-1)^2 = {:.4}",
            a.mean_hessian, a.theory_hessian
        ),
    )
}

fn frame() -> Outcome {
    let model = PowerSpectrumModel::power_law(3.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for j in 3..=6 {
        for s in 0..20u64 {
            let f = frame_check(
                &model,
                j,
                2,
                2.0,
                needlet_whittle::rng::split_seed(MASTER_SEED, s),
                1.0,
            )
            .unwrap();
            worst = worst.max(f.relative_gap);
        }
    }
    outcome(
        worst < FRAME_TOL,
        format!("j=3..6 x 20 seeds, max relative gap {worst:.2e}"),
    )
}

fn chi_square_law() -> Outcome {
    let model = PowerSpectrumModel::power_law(3.0, 1.0).unwrap();
    let degrees = [16usize, 64, 256];
    let r = 2000;
    let mut samples = vec![Vec::with_capacity(r); degrees.len()];
    for k in 0..r {
        let spec = empirical_cl(
            &simulate_alm(
                &model,
                256,
                needlet_whittle::rng::split_seed(MASTER_SEED, k as u64),
            )
            .unwrap(),
        );
        for (i, &l) in degrees.iter().enumerate() {
            samples[i].push((2 * l + 1) as f64 * spec.c_hat(l) / model.c_l(l).unwrap());
        }
    }
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, &l) in degrees.iter().enumerate() {
        let ks = ks_chi_square(&samples[i], (2 * l + 1) as f64);
        pass &= ks.p_value >= KS_LEVEL;
        parts.push(format!("l={l}: D={:.4} p={:.3}", ks.statistic, ks.p_value));
    }
    outcome(pass, format!("R={r}; {}", parts.join(", ")))
}

fn properties() -> Outcome {
    let cfg = Config {
        cases: 32,
        failure_persistence: None,
        ..Config::default()
    };
    let window = NeedletWindow::mexican(2, 2.0).unwrap();
    let range = JRange::new(1, 8, 1.0).unwrap();
    let search = SearchConfig::default();
    let model = WhittleModel::new(&window, range, 512, Truncation::BandLimited).unwrap();
    let mut failures = Vec::new();
    let mut check = |name: &str, r: Result<(), proptest::test_runner::TestError<String>>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };

    check(
        "noise-free exactness",
        TestRunner::new(cfg.clone())
            .run(&(2.2f64..7.5, 0.1f64..10.0), |(a0, g0)| {
                let m = PowerSpectrumModel::power_law(a0, g0).unwrap();
                let lam = model
                    .lambdas(&EmpiricalSpectrum::noise_free(&m, 512))
                    .unwrap();
                let fit = model.fit(&lam, Band::Full, &search).unwrap();
                prop_assert!((fit.alpha_hat - a0).abs() < 1e-5);
                prop_assert!((fit.g_hat / g0 - 1.0).abs() < 1e-4);
                Ok(())
            })
            .map_err(|e| e.map_reason_string()),
    );
    check(
        "equivariance",
        TestRunner::new(cfg.clone())
            .run(&(any::<u64>(), 0.01f64..100.0), |(seed, s)| {
                let m = PowerSpectrumModel::power_law(3.0, 1.0).unwrap();
                let spec = empirical_cl(&simulate_alm(&m, 512, seed).unwrap());
                let a = model
                    .fit(&model.lambdas(&spec).unwrap(), Band::Full, &search)
                    .unwrap();
                let b = model
                    .fit(
                        &model.lambdas(&spec.scaled(s)).unwrap(),
                        Band::Full,
                        &search,
                    )
                    .unwrap();
                prop_assert!((a.alpha_hat - b.alpha_hat).abs() <= 2.0 * search.tol);
                let lam = model.lambdas(&spec).unwrap();
                let g_at = model.contrast_fn(&lam).unwrap().g_hat(b.alpha_hat);
                prop_assert!((b.g_hat / (s * g_at) - 1.0).abs() < 1e-12);
                Ok(())
            })
            .map_err(|e| e.map_reason_string()),
    );
    check(
        "c_B invariance",
        TestRunner::new(cfg.clone())
            .run(
                &(any::<u64>(), prop::sample::select(vec![0.5, 1.0, 3.0])),
                |(seed, c_b)| {
                    let m = PowerSpectrumModel::power_law(3.0, 1.0).unwrap();
                    let spec = empirical_cl(&simulate_alm(&m, 512, seed).unwrap());
                    let other = WhittleModel::new(
                        &window,
                        range.with_c_b(c_b),
                        512,
                        Truncation::BandLimited,
                    )
                    .unwrap();
                    let a = model
                        .fit(&model.lambdas(&spec).unwrap(), Band::Full, &search)
                        .unwrap();
                    let b = other
                        .fit(&other.lambdas(&spec).unwrap(), Band::Full, &search)
                        .unwrap();
                    prop_assert!((a.alpha_hat - b.alpha_hat).abs() <= 2.0 * search.tol);
                    Ok(())
                },
            )
            .map_err(|e| e.map_reason_string()),
    );
    check(
        "profile optimality",
        TestRunner::new(cfg.clone())
            .run(
                &(any::<u64>(), 2.1f64..8.0, 0.01f64..100.0),
                |(seed, alpha, g)| {
                    let m = PowerSpectrumModel::power_law(3.0, 1.0).unwrap();
                    let lam = model
                        .lambdas(&empirical_cl(&simulate_alm(&m, 512, seed).unwrap()))
                        .unwrap();
                    let c = model.contrast_fn(&lam).unwrap();
                    let prof = c.two_parameter(alpha, c.g_hat(alpha));
                    prop_assert!((prof - c.contrast(alpha)).abs() < 1e-10 * (1.0 + prof.abs()));
                    prop_assert!(prof <= c.two_parameter(alpha, g * c.g_hat(alpha)) + 1e-12);
                    Ok(())
                },
            )
            .map_err(|e| e.map_reason_string()),
    );
    check(
        "geometric-sum identities",
        TestRunner::new(cfg.clone())
            .run(
                &(0.1f64..4.0, 1.05f64..4.0, -10i32..5, 0i32..15, 0u8..3),
                |(s, b, j0, len, moment)| {
                    let jl = j0 + len;
                    let brute: f64 = (j0..=jl)
                        .map(|j| b.powf(s * j as f64) * (j as f64 * b.ln()).powi(moment as i32))
                        .sum();
                    let closed = geometric_sum(s, b, j0, jl, moment).unwrap();
                    prop_assert!(
                        (closed - brute).abs() <= 1e-9 * (1.0 + brute.abs()),
                        "{closed} vs {brute}"
                    );
                    Ok(())
                },
            )
            .map_err(|e| e.map_reason_string()),
    );
    check(
        "W-quadrature agreement",
        TestRunner::new(cfg.clone())
            .run(&(0.0f64..6.0, 0.5f64..4.0, 0u8..3), |(a, b, s)| {
                let (q, q_abs) = w_quadrature(a, b, s);
                let closed = gauss_moment_w(a, b, s).unwrap();
                prop_assert!((q - closed).abs() <= 1e-10 * q_abs, "{q} vs {closed}");
                Ok(())
            })
            .map_err(|e| e.map_reason_string()),
    );
    check(
        "Phi(B) positivity",
        TestRunner::new(Config {
            cases: 256,
            ..cfg.clone()
        })
        .run(&(1e-6f64..20.0), |d| {
            prop_assert!(phi_b(1.0 + d) > 0.0);
            Ok(())
        })
        .map_err(|e| e.map_reason_string()),
    );
    check(
        "determinism and parallel reproducibility",
        TestRunner::new(Config { cases: 4, ..cfg })
            .run(&any::<u64>(), |seed| {
                let mut c = ExperimentConfig::canonical(6, seed);
                c.l_max = 256;
                let (mut a, mut b) = (Vec::new(), Vec::new());
                run_experiment_with_threads(&c, 1)
                    .unwrap()
                    .write_rows_csv(&mut a)
                    .unwrap();
                run_experiment_with_threads(&c, 4)
                    .unwrap()
                    .write_rows_csv(&mut b)
                    .unwrap();
                prop_assert_eq!(a, b);
                let m = PowerSpectrumModel::power_law(3.0, 1.0).unwrap();
                prop_assert_eq!(
                    simulate_alm(&m, 128, seed).unwrap(),
                    simulate_alm(&m, 128, seed).unwrap()
                );
                Ok(())
            })
            .map_err(|e| e.map_reason_string()),
    );
    if failures.is_empty() {
        outcome(true, "8 properties hold over seeded random cases")
    } else {
        outcome(false, failures.join("; "))
    }
}

/// ∫₀^∞ t^{2a} e^{−bt²} logˢt dt and ∫|·| by Gauss–Legendre on panels graded toward 0.
fn w_quadrature(a: f64, b: f64, s: u8) -> (f64, f64) {
    let (x, w) = gauss_legendre(48);
    let f = |t: f64| t.powf(2.0 * a) * (-b * t * t).exp() * t.ln().powi(s as i32);
    let mut edges: Vec<f64> = (0..=80).rev().map(|k| 0.5f64.powi(k)).collect();
    let top = 1.0 + 14.0 / b.sqrt();
    edges.extend((1..=64).map(|k| 1.0 + (top - 1.0) * k as f64 / 64.0));
    let (mut q, mut q_abs) = (0.0, 0.0);
    for e in edges.windows(2) {
        let (lo, hi) = (e[0], e[1]);
        // log t changes sign at 1, which is a panel edge.
        for (xi, wi) in x.iter().zip(&w) {
            let v = 0.5 * (hi - lo) * wi * f(0.5 * (hi - lo) * xi + 0.5 * (hi + lo));
            q += v;
            q_abs += v.abs();
        }
    }
    (q, q_abs)
}

trait ReasonString {
    fn map_reason_string(self) -> proptest::test_runner::TestError<String>;
}

impl<T: std::fmt::Debug> ReasonString for proptest::test_runner::TestError<T> {
    fn map_reason_string(self) -> proptest::test_runner::TestError<String> {
        match self {
            proptest::test_runner::TestError::Abort(r) => {
                proptest::test_runner::TestError::Abort(r)
            }
            proptest::test_runner::TestError::Fail(r, v) => {
                proptest::test_runner::TestError::Fail(r, format!("{v:?}"))
            }
        }
    }
}

fn main() {
    let t0 = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!(
            "{} [{n:>2}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };

    report(1, "comparison table sigma column", table_sigma());
    report(
        2,
        "comparison table rho column and sigma < rho",
        table_rho(),
    );
    report(3, "single-level sum asymptotics", sum_asymptotics());
    report(4, "cross-level tau sums", tau_sums());

    let canonical = run(&ExperimentConfig::canonical(500, MASTER_SEED));
    report(5, "consistency", consistency(&canonical));
    report(6, "CLT variance and normality", clt(&canonical));

    let mut kappa = ExperimentConfig::canonical(1000, MASTER_SEED);
    kappa.model = PowerSpectrumModel::with_kappa(3.0, 1.0, 0.5).unwrap();
    let full = run(&kappa);
    report(7, "bias constant", bias(&full));
    let mut nb = kappa.clone();
    nb.band = BandSpec::Narrow(GRule::Constant(0.5));
    let narrow_run = run(&nb);
    report(8, "narrow band", narrow(&full, &narrow_run));

    report(9, "hessian limit", hessian(&canonical));
    report(10, "nearly tight frame", frame());
    report(11, "chi-square law of c_hat", chi_square_law());
    report(12, "property suite", properties());

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed {:?} in {:.1}s",
        results.len() - failed.len(),
        failed.len(),
        failed,
        t0.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
