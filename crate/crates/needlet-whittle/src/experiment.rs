//! Seeded Monte Carlo runs: simulate → Ĉ_l → Whittle fit, one row per replication.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{bias_coeff, hessian_limit, narrow_band_variance, varsigma0_sq};
use crate::config::{BandSpec, ExperimentConfig};
use crate::error::{Error, Result};
use crate::harmonic::{empirical_cl, simulate_alm, EmpiricalSpectrum};
use crate::io::fmt_real;
use crate::needlet::{JRange, Truncation};
use crate::rng::split_seed;
use crate::spectrum::Correction;
use crate::stats::{jarque_bera, mean, normal_quantile, variance, JB_CRITICAL_0_001};
use crate::whittle::{Band, WhittleModel};

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "NEEDLET_WHITTLE_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub seed: u64,
    pub alpha_hat: f64,
    pub g_hat: f64,
    pub score: f64,
    pub hessian: f64,
    pub converged: bool,
    pub iterations: usize,
    pub at_boundary: bool,
    /// Error text when the fit failed; numeric fields are NaN then.
    pub failure: Option<String>,
}

impl ReplicationRow {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub n_ok: usize,
    pub n_failed: usize,
    pub alpha0: f64,
    pub jl: i32,
    pub mean_alpha: f64,
    pub se_alpha: f64,
    /// Factor applied to α̂ − α₀ for the variance check: B^{J_L}, or g^{1/2}B^{J_L} on the narrow band.
    pub variance_scale: f64,
    pub var_scaled: f64,
    /// Limiting variance for this band; absent for standard windows.
    pub theory_variance: Option<f64>,
    pub jarque_bera: f64,
    /// mean of B^{J_L}(α̂ − α₀).
    pub scaled_bias: f64,
    pub theory_bias: Option<f64>,
    pub mean_g_hat: f64,
    pub mean_hessian: f64,
    pub theory_hessian: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub j_range: JRange,
    pub rows: Vec<ReplicationRow>,
    pub aggregate: Aggregate,
}

/// Worker count: env override, then config, then all cores.
pub fn thread_count(config: &ExperimentConfig) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::config(
                0,
                format!("{THREADS_ENV}: expected a positive integer, found `{v}`"),
            )),
        };
    }
    Ok(config
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

fn band_g(config: &ExperimentConfig, jl: i32) -> Option<f64> {
    match config.band {
        BandSpec::Full => None,
        BandSpec::Narrow(g) => Some(g.value(jl)),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let threads = thread_count(config)?;
    run_experiment_with_threads(config, threads)
}

pub fn run_experiment_with_threads(
    config: &ExperimentConfig,
    threads: usize,
) -> Result<ExperimentSummary> {
    config.validate()?;
    let j_range = config.resolved_j_range()?;
    let band = match config.band {
        BandSpec::Full => Band::Full,
        BandSpec::Narrow(_) => Band::Narrow { j1: j_range.j0 },
    };
    let model = WhittleModel::new(
        &config.window,
        j_range,
        config.l_max,
        Truncation::BandLimited,
    )?;
    let noise_free = config
        .noise_free
        .then(|| EmpiricalSpectrum::noise_free(&config.model, config.l_max));
    let one = |r: usize| -> ReplicationRow {
        let seed = split_seed(config.master_seed, r as u64);
        let fit = (|| {
            let spec = match &noise_free {
                Some(s) => s.clone(),
                None => empirical_cl(&simulate_alm(&config.model, config.l_max, seed)?),
            };
            model.fit(&model.lambdas(&spec)?, band, &config.search)
        })();
        match fit {
            Ok(f) => ReplicationRow {
                replication: r,
                seed,
                alpha_hat: f.alpha_hat,
                g_hat: f.g_hat,
                score: f.score_at_hat,
                hessian: f.hessian_at_hat,
                converged: f.converged,
                iterations: f.iterations,
                at_boundary: f.at_boundary,
                failure: None,
            },
            Err(e) => ReplicationRow {
                replication: r,
                seed,
                alpha_hat: f64::NAN,
                g_hat: f64::NAN,
                score: f64::NAN,
                hessian: f64::NAN,
                converged: false,
                iterations: 0,
                at_boundary: false,
                failure: Some(e.to_string()),
            },
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Resource(e.to_string()))?;
    let rows: Vec<ReplicationRow> =
        pool.install(|| (1..=config.replications).into_par_iter().map(one).collect());
    let failed = rows.iter().filter(|r| r.failed()).count();
    if failed * 20 > rows.len() {
        return Err(Error::TooManyFailures {
            failed,
            total: rows.len(),
        });
    }
    let aggregate = aggregate(config, j_range, &rows)?;
    Ok(ExperimentSummary {
        config: config.clone(),
        j_range,
        rows,
        aggregate,
    })
}

/// Summary statistics over the successful rows, in row order.
pub fn aggregate(
    config: &ExperimentConfig,
    j_range: JRange,
    rows: &[ReplicationRow],
) -> Result<Aggregate> {
    let ok: Vec<&ReplicationRow> = rows.iter().filter(|r| !r.failed()).collect();
    if ok.is_empty() {
        return Err(Error::TooManyFailures {
            failed: rows.len(),
            total: rows.len(),
        });
    }
    let a0 = config.model.alpha0;
    let b = config.window.b;
    let jl = j_range.jl;
    let bjl = b.powi(jl);
    let g = band_g(config, jl);
    let variance_scale = bjl * g.map_or(1.0, f64::sqrt);
    let alpha: Vec<f64> = ok.iter().map(|r| r.alpha_hat).collect();
    let scaled: Vec<f64> = alpha.iter().map(|a| variance_scale * (a - a0)).collect();
    let n = alpha.len() as f64;
    let spread = |x: &[f64]| if x.len() > 1 { variance(x) } else { 0.0 };
    let p = config.window.p();
    let theory_variance = match (p, g) {
        (Some(p), None) => varsigma0_sq(p, b, a0).ok(),
        (Some(p), Some(_)) => narrow_band_variance(p, b, a0).ok(),
        _ => None,
    };
    let theory_bias = match (&config.model.correction, p) {
        (Correction::None, _) => Some(0.0),
        (Correction::Kappa { kappa }, Some(p)) => bias_coeff(p, b, a0, *kappa).ok(),
        _ => None,
    };
    Ok(Aggregate {
        n_ok: ok.len(),
        n_failed: rows.len() - ok.len(),
        alpha0: a0,
        jl,
        mean_alpha: mean(&alpha),
        se_alpha: (spread(&alpha) / n).sqrt(),
        variance_scale,
        var_scaled: spread(&scaled),
        theory_variance,
        jarque_bera: if ok.len() > 2 && spread(&alpha) > 0.0 {
            jarque_bera(&scaled)
        } else {
            0.0
        },
        scaled_bias: alpha.iter().map(|a| bjl * (a - a0)).sum::<f64>() / n,
        theory_bias,
        mean_g_hat: ok.iter().map(|r| r.g_hat).sum::<f64>() / n,
        mean_hessian: ok.iter().map(|r| r.hessian).sum::<f64>() / n,
        theory_hessian: hessian_limit(b),
    })
}

/// Standardized scaled estimates (x − mean)/sd in row order.
pub fn standardized(summary: &ExperimentSummary) -> Vec<f64> {
    let a = &summary.aggregate;
    let sd = a.var_scaled.sqrt();
    summary
        .rows
        .iter()
        .filter(|r| !r.failed())
        .map(|r| {
            (a.variance_scale * (r.alpha_hat - a.alpha0)
                - a.variance_scale * (a.mean_alpha - a.alpha0))
                / sd
        })
        .collect()
}

/// Density histogram of the standardized sample on [−4, 4]: (bin centre, density).
pub fn histogram(z: &[f64], bins: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = (-4.0, 4.0);
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in z {
        if (lo..hi).contains(&v) {
            counts[((v - lo) / w) as usize] += 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (lo + (i as f64 + 0.5) * w, c as f64 / (z.len() as f64 * w)))
        .collect()
}

/// Normal QQ pairs (theoretical quantile, sorted sample).
pub fn qq_points(z: &[f64]) -> Vec<(f64, f64)> {
    let mut s = z.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| (normal_quantile((i as f64 + 0.5) / n), v))
        .collect()
}

const ROW_HEADER: [&str; 10] = [
    "replication",
    "seed",
    "alpha_hat",
    "g_hat",
    "score",
    "hessian",
    "converged",
    "iterations",
    "at_boundary",
    "failure",
];

fn opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

impl ExperimentSummary {
    pub fn write_rows_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(ROW_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.replication.to_string(),
                r.seed.to_string(),
                fmt_real(r.alpha_hat),
                fmt_real(r.g_hat),
                fmt_real(r.score),
                fmt_real(r.hessian),
                r.converged.to_string(),
                r.iterations.to_string(),
                r.at_boundary.to_string(),
                r.failure.clone().unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_aggregate_csv(&self, w: impl Write) -> Result<()> {
        let a = &self.aggregate;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "value"])?;
        let rows: Vec<(&str, String)> = vec![
            ("n_ok", a.n_ok.to_string()),
            ("n_failed", a.n_failed.to_string()),
            ("alpha0", fmt_real(a.alpha0)),
            ("j0", self.j_range.j0.to_string()),
            ("jL", a.jl.to_string()),
            ("mean_alpha", fmt_real(a.mean_alpha)),
            ("se_alpha", fmt_real(a.se_alpha)),
            ("variance_scale", fmt_real(a.variance_scale)),
            ("var_scaled", fmt_real(a.var_scaled)),
            ("theory_variance", opt(a.theory_variance)),
            ("jarque_bera", fmt_real(a.jarque_bera)),
            ("scaled_bias", fmt_real(a.scaled_bias)),
            ("theory_bias", opt(a.theory_bias)),
            ("mean_g_hat", fmt_real(a.mean_g_hat)),
            ("mean_hessian", fmt_real(a.mean_hessian)),
            ("theory_hessian", fmt_real(a.theory_hessian)),
        ];
        for (k, v) in rows {
            out.write_record([k, v.as_str()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `<stem>.rows.csv`, `<stem>.summary.csv`, `<stem>.config`,
    /// `<stem>.hist.csv` and `<stem>.qq.csv`; returns the paths.
    pub fn write_files(&self, stem: &Path) -> Result<Vec<PathBuf>> {
        if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let path = |ext: &str| PathBuf::from(format!("{}.{ext}", stem.display()));
        let files = ["rows.csv", "summary.csv", "config", "hist.csv", "qq.csv"].map(path);
        self.write_rows_csv(File::create(&files[0])?)?;
        self.write_aggregate_csv(File::create(&files[1])?)?;
        std::fs::write(&files[2], self.config.serialize())?;
        let z = standardized(self);
        write_xy(File::create(&files[3])?, &histogram(&z, 32))?;
        write_xy(File::create(&files[4])?, &qq_points(&z))?;
        Ok(files.to_vec())
    }

    /// Reads files written by [`write_files`](Self::write_files) and checks the
    /// stored aggregate against one recomputed from the rows.
    pub fn load(stem: &Path) -> Result<Self> {
        let path = |ext: &str| PathBuf::from(format!("{}.{ext}", stem.display()));
        let config = ExperimentConfig::load(&path("config"))?;
        let j_range = config.resolved_j_range()?;
        let mut rdr = csv::Reader::from_path(path("rows.csv"))?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| {
                f(i).parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number `{}`", f(i))))
            };
            let int = |i: usize| {
                f(i).parse::<u64>()
                    .map_err(|_| Error::Format(format!("bad integer `{}`", f(i))))
            };
            let flag = |i: usize| {
                f(i).parse::<bool>()
                    .map_err(|_| Error::Format(format!("bad flag `{}`", f(i))))
            };
            rows.push(ReplicationRow {
                replication: int(0)? as usize,
                seed: int(1)?,
                alpha_hat: num(2)?,
                g_hat: num(3)?,
                score: num(4)?,
                hessian: num(5)?,
                converged: flag(6)?,
                iterations: int(7)? as usize,
                at_boundary: flag(8)?,
                failure: Some(f(9).to_string()).filter(|s| !s.is_empty()),
            });
        }
        let aggregate = aggregate(&config, j_range, &rows)?;
        let summary = ExperimentSummary {
            config,
            j_range,
            rows,
            aggregate,
        };
        let mut fresh = Vec::new();
        summary.write_aggregate_csv(&mut fresh)?;
        if fresh != std::fs::read(path("summary.csv"))? {
            return Err(Error::Format(
                "stored aggregate does not match the rows".into(),
            ));
        }
        Ok(summary)
    }
}

fn write_xy(w: impl Write, pts: &[(f64, f64)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y"])?;
    for (x, y) in pts {
        out.write_record([fmt_real(*x), fmt_real(*y)])?;
    }
    out.flush()?;
    Ok(())
}

/// One tolerance check on an aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub observed: f64,
    pub target: f64,
    pub pass: bool,
}

/// Tolerance checks that apply to this run's model and band.
pub fn checks(summary: &ExperimentSummary) -> Vec<Check> {
    let a = &summary.aggregate;
    let narrow = matches!(summary.config.band, BandSpec::Narrow(_));
    let mut out = Vec::new();
    // Unbiased only for a pure power law.
    if a.theory_bias == Some(0.0) {
        out.push(Check {
            name: "consistency |mean - alpha0| <= 3 SE",
            observed: (a.mean_alpha - a.alpha0).abs(),
            target: 3.0 * a.se_alpha,
            pass: (a.mean_alpha - a.alpha0).abs() <= 3.0 * a.se_alpha,
        });
    }
    if let Some(t) = a.theory_variance {
        let tol = if narrow { 0.35 } else { 0.25 };
        out.push(Check {
            name: if narrow {
                "narrow-band variance within 35%"
            } else {
                "variance within 25%"
            },
            observed: a.var_scaled,
            target: t,
            pass: (a.var_scaled / t - 1.0).abs() <= tol,
        });
    }
    out.push(Check {
        name: "Jarque-Bera below 0.001 critical value",
        observed: a.jarque_bera,
        target: JB_CRITICAL_0_001,
        pass: a.jarque_bera < JB_CRITICAL_0_001,
    });
    if !narrow {
        out.push(Check {
            name: "hessian within 15%",
            observed: a.mean_hessian,
            target: a.theory_hessian,
            pass: (a.mean_hessian / a.theory_hessian - 1.0).abs() <= 0.15,
        });
        if let Some(t) = a.theory_bias.filter(|t| *t != 0.0) {
            out.push(Check {
                name: "scaled bias within 30%",
                observed: a.scaled_bias,
                target: t,
                pass: (a.scaled_bias / t - 1.0).abs() <= 0.30,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(r: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::canonical(r, 42);
        c.l_max = 256;
        c
    }

    #[test]
    fn noise_free_single_row_is_exact() {
        let mut c = small(1);
        c.noise_free = true;
        let s = run_experiment_with_threads(&c, 1).unwrap();
        assert_eq!(s.rows.len(), 1);
        assert!(
            (s.rows[0].alpha_hat - 3.0).abs() < 1e-5,
            "{}",
            s.rows[0].alpha_hat
        );
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let c = small(8);
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_experiment_with_threads(&c, 1)
            .unwrap()
            .write_rows_csv(&mut a)
            .unwrap();
        run_experiment_with_threads(&c, 3)
            .unwrap()
            .write_rows_csv(&mut b)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn files_reload_and_verify() {
        let s = run_experiment_with_threads(&small(6), 2).unwrap();
        let stem = std::env::temp_dir()
            .join(format!("nw-exp-{}", std::process::id()))
            .join("run");
        s.write_files(&stem).unwrap();
        let back = ExperimentSummary::load(&stem).unwrap();
        assert_eq!(back.aggregate, s.aggregate);
        let summary = PathBuf::from(format!("{}.summary.csv", stem.display()));
        let text = std::fs::read_to_string(&summary)
            .unwrap()
            .replace("n_ok,6", "n_ok,5");
        std::fs::write(&summary, text).unwrap();
        assert!(matches!(
            ExperimentSummary::load(&stem),
            Err(Error::Format(_))
        ));
        std::fs::remove_dir_all(stem.parent().unwrap()).ok();
    }

    #[test]
    fn plot_data_shapes() {
        let z: Vec<f64> = (0..200)
            .map(|i| normal_quantile((i as f64 + 0.5) / 200.0))
            .collect();
        let h = histogram(&z, 16);
        let mass: f64 = h.iter().map(|(_, d)| d * 0.5).sum();
        assert!((mass - 1.0).abs() < 0.01);
        let q = qq_points(&z);
        assert!(q.iter().all(|(x, y)| (x - y).abs() < 1e-9));
    }
}
