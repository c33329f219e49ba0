//! Command-line front end. Exit codes: 0 success, 2 config/input, 3 numeric/domain,
//! 4 failed tolerance check under `montecarlo --check`.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::asymptotics::{sigma0_sq, table1_constants, AsymptoticConstants};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::{checks, run_experiment};
use crate::harmonic::{empirical_cl, simulate_alm};
use crate::io::{fmt_real, read_spectrum_file, write_alm, write_fit_csv, write_spectrum_csv};
use crate::needlet::{select_j_range, JRange, JRangePolicy, NeedletWindow};
use crate::rng::split_seed;
use crate::spectrum::PowerSpectrumModel;
use crate::sphere::{empirical_beta_correlation, frame_check};
use crate::whittle::{fit_full_band, fit_narrow_band, plug_in, GRule, SearchConfig};

pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "needlet-whittle",
    version,
    about = "Needlet Whittle estimation of the spectral index of spherical Gaussian fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Mexican,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandArg {
    Full,
    Narrow,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print asymptotic constants and the comparison table as CSV.
    Theory {
        #[arg(long)]
        p: u32,
        #[arg(long = "B", alias = "b")]
        b: f64,
        #[arg(long)]
        alpha0: f64,
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
    },
    /// Simulate one field per replication and write coefficient and spectrum files.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output stem; defaults to output.path from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit α from a spectrum file (binary or `l,c_hat` CSV).
    Estimate {
        #[arg(long)]
        spectrum_file: PathBuf,
        #[arg(long, value_enum, default_value = "mexican")]
        window: WindowArg,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long = "B", alias = "b", default_value_t = 2.0)]
        b: f64,
        #[arg(long, value_enum, default_value = "full")]
        band: BandArg,
        /// Narrow-band bandwidth; J_L^{-3} when omitted.
        #[arg(long)]
        g: Option<f64>,
        #[arg(long, requires = "jl")]
        j0: Option<i32>,
        #[arg(long)]
        jl: Option<i32>,
    },
    /// Run a seeded Monte Carlo experiment.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 4 when an applicable tolerance check fails.
        #[arg(long)]
        check: bool,
    },
    /// Frame identity and coefficient-correlation diagnostics on a cubature grid.
    RealspaceCheck {
        #[arg(long)]
        j: i32,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long = "B", alias = "b", default_value_t = 2.0)]
        b: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3.0)]
        alpha0: f64,
        /// Seeds used for the frame check and the correlation estimate.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
    /// Standard-needlet pilot fit followed by a mexican refit when it pays.
    Plugin {
        #[arg(long)]
        spectrum_file: PathBuf,
        #[arg(long)]
        p: u32,
        #[arg(long, default_value_t = 2.0)]
        b_std: f64,
        #[arg(long, default_value_t = 2.0)]
        b_mex: f64,
        /// Bilinear lookup between table rows instead of the nearest row.
        #[arg(long)]
        interpolate: bool,
    },
}

fn default_range(l_max: usize, w: &NeedletWindow) -> Result<JRange> {
    select_j_range(l_max, w, JRangePolicy::PaperDefault)
}

/// Runs one command; returns the process exit code on success.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Theory {
            p,
            b,
            alpha0,
            kappa,
        } => {
            let c = AsymptoticConstants::compute(p, b, alpha0, kappa)?;
            writeln!(out, "constant,value")?;
            for (k, v) in c.entries() {
                writeln!(out, "{k},{}", fmt_real(v))?;
            }
            writeln!(out)?;
            let t = table1_constants();
            writeln!(
                out,
                "alpha0,B_std,rho0_sq,p,sigma_printed,sigma0_sq,sigma_lt_rho"
            )?;
            for (i, a) in t.alpha0.iter().enumerate() {
                for k in 0..3 {
                    let s = sigma0_sq(t.p[k], *a)?;
                    writeln!(
                        out,
                        "{a},{},{},{},{},{},{}",
                        fmt_real(t.b[k]),
                        t.rho0_sq[i][k],
                        t.p[k],
                        t.sigma[i][k],
                        fmt_real(s),
                        s < t.rho0_sq[i][k]
                    )?;
                }
            }
        }
        Command::Simulate { config, out: stem } => {
            let cfg = ExperimentConfig::load(&config)?;
            let stem = stem
                .or(cfg.output.clone())
                .ok_or_else(|| Error::config(0, "output.path: needed (or pass --out)"))?;
            if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            for r in 1..=cfg.replications {
                let seed = split_seed(cfg.master_seed, r as u64);
                let alm = simulate_alm(&cfg.model, cfg.l_max, seed)?;
                let base = format!("{}.r{r}", stem.display());
                write_alm(&PathBuf::from(format!("{base}.alm")), &alm)?;
                write_spectrum_csv(
                    std::fs::File::create(format!("{base}.cl.csv"))?,
                    &empirical_cl(&alm),
                )?;
                writeln!(out, "{base}.alm,{base}.cl.csv,{seed}")?;
            }
        }
        Command::Estimate {
            spectrum_file,
            window,
            p,
            b,
            band,
            g,
            j0,
            jl,
        } => {
            let spec = read_spectrum_file(&spectrum_file)?;
            let w = match window {
                WindowArg::Mexican => NeedletWindow::mexican(p, b)?,
                WindowArg::Standard => NeedletWindow::standard(b)?,
            };
            let range = match (j0, jl) {
                (Some(j0), Some(jl)) => JRange::new(j0, jl, 1.0)?,
                (None, Some(jl)) => JRange::new(default_range(spec.l_max, &w)?.j0, jl, 1.0)?,
                _ => default_range(spec.l_max, &w)?,
            };
            let search = SearchConfig::default();
            let fit = match band {
                BandArg::Full => fit_full_band(&spec, &w, range, &search)?,
                BandArg::Narrow => {
                    let rule = g.map_or(GRule::Default, GRule::Constant);
                    fit_narrow_band(&spec, &w, range.jl, rule, 1.0, &search)?
                }
            };
            write_fit_csv(&mut *out, 0, &fit)?;
        }
        Command::Montecarlo {
            config,
            out: stem,
            check,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&cfg)?;
            match stem.or(cfg.output.clone()) {
                Some(stem) => {
                    for f in summary.write_files(&stem)? {
                        writeln!(out, "wrote {}", f.display())?;
                    }
                }
                None => summary.write_aggregate_csv(&mut *out)?,
            }
            if check {
                let mut ok = true;
                for c in checks(&summary) {
                    writeln!(
                        out,
                        "{} {}: observed {} target {}",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        c.observed,
                        c.target
                    )?;
                    ok &= c.pass;
                }
                if !ok {
                    return Ok(EXIT_CHECK_FAILED);
                }
            }
        }
        Command::RealspaceCheck {
            j,
            p,
            b,
            seed,
            alpha0,
            seeds,
        } => {
            let model = PowerSpectrumModel::power_law(alpha0, 1.0)?;
            writeln!(
                out,
                "seed,j,grid_points,sum_beta_sq,lambda_hat,relative_gap"
            )?;
            for s in 0..seeds.max(1) {
                let f = frame_check(&model, j, p, b, split_seed(seed, s as u64), 1.0)?;
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    f.seed,
                    f.j,
                    f.grid_points,
                    fmt_real(f.sum_beta_sq),
                    fmt_real(f.lambda_hat),
                    fmt_real(f.relative_gap)
                )?;
            }
            let c = empirical_beta_correlation(&model, j, j, p, b, seeds.max(3), seed)?;
            writeln!(out)?;
            writeln!(out, "u_lo,u_hi,pairs,mean_corr,max_abs_corr,exact_corr")?;
            for bin in &c.bins {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    bin.u_lo,
                    bin.u_hi,
                    bin.pairs,
                    fmt_real(bin.mean_corr),
                    fmt_real(bin.max_abs_corr),
                    fmt_real(bin.exact_corr)
                )?;
            }
            writeln!(out)?;
            let show = |x: Option<f64>| x.map_or("".to_string(), fmt_real);
            writeln!(out, "decay_exponent_theory,{}", fmt_real(c.theory_exponent))?;
            writeln!(out, "decay_exponent_exact,{}", show(c.exact_exponent))?;
            writeln!(
                out,
                "decay_exponent_monte_carlo,{}",
                show(c.fitted_exponent)
            )?;
            writeln!(out, "noise_floor,{}", fmt_real(c.noise_floor))?;
            writeln!(
                out,
                "antipodal_max_abs_corr,{}",
                fmt_real(c.antipodal_max_abs_corr)
            )?;
        }
        Command::Plugin {
            spectrum_file,
            p,
            b_std,
            b_mex,
            interpolate,
        } => {
            let spec = read_spectrum_file(&spectrum_file)?;
            let js = default_range(spec.l_max, &NeedletWindow::standard(b_std)?)?;
            let jm = default_range(spec.l_max, &NeedletWindow::mexican(p, b_mex)?)?;
            let r = plug_in(
                &spec,
                p,
                b_std,
                b_mex,
                js,
                jm,
                &SearchConfig::default(),
                interpolate,
            )?;
            writeln!(out, "field,value")?;
            writeln!(out, "alpha_standard,{}", fmt_real(r.alpha_standard))?;
            writeln!(out, "rho0_sq,{}", fmt_real(r.rho0_sq))?;
            writeln!(out, "used_mexican,{}", r.used_mexican)?;
            writeln!(
                out,
                "sigma1_sq,{}",
                r.sigma1_sq.map_or(String::new(), fmt_real)
            )?;
            writeln!(out, "p,{}", r.p)?;
            writeln!(out, "alpha_final,{}", fmt_real(r.alpha_final))?;
        }
    }
    Ok(0)
}

/// Parses `std::env::args`, runs, and maps errors to exit codes.
pub fn main_exit_code() -> i32 {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
