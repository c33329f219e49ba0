//! File formats: little-endian binary coefficient/spectrum files and CSV tables.
//!
//! Binary layout: 8-byte magic, u32 version, u64 l_max, u64 seed, then f64 payload
//! (re, im pairs for a_lm in (l, m ≥ 0) order, or Ĉ_1..Ĉ_lmax).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::harmonic::{AlmSet, EmpiricalSpectrum};
use crate::needlet::NeedletStatistics;
use crate::whittle::{Band, WhittleFit};

pub const ALM_MAGIC: &[u8; 8] = b"NWALM\0\0\0";
pub const SPECTRUM_MAGIC: &[u8; 8] = b"NWCL\0\0\0\0";
pub const FORMAT_VERSION: u32 = 1;

/// Round-trippable real formatting (17 significant digits).
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_header(w: &mut impl Write, magic: &[u8; 8], l_max: usize, seed: u64) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(l_max as u64).to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())?;
    Ok(())
}

fn read_header(r: &mut impl Read, magic: &[u8; 8]) -> Result<(usize, u64)> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let l_max = u64::from_le_bytes(b) as usize;
    r.read_exact(&mut b)?;
    Ok((l_max, u64::from_le_bytes(b)))
}

fn read_f64s(r: &mut impl Read) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(
            "payload is not a whole number of f64 values".into(),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_alm(path: &Path, alm: &AlmSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, ALM_MAGIC, alm.l_max, alm.seed)?;
    for c in alm.raw() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_alm(path: &Path) -> Result<AlmSet> {
    let mut r = BufReader::new(File::open(path)?);
    let (l_max, seed) = read_header(&mut r, ALM_MAGIC)?;
    let vals = read_f64s(&mut r)?;
    if vals.len() % 2 != 0 {
        return Err(Error::Format(
            "odd number of reals in coefficient payload".into(),
        ));
    }
    let coeffs = vals
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    AlmSet::from_raw(l_max, seed, coeffs)
}

pub fn write_spectrum_bin(path: &Path, spec: &EmpiricalSpectrum, seed: u64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, SPECTRUM_MAGIC, spec.l_max, seed)?;
    for v in spec.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spectrum_bin(path: &Path) -> Result<EmpiricalSpectrum> {
    let mut r = BufReader::new(File::open(path)?);
    let (l_max, _) = read_header(&mut r, SPECTRUM_MAGIC)?;
    let vals = read_f64s(&mut r)?;
    if vals.len() != l_max {
        return Err(Error::Format(format!(
            "header says l_max={l_max}, payload holds {}",
            vals.len()
        )));
    }
    EmpiricalSpectrum::new(vals)
}

/// CSV with header `l,c_hat`.
pub fn write_spectrum_csv(w: impl Write, spec: &EmpiricalSpectrum) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["l", "c_hat"])?;
    for (i, v) in spec.values().iter().enumerate() {
        out.write_record([(i + 1).to_string(), fmt_real(*v)])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `l,c_hat` rows; degrees must run 1, 2, … without gaps.
pub fn read_spectrum_csv(r: impl Read) -> Result<EmpiricalSpectrum> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize, name: &str| -> Result<&str> {
            rec.get(k)
                .ok_or_else(|| Error::Format(format!("row {}: missing {name}", i + 2)))
        };
        let l: usize = field(0, "l")?
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bad l", i + 2)))?;
        if l != i + 1 {
            return Err(Error::Format(format!(
                "row {}: expected l={}, found {l}",
                i + 2,
                i + 1
            )));
        }
        let c: f64 = field(1, "c_hat")?
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bad c_hat", i + 2)))?;
        values.push(c);
    }
    EmpiricalSpectrum::new(values)
}

pub fn read_spectrum_file(path: &Path) -> Result<EmpiricalSpectrum> {
    let mut head = [0u8; 8];
    let n = File::open(path)?.read(&mut head)?;
    if n == 8 && &head == SPECTRUM_MAGIC {
        read_spectrum_bin(path)
    } else {
        read_spectrum_csv(File::open(path)?)
    }
}

/// CSV with header `j,B_pow_j,N_j,lambda_hat`.
pub fn write_statistics_csv(w: impl Write, stats: &NeedletStatistics) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["j", "B_pow_j", "N_j", "lambda_hat"])?;
    let b = stats.window.b;
    for (j, lam) in stats.j_range.levels().zip(&stats.lambda_hat) {
        out.write_record([
            j.to_string(),
            fmt_real(b.powi(j)),
            fmt_real(stats.j_range.n_j(b, j)),
            fmt_real(*lam),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub const FIT_HEADER: [&str; 11] = [
    "seed",
    "band",
    "alpha_hat",
    "g_hat",
    "j0",
    "j1_or_j0",
    "jL",
    "score",
    "hessian",
    "converged",
    "iterations",
];

pub fn fit_record(seed: u64, fit: &WhittleFit) -> [String; 11] {
    let (band, j1) = match fit.band {
        Band::Full => ("full", fit.j_range_used.j0),
        Band::Narrow { j1 } => ("narrow", j1),
    };
    [
        seed.to_string(),
        band.to_string(),
        fmt_real(fit.alpha_hat),
        fmt_real(fit.g_hat),
        fit.j_range_used.j0.to_string(),
        j1.to_string(),
        fit.j_range_used.jl.to_string(),
        fmt_real(fit.score_at_hat),
        fmt_real(fit.hessian_at_hat),
        fit.converged.to_string(),
        fit.iterations.to_string(),
    ]
}

pub fn write_fit_csv(w: impl Write, seed: u64, fit: &WhittleFit) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FIT_HEADER)?;
    out.write_record(fit_record(seed, fit))?;
    out.flush()?;
    Ok(())
}
