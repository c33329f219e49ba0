//! Experiment configuration: flat `key = value` text with dotted keys.
//!
//! ```text
//! # canonical run
//! model.alpha0 = 3
//! model.g0 = 1
//! window.p = 2
//! window.b = 2
//! l_max = 1024
//! replications = 500
//! master_seed = 20240101
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are errors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::needlet::{select_j_range, JRange, JRangePolicy, NeedletWindow};
use crate::spectrum::{Correction, PowerSpectrumModel};
use crate::whittle::{narrow_band_j1, GRule, SearchConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JRangeSpec {
    Default,
    Thresholds { eps1: f64, eps2: f64 },
    Explicit { j0: i32, jl: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandSpec {
    Full,
    Narrow(GRule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: PowerSpectrumModel,
    pub window: NeedletWindow,
    pub l_max: usize,
    pub j_range: JRangeSpec,
    pub band: BandSpec,
    pub replications: usize,
    pub master_seed: u64,
    pub search: SearchConfig,
    pub output: Option<PathBuf>,
    /// Fit the exact spectrum instead of simulated data.
    pub noise_free: bool,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// α₀=3, G₀=1, mexican p=2, B=2, l_max=1024, default J-range, full band.
    pub fn canonical(replications: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            model: PowerSpectrumModel::power_law(3.0, 1.0).expect("valid model"),
            window: NeedletWindow::mexican(2, 2.0).expect("valid window"),
            l_max: 1024,
            j_range: JRangeSpec::Default,
            band: BandSpec::Full,
            replications,
            master_seed,
            search: SearchConfig::default(),
            output: None,
            noise_free: false,
            threads: None,
        }
    }

    /// Levels fitted, after applying the band rule.
    pub fn resolved_j_range(&self) -> Result<JRange> {
        let full = match self.j_range {
            JRangeSpec::Default => {
                select_j_range(self.l_max, &self.window, JRangePolicy::PaperDefault)?
            }
            JRangeSpec::Thresholds { eps1, eps2 } => select_j_range(
                self.l_max,
                &self.window,
                JRangePolicy::Thresholds { eps1, eps2 },
            )?,
            JRangeSpec::Explicit { j0, jl } => JRange::new(j0, jl, 1.0)?,
        };
        match self.band {
            BandSpec::Full => Ok(full),
            BandSpec::Narrow(g) => JRange::new(
                narrow_band_j1(full.jl, self.window.b, g.value(full.jl))?,
                full.jl,
                1.0,
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.replications < 1 {
            return Err(Error::domain("replications must be >= 1"));
        }
        let b = self.window.b;
        if (self.l_max as f64) < b * b {
            return Err(Error::domain(format!(
                "l_max={} must be at least B^2={}",
                self.l_max,
                b * b
            )));
        }
        self.search.validate()?;
        if self.threads == Some(0) {
            return Err(Error::domain("threads must be >= 1"));
        }
        self.resolved_j_range()?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: HashMap<String, (usize, String)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| {
                Error::config(line, format!("expected key = value, found `{body}`"))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::config(line, format!("unknown key `{k}`")));
            }
            if kv.insert(k.to_string(), (line, v.to_string())).is_some() {
                return Err(Error::config(line, format!("key `{k}` given twice")));
            }
        }
        let r = Reader { kv };
        let correction = match r.get_str("model.correction").unwrap_or("none") {
            "none" => Correction::None,
            "kappa" => Correction::Kappa {
                kappa: r.req("model.kappa")?,
            },
            "rational" => Correction::Rational {
                p_coeffs: r.list("model.p_coeffs")?,
                q_coeffs: r.list("model.q_coeffs")?,
            },
            other => return Err(r.err("model.correction", format!("unknown correction `{other}`"))),
        };
        let model = PowerSpectrumModel::new(
            r.req("model.alpha0")?,
            r.opt("model.g0")?.unwrap_or(1.0),
            correction,
        )
        .map_err(|e| r.err("model.alpha0", e.to_string()))?;
        let b: f64 = r.opt("window.b")?.unwrap_or(2.0);
        let window = match r.get_str("window.kind").unwrap_or("mexican") {
            "mexican" => NeedletWindow::mexican(r.opt("window.p")?.unwrap_or(2), b),
            "standard" => NeedletWindow::standard(b),
            other => return Err(r.err("window.kind", format!("unknown window `{other}`"))),
        }
        .map_err(|e| r.err("window.b", e.to_string()))?;
        let j_range = match r.get_str("jrange.policy").unwrap_or("default") {
            "default" => JRangeSpec::Default,
            "thresholds" => JRangeSpec::Thresholds {
                eps1: r.req("jrange.eps1")?,
                eps2: r.req("jrange.eps2")?,
            },
            "explicit" => JRangeSpec::Explicit {
                j0: r.req("jrange.j0")?,
                jl: r.req("jrange.jl")?,
            },
            other => return Err(r.err("jrange.policy", format!("unknown policy `{other}`"))),
        };
        let band = match r.get_str("band.kind").unwrap_or("full") {
            "full" => BandSpec::Full,
            "narrow" => match r.get_str("band.g").unwrap_or("default") {
                "default" => BandSpec::Narrow(GRule::Default),
                _ => BandSpec::Narrow(GRule::Constant(r.req("band.g")?)),
            },
            other => return Err(r.err("band.kind", format!("unknown band `{other}`"))),
        };
        let d = SearchConfig::default();
        let cfg = ExperimentConfig {
            model,
            window,
            l_max: r.req("l_max")?,
            j_range,
            band,
            replications: r.opt("replications")?.unwrap_or(1),
            master_seed: r.opt("master_seed")?.unwrap_or(0),
            search: SearchConfig {
                alpha_min: r.opt("search.alpha_min")?.unwrap_or(d.alpha_min),
                alpha_max: r.opt("search.alpha_max")?.unwrap_or(d.alpha_max),
                tol: r.opt("search.tol")?.unwrap_or(d.tol),
                grid_points: r.opt("search.grid_points")?.unwrap_or(d.grid_points),
                max_iter: r.opt("search.max_iter")?.unwrap_or(d.max_iter),
            },
            output: r.get_str("output.path").map(PathBuf::from),
            noise_free: r.opt("noise_free")?.unwrap_or(false),
            threads: r.opt("threads")?,
        };
        cfg.validate()
            .map_err(|e| r.err(blame(&e), e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Text that parses back to an equal config.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        put("model.alpha0", format!("{:?}", self.model.alpha0));
        put("model.g0", format!("{:?}", self.model.g0));
        match &self.model.correction {
            Correction::None => put("model.correction", "none".into()),
            Correction::Kappa { kappa } => {
                put("model.correction", "kappa".into());
                put("model.kappa", format!("{kappa:?}"));
            }
            Correction::Rational { p_coeffs, q_coeffs } => {
                put("model.correction", "rational".into());
                put("model.p_coeffs", join(p_coeffs));
                put("model.q_coeffs", join(q_coeffs));
            }
        }
        match self.window.p() {
            Some(p) => {
                put("window.kind", "mexican".into());
                put("window.p", p.to_string());
            }
            None => put("window.kind", "standard".into()),
        }
        put("window.b", format!("{:?}", self.window.b));
        put("l_max", self.l_max.to_string());
        match self.j_range {
            JRangeSpec::Default => put("jrange.policy", "default".into()),
            JRangeSpec::Thresholds { eps1, eps2 } => {
                put("jrange.policy", "thresholds".into());
                put("jrange.eps1", format!("{eps1:?}"));
                put("jrange.eps2", format!("{eps2:?}"));
            }
            JRangeSpec::Explicit { j0, jl } => {
                put("jrange.policy", "explicit".into());
                put("jrange.j0", j0.to_string());
                put("jrange.jl", jl.to_string());
            }
        }
        match self.band {
            BandSpec::Full => put("band.kind", "full".into()),
            BandSpec::Narrow(g) => {
                put("band.kind", "narrow".into());
                put(
                    "band.g",
                    match g {
                        GRule::Default => "default".into(),
                        GRule::Constant(g) => format!("{g:?}"),
                    },
                );
            }
        }
        put("replications", self.replications.to_string());
        put("master_seed", self.master_seed.to_string());
        put("search.alpha_min", format!("{:?}", self.search.alpha_min));
        put("search.alpha_max", format!("{:?}", self.search.alpha_max));
        put("search.tol", format!("{:?}", self.search.tol));
        put("search.grid_points", self.search.grid_points.to_string());
        put("search.max_iter", self.search.max_iter.to_string());
        if let Some(p) = &self.output {
            put("output.path", p.display().to_string());
        }
        put("noise_free", self.noise_free.to_string());
        if let Some(t) = self.threads {
            put("threads", t.to_string());
        }
        s
    }
}

const KEYS: &[&str] = &[
    "model.alpha0",
    "model.g0",
    "model.correction",
    "model.kappa",
    "model.p_coeffs",
    "model.q_coeffs",
    "window.kind",
    "window.p",
    "window.b",
    "l_max",
    "jrange.policy",
    "jrange.eps1",
    "jrange.eps2",
    "jrange.j0",
    "jrange.jl",
    "band.kind",
    "band.g",
    "replications",
    "master_seed",
    "search.alpha_min",
    "search.alpha_max",
    "search.tol",
    "search.grid_points",
    "search.max_iter",
    "output.path",
    "noise_free",
    "threads",
];

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Key most likely responsible for a validation failure.
fn blame(e: &Error) -> &'static str {
    match e {
        Error::NarrowBandDegenerate { .. } => "band.g",
        Error::EmptyRange { .. } => "jrange.policy",
        Error::Domain(m) if m.contains("replications") => "replications",
        Error::Domain(m) if m.contains("l_max") => "l_max",
        Error::Domain(m) if m.contains("search") || m.contains("tolerance") => "search.alpha_min",
        Error::Domain(m) if m.contains("threads") => "threads",
        _ => "l_max",
    }
}

struct Reader {
    kv: HashMap<String, (usize, String)>,
}

impl Reader {
    fn line(&self, key: &str) -> usize {
        self.kv.get(key).map_or(0, |(l, _)| *l)
    }

    fn err(&self, key: &str, msg: String) -> Error {
        Error::config(self.line(key), format!("{key}: {msg}"))
    }

    fn get_str(&self, key: &str) -> Option<&str> {
        self.kv.get(key).map(|(_, v)| v.as_str())
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.kv.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(*line, format!("{key}: cannot parse `{v}`"))),
        }
    }

    fn req<T: FromStr>(&self, key: &str) -> Result<T> {
        self.opt(key)?
            .ok_or_else(|| Error::config(0, format!("{key}: missing required key")))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let (line, v) = self
            .kv
            .get(key)
            .ok_or_else(|| Error::config(0, format!("{key}: missing required key")))?;
        v.split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::config(*line, format!("{key}: cannot parse `{t}`")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANON: &str = "\
# canonical
model.alpha0 = 3
model.g0 = 1
window.p = 2
window.b = 2
l_max = 1024
replications = 500
master_seed = 7
";

    #[test]
    fn canonical_text_matches_constructor() {
        let c = ExperimentConfig::parse(CANON).unwrap();
        assert_eq!(c, ExperimentConfig::canonical(500, 7));
        let r = c.resolved_j_range().unwrap();
        assert_eq!((r.j0, r.jl), (1, 9));
    }

    #[test]
    fn serialize_parses_back() {
        let mut c = ExperimentConfig::canonical(3, 99);
        c.model = PowerSpectrumModel::with_kappa(3.1, 0.7, 0.5).unwrap();
        c.band = BandSpec::Narrow(GRule::Constant(0.5));
        c.output = Some("out/run".into());
        c.threads = Some(2);
        c.search.tol = 1e-7;
        assert_eq!(ExperimentConfig::parse(&c.serialize()).unwrap(), c);
        let mut r = ExperimentConfig::canonical(1, 0);
        r.model = PowerSpectrumModel::new(
            3.0,
            1.0,
            Correction::Rational {
                p_coeffs: vec![1.0, 0.1],
                q_coeffs: vec![2.0, 0.3],
            },
        )
        .unwrap();
        r.j_range = JRangeSpec::Explicit { j0: 2, jl: 8 };
        assert_eq!(ExperimentConfig::parse(&r.serialize()).unwrap(), r);
    }

    #[test]
    fn errors_name_line_and_field() {
        let bad = CANON.replace("l_max = 1024", "l_max = lots");
        match ExperimentConfig::parse(&bad) {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, 6);
                assert!(msg.contains("l_max"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ExperimentConfig::parse("foo = 1\n"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("l_max 12\n"),
            Err(Error::Config { line: 1, .. })
        ));
        let dup = format!("{CANON}l_max = 2048\n");
        assert!(matches!(
            ExperimentConfig::parse(&dup),
            Err(Error::Config { line: 9, .. })
        ));
        let small = CANON.replace("l_max = 1024", "l_max = 3");
        assert!(matches!(
            ExperimentConfig::parse(&small),
            Err(Error::Config { line: 6, .. })
        ));
        let zero = CANON.replace("replications = 500", "replications = 0");
        assert!(matches!(
            ExperimentConfig::parse(&zero),
            Err(Error::Config { line: 7, .. })
        ));
    }

    #[test]
    fn narrow_band_resolves_j1() {
        let text = format!("{CANON}band.kind = narrow\nband.g = 0.5\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        let r = c.resolved_j_range().unwrap();
        assert_eq!((r.j0, r.jl), (8, 9));
    }
}
