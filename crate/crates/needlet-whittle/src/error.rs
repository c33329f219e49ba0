use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation error at level j={j}: l_max={l_max} does not cover the window support (need l up to {needed})")]
    Truncation { j: i32, l_max: usize, needed: usize },

    #[error("empty j-range: j0={j0} > jL={jl}")]
    EmptyRange { j0: i32, jl: i32 },

    #[error("narrow band degenerate: J1={j1}, JL={jl} leaves fewer than 2 levels")]
    NarrowBandDegenerate { j1: i32, jl: i32 },

    #[error("degenerate data: every level statistic is zero")]
    DegenerateData,

    #[error("band-limit error: grid resolves degrees up to {band_limit}, synthesis needs {l_max}")]
    BandLimit { l_max: usize, band_limit: usize },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("{failed} of {total} replications failed (limit 5%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Io(_) | Error::Csv(_) | Error::Format(_) => 2,
            _ => 3,
        }
    }
}
