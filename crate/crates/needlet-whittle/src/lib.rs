//! Spectral-index estimation for isotropic Gaussian fields on the sphere with
//! mexican-needlet Whittle contrasts, plus the closed-form asymptotic constants
//! and Monte Carlo tooling used to check them.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod harmonic;
pub mod io;
pub mod needlet;
pub mod rng;
pub mod special;
pub mod spectrum;
pub mod sphere;
pub mod stats;
pub mod whittle;

pub use error::{Error, Result};
pub use harmonic::{empirical_cl, simulate_alm, AlmSet, EmpiricalSpectrum};
pub use needlet::{JRange, NeedletWindow, Truncation};
pub use spectrum::{Correction, PowerSpectrumModel};
pub use whittle::{fit_full_band, fit_narrow_band, SearchConfig, WhittleFit};
