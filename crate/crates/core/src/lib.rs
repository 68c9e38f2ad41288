//! Long-short equity factors built from fundamental indicators, with the
//! diagnostics used to judge them: factor correlation level, inter-factor
//! correlations, random-matrix spectra and performance statistics.

pub mod error;
pub mod estimators;
pub mod factor;
pub mod grid;
pub mod ladder;
pub mod panel;
pub mod perf;
pub mod pipeline;
pub mod riskmetrics;
pub mod spectrum;
pub mod synth;

pub use error::{Error, Result};
