//! Source-filter decomposition of chromatic steady-state instrument spectra.
//!
//! A chromatic series of harmonic spectra is explained, in the log domain, as
//! the sum of a per-note loudness `a_i`, a frequency-invariant excitation
//! `p_j` indexed by harmonic number, and a formant filter `r_n` sampled on a
//! semitone grid of absolute log-frequency:
//!
//! ```text
//! ln D_ij = a_i + p_j + r_n,   n = floor(12 log2 j + 1/2) + i
//! ```
//!
//! * [`spectra`] reads, validates and truncates input series.
//! * [`grid`] maps partials to bins and builds the incidence system.
//! * [`decompose`] fits the model by alternating weighted least squares.
//! * [`apply`] evaluates fitted models: prediction, deconvolution, hybrids
//!   and WAV rendering.

pub mod apply;
pub mod decompose;
pub mod error;
pub mod grid;
pub mod spectra;

pub use error::{Error, Result};
