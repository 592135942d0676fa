//! Truncated and non-uniform stochastic quantization of heavy-tailed
//! gradients for communication-efficient distributed SGD.
//!
//! The crate is organised bottom-up:
//!
//! * [`tail`] fits a symmetric power-law tail to gradient samples.
//! * [`density`] turns a fit (and optionally a histogram) into a density with
//!   the mass integrals the rest of the crate needs.
//! * [`quant`] truncates, stochastically rounds, bit-packs and frames
//!   gradient blocks.
//! * [`solver`] picks the truncation threshold and level split that minimise
//!   the error bound, and evaluates the bound itself.
//! * [`sim`] runs distributed SGD with any of the compressors end to end.
//! * [`harness`] holds the config, manifest and verification plumbing behind
//!   the `htq` binary.

pub mod density;
pub mod harness;
pub mod io;
pub mod quant;
pub mod seed;
pub mod sim;
pub mod solver;
pub mod tail;

pub use density::{Density, DensityHistogram, TailModelDensity};
pub use tail::{fit_tail, GradientSample, PowerLawTail, TailFitOptions};
