//! Methane steam reforming surrogate toolkit.
//!
//! The crate bundles three layers:
//!
//! * mechanistic reactor models — Shomate-based thermochemistry ([`thermo`]),
//!   a power-law kinetic model with shift-equilibrium closure ([`kinetics`]),
//!   and a coupled reforming/shift equilibrium solver ([`equilibrium`]);
//! * a dataset builder that merges model sweeps, spline-interpolated series
//!   and experimental CSV into a weighted, normalized corpus ([`dataset`]);
//! * a from-scratch feed-forward network trained with full-batch BFGS
//!   ([`neural`]), hyperparameter search ([`hpo`]) and evaluation statistics
//!   ([`metrics`]).
//!
//! The `msr` binary (see [`cli`]) exposes the full pipeline. Batch work is
//! data-parallel via rayon when the `parallel` feature (default) is enabled;
//! outputs are byte-identical with and without it.

pub mod cli;
pub mod dataset;
pub mod equilibrium;
pub mod hpo;
pub mod kinetics;
pub mod metrics;
pub mod neural;
pub mod par;
pub mod pipeline;
pub mod seeds;
pub mod spline;
pub mod thermo;

mod bfgs;

pub use kinetics::{Conversions, GasComposition, OperatingPoint};
