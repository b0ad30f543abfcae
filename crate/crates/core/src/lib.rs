//! Simulation and pulse optimization for multiqubit Rydberg controlled-phase
//! gates driven by two-photon adiabatic rapid passage (ARP).
//!
//! The crate is organised bottom-up:
//!
//! - [`atomdata`]: calibration constants, hyperfine intermediate levels and
//!   pairwise Rydberg interaction maps.
//! - [`pulse`]: analytic and dCRAB-shaped ARP schedules, intensity and
//!   two-photon detuning controls, and laser phase-noise realizations.
//! - [`model`]: non-Hermitian Hamiltonians for one computational input
//!   block, in full (hyperfine-resolved) or reduced form.
//! - [`propagator`]: adaptive Dormand–Prince integration of the
//!   dissipative Schrödinger equation with observable traces.
//! - [`fidelity`]: ideal gates, the corrective Z(φ) rotation and the
//!   limited-tomography fidelity.
//! - [`optimizer`]: bounded Nelder–Mead with restarts and the simplified
//!   dCRAB envelope search.
//! - [`runner`]: configuration documents, experiments, circuit
//!   decomposition and result records.
//!
//! Frequencies are stored as cyclic frequencies in MHz (the "/2π" values),
//! times in µs and intensities in mW/µm². The factor 2π is applied only
//! inside the propagator.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomdata;
pub mod error;
pub mod fidelity;
pub mod model;
pub mod optimizer;
pub mod propagator;
pub mod pulse;
pub mod runner;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
