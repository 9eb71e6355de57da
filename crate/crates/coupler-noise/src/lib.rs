//! Desk-scale simulation and analysis of coupling-parameter ("g") noise
//! in entangled transmon pairs.
//!
//! Two resonant qubits exchanging excitations through a tunable coupler
//! form a pseudo-qubit in the {|01⟩, |10⟩} subspace. Flux noise in the
//! coupler turns into noise of the coupling g, dephasing the pseudo-qubit
//! during two-qubit gates. This crate provides:
//!
//! * [`noise_model`] — telegraph fluctuators, 1/f ensembles, white
//!   coupling noise, and their exact correlators and spectra;
//! * [`device_flux`] — the flux → coupler frequency → coupling map and
//!   the flux sensitivity χΦ(g) with its quadratic approximation;
//! * [`sequences`] — coupler Ramsey / CPMG schedules, gate pulses, and
//!   the ±1 echo filter;
//! * [`envelopes`] — closed-form decay envelopes (telegraph Ramsey/CPMG,
//!   multi-fluctuator products, underdamped approximations, Gaussian
//!   filter-function decay with the exact Lorentzian-spectrum form);
//! * [`mc_engine`] — numerical oracles: seeded Monte Carlo trajectory
//!   averaging, closed Liouvillian propagation for exponentially
//!   correlated noise, transfer-matrix echo evolution, and the Lindblad
//!   extension with relaxation and dephasing;
//! * [`fitting`] — multi-curve noise-model fits (damped least squares
//!   with multi-start) and Ramsey Gaussian-rate extraction;
//! * [`cli_io`] — a reproducible batch front end: JSON configs, CSV/JSON
//!   outputs, and parameter scans.
//!
//! The runnable examples under `examples/` walk through each capability;
//! the `coupler-noise` binary exposes the same flows as subcommands.

pub mod cli_io;
pub mod device_flux;
pub mod envelopes;
pub mod error;
pub mod fitting;
pub mod mc_engine;
pub mod noise_model;
pub mod numerics;
pub mod sequences;
pub mod units;

pub use error::{Error, Result};
