//! Unit conventions and conversion helpers.
//!
//! The crate uses two consistent unit domains:
//!
//! * noise / sequence timescale: time in μs, switching and decay rates
//!   (γ, Γφ, Γ₁) in 1/μs, noise amplitudes λ in angular rad/μs;
//! * device scale: frequencies ω and couplings g in angular rad/ns,
//!   flux in units of Φ₀ (so Φ₀ = 1).
//!
//! Values quoted as cyclic frequencies convert with a factor 2π:
//! an amplitude of "0.3 MHz" is `0.3 * MHZ_TO_RAD_PER_US` = 2π·0.3 rad/μs.
//! Rates quoted in "MHz" are plain inverse microseconds (0.05 MHz → 0.05/μs).

use std::f64::consts::PI;

/// Cyclic MHz to angular rad/μs.
pub const MHZ_TO_RAD_PER_US: f64 = 2.0 * PI;

/// Cyclic GHz to angular rad/ns.
pub const GHZ_TO_RAD_PER_NS: f64 = 2.0 * PI;

/// Angular rad/ns to angular rad/μs.
pub const RAD_PER_NS_TO_RAD_PER_US: f64 = 1e3;

/// Nanoseconds to microseconds.
pub const NS_TO_US: f64 = 1e-3;
