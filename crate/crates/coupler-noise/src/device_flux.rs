//! Flux ↔ coupler frequency ↔ qubit-qubit coupling map and the flux
//! sensitivity of the coupling.
//!
//! The tunable coupler follows ω_c(Φ) = ω_max √|cos(πΦ/Φ₀)| and mediates
//! a net coupling g(ω_c) = (k_d - k²ω_q²/(ω_c² - ω_q²))·ω_q/2 between
//! two resonant qubits. On the operating branch (ω_c > ω_q, indirect
//! term dominant) the signed coupling is negative; sequence and envelope
//! layers work with the magnitude |g|, and [`signed_coupling`] maps back
//! to the branch-internal sign.
//!
//! The flux sensitivity χΦ(g) = (1/2π)|dg/dΦ| converts the flux-noise
//! amplitude δΦ_m into the g-noise amplitude λ(g) = 2π χΦ(g) δΦ_m.
//!
//! Units: ω and g in rad/ns, flux in units of Φ₀.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units::{GHZ_TO_RAD_PER_NS, RAD_PER_NS_TO_RAD_PER_US};

/// Circuit constants of the qubit–coupler–qubit system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Common qubit frequency ω_q (rad/ns).
    pub omega_q: f64,
    /// Coupler frequency at the flux-insensitive point (rad/ns).
    pub omega_max: f64,
    /// Indirect coupling efficiency k (dimensionless, k ≪ 1).
    pub k: f64,
    /// Direct coupling efficiency k_d (dimensionless).
    pub k_d: f64,
    /// Flux quantum; fluxes are quoted in these units.
    pub phi0: f64,
    /// Characteristic flux-noise amplitude δΦ_m (fraction of Φ₀).
    pub delta_phi_m: f64,
}

impl DeviceParams {
    /// Validate the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_q > 0.0) || self.omega_max <= self.omega_q {
            return Err(Error::InvalidInput(format!(
                "need omega_max > omega_q > 0 (got {} and {})",
                self.omega_max, self.omega_q
            )));
        }
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(Error::InvalidInput(format!(
                "need 0 < k < 1 (got {})",
                self.k
            )));
        }
        if !(self.phi0 > 0.0) || !(self.delta_phi_m >= 0.0) {
            return Err(Error::InvalidInput("bad flux parameters".into()));
        }
        Ok(())
    }

    /// Total coupling efficiency k_qq = k_d + k².
    pub fn k_qq(&self) -> f64 {
        self.k_d + self.k * self.k
    }

    /// Direct-coupling decoupling point g = k_d ω_q / 2 where the flux
    /// sensitivity vanishes (infinitely detuned coupler).
    pub fn detached_coupling(&self) -> f64 {
        self.k_d * self.omega_q / 2.0
    }
}

impl Default for DeviceParams {
    /// Representative parameters: 6 GHz qubits, a 9 GHz coupler sweet
    /// spot, and efficiencies placing the g = 0 point inside the tunable
    /// band. Chosen so that the quadratic fit of χΦ over the
    /// |g|/2π ∈ [10, 50] MHz window has χ⁽²⁾/χ⁽¹⁾ ≈ 0.08 ns.
    fn default() -> Self {
        DeviceParams {
            omega_q: 6.0 * GHZ_TO_RAD_PER_NS,
            omega_max: 9.0 * GHZ_TO_RAD_PER_NS,
            k: 0.02,
            k_d: 0.331_622_03,
            phi0: 1.0,
            delta_phi_m: 5e-8,
        }
    }
}

impl DeviceParams {
    /// Alternative preset with a weak direct coupling, giving a coupling
    /// magnitude that tunes over a wide range and a λ(g) that spans
    /// roughly a decade across the 10–50 MHz window.
    pub fn wide_tuning() -> Self {
        DeviceParams {
            omega_q: 6.0 * GHZ_TO_RAD_PER_NS,
            omega_max: 9.0 * GHZ_TO_RAD_PER_NS,
            k: 0.02,
            k_d: 2.0e-3,
            phi0: 1.0,
            delta_phi_m: 2e-4,
        }
    }
}

/// Coefficients of the quadratic approximation
/// χΦ(g) ≈ χ⁰ + χ¹·g + χ²·g² (g in rad/ns).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiPolynomial {
    pub chi0: f64,
    pub chi1: f64,
    pub chi2: f64,
    /// Largest relative residual of the fit over its sample set.
    pub max_rel_residual: f64,
}

impl ChiPolynomial {
    pub fn eval(&self, g: f64) -> f64 {
        self.chi0 + self.chi1 * g + self.chi2 * g * g
    }

    /// Curvature-to-slope ratio χ⁽²⁾/χ⁽¹⁾ in ns.
    pub fn curvature_ratio(&self) -> f64 {
        self.chi2 / self.chi1
    }
}

/// Coupler frequency ω_c(Φ) = ω_max √|cos(πΦ/Φ₀)|.
pub fn coupler_frequency(phi: f64, p: &DeviceParams) -> f64 {
    p.omega_max * (PI * phi / p.phi0).cos().abs().sqrt()
}

/// Net qubit-qubit coupling at coupler frequency ω_c (signed;
/// negative where the indirect channel dominates).
pub fn coupling_g(omega_c: f64, p: &DeviceParams) -> Result<f64> {
    let det = omega_c * omega_c - p.omega_q * p.omega_q;
    if det == 0.0 {
        return Err(Error::Singular(
            "coupler on resonance with the qubits".into(),
        ));
    }
    Ok((p.k_d - p.k * p.k * p.omega_q * p.omega_q / det) * p.omega_q / 2.0)
}

/// Signed coupling on the operating branch for a magnitude |g|.
pub fn signed_coupling(g_magnitude: f64) -> f64 {
    -g_magnitude.abs()
}

/// Flux sensitivity χΦ(g) = (1/2π)|dg/dΦ| as a closed form in the
/// signed coupling g:
///
/// χΦ(g) = (k_d ω_q - 2g)·√(ω_max⁴(k_d ω_q - 2g)² - ω_q⁴(k_qq ω_q - 2g)²)
///          / (4 Φ₀ k² ω_q³)
///
/// The prefactor vanishing (g = k_d ω_q/2, infinitely detuned coupler)
/// returns the limit 0; a negative radicand elsewhere means g is not
/// reachable on the branch and is an error.
pub fn flux_sensitivity(g: f64, p: &DeviceParams) -> Result<f64> {
    let u = p.k_d * p.omega_q - 2.0 * g;
    if u == 0.0 {
        return Ok(0.0);
    }
    let v = p.k_qq() * p.omega_q - 2.0 * g;
    let wq4 = p.omega_q.powi(4);
    let wm4 = p.omega_max.powi(4);
    let radicand = wm4 * u * u - wq4 * v * v;
    if radicand < 0.0 {
        return Err(Error::OutOfBranch(format!(
            "flux sensitivity not defined at g = {g} (radicand {radicand:.3e})"
        )));
    }
    Ok(u * radicand.sqrt() / (4.0 * p.phi0 * p.k * p.k * p.omega_q.powi(3)))
}

/// Least-squares quadratic through (g, χ) samples.
pub fn fit_chi_polynomial(samples: &[(f64, f64)]) -> Result<ChiPolynomial> {
    if samples.len() < 3 {
        return Err(Error::InvalidInput(
            "need at least 3 samples for a quadratic fit".into(),
        ));
    }
    let n = samples.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, 3);
    let mut b = nalgebra::DVector::<f64>::zeros(n);
    for (i, &(g, chi)) in samples.iter().enumerate() {
        a[(i, 0)] = 1.0;
        a[(i, 1)] = g;
        a[(i, 2)] = g * g;
        b[i] = chi;
    }
    let svd = a.clone().svd(true, true);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * svd.singular_values[0])
        .count();
    if rank < 3 {
        return Err(Error::InvalidInput(format!(
            "sample set is rank-deficient (rank {rank} < 3); need 3 distinct g values"
        )));
    }
    let c = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut poly = ChiPolynomial {
        chi0: c[0],
        chi1: c[1],
        chi2: c[2],
        max_rel_residual: 0.0,
    };
    let mut max_rel: f64 = 0.0;
    for &(g, chi) in samples {
        let denom = chi.abs().max(1e-300);
        max_rel = max_rel.max((poly.eval(g) - chi).abs() / denom);
    }
    poly.max_rel_residual = max_rel;
    Ok(poly)
}

/// g-noise amplitude λ(g) = 2π χΦ(g) δΦ_m, converted to the noise-model
/// unit rad/μs. `g` is the coupling magnitude; the operating-branch sign
/// is applied internally.
pub fn g_noise_amplitude(g_magnitude: f64, p: &DeviceParams) -> Result<f64> {
    let chi = flux_sensitivity(signed_coupling(g_magnitude), p)?;
    Ok(2.0 * PI * chi * p.delta_phi_m * RAD_PER_NS_TO_RAD_PER_US)
}

/// Same as [`g_noise_amplitude`] but staying in device units (rad/ns).
pub fn g_noise_amplitude_rad_per_ns(g_magnitude: f64, p: &DeviceParams) -> Result<f64> {
    let chi = flux_sensitivity(signed_coupling(g_magnitude), p)?;
    Ok(2.0 * PI * chi * p.delta_phi_m)
}

/// Instantaneous Larmor frequency of the pseudo-qubit to second order
/// in the detuning noise: ω_L ≈ 2g + 2δg + δω²/(4g).
pub fn instantaneous_larmor(g: f64, delta_g: f64, delta_omega: f64) -> Result<f64> {
    if g == 0.0 {
        return Err(Error::Singular(
            "Larmor expansion requires g > 0".into(),
        ));
    }
    Ok(2.0 * g + 2.0 * delta_g + delta_omega * delta_omega / (4.0 * g))
}

/// Sample χΦ over a window of coupling magnitudes (rad/ns) on the
/// operating branch and fit the quadratic approximation.
pub fn chi_polynomial_over_window(
    g_lo: f64,
    g_hi: f64,
    points: usize,
    p: &DeviceParams,
) -> Result<ChiPolynomial> {
    if points < 3 || !(g_hi > g_lo) {
        return Err(Error::InvalidInput("bad chi fit window".into()));
    }
    let mut samples = Vec::with_capacity(points);
    for i in 0..points {
        let g = g_lo + (g_hi - g_lo) * i as f64 / (points - 1) as f64;
        samples.push((g, flux_sensitivity(signed_coupling(g), p)?));
    }
    fit_chi_polynomial(&samples)
}
