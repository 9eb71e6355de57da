//! Closed-form decay envelopes for telegraph and Gaussian coupling noise.
//!
//! For a single telegraph fluctuator the free-evolution envelope is
//!
//! χ(t) = e^{-γt}·(cosh Ωt + (γ/Ω)·sinh Ωt),   Ω = √(γ² - 4λ²),
//!
//! and the n-echo CPMG envelope is the parity-split form built from
//! q = (γ²cosh(ΩT_C) - 4λ²)/Ω² and sinh α = (γ/Ω)·sinh(ΩT_C). Both are
//! evaluated through regime-uniform helpers (series near Ω = 0, trig form
//! for imaginary Ω, exponent-safe assembly for large nγT_C), so the same
//! code path is exact in the overdamped, underdamped, and critical cases.
//!
//! Gaussian noise decays as exp(-Γ(t)) with
//! Γ(t) = (2/π)·∫₀^∞ S(ω) F(ω,t) dω. The CPMG filter here is the squared
//! modulus of the echo transfer function, normalized so that the Ramsey
//! limit is 4 sin²(ωt/2)/ω²; with a Lorentzian spectrum the integral has
//! the exact closed form [`gaussian_cpmg_lorentzian_exact`].
//!
//! Units: t and T_C in μs, λ in rad/μs, γ in 1/μs, ω in rad/μs.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::noise_model::Fluctuator;
use crate::numerics::{ln_cosh, quad};

/// Damping classification of a fluctuator's envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingRegime {
    Overdamped,
    Underdamped,
    Critical,
}

/// Classify by the sign of Ω² = γ² - 4λ².
pub fn damping_regime(f: &Fluctuator) -> DampingRegime {
    let disc = f.gamma * f.gamma - 4.0 * f.lambda * f.lambda;
    let scale = f.gamma * f.gamma + 4.0 * f.lambda * f.lambda;
    if disc.abs() <= 1e-12 * scale {
        DampingRegime::Critical
    } else if disc > 0.0 {
        DampingRegime::Overdamped
    } else {
        DampingRegime::Underdamped
    }
}

/// An envelope evaluated on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeResult {
    /// Times (μs for Ramsey grids, cycle times for CPMG sweeps).
    pub times: Vec<f64>,
    pub chi: Vec<f64>,
    pub regime: DampingRegime,
}

/// cosh(√z) - 1, divided by z; continued to z ≤ 0. Equals 1/2 at z = 0.
fn coshm1_over(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 + z / 24.0 + z * z / 720.0 + z * z * z / 40320.0
    } else if z > 0.0 {
        let w = z.sqrt();
        if w < 350.0 {
            (w.cosh() - 1.0) / z
        } else {
            f64::INFINITY
        }
    } else {
        let w = (-z).sqrt();
        (1.0 - w.cos()) / (-z)
    }
}

/// sinh(√z)/√z continued to z ≤ 0 (sin(√-z)/√-z). Equals 1 at z = 0.
fn sinhc(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        1.0 + z / 6.0 + z * z / 120.0 + z * z * z / 5040.0
    } else if z > 0.0 {
        let w = z.sqrt();
        if w < 350.0 {
            w.sinh() / w
        } else {
            f64::INFINITY
        }
    } else {
        let w = (-z).sqrt();
        w.sin() / w
    }
}

/// Free-evolution telegraph envelope χ(t); exact in every damping regime.
pub fn ramsey_rtn(f: &Fluctuator, t: f64) -> f64 {
    debug_assert!(t >= 0.0, "envelope time must be non-negative");
    let gt = f.gamma * t;
    let disc = f.gamma * f.gamma - 4.0 * f.lambda * f.lambda;
    let z = disc * t * t;
    if z > 1e-3 && (gt > 300.0 || z.sqrt() > 300.0) {
        // overdamped with huge exponents: exponent-safe assembly
        let w = z.sqrt(); // = Omega t
        let ratio = gt / w; // = gamma/Omega
        return 0.5 * ((1.0 + ratio) * (w - gt).exp() + (1.0 - ratio) * (-w - gt).exp());
    }
    (-gt).exp() * (1.0 + z * coshm1_over(z) + gt * sinhc(z))
}

/// Evaluate [`ramsey_rtn`] over a grid.
pub fn ramsey_rtn_curve(f: &Fluctuator, times: &[f64]) -> EnvelopeResult {
    EnvelopeResult {
        times: times.to_vec(),
        chi: times.iter().map(|&t| ramsey_rtn(f, t)).collect(),
        regime: damping_regime(f),
    }
}

/// n-echo CPMG telegraph envelope at cycle time `t_c` (measurement at
/// t = n·T_C). Log-domain assembly keeps the parity formula finite for
/// arbitrarily large nγT_C.
pub fn cpmg_rtn(f: &Fluctuator, n: u32, t_c: f64) -> Result<f64> {
    if n == 0 || !(t_c >= 0.0) {
        return Err(Error::InvalidInput("cpmg_rtn needs n >= 1, T_C >= 0".into()));
    }
    if t_c == 0.0 {
        return Ok(1.0);
    }
    let gtc = f.gamma * t_c;
    let disc = f.gamma * f.gamma - 4.0 * f.lambda * f.lambda;
    let z = disc * t_c * t_c;

    // q = 1 + (γT_C)²·(cosh(ΩT_C) - 1)/(ΩT_C)²  > 0 in every regime
    // sinh α = γT_C·sinh(ΩT_C)/(ΩT_C)
    let (ln_q, sinh_alpha) = if z > 1e-3 && z.sqrt() > 300.0 {
        // cosh(ΩT_C) would overflow; q ≈ (γ/Ω)²·cosh(ΩT_C) to 1e-130
        let w = z.sqrt();
        let ln_q = (gtc * gtc / z).ln() + ln_cosh(w);
        // sinh α sign is positive here (overdamped)
        (ln_q, f64::INFINITY)
    } else {
        let q = 1.0 + gtc * gtc * coshm1_over(z);
        (q.ln(), gtc * sinhc(z))
    };

    let alpha = if sinh_alpha.is_finite() {
        sinh_alpha.asinh()
    } else {
        // asinh(γ/Ω·sinh) ≈ ΩT_C + ln(γT_C/(ΩT_C)) for huge arguments
        let w = z.sqrt();
        w + (gtc / w).ln()
    };

    let nf = n as f64;
    // exponents nα - nγT_C and -nα - nγT_C are both ≤ 0 since |α| ≤ γT_C
    let ep = (nf * alpha - nf * gtc).exp();
    let em = (-nf * alpha - nf * gtc).exp();
    let e_cosh = 0.5 * (ep + em);
    let e_sinh = 0.5 * (ep - em);
    let q_over_cosh = (ln_q - ln_cosh(alpha)).exp();

    let chi = if n % 2 == 1 {
        q_over_cosh * e_cosh + e_sinh
    } else {
        q_over_cosh * e_sinh + e_cosh
    };
    Ok(chi)
}

/// Evaluate [`cpmg_rtn`] over a grid of cycle times.
pub fn cpmg_rtn_curve(f: &Fluctuator, n: u32, t_cs: &[f64]) -> Result<EnvelopeResult> {
    let chi = t_cs
        .iter()
        .map(|&tc| cpmg_rtn(f, n, tc))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnvelopeResult {
        times: t_cs.to_vec(),
        chi,
        regime: damping_regime(f),
    })
}

/// Which schedule an envelope refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    Ramsey,
    Cpmg { n: u32 },
}

/// Product envelope of independent fluctuators. `time` is the total time
/// for Ramsey mode and the cycle time T_C for CPMG mode.
pub fn multi_fluctuator_envelope(
    fluctuators: &[Fluctuator],
    mode: EnvelopeMode,
    time: f64,
) -> Result<f64> {
    let mut product = 1.0;
    for f in fluctuators {
        product *= match mode {
            EnvelopeMode::Ramsey => ramsey_rtn(f, time),
            EnvelopeMode::Cpmg { n } => cpmg_rtn(f, n, time)?,
        };
    }
    Ok(product)
}

/// Leading-order underdamped approximation
/// χ ≈ e^{-nγT_C}·(1 + nε·sin(ω̄T_C)), ω̄ = √(4λ² - γ²), ε = γ/ω̄.
/// Useful for n·ε ≪ 1; requires 2λ > γ.
pub fn underdamped_approx(f: &Fluctuator, n: u32, t_c: f64) -> Result<f64> {
    let wbar_sq = 4.0 * f.lambda * f.lambda - f.gamma * f.gamma;
    if wbar_sq <= 0.0 {
        return Err(Error::Regime(format!(
            "underdamped approximation needs 2λ > γ (λ = {}, γ = {})",
            f.lambda, f.gamma
        )));
    }
    let wbar = wbar_sq.sqrt();
    let eps = f.gamma / wbar;
    Ok((-(n as f64) * f.gamma * t_c).exp() * (1.0 + n as f64 * eps * (t_c * wbar).sin()))
}

/// Single-qubit white-dephasing prefactor e^{-Γφ·t/4} multiplying the
/// telegraph envelopes.
pub fn dephasing_prefactor(gamma_phi: f64, t: f64) -> f64 {
    (-gamma_phi * t / 4.0).exp()
}

/// Symmetric noise power spectra for the Gaussian decay integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "spectrum", rename_all = "snake_case")]
pub enum GaussianSpectrum {
    /// S(ω) = λ²/ω for ω ≥ ω_min, zero below the cutoff.
    OneOverF { lambda: f64, omega_min: f64 },
    /// S(ω) = 4λ²γ/(ω² + 4γ²) — the spectrum of a telegraph process with
    /// amplitude λ and switching rate γ.
    Lorentzian { lambda: f64, gamma: f64 },
    /// Tabulated S(ω) on ω ≥ 0 with linear interpolation, zero outside.
    Custom { omegas: Vec<f64>, values: Vec<f64> },
}

impl GaussianSpectrum {
    pub fn validate(&self) -> Result<()> {
        match self {
            GaussianSpectrum::OneOverF { lambda, omega_min } => {
                if !(*lambda >= 0.0) {
                    return Err(Error::InvalidInput("negative 1/f amplitude".into()));
                }
                if !(*omega_min > 0.0) && *lambda > 0.0 {
                    return Err(Error::CutoffRequired(
                        "1/f spectrum needs a positive low-frequency cutoff".into(),
                    ));
                }
                Ok(())
            }
            GaussianSpectrum::Lorentzian { lambda, gamma } => {
                if !(*lambda >= 0.0) || !(*gamma > 0.0) {
                    return Err(Error::InvalidInput(
                        "Lorentzian spectrum needs λ >= 0, γ > 0".into(),
                    ));
                }
                Ok(())
            }
            GaussianSpectrum::Custom { omegas, values } => {
                if omegas.len() != values.len() || omegas.len() < 2 {
                    return Err(Error::InvalidInput("bad tabulated spectrum".into()));
                }
                if omegas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidInput(
                        "tabulated frequencies must increase".into(),
                    ));
                }
                if values.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidInput("spectrum must be non-negative".into()));
                }
                Ok(())
            }
        }
    }

    /// S(|ω|).
    pub fn value(&self, omega: f64) -> f64 {
        let w = omega.abs();
        match self {
            GaussianSpectrum::OneOverF { lambda, omega_min } => {
                if w >= *omega_min {
                    lambda * lambda / w
                } else {
                    0.0
                }
            }
            GaussianSpectrum::Lorentzian { lambda, gamma } => {
                4.0 * lambda * lambda * gamma / (w * w + 4.0 * gamma * gamma)
            }
            GaussianSpectrum::Custom { omegas, values } => {
                if w < omegas[0] || w > *omegas.last().unwrap() {
                    return 0.0;
                }
                match omegas.binary_search_by(|o| o.partial_cmp(&w).unwrap()) {
                    Ok(i) => values[i],
                    Err(i) => {
                        let f = (w - omegas[i - 1]) / (omegas[i] - omegas[i - 1]);
                        values[i - 1] * (1.0 - f) + values[i] * f
                    }
                }
            }
        }
    }

    /// Algebraic decay power of S(ω)·F(ω)/ω-blocks, used to bound the
    /// block-summation tail.
    fn tail_power(&self) -> f64 {
        match self {
            GaussianSpectrum::OneOverF { .. } => 3.0,
            GaussianSpectrum::Lorentzian { .. } => 4.0,
            GaussianSpectrum::Custom { .. } => 4.0,
        }
    }
}

/// Filter selection for [`gaussian_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "filter", rename_all = "snake_case")]
pub enum DecayFilter {
    /// Free evolution for total time t.
    Ramsey { t: f64 },
    /// n echo cycles of duration t_c each.
    Cpmg { n: u32, t_c: f64 },
}

/// Pole-safe (1 - sec x)²·trig²(nx): the removable double poles at
/// x = (k+½)π are evaluated through the L'Hôpital limit of trig(nx)/cos(x).
fn filter_core(n: u32, x: f64) -> f64 {
    let c = x.cos();
    let nf = n as f64;
    let trig = if n % 2 == 0 {
        (nf * x).sin()
    } else {
        (nf * x).cos()
    };
    if c.abs() < 1e-9 {
        let s = x.sin();
        let ratio = if n % 2 == 0 {
            -nf * (nf * x).cos() / s
        } else {
            nf * (nf * x).sin() / s
        };
        let v = (1.0 - c) * ratio;
        return v * v;
    }
    let v = (1.0 - c) * trig / c;
    v * v
}

/// CPMG filter function F(ω, t) = |∫₀ᵗ h(τ)e^{iωτ}dτ|² for the n-pulse
/// echo train with T_C = t/n:
///
/// F = (4/ω²)·(1 - sec(ωT_C/2))²·{sin²(nωT_C/2) for even n,
///                                 cos²(nωT_C/2) for odd n}.
///
/// Normalized so the Ramsey limit is 4 sin²(ωt/2)/ω²; F(0) = 0 by the
/// series limit. Evaluation exactly at a secant pole is an error — the
/// singularities are removable and the quadrature path evaluates their
/// limits, but a pointwise query at the pole has no printable form.
pub fn cpmg_filter_function(n: u32, omega: f64, t: f64) -> Result<f64> {
    if n == 0 || !(t > 0.0) {
        return Err(Error::InvalidInput(
            "filter needs n >= 1 and t > 0".into(),
        ));
    }
    if omega == 0.0 {
        return Ok(0.0);
    }
    let t_c = t / n as f64;
    let x = omega.abs() * t_c / 2.0;
    if x.cos() == 0.0 {
        return Err(Error::Pole(format!(
            "filter evaluated exactly at a secant pole (ω·T_C/2 = {x})"
        )));
    }
    Ok(4.0 * filter_core(n, x) / (omega * omega))
}

/// Gaussian decay exponent Γ(t) = (2/π)·∫₀^∞ S(ω)·F(ω,t)dω by adaptive
/// quadrature (relative tolerance 1e-8). χ(t) = exp(-Γ).
pub fn gaussian_decay(spectrum: &GaussianSpectrum, filter: DecayFilter) -> Result<f64> {
    spectrum.validate()?;
    const REL: f64 = 1e-8;
    match filter {
        DecayFilter::Ramsey { t } => {
            if !(t >= 0.0) {
                return Err(Error::InvalidInput("negative time".into()));
            }
            if t == 0.0 {
                return Ok(0.0);
            }
            // integrate in half-period blocks of sin^2(w t/2)
            let f = |w: f64| spectrum.value(w) * 4.0 * (w * t / 2.0).sin().powi(2) / (w * w);
            let lo = match spectrum {
                GaussianSpectrum::OneOverF { omega_min, .. } => *omega_min,
                _ => 0.0,
            };
            let g = move |w: f64| if w <= lo || w <= 0.0 { 0.0 } else { f(w) };
            let block = PI / t;
            let total =
                quad::integrate_blocks(g, 0.0, block, REL, spectrum.tail_power(), 2_000_000);
            Ok(2.0 / PI * total)
        }
        DecayFilter::Cpmg { n, t_c } => {
            if n == 0 || !(t_c >= 0.0) {
                return Err(Error::InvalidInput("bad CPMG filter".into()));
            }
            if t_c == 0.0 {
                return Ok(0.0);
            }
            // x = ω·T_C/2:  Γ = (4T_C/π)·∫ S(2x/T_C)·core(x)/x² dx
            let lo = match spectrum {
                GaussianSpectrum::OneOverF { omega_min, .. } => omega_min * t_c / 2.0,
                _ => 0.0,
            };
            let g = move |x: f64| {
                if x <= lo || x <= 0.0 {
                    return 0.0;
                }
                spectrum.value(2.0 * x / t_c) * filter_core(n, x) / (x * x)
            };
            let total =
                quad::integrate_blocks(g, 0.0, PI / 2.0, REL, spectrum.tail_power(), 2_000_000);
            Ok(4.0 * t_c / PI * total)
        }
    }
}

/// Exact Gaussian CPMG decay exponent for a Lorentzian spectrum
/// S(ω) = 4λ²γ/(ω² + 4γ²):
///
/// Γ(n, T_C) = (2λ²n/γ²)(γT_C - tanh γT_C) - δΓ(n, T_C),
/// δΓ = (λ²/γ²)(1 - sech γT_C)²·(1 ∓ e^{-2nγT_C})   (−: even n, +: odd n).
pub fn gaussian_cpmg_lorentzian_exact(lambda: f64, gamma: f64, n: u32, t_c: f64) -> Result<f64> {
    if n == 0 || !(gamma > 0.0) || !(t_c >= 0.0) {
        return Err(Error::InvalidInput(
            "need n >= 1, gamma > 0, T_C >= 0".into(),
        ));
    }
    let y = gamma * t_c;
    let l2g2 = lambda * lambda / (gamma * gamma);
    let main = 2.0 * l2g2 * n as f64 * (y - y.tanh());
    let sech = 1.0 / y.cosh();
    let shape = (1.0 - sech) * (1.0 - sech);
    let delta = if n % 2 == 0 {
        l2g2 * shape * (1.0 - (-2.0 * n as f64 * y).exp())
    } else {
        l2g2 * shape * (1.0 + (-2.0 * n as f64 * y).exp())
    };
    Ok(main - delta)
}

/// ξ(n) = ∫₀^∞ [(x - tanh x)/x³ + 2e^{-2nx}(1 - sech x)²/x²] dx,
/// the weak n-dependence of the Gaussian 1/f CPMG rate.
pub fn one_over_f_cpmg_xi(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("xi(n) needs n >= 1".into()));
    }
    let integrand = move |x: f64| xi_integrand(x, Some(n));
    Ok(quad::integrate(integrand, 0.0, 40.0, 1e-12) + tail_40())
}

/// The n → ∞ limit ∫₀^∞ (x - tanh x)/x³ dx ≈ 0.8525.
pub fn one_over_f_cpmg_xi_infinity() -> f64 {
    quad::integrate(|x| xi_integrand(x, None), 0.0, 40.0, 1e-12) + tail_40()
}

fn xi_integrand(x: f64, n: Option<u32>) -> f64 {
    if x < 1e-3 {
        // (x - tanh x)/x³ = 1/3 - 2x²/15 + ...; echo term starts at x²/2
        let echo = match n {
            Some(n) => 0.5 * x * x * (-2.0 * n as f64 * x).exp(),
            None => 0.0,
        };
        return 1.0 / 3.0 - 2.0 * x * x / 15.0 + echo;
    }
    let base = (x - x.tanh()) / (x * x * x);
    match n {
        Some(n) => {
            let sech = 1.0 / x.cosh();
            base + 2.0 * (-2.0 * n as f64 * x).exp() * (1.0 - sech) * (1.0 - sech) / (x * x)
        }
        None => base,
    }
}

/// Analytic tail of ∫(x - tanh x)/x³ beyond x = 40 (tanh ≈ 1 there).
fn tail_40() -> f64 {
    1.0 / 40.0 - 1.0 / 3200.0
}

/// Gaussian 1/f CPMG decay exponent in the weak-n-dependence form
/// Γ(t) = 2λ²t²·ξ(n)/n (decay rate inversely proportional to n).
pub fn one_over_f_cpmg_exponent(lambda: f64, n: u32, t: f64) -> Result<f64> {
    Ok(2.0 * lambda * lambda * t * t * one_over_f_cpmg_xi(n)? / n as f64)
}
