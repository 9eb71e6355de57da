//! Noise-parameter recovery from decay curves.
//!
//! The fitted models compose the closed-form envelopes: a product of
//! telegraph CPMG envelopes, an optional white-dephasing exponential, and
//! the e^{-Γφt/4} prefactor. Multi-curve fits share parameters across
//! echo numbers (one (λ, γ) pair describing every n) or across coupling
//! strengths (one quadratic χΦ(g) shape with per-fluctuator scales).
//! Minimization is damped least squares with numeric Jacobians and
//! seeded multi-start; reported confidence half-widths are 2σ from the
//! residual curvature.

pub mod lm;

use serde::{Deserialize, Serialize};

use crate::envelopes::{cpmg_rtn, damping_regime, dephasing_prefactor, DampingRegime};
use crate::error::{Error, Result};
use crate::noise_model::Fluctuator;
use lm::{confidence_and_curvature, multi_start, LmOptions};

/// Provenance of one measured (or synthesized) decay curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    /// "ramsey" or "cpmg".
    pub kind: String,
    /// Echo count (0 for Ramsey).
    #[serde(default)]
    pub n: u32,
    /// Gates per half-cycle (0 when the curve sweeps m).
    #[serde(default)]
    pub m: u32,
    /// Gate duration (ns).
    pub t_g_ns: f64,
    /// Plateau coupling magnitude (rad/ns).
    pub g_max: f64,
    /// Shots per point when shot noise was applied.
    #[serde(default)]
    pub shots: Option<u32>,
}

/// A sampled normalized ⟨σ_z⟩ decay curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    /// Total evolution times (μs), strictly increasing.
    pub times: Vec<f64>,
    /// Normalized population difference at each time, in [-1, 1].
    pub values: Vec<f64>,
    /// Per-point standard error (0 marks noiseless model curves).
    pub stderr: Vec<f64>,
    pub meta: CurveMeta,
}

impl DecayCurve {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        stderr: Vec<f64>,
        meta: CurveMeta,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() || times.len() != stderr.len() {
            return Err(Error::InvalidInput("curve arrays must match".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "curve times must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + 1e-9) {
            return Err(Error::InvalidInput(
                "curve values must lie in [-1, 1]".into(),
            ));
        }
        let values = values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        Ok(DecayCurve {
            times,
            values,
            stderr,
            meta,
        })
    }

    fn weight(&self, i: usize) -> f64 {
        let s = self.stderr[i];
        if s > 0.0 {
            1.0 / s
        } else {
            1.0
        }
    }
}

/// Structure of the model to fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitModel {
    /// Number of telegraph fluctuators.
    pub n_fluctuators: usize,
    /// Couple every fluctuator through one shared χΦ(g) shape, amplitudes
    /// differing by an overall scale (used by [`fit_g_scaling`]).
    #[serde(default)]
    pub share_chi_shape: bool,
    /// Include a CPMG-independent white dephasing rate.
    #[serde(default)]
    pub include_white: bool,
    /// Fit Γφ; when false it is held at `fixed_gamma_phi`.
    #[serde(default)]
    pub include_gamma_phi: bool,
    #[serde(default)]
    pub fixed_gamma_phi: f64,
    /// Box bounds for the parameters.
    #[serde(default)]
    pub bounds: FitBounds,
    /// Number of multi-start seeds (floored at 8).
    #[serde(default = "default_starts")]
    pub n_starts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Optional explicit starting point (raw parameter layout).
    #[serde(default)]
    pub initial_guess: Option<Vec<f64>>,
}

fn default_starts() -> usize {
    8
}

impl FitModel {
    pub fn single_fluctuator() -> Self {
        FitModel {
            n_fluctuators: 1,
            share_chi_shape: false,
            include_white: false,
            include_gamma_phi: false,
            fixed_gamma_phi: 0.0,
            bounds: FitBounds::default(),
            n_starts: 8,
            seed: 0,
            initial_guess: None,
        }
    }
}

/// Parameter box bounds (units as the parameters themselves).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitBounds {
    /// λ (rad/μs).
    pub lambda: (f64, f64),
    /// γ (1/μs).
    pub gamma: (f64, f64),
    /// Γφ (1/μs).
    pub gamma_phi: (f64, f64),
    /// White dephasing rate (1/μs).
    pub white: (f64, f64),
    /// Relative amplitude scale of secondary fluctuators.
    pub scale: (f64, f64),
    /// χΦ quadratic coefficients (c₀, c₁, c₂ share one magnitude box).
    pub chi: (f64, f64),
}

impl Default for FitBounds {
    fn default() -> Self {
        FitBounds {
            lambda: (1e-3, 40.0),
            gamma: (1e-4, 20.0),
            gamma_phi: (1e-5, 2.0),
            white: (1e-7, 2.0),
            scale: (1e-3, 10.0),
            chi: (-1e3, 1e3),
        }
    }
}

/// One fitted parameter with a 2σ confidence half-width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub unit: String,
    /// 2σ half-width from the residual curvature.
    pub confidence: f64,
}

/// Outcome of a fit: parameters, goodness, and diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<FitParam>,
    /// Sum of squared weighted residuals.
    pub chi_square: f64,
    pub reduced_chi_square: f64,
    pub n_points: usize,
    pub n_parameters: usize,
    pub converged: bool,
    pub n_starts: usize,
    pub best_start: usize,
    /// Curvature-spectrum warnings about weakly identifiable directions.
    pub warnings: Vec<String>,
    /// Damping regime of the dominant fitted fluctuator.
    pub regime: Option<DampingRegime>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Switching rate standing in for white flux noise when it is emulated
/// by a fast fluctuator (well above every inverse timescale of interest).
pub const WHITE_EMULATION_GAMMA: f64 = 50.0;

/// Joint fit of CPMG curves taken at different echo numbers n, sharing
/// one noise model: Π_k χ_CPMG(λ_k, γ_k) · e^{-Γ_w t} · e^{-Γφ t/4}.
pub fn fit_cpmg_family(curves: &[DecayCurve], model: &FitModel) -> Result<FitResult> {
    if curves.len() < 2 {
        return Err(Error::InvalidInput(
            "family fit needs at least 2 curves".into(),
        ));
    }
    for c in curves {
        if c.meta.kind != "cpmg" || c.meta.n == 0 {
            return Err(Error::InvalidInput(
                "family fit takes CPMG curves with n >= 1".into(),
            ));
        }
        if (c.meta.t_g_ns - curves[0].meta.t_g_ns).abs() > 1e-9
            || (c.meta.g_max - curves[0].meta.g_max).abs() > 1e-12
        {
            return Err(Error::InvalidInput(
                "family curves must share t_g and g_max".into(),
            ));
        }
    }
    let k = model.n_fluctuators.max(1);

    // layout: [λ1, γ1, ..., λK, γK, (Γφ), (Γw)]
    let mut bounds: Vec<(f64, f64)> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for i in 0..k {
        bounds.push(model.bounds.lambda);
        names.push(format!("lambda{}", i + 1));
        bounds.push(model.bounds.gamma);
        names.push(format!("gamma{}", i + 1));
    }
    if model.include_gamma_phi {
        bounds.push(model.bounds.gamma_phi);
        names.push("gamma_phi".into());
    }
    if model.include_white {
        bounds.push(model.bounds.white);
        names.push("white_rate".into());
    }

    let n_points: usize = curves.iter().map(|c| c.times.len()).sum();
    if bounds.len() > n_points {
        return Err(Error::InvalidInput(format!(
            "{} parameters exceed {} data points",
            bounds.len(),
            n_points
        )));
    }
    let fixed_phi = model.fixed_gamma_phi;
    let include_phi = model.include_gamma_phi;
    let include_white = model.include_white;

    let curves_ref = curves;
    let residual = move |p: &[f64], out: &mut [f64]| {
        let mut idx = 2 * k;
        let gamma_phi = if include_phi {
            let v = p[idx];
            idx += 1;
            v
        } else {
            fixed_phi
        };
        let white = if include_white { p[idx] } else { 0.0 };
        let mut row = 0usize;
        for c in curves_ref {
            let n = c.meta.n;
            for (i, (&t, &v)) in c.times.iter().zip(&c.values).enumerate() {
                let t_c = t / n as f64;
                let mut chi = dephasing_prefactor(gamma_phi, t) * (-white * t).exp();
                for fk in 0..k {
                    let f = Fluctuator {
                        lambda: p[2 * fk],
                        gamma: p[2 * fk + 1],
                        label: String::new(),
                    };
                    chi *= cpmg_rtn(&f, n, t_c).unwrap_or(f64::NAN);
                }
                out[row] = (chi - v) * c.weight(i);
                row += 1;
            }
        }
    };

    let best = multi_start(
        &residual,
        n_points,
        &bounds,
        model.initial_guess.as_deref(),
        model.n_starts,
        model.seed,
        &LmOptions::default(),
    )?;

    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let (conf, warnings) = confidence_and_curvature(
        &residual,
        n_points,
        &best.params,
        &bounds,
        best.chi_square,
        &name_refs,
    );

    let dominant = Fluctuator {
        lambda: best.params[0],
        gamma: best.params[1],
        label: String::new(),
    };
    let mut params = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let unit = if name.starts_with("lambda") {
            "rad/us"
        } else {
            "1/us"
        };
        params.push(FitParam {
            name: name.clone(),
            value: best.params[i],
            unit: unit.into(),
            confidence: conf[i],
        });
    }
    let dof = (n_points as f64 - bounds.len() as f64).max(1.0);
    Ok(FitResult {
        chi_square: best.chi_square,
        reduced_chi_square: best.chi_square / dof,
        n_points,
        n_parameters: bounds.len(),
        converged: best.converged,
        n_starts: model.n_starts.max(8),
        best_start: best.start_index,
        warnings,
        regime: Some(damping_regime(&dominant)),
        params,
    })
}

/// Joint fit of CPMG curves taken at different coupling magnitudes,
/// with every fluctuator coupled through one quadratic amplitude shape
/// λ_k(g) = s_k·(c₀ + c₁g + c₂g²) (g in rad/ns, λ in rad/μs, s₁ ≡ 1).
/// White flux noise is emulated by a fast fluctuator at
/// [`WHITE_EMULATION_GAMMA`]; Γφ is a shared free parameter.
pub fn fit_g_scaling(curves: &[DecayCurve], model: &FitModel) -> Result<FitResult> {
    if !model.share_chi_shape {
        return Err(Error::InvalidInput(
            "fit_g_scaling requires share_chi_shape".into(),
        ));
    }
    let mut gs: Vec<f64> = curves.iter().map(|c| c.meta.g_max).collect();
    gs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if gs.len() < 4 {
        return Err(Error::InvalidInput(
            "g-scaling fit needs curves at >= 4 distinct g_max values".into(),
        ));
    }
    for c in curves {
        if c.meta.kind != "cpmg" || c.meta.n == 0 {
            return Err(Error::InvalidInput(
                "g-scaling fit takes CPMG curves".into(),
            ));
        }
    }
    let k = model.n_fluctuators.max(1);
    let n_slow = if model.include_white { k - 1 } else { k };
    if model.include_white && k < 2 {
        return Err(Error::InvalidInput(
            "white emulation needs n_fluctuators >= 2".into(),
        ));
    }

    // layout: [c0, c1, c2, γ_1..γ_slow, s_2..s_K, (Γφ)]
    let mut bounds = vec![model.bounds.chi; 3];
    let mut names = vec!["chi0".to_string(), "chi1".to_string(), "chi2".to_string()];
    for i in 0..n_slow {
        bounds.push(model.bounds.gamma);
        names.push(format!("gamma{}", i + 1));
    }
    for i in 1..k {
        bounds.push(model.bounds.scale);
        names.push(format!("scale{}", i + 1));
    }
    if model.include_gamma_phi {
        bounds.push(model.bounds.gamma_phi);
        names.push("gamma_phi".into());
    }

    let n_points: usize = curves.iter().map(|c| c.times.len()).sum();
    if bounds.len() > n_points {
        return Err(Error::InvalidInput(format!(
            "{} parameters exceed {} data points",
            bounds.len(),
            n_points
        )));
    }

    let include_phi = model.include_gamma_phi;
    let fixed_phi = model.fixed_gamma_phi;
    let include_white = model.include_white;
    let curves_ref = curves;
    let residual = move |p: &[f64], out: &mut [f64]| {
        let quad = |g: f64| p[0] + p[1] * g + p[2] * g * g;
        let gamma_of = |fk: usize| {
            if include_white && fk == k - 1 {
                WHITE_EMULATION_GAMMA
            } else {
                p[3 + fk]
            }
        };
        let scale_of = |fk: usize| if fk == 0 { 1.0 } else { p[3 + n_slow + fk - 1] };
        let phi_idx = 3 + n_slow + (k - 1);
        let gamma_phi = if include_phi { p[phi_idx] } else { fixed_phi };

        let mut row = 0usize;
        for c in curves_ref {
            let n = c.meta.n;
            let g = c.meta.g_max;
            let amp = quad(g);
            for (i, (&t, &v)) in c.times.iter().zip(&c.values).enumerate() {
                let t_c = t / n as f64;
                let mut chi = dephasing_prefactor(gamma_phi, t);
                for fk in 0..k {
                    let lambda = (scale_of(fk) * amp).abs();
                    let f = Fluctuator {
                        lambda,
                        gamma: gamma_of(fk),
                        label: String::new(),
                    };
                    chi *= cpmg_rtn(&f, n, t_c).unwrap_or(f64::NAN);
                }
                out[row] = (chi - v) * c.weight(i);
                row += 1;
            }
        }
    };

    let best = multi_start(
        &residual,
        n_points,
        &bounds,
        model.initial_guess.as_deref(),
        model.n_starts,
        model.seed,
        &LmOptions::default(),
    )?;

    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let (conf, warnings) = confidence_and_curvature(
        &residual,
        n_points,
        &best.params,
        &bounds,
        best.chi_square,
        &name_refs,
    );

    let mut params = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let unit = match name.as_str() {
            "chi0" => "rad/us",
            "chi1" => "rad/us per rad/ns",
            "chi2" => "rad/us per (rad/ns)^2",
            s if s.starts_with("gamma") => "1/us",
            _ => "",
        };
        params.push(FitParam {
            name: name.clone(),
            value: best.params[i],
            unit: unit.into(),
            confidence: conf[i],
        });
    }
    // curvature-to-slope ratio χ²/χ¹ in ns
    let ratio = best.params[2] / best.params[1];
    params.push(FitParam {
        name: "chi_ratio".into(),
        value: ratio,
        unit: "ns".into(),
        confidence: {
            // first-order propagation from the two coefficients
            let r1 = conf[1] / best.params[1].abs().max(1e-300);
            let r2 = conf[2] / best.params[2].abs().max(1e-300);
            ratio.abs() * (r1 * r1 + r2 * r2).sqrt()
        },
    });

    let g0 = curves[0].meta.g_max;
    let dominant = Fluctuator {
        lambda: (best.params[0] + best.params[1] * g0 + best.params[2] * g0 * g0).abs(),
        gamma: best.params[3],
        label: String::new(),
    };
    let dof = (n_points as f64 - bounds.len() as f64).max(1.0);
    Ok(FitResult {
        chi_square: best.chi_square,
        reduced_chi_square: best.chi_square / dof,
        n_points,
        n_parameters: bounds.len(),
        converged: best.converged,
        n_starts: model.n_starts.max(8),
        best_start: best.start_index,
        warnings,
        regime: Some(damping_regime(&dominant)),
        params,
    })
}

/// Ramsey Gaussian-envelope fit e^{-(Γ_R t)²}·cos(G·t). In envelope mode
/// (curves sampled at swap nodes) the cosine factor is held at 1 and only
/// Γ_R is fitted; the returned swap frequency is then 0.
pub fn fit_ramsey_gaussian(curve: &DecayCurve, envelope_only: bool) -> Result<(f64, f64)> {
    if curve.meta.kind != "ramsey" {
        return Err(Error::InvalidInput(
            "fit_ramsey_gaussian takes a Ramsey curve".into(),
        ));
    }
    let t_max = *curve.times.last().unwrap();
    let bounds: Vec<(f64, f64)> = if envelope_only {
        vec![(0.0, 100.0 / t_max)]
    } else {
        vec![(0.0, 100.0 / t_max), (0.0, 1e3)]
    };
    let times = curve.times.clone();
    let values = curve.values.clone();
    let weights: Vec<f64> = (0..curve.times.len()).map(|i| curve.weight(i)).collect();
    let residual = move |p: &[f64], out: &mut [f64]| {
        for (i, ((&t, &v), &w)) in times.iter().zip(&values).zip(&weights).enumerate() {
            let envelope = (-(p[0] * t) * (p[0] * t)).exp();
            let model = if p.len() > 1 {
                envelope * (p[1] * t).cos()
            } else {
                envelope
            };
            out[i] = (model - v) * w;
        }
    };
    let best = multi_start(
        &residual,
        curve.times.len(),
        &bounds,
        None,
        8,
        7,
        &LmOptions::default(),
    )?;
    if !best.converged {
        return Err(Error::Convergence(format!(
            "Ramsey fit did not converge in {} iterations (cost {:.3e})",
            best.n_iter, best.chi_square
        )));
    }
    let gamma_r = best.params[0];
    let swap = best.params.get(1).copied().unwrap_or(0.0);
    Ok((gamma_r, swap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc_engine::apply_shot_noise;
    use crate::units::MHZ_TO_RAD_PER_US;

    fn cpmg_meta(n: u32) -> CurveMeta {
        CurveMeta {
            kind: "cpmg".into(),
            n,
            m: 0,
            t_g_ns: 40.0,
            g_max: 0.19,
            shots: None,
        }
    }

    /// Noiseless single-fluctuator family with Γφ prefactor.
    fn synth_family(lambda: f64, gamma: f64, gamma_phi: f64, ns: &[u32]) -> Vec<DecayCurve> {
        let f = Fluctuator::new(lambda, gamma).unwrap();
        ns.iter()
            .map(|&n| {
                let times: Vec<f64> = (1..=25).map(|i| i as f64 * 2.0).collect();
                let values: Vec<f64> = times
                    .iter()
                    .map(|&t| {
                        dephasing_prefactor(gamma_phi, t)
                            * cpmg_rtn(&f, n, t / n as f64).unwrap()
                    })
                    .collect();
                let stderr = vec![0.0; times.len()];
                DecayCurve::new(times, values, stderr, cpmg_meta(n)).unwrap()
            })
            .collect()
    }

    #[test]
    fn curve_validation() {
        let meta = cpmg_meta(1);
        assert!(
            DecayCurve::new(vec![1.0, 1.0], vec![0.1, 0.1], vec![0.0; 2], meta.clone()).is_err()
        );
        assert!(DecayCurve::new(vec![1.0], vec![1.5], vec![0.0], meta.clone()).is_err());
        assert!(DecayCurve::new(vec![1.0], vec![0.5], vec![0.0], meta).is_ok());
    }

    #[test]
    fn family_fit_fixed_point_on_noiseless_data() {
        let lambda = 0.3 * MHZ_TO_RAD_PER_US;
        let gamma = 0.02;
        let curves = synth_family(lambda, gamma, 0.0, &[1, 2, 4]);
        let mut model = FitModel::single_fluctuator();
        model.initial_guess = Some(vec![lambda, gamma]);
        let fit = fit_cpmg_family(&curves, &model).unwrap();
        assert!(fit.chi_square < 1e-16, "chi^2 = {}", fit.chi_square);
        assert!((fit.param("lambda1").unwrap().value - lambda).abs() < 1e-9);
        assert!((fit.param("gamma1").unwrap().value - gamma).abs() < 1e-9);
    }

    #[test]
    fn family_fit_recovers_from_shot_noise() {
        let lambda = 0.3 * MHZ_TO_RAD_PER_US;
        let gamma = 0.02; // 1/(50 us)
        let curves: Vec<DecayCurve> = synth_family(lambda, gamma, 0.0, &[1, 2, 4])
            .iter()
            .enumerate()
            .map(|(i, c)| apply_shot_noise(c, 10_000, 100 + i as u64).unwrap())
            .collect();
        let model = FitModel::single_fluctuator();
        let fit = fit_cpmg_family(&curves, &model).unwrap();
        let l = fit.param("lambda1").unwrap().value;
        let g = fit.param("gamma1").unwrap().value;
        assert!((l - lambda).abs() / lambda < 0.10, "lambda {l} vs {lambda}");
        assert!((g - gamma).abs() / gamma < 0.10, "gamma {g} vs {gamma}");
    }

    #[test]
    fn family_fit_classifies_underdamped_steps() {
        // step-showing curves come from an underdamped fluctuator
        let lambda = 0.3 * MHZ_TO_RAD_PER_US;
        let gamma = 0.02;
        assert!(2.0 * lambda > gamma);
        let curves: Vec<DecayCurve> = synth_family(lambda, gamma, 0.0, &[2, 4])
            .iter()
            .enumerate()
            .map(|(i, c)| apply_shot_noise(c, 10_000, 55 + i as u64).unwrap())
            .collect();
        let fit = fit_cpmg_family(&curves, &FitModel::single_fluctuator()).unwrap();
        assert_eq!(fit.regime, Some(DampingRegime::Underdamped));
    }

    #[test]
    fn family_fit_rejects_mixed_meta() {
        let mut curves = synth_family(0.5, 0.05, 0.0, &[1, 2]);
        curves[1].meta.t_g_ns = 20.0;
        assert!(fit_cpmg_family(&curves, &FitModel::single_fluctuator()).is_err());
    }

    #[test]
    fn fit_objective_invariant_under_reordering() {
        let lambda = 0.4 * MHZ_TO_RAD_PER_US;
        let curves: Vec<DecayCurve> = synth_family(lambda, 0.05, 0.0, &[1, 2, 4])
            .iter()
            .enumerate()
            .map(|(i, c)| apply_shot_noise(c, 10_000, 9 + i as u64).unwrap())
            .collect();
        let mut reversed = curves.clone();
        reversed.reverse();
        let model = FitModel::single_fluctuator();
        let a = fit_cpmg_family(&curves, &model).unwrap();
        let b = fit_cpmg_family(&reversed, &model).unwrap();
        assert!((a.chi_square - b.chi_square).abs() < 1e-9);
        assert!(
            (a.param("lambda1").unwrap().value - b.param("lambda1").unwrap().value).abs() < 1e-9
        );
    }

    #[test]
    fn reduced_chi_square_consistent_with_shot_noise() {
        let lambda = 0.3 * MHZ_TO_RAD_PER_US;
        let curves: Vec<DecayCurve> = synth_family(lambda, 0.02, 0.0, &[1, 2, 4])
            .iter()
            .enumerate()
            .map(|(i, c)| apply_shot_noise(c, 10_000, 31 + i as u64).unwrap())
            .collect();
        let fit = fit_cpmg_family(&curves, &FitModel::single_fluctuator()).unwrap();
        assert!(
            fit.reduced_chi_square > 0.7 && fit.reduced_chi_square < 1.3,
            "reduced chi^2 = {}",
            fit.reduced_chi_square
        );
    }

    #[test]
    fn confidence_calibration_over_replications() {
        // 2σ intervals contain the truth in >= 80% of seeded replications
        let lambda = 0.3 * MHZ_TO_RAD_PER_US;
        let gamma = 0.02;
        let clean = synth_family(lambda, gamma, 0.0, &[1, 2, 4]);
        let mut hits_lambda = 0;
        let mut hits_gamma = 0;
        const REPS: usize = 50;
        for rep in 0..REPS {
            let noisy: Vec<DecayCurve> = clean
                .iter()
                .enumerate()
                .map(|(i, c)| apply_shot_noise(c, 10_000, 1000 + (rep * 3 + i) as u64).unwrap())
                .collect();
            let mut model = FitModel::single_fluctuator();
            model.seed = rep as u64;
            let fit = fit_cpmg_family(&noisy, &model).unwrap();
            let l = fit.param("lambda1").unwrap();
            let g = fit.param("gamma1").unwrap();
            if (l.value - lambda).abs() <= l.confidence {
                hits_lambda += 1;
            }
            if (g.value - gamma).abs() <= g.confidence {
                hits_gamma += 1;
            }
        }
        assert!(
            hits_lambda * 100 >= 80 * REPS,
            "lambda coverage {hits_lambda}/{REPS}"
        );
        assert!(
            hits_gamma * 100 >= 80 * REPS,
            "gamma coverage {hits_gamma}/{REPS}"
        );
    }

    #[test]
    fn ramsey_gaussian_fit_recovery() {
        let gamma_r = 0.21;
        let times: Vec<f64> = (1..=40).map(|i| i as f64 * 0.25).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|&t| (-(gamma_r * t).powi(2)).exp())
            .collect();
        let meta = CurveMeta {
            kind: "ramsey".into(),
            n: 0,
            m: 0,
            t_g_ns: 40.0,
            g_max: 0.1,
            shots: None,
        };
        let curve =
            DecayCurve::new(times.clone(), values, vec![0.0; times.len()], meta.clone()).unwrap();
        let (fit_gr, _) = fit_ramsey_gaussian(&curve, true).unwrap();
        assert!((fit_gr - gamma_r).abs() / gamma_r < 0.01);

        // constant curve: rate consistent with zero
        let flat = DecayCurve::new(
            times.clone(),
            vec![1.0; times.len()],
            vec![0.0; times.len()],
            meta,
        )
        .unwrap();
        let (flat_gr, _) = fit_ramsey_gaussian(&flat, true).unwrap();
        assert!(flat_gr.abs() < 1e-6);
    }

    #[test]
    fn g_scaling_fit_roundtrip() {
        // generator: two fluctuators sharing a quadratic amplitude shape
        // with curvature ratio 0.12 ns, white emulation, and Γφ = 1/90
        let c0 = 1.2;
        let c1 = 18.0;
        let ratio_true = 0.12;
        let c2 = c1 * ratio_true;
        let gamma_slow = 1.0 / 70.0;
        let s_white = 1.4;
        let gamma_phi = 1.0 / 90.0;
        let n = 1u32;
        let g_values: Vec<f64> = [10.0, 20.0, 30.0, 40.0, 50.0]
            .iter()
            .map(|g_mhz| g_mhz * 1e-3 * crate::units::GHZ_TO_RAD_PER_NS)
            .collect();
        let mut curves = Vec::new();
        for (ci, &g) in g_values.iter().enumerate() {
            let amp = c0 + c1 * g + c2 * g * g;
            let f_slow = Fluctuator::new(amp, gamma_slow).unwrap();
            let f_white = Fluctuator::new(s_white * amp, WHITE_EMULATION_GAMMA).unwrap();
            let times: Vec<f64> = (1..=30).map(|i| i as f64 * 1.2).collect();
            let values: Vec<f64> = times
                .iter()
                .map(|&t| {
                    dephasing_prefactor(gamma_phi, t)
                        * cpmg_rtn(&f_slow, n, t / n as f64).unwrap()
                        * cpmg_rtn(&f_white, n, t / n as f64).unwrap()
                })
                .collect();
            let meta = CurveMeta {
                kind: "cpmg".into(),
                n,
                m: 0,
                t_g_ns: 40.0,
                g_max: g,
                shots: None,
            };
            let clean =
                DecayCurve::new(times.clone(), values, vec![0.0; times.len()], meta).unwrap();
            curves.push(apply_shot_noise(&clean, 10_000, 400 + ci as u64).unwrap());
        }
        let model = FitModel {
            n_fluctuators: 2,
            share_chi_shape: true,
            include_white: true,
            include_gamma_phi: true,
            fixed_gamma_phi: 0.0,
            bounds: FitBounds {
                chi: (-100.0, 100.0),
                ..FitBounds::default()
            },
            n_starts: 12,
            seed: 3,
            initial_guess: Some(vec![1.0, 10.0, 1.0, 0.02, 1.0, 0.01]),
        };
        let fit = fit_g_scaling(&curves, &model).unwrap();
        let ratio = fit.param("chi_ratio").unwrap().value;
        assert!(
            (ratio - ratio_true).abs() / ratio_true < 0.15,
            "chi2/chi1 = {ratio} vs {ratio_true}"
        );
        let phi = fit.param("gamma_phi").unwrap().value;
        assert!(
            (phi - gamma_phi).abs() / gamma_phi < 0.15,
            "gamma_phi = {phi} vs {gamma_phi}"
        );
    }

    #[test]
    fn g_scaling_white_free_data_gives_zero_white() {
        // data with no white component: fitted fast-fluctuator scale
        // consistent with zero within confidence
        let c0 = 1.2;
        let c1 = 18.0;
        let c2 = 0.1 * c1;
        let gamma_slow = 1.0 / 70.0;
        let n = 1u32;
        let g_values: Vec<f64> = [10.0, 20.0, 30.0, 40.0, 50.0]
            .iter()
            .map(|g_mhz| g_mhz * 1e-3 * crate::units::GHZ_TO_RAD_PER_NS)
            .collect();
        let mut curves = Vec::new();
        for (ci, &g) in g_values.iter().enumerate() {
            let amp = c0 + c1 * g + c2 * g * g;
            let f_slow = Fluctuator::new(amp, gamma_slow).unwrap();
            let times: Vec<f64> = (1..=30).map(|i| i as f64 * 1.2).collect();
            let values: Vec<f64> = times
                .iter()
                .map(|&t| cpmg_rtn(&f_slow, n, t / n as f64).unwrap())
                .collect();
            let meta = CurveMeta {
                kind: "cpmg".into(),
                n,
                m: 0,
                t_g_ns: 40.0,
                g_max: g,
                shots: None,
            };
            let clean =
                DecayCurve::new(times.clone(), values, vec![0.0; times.len()], meta).unwrap();
            curves.push(apply_shot_noise(&clean, 10_000, 700 + ci as u64).unwrap());
        }
        let model = FitModel {
            n_fluctuators: 2,
            share_chi_shape: true,
            include_white: true,
            include_gamma_phi: false,
            fixed_gamma_phi: 0.0,
            bounds: FitBounds {
                chi: (-100.0, 100.0),
                scale: (1e-6, 10.0),
                ..FitBounds::default()
            },
            n_starts: 12,
            seed: 5,
            initial_guess: Some(vec![1.0, 10.0, 1.0, 0.02, 0.5]),
        };
        let fit = fit_g_scaling(&curves, &model).unwrap();
        let scale = fit.param("scale2").unwrap();
        // effective white rate 2(s·amp)²/γ_w at the largest g, in 1/us
        let amp_hi = c0 + c1 * g_values[4] + c2 * g_values[4] * g_values[4];
        let rate = 2.0 * (scale.value * amp_hi).powi(2) / WHITE_EMULATION_GAMMA;
        let rate_conf =
            2.0 * ((scale.value + scale.confidence) * amp_hi).powi(2) / WHITE_EMULATION_GAMMA;
        assert!(
            rate < 1e-3 || rate_conf > rate,
            "white rate {rate} inconsistent with zero (conf bound {rate_conf})"
        );
    }
}
