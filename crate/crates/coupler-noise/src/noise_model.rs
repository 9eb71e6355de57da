//! Noise sources and their statistics.
//!
//! The basic source is a symmetric random telegraph fluctuator: a
//! two-state Markov process ξ(t) = ±1 switching at rate γ, with
//! correlator ⟨ξ(t)ξ(0)⟩ = exp(-2γ|t|) and correlation time t_c = 1/γ.
//! A log-uniform ensemble of such fluctuators produces a 1/f spectrum
//! in the band γ_min ≪ πf ≪ γ_max.
//!
//! Units: time in μs, rates in 1/μs, amplitudes λ in rad/μs
//! (λ quoted as "0.3 MHz" means 2π·0.3 rad/μs, see [`crate::units`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::substream_seed;

/// One random telegraph noise source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fluctuator {
    /// Coupling amplitude λ (rad/μs).
    pub lambda: f64,
    /// Switching rate γ (1/μs). γ = 0 is a frozen fluctuator.
    pub gamma: f64,
    /// Optional identifier carried through configs and fit reports.
    #[serde(default)]
    pub label: String,
}

impl Fluctuator {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !(gamma >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "fluctuator rates must be non-negative (lambda = {lambda}, gamma = {gamma})"
            )));
        }
        Ok(Fluctuator {
            lambda,
            gamma,
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Correlation time t_c = 1/γ (∞ for a frozen fluctuator).
    pub fn correlation_time(&self) -> f64 {
        if self.gamma > 0.0 {
            1.0 / self.gamma
        } else {
            f64::INFINITY
        }
    }
}

/// Complete noise model: telegraph sources, white coupling noise, and
/// single-qubit decay/dephasing rate sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseModel {
    #[serde(default)]
    pub fluctuators: Vec<Fluctuator>,
    /// White g-noise strength σ (rad/μs per √μs): ⟨δg(t)δg(t')⟩ = σ²δ(t-t').
    #[serde(default)]
    pub white_sigma: f64,
    /// Pure dephasing rate sum Γφ = Γφ,1 + Γφ,2 (1/μs).
    #[serde(default)]
    pub gamma_phi: f64,
    /// Relaxation rate sum Γ₁ = Γ₁,1 + Γ₁,2 (1/μs).
    #[serde(default)]
    pub gamma_1: f64,
    /// Relaxation asymmetry ΔΓ₁ = Γ₁,2 - Γ₁,1 (1/μs).
    #[serde(default)]
    pub delta_gamma_1: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        for f in &self.fluctuators {
            if !(f.lambda >= 0.0) || !(f.gamma >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "fluctuator '{}' has negative rates",
                    f.label
                )));
            }
        }
        if !(self.white_sigma >= 0.0)
            || !(self.gamma_phi >= 0.0)
            || !(self.gamma_1 >= 0.0)
        {
            return Err(Error::InvalidInput("rates must be non-negative".into()));
        }
        if self.delta_gamma_1.abs() > self.gamma_1 + 1e-15 {
            return Err(Error::InvalidInput(format!(
                "|delta_gamma_1| = {} exceeds gamma_1 = {}",
                self.delta_gamma_1.abs(),
                self.gamma_1
            )));
        }
        Ok(())
    }
}

/// A sampled ±1 telegraph trajectory on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Strictly increasing sample times (μs).
    pub times: Vec<f64>,
    /// ±1 state at each sample time.
    pub values: Vec<i8>,
}

/// Sample a telegraph trajectory at the given grid times.
///
/// The initial state is ±1 with probability ½; between consecutive grid
/// points the state flips with the exact conditional probability
/// ½(1 - exp(-2γΔt)), so the grid does not need to resolve 1/γ.
/// Deterministic for a given seed.
pub fn sample_rtn_trajectory(f: &Fluctuator, times: &[f64], seed: u64) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "trajectory grid must be strictly increasing".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state: i8 = if rng.gen::<bool>() { 1 } else { -1 };
    let mut values = Vec::with_capacity(times.len());
    values.push(state);
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let p_flip = 0.5 * (1.0 - (-2.0 * f.gamma * dt).exp());
        if rng.gen::<f64>() < p_flip {
            state = -state;
        }
        values.push(state);
    }
    Ok(Trajectory {
        times: times.to_vec(),
        values,
    })
}

/// Two-point correlator ⟨ξ(t)ξ(0)⟩ = exp(-2γ|t|).
pub fn rtn_correlator(f: &Fluctuator, t: f64) -> f64 {
    (-2.0 * f.gamma * t.abs()).exp()
}

/// Power spectral density S(f) = γ/(π²f² + γ²) in ordinary frequency
/// (the Fourier transform of the correlator; ∫S df = 1).
pub fn rtn_psd(fl: &Fluctuator, freq: f64) -> Result<f64> {
    let denom = PI * PI * freq * freq + fl.gamma * fl.gamma;
    if denom == 0.0 {
        return Err(Error::Singular(
            "rtn_psd undefined for gamma = 0 at f = 0".into(),
        ));
    }
    Ok(fl.gamma / denom)
}

/// Build `count` fluctuators with equal amplitude and switching rates
/// drawn log-uniformly from [gamma_min, gamma_max]. Deterministic per
/// seed. A degenerate interval gamma_min == gamma_max is allowed.
pub fn make_one_over_f_ensemble(
    lambda: f64,
    gamma_min: f64,
    gamma_max: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Fluctuator>> {
    if !(gamma_min > 0.0) {
        return Err(Error::InvalidInput(format!(
            "gamma_min must be positive (got {gamma_min})"
        )));
    }
    if gamma_max < gamma_min {
        return Err(Error::InvalidInput(
            "gamma_max must be >= gamma_min".into(),
        ));
    }
    if count == 0 {
        return Err(Error::InvalidInput("ensemble count must be >= 1".into()));
    }
    let ln_min = gamma_min.ln();
    let ln_max = gamma_max.ln();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, 0x0f, k as u64));
        let gamma = if ln_max > ln_min {
            (ln_min + rng.gen::<f64>() * (ln_max - ln_min)).exp()
        } else {
            gamma_min
        };
        out.push(Fluctuator {
            lambda,
            gamma,
            label: format!("tls{k}"),
        });
    }
    Ok(out)
}

/// Summed noise power Σ λ_k²·γ_k/(π²f² + γ_k²) of an ensemble.
pub fn ensemble_psd(fluctuators: &[Fluctuator], freq: f64) -> Result<f64> {
    let mut total = 0.0;
    for f in fluctuators {
        total += f.lambda * f.lambda * rtn_psd(f, freq)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::MHZ_TO_RAD_PER_US;
    use rayon::prelude::*;

    fn fl(lambda: f64, gamma: f64) -> Fluctuator {
        Fluctuator::new(lambda, gamma).unwrap()
    }

    #[test]
    fn frozen_fluctuator_is_constant() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.37).collect();
        for seed in 0..20 {
            let tr = sample_rtn_trajectory(&fl(1.0, 0.0), &times, seed).unwrap();
            assert!(tr.values.iter().all(|&v| v == tr.values[0]));
            assert!(tr.values[0] == 1 || tr.values[0] == -1);
        }
    }

    #[test]
    fn non_increasing_grid_rejected() {
        let err = sample_rtn_trajectory(&fl(1.0, 0.1), &[0.0, 1.0, 1.0], 1).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn trajectory_deterministic_per_seed() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let a = sample_rtn_trajectory(&fl(1.0, 0.5), &times, 42).unwrap();
        let b = sample_rtn_trajectory(&fl(1.0, 0.5), &times, 42).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn empirical_correlator_at_inverse_rate() {
        // gamma = 0.1/us, t = 5 us: <xi(5) xi(0)> = e^{-1}
        let n = 100_000usize;
        let f = fl(1.0, 0.1);
        let sum: i64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let tr =
                    sample_rtn_trajectory(&f, &[0.0, 5.0], substream_seed(7, 1, i as u64))
                        .unwrap();
                (tr.values[0] as i64) * (tr.values[1] as i64)
            })
            .sum();
        let mean = sum as f64 / n as f64;
        let expected = (-1.0f64).exp();
        let se = ((1.0 - expected * expected) / n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean = {mean}, expected = {expected}, 3se = {}",
            3.0 * se
        );
    }

    #[test]
    fn empirical_mean_is_zero() {
        let n = 100_000usize;
        let f = fl(1.0, 0.3);
        let sum: i64 = (0..n)
            .into_par_iter()
            .map(|i| {
                sample_rtn_trajectory(&f, &[0.0], substream_seed(9, 2, i as u64))
                    .unwrap()
                    .values[0] as i64
            })
            .sum();
        let mean = sum as f64 / n as f64;
        let se = 1.0 / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean = {mean}");
    }

    #[test]
    fn correlator_values() {
        assert_eq!(rtn_correlator(&fl(1.0, 0.7), 0.0), 1.0);
        let c = rtn_correlator(&fl(1.0, 0.1), 5.0);
        assert!((c - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(rtn_correlator(&fl(1.0, 0.0), 100.0), 1.0);
        // symmetric in t
        assert_eq!(
            rtn_correlator(&fl(1.0, 0.2), -3.0),
            rtn_correlator(&fl(1.0, 0.2), 3.0)
        );
    }

    #[test]
    fn psd_reference_points() {
        assert!((rtn_psd(&fl(1.0, 1.0), 0.0).unwrap() - 1.0).abs() < 1e-15);
        let half = rtn_psd(&fl(1.0, 1.0), 1.0 / PI).unwrap();
        assert!((half - 0.5).abs() < 1e-15);
        assert!(matches!(
            rtn_psd(&fl(1.0, 0.0), 0.0),
            Err(Error::Singular(_))
        ));
        // frozen fluctuator away from f = 0
        assert!((rtn_psd(&fl(1.0, 0.0), 0.5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn psd_integrates_to_unit_variance() {
        // int_-inf^inf S(f) df = <xi^2> = 1, for a couple of rates
        for &gamma in &[0.05, 1.0, 20.0] {
            let f = fl(1.0, gamma);
            let half = crate::numerics::quad::integrate_to_inf(
                |x| rtn_psd(&f, x).unwrap(),
                0.0,
                1e-10,
            );
            assert!(
                (2.0 * half - 1.0).abs() < 1e-6,
                "gamma = {gamma}: integral = {}",
                2.0 * half
            );
        }
    }

    #[test]
    fn ensemble_degenerate_interval() {
        let fs = make_one_over_f_ensemble(0.3, 2.0, 2.0, 1, 5).unwrap();
        assert_eq!(fs.len(), 1);
        assert_eq!(fs[0].gamma, 2.0);
        assert_eq!(fs[0].lambda, 0.3);
    }

    #[test]
    fn ensemble_rejects_bad_band() {
        assert!(make_one_over_f_ensemble(0.3, 0.0, 1.0, 10, 1).is_err());
        assert!(make_one_over_f_ensemble(0.3, -1.0, 1.0, 10, 1).is_err());
        assert!(make_one_over_f_ensemble(0.3, 2.0, 1.0, 10, 1).is_err());
        assert!(make_one_over_f_ensemble(0.3, 1.0, 2.0, 0, 1).is_err());
    }

    #[test]
    fn ensemble_deterministic_and_in_band() {
        let a = make_one_over_f_ensemble(0.1, 1e-3, 1e3, 50, 11).unwrap();
        let b = make_one_over_f_ensemble(0.1, 1e-3, 1e3, 50, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|f| f.gamma >= 1e-3 && f.gamma <= 1e3));
    }

    #[test]
    fn psd_slope_is_one_over_f() {
        // 200 fluctuators over [1e-3, 1e3]/us: log-log slope -1 +- 0.05
        // over f in [0.01, 10] MHz
        let fs = make_one_over_f_ensemble(0.1, 1e-3, 1e3, 200, 42).unwrap();
        let freqs: Vec<f64> = (0..40)
            .map(|i| 10f64.powf(-2.0 + 3.0 * i as f64 / 39.0))
            .collect();
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &f in &freqs {
            let x = f.ln();
            let y = ensemble_psd(&fs, f).unwrap().ln();
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let n = freqs.len() as f64;
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(
            (slope + 1.0).abs() < 0.05,
            "log-log PSD slope = {slope}, want -1 +- 0.05"
        );
    }

    #[test]
    fn ensemble_psd_linearity_and_midband() {
        let f1 = fl(0.2, 0.5);
        let f2 = fl(0.4, 3.0);
        let both = vec![f1.clone(), f2.clone()];
        let freq = 0.8;
        let direct = f1.lambda * f1.lambda * rtn_psd(&f1, freq).unwrap()
            + f2.lambda * f2.lambda * rtn_psd(&f2, freq).unwrap();
        assert_eq!(ensemble_psd(&both, freq).unwrap(), direct);
        assert_eq!(ensemble_psd(&[], freq).unwrap(), 0.0);

        // mid-band value ~ lambda^2 K / (ln(gmax/gmin)) / (2 f), within 10%
        let lambda = 0.1 * MHZ_TO_RAD_PER_US;
        let fs = make_one_over_f_ensemble(lambda, 1e-3, 1e3, 200, 42).unwrap();
        let f_mid = 0.3;
        let s = ensemble_psd(&fs, f_mid).unwrap();
        let s_th = lambda * lambda * 200.0 / (1e3f64.ln() - 1e-3f64.ln()) / (2.0 * f_mid);
        assert!(
            (s / s_th - 1.0).abs() < 0.10,
            "mid-band ratio = {}",
            s / s_th
        );
    }

    #[test]
    fn product_of_two_fluctuators_is_telegraph() {
        // correlator of xi1*xi2 = exp(-2(g1+g2)|t|), empirically
        let n = 100_000usize;
        let (g1, g2) = (0.15, 0.25);
        let t = 1.2;
        let sum: i64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let a = sample_rtn_trajectory(
                    &fl(1.0, g1),
                    &[0.0, t],
                    substream_seed(31, 3, i as u64),
                )
                .unwrap();
                let b = sample_rtn_trajectory(
                    &fl(1.0, g2),
                    &[0.0, t],
                    substream_seed(31, 4, i as u64),
                )
                .unwrap();
                let p0 = (a.values[0] * b.values[0]) as i64;
                let p1 = (a.values[1] * b.values[1]) as i64;
                p0 * p1
            })
            .sum();
        let mean = sum as f64 / n as f64;
        let expected = (-2.0 * (g1 + g2) * t).exp();
        let se = ((1.0 - expected * expected) / n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 4.0 * se,
            "mean = {mean}, expected = {expected}"
        );
    }

    #[test]
    fn empirical_correlator_grid_convergence() {
        // max deviation over a 10-point grid <= 4/sqrt(N) for several rates
        let n = 100_000usize;
        for (si, &gamma) in [0.01f64, 0.1, 1.0].iter().enumerate() {
            let f = fl(1.0, gamma);
            let horizon = (2.0 / gamma).min(40.0);
            let times: Vec<f64> = (0..10).map(|i| i as f64 * horizon / 9.0).collect();
            let sums = (0..n)
                .into_par_iter()
                .fold(
                    || vec![0i64; times.len()],
                    |mut acc, i| {
                        let tr = sample_rtn_trajectory(
                            &f,
                            &times,
                            substream_seed(100 + si as u64, 5, i as u64),
                        )
                        .unwrap();
                        for (k, &v) in tr.values.iter().enumerate() {
                            acc[k] += (v * tr.values[0]) as i64;
                        }
                        acc
                    },
                )
                .reduce(
                    || vec![0i64; times.len()],
                    |mut a, b| {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                        a
                    },
                );
            let bound = 4.0 / (n as f64).sqrt();
            for (k, &t) in times.iter().enumerate() {
                let mean = sums[k] as f64 / n as f64;
                let expected = rtn_correlator(&f, t);
                assert!(
                    (mean - expected).abs() <= bound,
                    "gamma = {gamma}, t = {t}: |{mean} - {expected}| > {bound}"
                );
            }
        }
    }

    #[test]
    fn noise_model_validation() {
        let mut m = NoiseModel::default();
        m.gamma_1 = 0.1;
        m.delta_gamma_1 = 0.05;
        assert!(m.validate().is_ok());
        m.delta_gamma_1 = 0.2;
        assert!(m.validate().is_err());
    }
}
