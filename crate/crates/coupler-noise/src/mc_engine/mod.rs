//! Numerical oracles for the pseudo-qubit dynamics.
//!
//! Three independent routes compute the same decay envelopes:
//!
//! * seeded Monte Carlo averaging over explicit telegraph trajectories
//!   ([`mc_ramsey`], [`mc_cpmg`]);
//! * closed linear Liouvillian systems obtained by exact averaging over
//!   exponentially correlated noise ([`liouville`]);
//! * the 2×2 transfer-matrix echo product ([`transfer_matrix_cpmg`]).
//!
//! Monte Carlo phase accumulation is event-driven: the telegraph state is
//! piecewise constant between exponentially distributed switches, so the
//! phase 2∫λ(τ)ξ(τ)h(τ)dτ is assembled from exact per-interval integrals
//! of the λ(g(t)) profile. Per-trajectory seeds derive from the base seed
//! and the trajectory index, and partial sums combine in fixed chunk
//! order, so batch results are bit-identical regardless of worker count.
//!
//! With a device attached, each fluctuator's `lambda` field is its
//! gate-averaged amplitude and the within-gate modulation applies the
//! normalized shape λ(g(t))/λ̄, keeping closed-form comparisons (which
//! use the averaged amplitude) meaningful.

pub mod liouville;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device_flux::DeviceParams;
use crate::error::{Error, Result};
use crate::fitting::{CurveMeta, DecayCurve};
use crate::noise_model::NoiseModel;
use crate::numerics::substream_seed;
use crate::sequences::{gate_pulse_value, GatePulse, SequenceKind, SequenceSpec};
use crate::units::{NS_TO_US, RAD_PER_NS_TO_RAD_PER_US};

pub use liouville::{
    central_spin_propagate, lindblad_propagate_averaged, lindblad_propagate_mc,
    normalized_sigma_z, shapiro_loginov_propagate, BlochState, SubspaceDensity,
};

/// Monte Carlo batch result: the averaged curve plus sampling metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub curve: DecayCurve,
    pub n_traj: u64,
    pub seed: u64,
}

/// Normalized within-gate modulation of the g-noise amplitude.
///
/// `shape(t)` is λ(g(t))/λ̄ inside a gate, tabulated once per pulse; the
/// integral of the shape over a whole gate is exactly the gate duration.
#[derive(Debug, Clone)]
pub struct LambdaProfile {
    /// Gate duration in μs (zero marks an unmodulated profile).
    gate_us: f64,
    /// Prefix integral of the normalized shape at grid boundaries (μs).
    prefix: Vec<f64>,
    /// Shape values at grid boundaries.
    values: Vec<f64>,
}

impl LambdaProfile {
    /// Constant λ(t) = λ̄ (no gate structure).
    pub fn constant() -> Self {
        LambdaProfile {
            gate_us: 0.0,
            prefix: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build the normalized within-gate profile from a pulse and device.
    pub fn from_gate(pulse: &GatePulse, device: &DeviceParams) -> Result<Self> {
        const SEGMENTS: usize = 4096;
        let mut values = Vec::with_capacity(SEGMENTS + 1);
        for i in 0..=SEGMENTS {
            let t_ns = pulse.t_g * i as f64 / SEGMENTS as f64;
            let lam = crate::device_flux::g_noise_amplitude_rad_per_ns(
                gate_pulse_value(pulse, t_ns),
                device,
            )?;
            values.push(lam);
        }
        let h_us = pulse.t_g * NS_TO_US / SEGMENTS as f64;
        let mut prefix = Vec::with_capacity(SEGMENTS + 1);
        prefix.push(0.0);
        for i in 1..=SEGMENTS {
            prefix.push(prefix[i - 1] + 0.5 * (values[i - 1] + values[i]) * h_us);
        }
        let total = *prefix.last().unwrap();
        let gate_us = pulse.t_g * NS_TO_US;
        if total <= 0.0 {
            // flux-quiet device: no modulation
            return Ok(LambdaProfile::constant());
        }
        let mean = total / gate_us;
        for p in prefix.iter_mut() {
            *p /= mean;
        }
        for v in values.iter_mut() {
            *v /= mean;
        }
        Ok(LambdaProfile {
            gate_us,
            prefix,
            values,
        })
    }

    /// Gate-averaged amplitude (rad/μs) for fluctuators built from this
    /// pulse/device pair.
    pub fn averaged_lambda(pulse: &GatePulse, device: &DeviceParams) -> Result<f64> {
        Ok(crate::sequences::gate_averaged_lambda(pulse, device)? * RAD_PER_NS_TO_RAD_PER_US)
    }

    /// Normalized shape value λ(g(t))/λ̄ at global time t (μs).
    pub fn shape_at(&self, t: f64) -> f64 {
        if self.gate_us == 0.0 {
            return 1.0;
        }
        let segments = self.values.len() - 1;
        let frac = t - (t / self.gate_us).floor() * self.gate_us;
        let x = (frac / self.gate_us * segments as f64).clamp(0.0, segments as f64);
        let i = (x.floor() as usize).min(segments - 1);
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// ∫₀ᵗ shape(τ)dτ in μs at global time t (μs).
    fn integral_to(&self, t: f64) -> f64 {
        if self.gate_us == 0.0 {
            return t;
        }
        let n_full = (t / self.gate_us).floor();
        let frac = t - n_full * self.gate_us;
        n_full * self.gate_us + self.partial(frac)
    }

    fn partial(&self, frac: f64) -> f64 {
        let segments = self.prefix.len() - 1;
        let x = (frac / self.gate_us * segments as f64).clamp(0.0, segments as f64);
        let i = (x.floor() as usize).min(segments - 1);
        let h_us = self.gate_us / segments as f64;
        let dt = (x - i as f64) * h_us;
        // trapezoid within the segment using tabulated endpoint values
        let v0 = self.values[i];
        let v1 = self.values[i + 1];
        let vt = v0 + (v1 - v0) * (dt / h_us);
        self.prefix[i] + 0.5 * (v0 + vt) * dt
    }
}

/// Event times of one measurement: echo flips and sample times (μs).
#[derive(Debug, Clone)]
struct Schedule {
    flips: Vec<f64>,
    samples: Vec<f64>,
}

/// Event-driven phase walk of one telegraph source; writes the
/// accumulated noise phase 2λ∫ξh·shape dτ at each sample time.
fn phase_walk(
    lambda: f64,
    gamma: f64,
    profile: &LambdaProfile,
    sched: &Schedule,
    rng: &mut ChaCha8Rng,
    phase_out: &mut [f64],
) {
    let t_end = *sched.samples.last().unwrap();
    let mut xi: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let mut h = 1.0f64;
    let mut phase = 0.0f64;
    let mut lam_at = 0.0f64;

    let mut next_switch = if gamma > 0.0 {
        -rng.gen::<f64>().ln() / gamma
    } else {
        f64::INFINITY
    };
    let mut flip_idx = 0usize;
    let mut sample_idx = 0usize;

    while sample_idx < sched.samples.len() {
        let t_flip = sched
            .flips
            .get(flip_idx)
            .copied()
            .unwrap_or(f64::INFINITY);
        let t_sample = sched.samples[sample_idx];
        let t_next = next_switch.min(t_flip).min(t_sample).min(t_end);

        let lam_next = profile.integral_to(t_next);
        phase += 2.0 * lambda * xi * h * (lam_next - lam_at);
        lam_at = lam_next;

        if t_next == next_switch {
            xi = -xi;
            next_switch = t_next + (-rng.gen::<f64>().ln() / gamma);
        }
        if flip_idx < sched.flips.len() && t_next == t_flip {
            h = -h;
            flip_idx += 1;
        }
        while sample_idx < sched.samples.len() && sched.samples[sample_idx] <= t_next {
            phase_out[sample_idx] = phase;
            sample_idx += 1;
        }
    }
}

/// Accumulate cos(total phase) for one trajectory of every noise source.
fn joint_walk(
    fluctuators: &[(f64, f64)],
    white_sigma: f64,
    profile: &LambdaProfile,
    sched: &Schedule,
    base_seed: u64,
    traj: u64,
    cos_out: &mut [f64],
) {
    let n_pts = sched.samples.len();
    let mut phases = vec![0.0f64; n_pts];
    let mut scratch = vec![0.0f64; n_pts];

    for (k, &(lambda, gamma)) in fluctuators.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(base_seed, k as u64 + 1, traj));
        phase_walk(lambda, gamma, profile, sched, &mut rng, &mut scratch);
        for (p, v) in phases.iter_mut().zip(&scratch) {
            *p += v;
        }
    }
    if white_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(base_seed, 0, traj));
        let mut prev_t = 0.0;
        let mut acc = 0.0;
        for (i, &ts) in sched.samples.iter().enumerate() {
            let dw: f64 = rng.sample(rand_distr::StandardNormal);
            acc += 2.0 * white_sigma * (ts - prev_t).sqrt() * dw;
            phases[i] += acc;
            prev_t = ts;
        }
    }
    for (c, p) in cos_out.iter_mut().zip(&phases) {
        *c = p.cos();
    }
}

/// Deterministic chunked Monte Carlo average of cos(phase) with standard
/// errors. Identical results for any rayon worker count.
fn mc_average(
    model: &NoiseModel,
    profile: &LambdaProfile,
    sched: &Schedule,
    n_traj: u64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_traj == 0 {
        return Err(Error::InvalidInput("n_traj must be >= 1".into()));
    }
    model.validate()?;
    let n_pts = sched.samples.len();
    let fluctuators: Vec<(f64, f64)> = model
        .fluctuators
        .iter()
        .map(|f| (f.lambda, f.gamma))
        .collect();

    const CHUNK: u64 = 512;
    let n_chunks = n_traj.div_ceil(CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut sum = vec![0.0f64; n_pts];
            let mut sumsq = vec![0.0f64; n_pts];
            let mut cos_acc = vec![0.0f64; n_pts];
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(n_traj);
            for traj in lo..hi {
                if fluctuators.is_empty() && model.white_sigma == 0.0 {
                    cos_acc.iter_mut().for_each(|c| *c = 1.0);
                } else {
                    joint_walk(
                        &fluctuators,
                        model.white_sigma,
                        profile,
                        sched,
                        seed,
                        traj,
                        &mut cos_acc,
                    );
                }
                for (k, &c) in cos_acc.iter().enumerate() {
                    sum[k] += c;
                    sumsq[k] += c * c;
                }
            }
            (sum, sumsq)
        })
        .collect();

    let mut sum = vec![0.0f64; n_pts];
    let mut sumsq = vec![0.0f64; n_pts];
    for (s, s2) in partials {
        for k in 0..n_pts {
            sum[k] += s[k];
            sumsq[k] += s2[k];
        }
    }
    let n = n_traj as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr: Vec<f64> = mean
        .iter()
        .zip(&sumsq)
        .map(|(&m, &s2)| {
            let var = (s2 / n - m * m).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok((mean, stderr))
}

/// Monte Carlo coupler-Ramsey decay. The envelope ⟨cos φ⟩ is sampled at
/// even gate boundaries, where the accumulated coherent phase of a
/// calibrated pulse train is a multiple of 2π, so the values are directly
/// the normalized ⟨σ_z⟩ envelope.
pub fn mc_ramsey(
    model: &NoiseModel,
    seq: &SequenceSpec,
    device: Option<&DeviceParams>,
    n_traj: u64,
    seed: u64,
) -> Result<SimResult> {
    let n_gates = match seq.kind {
        SequenceKind::Ramsey { n_gates } => n_gates,
        SequenceKind::Cpmg { .. } => {
            return Err(Error::InvalidInput("mc_ramsey needs a Ramsey spec".into()))
        }
    };
    let profile = match device {
        Some(d) => LambdaProfile::from_gate(&seq.pulse, d)?,
        None => LambdaProfile::constant(),
    };
    let gate_us = seq.pulse.t_g * NS_TO_US;
    let samples: Vec<f64> = (1..=(n_gates / 2).max(1))
        .map(|k| 2.0 * k as f64 * gate_us)
        .collect();
    let sched = Schedule {
        flips: Vec::new(),
        samples: samples.clone(),
    };
    let (mean, stderr) = mc_average(model, &profile, &sched, n_traj, seed)?;
    let meta = CurveMeta {
        kind: "ramsey".into(),
        n: 0,
        m: 0,
        t_g_ns: seq.pulse.t_g,
        g_max: seq.pulse.g_max,
        shots: None,
    };
    Ok(SimResult {
        curve: DecayCurve::new(samples, mean, stderr, meta)?,
        n_traj,
        seed,
    })
}

/// Subsampled Ramsey measurement near caller-chosen target times: each
/// target snaps to the nearest even gate boundary.
pub fn mc_ramsey_at(
    model: &NoiseModel,
    pulse: &GatePulse,
    device: Option<&DeviceParams>,
    target_times_us: &[f64],
    n_traj: u64,
    seed: u64,
) -> Result<SimResult> {
    if target_times_us.is_empty() {
        return Err(Error::InvalidInput("empty target grid".into()));
    }
    let profile = match device {
        Some(d) => LambdaProfile::from_gate(pulse, d)?,
        None => LambdaProfile::constant(),
    };
    let pair_us = 2.0 * pulse.t_g * NS_TO_US;
    let mut samples: Vec<f64> = target_times_us
        .iter()
        .map(|&t| (t / pair_us).round().max(1.0) * pair_us)
        .collect();
    samples.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "target times must be increasing after snapping".into(),
        ));
    }
    let sched = Schedule {
        flips: Vec::new(),
        samples: samples.clone(),
    };
    let (mean, stderr) = mc_average(model, &profile, &sched, n_traj, seed)?;
    let meta = CurveMeta {
        kind: "ramsey".into(),
        n: 0,
        m: 0,
        t_g_ns: pulse.t_g,
        g_max: pulse.g_max,
        shots: None,
    };
    Ok(SimResult {
        curve: DecayCurve::new(samples, mean, stderr, meta)?,
        n_traj,
        seed,
    })
}

/// Monte Carlo CPMG decay for a single (n, m) schedule: one point at the
/// measurement time n·T_C.
pub fn mc_cpmg(
    model: &NoiseModel,
    seq: &SequenceSpec,
    device: Option<&DeviceParams>,
    n_traj: u64,
    seed: u64,
) -> Result<SimResult> {
    let (n, m) = match seq.kind {
        SequenceKind::Cpmg { n, m } => (n, m),
        SequenceKind::Ramsey { .. } => {
            return Err(Error::InvalidInput("mc_cpmg needs a CPMG spec".into()))
        }
    };
    let profile = match device {
        Some(d) => LambdaProfile::from_gate(&seq.pulse, d)?,
        None => LambdaProfile::constant(),
    };
    let t_c = seq.cycle_time()? * NS_TO_US;
    let filter = crate::sequences::build_filter(n, t_c)?;
    let samples = vec![n as f64 * t_c];
    let sched = Schedule {
        flips: filter.flip_times().to_vec(),
        samples: samples.clone(),
    };
    let (mean, stderr) = mc_average(model, &profile, &sched, n_traj, seed)?;
    let meta = CurveMeta {
        kind: "cpmg".into(),
        n,
        m,
        t_g_ns: seq.pulse.t_g,
        g_max: seq.pulse.g_max,
        shots: None,
    };
    Ok(SimResult {
        curve: DecayCurve::new(samples, mean, stderr, meta)?,
        n_traj,
        seed,
    })
}

/// Monte Carlo CPMG curve over a sweep of gates-per-half-cycle values
/// (the duration of a fixed-n sequence is changed through m).
pub fn mc_cpmg_sweep(
    model: &NoiseModel,
    n: u32,
    m_values: &[u32],
    pulse: &GatePulse,
    device: Option<&DeviceParams>,
    n_traj: u64,
    seed: u64,
) -> Result<SimResult> {
    if m_values.is_empty() {
        return Err(Error::InvalidInput("empty m sweep".into()));
    }
    let mut times = Vec::with_capacity(m_values.len());
    let mut values = Vec::with_capacity(m_values.len());
    let mut stderr = Vec::with_capacity(m_values.len());
    for (i, &m) in m_values.iter().enumerate() {
        let seq = SequenceSpec::cpmg(n, m, pulse.clone())?;
        let point_seed = substream_seed(seed, 0x5eed, i as u64);
        let r = mc_cpmg(model, &seq, device, n_traj, point_seed)?;
        times.push(r.curve.times[0]);
        values.push(r.curve.values[0]);
        stderr.push(r.curve.stderr[0]);
    }
    let meta = CurveMeta {
        kind: "cpmg".into(),
        n,
        m: 0,
        t_g_ns: pulse.t_g,
        g_max: pulse.g_max,
        shots: None,
    };
    Ok(SimResult {
        curve: DecayCurve::new(times, values, stderr, meta)?,
        n_traj,
        seed,
    })
}

/// 2×2 transfer-matrix evaluation of the n-echo telegraph envelope:
/// χ = (1,0)·Z^(n mod 2)·(X(T_C/2)·Z·X(T_C/2))ⁿ·(1,0)ᵀ.
pub fn transfer_matrix_cpmg(
    f: &crate::noise_model::Fluctuator,
    n: u32,
    t_c: f64,
) -> Result<f64> {
    if n == 0 || !(t_c >= 0.0) {
        return Err(Error::InvalidInput("need n >= 1, T_C >= 0".into()));
    }
    let x = x_half(f, t_c / 2.0);
    let z = [[1.0, 0.0], [0.0, -1.0]];
    let xzx = mat_mul(&mat_mul(&x, &z), &x);
    let mut acc = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..n {
        acc = mat_mul(&xzx, &acc);
    }
    if n % 2 == 1 {
        acc = mat_mul(&z, &acc);
    }
    Ok(acc[0][0])
}

/// Propagator X_{h=1}(t) of the (χ, Λ) pair over a constant-sign window.
fn x_half(f: &crate::noise_model::Fluctuator, t: f64) -> [[f64; 2]; 2] {
    let disc = f.gamma * f.gamma - 4.0 * f.lambda * f.lambda;
    let z = disc * t * t;
    let (ch, sh_over) = cosh_sinhc(z, t);
    let e = (-f.gamma * t).exp();
    let gs = f.gamma * sh_over;
    let ls = 2.0 * f.lambda * sh_over;
    [[e * (ch + gs), -e * ls], [e * ls, e * (ch - gs)]]
}

/// (cosh(Ωt), sinh(Ωt)/Ω) via regime-uniform series in z = (γ²-4λ²)t².
fn cosh_sinhc(z: f64, t: f64) -> (f64, f64) {
    let (c, s) = if z.abs() < 1e-3 {
        (
            1.0 + z * (0.5 + z / 24.0 + z * z / 720.0),
            1.0 + z / 6.0 + z * z / 120.0 + z * z * z / 5040.0,
        )
    } else if z > 0.0 {
        let w = z.sqrt();
        (w.cosh(), w.sinh() / w)
    } else {
        let w = (-z).sqrt();
        (w.cos(), w.sin() / w)
    };
    (c, s * t)
}

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Eigenvalues of the unscaled X·Z·X bracket (e^{-γT_C} prefactor
/// removed); analytically they are {e^α, -e^{-α}} with
/// sinh α = (γ/Ω)·sinh(ΩT_C).
pub fn xzx_eigenvalues(f: &crate::noise_model::Fluctuator, t_c: f64) -> (f64, f64) {
    let x = x_half(f, t_c / 2.0);
    let z = [[1.0, 0.0], [0.0, -1.0]];
    let m = mat_mul(&mat_mul(&x, &z), &x);
    let scale = (f.gamma * t_c).exp();
    let a = m[0][0] * scale;
    let d = m[1][1] * scale;
    let bc = m[0][1] * m[1][0] * scale * scale;
    let tr = a + d;
    let det = a * d - bc;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (tr / 2.0 + disc, tr / 2.0 - disc)
}

/// Binomial shot sampling of an envelope curve: each point becomes the
/// average of `shots` single-shot ±1 outcomes with p = (1+χ)/2. Error
/// bars are floored at 1/shots so points pinned near ±1 keep weight.
pub fn apply_shot_noise(curve: &DecayCurve, shots: u32, seed: u64) -> Result<DecayCurve> {
    if shots == 0 {
        return Err(Error::InvalidInput("shots must be >= 1".into()));
    }
    let mut values = Vec::with_capacity(curve.values.len());
    let mut stderr = Vec::with_capacity(curve.values.len());
    for (i, &v) in curve.values.iter().enumerate() {
        let p = ((1.0 + v) / 2.0).clamp(0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, 0xb10, i as u64));
        let binom = rand_distr::Binomial::new(shots as u64, p)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let k = binom.sample(&mut rng);
        let sampled = 2.0 * k as f64 / shots as f64 - 1.0;
        let p_hat = (1.0 + sampled) / 2.0;
        let se = (2.0 * (p_hat * (1.0 - p_hat) / shots as f64).sqrt()).max(1.0 / shots as f64);
        values.push(sampled);
        stderr.push(se);
    }
    let mut meta = curve.meta.clone();
    meta.shots = Some(shots);
    DecayCurve::new(curve.times.clone(), values, stderr, meta)
}
