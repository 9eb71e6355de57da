//! Closed Liouvillian propagation for exponentially correlated noise.
//!
//! Averaging the stochastic Bloch equation over a telegraph process with
//! correlator e^{-2γ|t|} closes after adjoining the noise-correlated
//! state μ(t) = ⟨ξ(t)ρ(t)⟩, giving a linear system
//!
//!   d/dt (ρ, μ) = [[L_q, λL_x], [λL_x, L_q - 2γ]]·(ρ, μ),   μ(0) = 0.
//!
//! With M fluctuators the same construction yields a 3·2^M central-spin
//! system indexed by fluctuator subsets. The Lindblad extension adds
//! relaxation (Γ₁, ΔΓ₁) and white dephasing (Γφ) to the vectorized
//! pseudo-qubit density matrix, either per telegraph trajectory with the
//! full time dependence or after averaging in the rotating frame.
//!
//! Conventions: the Bloch components are (P, Q, N) = (x, y, z), the
//! coherent rotation is at 2g (so N(t) = cos(2G(t))·χ(t) on resonance),
//! and the noise coupling carries the same factor 2.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise_model::{Fluctuator, NoiseModel};
use crate::numerics::ode::{integrate_to_grid, OdeOptions};
use crate::numerics::substream_seed;

/// Pseudo-qubit Bloch vector (x, y, z) = (P, Q, N).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub p: f64,
    pub q: f64,
    pub n: f64,
}

impl BlochState {
    pub fn norm(&self) -> f64 {
        (self.p * self.p + self.q * self.q + self.n * self.n).sqrt()
    }
}

/// Density matrix restricted to the {|01⟩, |10⟩} subspace.
#[derive(Debug, Clone, Copy)]
pub struct SubspaceDensity {
    /// Entries [[ρ₀₁,₀₁, ρ₀₁,₁₀], [ρ₁₀,₀₁, ρ₁₀,₁₀]].
    pub m: [[Complex64; 2]; 2],
}

impl SubspaceDensity {
    /// Pure |01⟩⟨01| state.
    pub fn excited_first() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        SubspaceDensity {
            m: [[o, z], [z, z]],
        }
    }

    /// Convert from the vectorized σ_x basis (r₊₊, r₊₋, r₋₊, r₋₋).
    pub fn from_sigma_x_vector(r: &[Complex64; 4]) -> Self {
        let half = Complex64::new(0.5, 0.0);
        let rpp = r[0];
        let rpm = r[1];
        let rmp = r[2];
        let rmm = r[3];
        SubspaceDensity {
            m: [
                [(rpp + rpm + rmp + rmm) * half, (rpp - rpm + rmp - rmm) * half],
                [(rpp + rpm - rmp - rmm) * half, (rpp - rpm - rmp + rmm) * half],
            ],
        }
    }
}

/// Normalized population difference (ρ₀₁,₀₁ - ρ₁₀,₁₀)/(ρ₀₁,₀₁ + ρ₁₀,₁₀),
/// immune to relaxation channels that deplete both populations equally.
pub fn normalized_sigma_z(rho: &SubspaceDensity) -> Result<f64> {
    let p01 = rho.m[0][0].re;
    let p10 = rho.m[1][1].re;
    let total = p01 + p10;
    if total <= 0.0 {
        return Err(Error::UndefinedMeasurement(
            "no population left in the single-excitation subspace".into(),
        ));
    }
    Ok((p01 - p10) / total)
}

/// Propagate the single-fluctuator 6×6 averaged system (ρ, μ) for a
/// time-dependent coupling g(t) (rad/μs), starting from N = 1 on
/// resonance. Returns the ρ-block Bloch vector at each grid time (μs).
pub fn shapiro_loginov_propagate<G>(
    f: &Fluctuator,
    g_of_t: G,
    t_grid: &[f64],
) -> Result<Vec<BlochState>>
where
    G: Fn(f64) -> f64,
{
    if t_grid.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    let lambda = f.lambda;
    let two_gamma = 2.0 * f.gamma;
    // state: (P, Q, N, Pμ, Qμ, Nμ)
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let g2 = 2.0 * g_of_t(t);
        let l2 = 2.0 * lambda;
        // rho block: L_q rho + lambda L_x mu
        dy[0] = 0.0;
        dy[1] = -g2 * y[2] - l2 * y[5];
        dy[2] = g2 * y[1] + l2 * y[4];
        // mu block: lambda L_x rho + (L_q - 2gamma) mu
        dy[3] = -two_gamma * y[3];
        dy[4] = -g2 * y[5] - l2 * y[2] - two_gamma * y[4];
        dy[5] = g2 * y[4] + l2 * y[1] - two_gamma * y[5];
    };
    let y0 = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let opts = OdeOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        ..OdeOptions::default()
    };
    let states = integrate_to_grid(rhs, &y0, 0.0, t_grid, &opts)?;
    Ok(states
        .into_iter()
        .map(|y| BlochState {
            p: y[0],
            q: y[1],
            n: y[2],
        })
        .collect())
}

/// Propagate M fluctuators coupled to the pseudo-qubit through the
/// 3·2^M central-spin system. Subset index s tracks μ_S = ⟨Π_{i∈S}ξ_i ρ⟩;
/// fluctuator i couples subsets s ↔ s⊕{i} and damps subsets containing i
/// at 2γ_i. Returns the ρ-block (s = 0) Bloch vector at the grid times.
pub fn central_spin_propagate<G>(
    fluctuators: &[Fluctuator],
    g_of_t: G,
    t_grid: &[f64],
) -> Result<Vec<BlochState>>
where
    G: Fn(f64) -> f64,
{
    let m = fluctuators.len();
    if m > 12 {
        return Err(Error::Capacity(format!(
            "central-spin propagation bounded at 12 fluctuators (3·2^M states); got M = {m}"
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    let n_subsets = 1usize << m;
    let dim = 3 * n_subsets;
    let lambdas: Vec<f64> = fluctuators.iter().map(|f| f.lambda).collect();
    // total damping per subset: 2·Σ_{i ∈ s} γ_i
    let damping: Vec<f64> = (0..n_subsets)
        .map(|s| {
            2.0 * fluctuators
                .iter()
                .enumerate()
                .filter(|(i, _)| s >> i & 1 == 1)
                .map(|(_, f)| f.gamma)
                .sum::<f64>()
        })
        .collect();

    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let g2 = 2.0 * g_of_t(t);
        for s in 0..n_subsets {
            let b = 3 * s;
            let d = damping[s];
            // L_q with omega = 0 plus subset damping
            dy[b] = -d * y[b];
            dy[b + 1] = -g2 * y[b + 2] - d * y[b + 1];
            dy[b + 2] = g2 * y[b + 1] - d * y[b + 2];
            // noise couplings to neighboring subsets
            for (i, &li) in lambdas.iter().enumerate() {
                let nb = 3 * (s ^ (1 << i));
                dy[b + 1] -= 2.0 * li * y[nb + 2];
                dy[b + 2] += 2.0 * li * y[nb + 1];
            }
        }
    };
    let mut y0 = vec![0.0; dim];
    y0[2] = 1.0; // N = 1 in the rho block
    let opts = OdeOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        ..OdeOptions::default()
    };
    let states = integrate_to_grid(rhs, &y0, 0.0, t_grid, &opts)?;
    Ok(states
        .into_iter()
        .map(|y| BlochState {
            p: y[0],
            q: y[1],
            n: y[2],
        })
        .collect())
}

/// Cumulative coherent phase G(t) = ∫₀ᵗ g dτ (rad) of a repeated gate
/// train, tabulated per gate.
#[derive(Debug, Clone)]
pub struct GatePhase {
    gate_us: f64,
    /// prefix of ∫g dτ (rad) at grid boundaries within one gate
    prefix: Vec<f64>,
    values: Vec<f64>,
}

impl GatePhase {
    pub fn from_pulse(pulse: &crate::sequences::GatePulse) -> Self {
        const SEGMENTS: usize = 2048;
        let mut values = Vec::with_capacity(SEGMENTS + 1);
        for i in 0..=SEGMENTS {
            let t_ns = pulse.t_g * i as f64 / SEGMENTS as f64;
            // rad/ns integrated over ns gives rad
            values.push(crate::sequences::gate_pulse_value(pulse, t_ns));
        }
        let h_ns = pulse.t_g / SEGMENTS as f64;
        let mut prefix = Vec::with_capacity(SEGMENTS + 1);
        prefix.push(0.0);
        for i in 1..=SEGMENTS {
            prefix.push(prefix[i - 1] + 0.5 * (values[i - 1] + values[i]) * h_ns);
        }
        GatePhase {
            gate_us: pulse.t_g * crate::units::NS_TO_US,
            prefix,
            values,
        }
    }

    /// Constant coupling g (rad/μs): G(t) = g·t.
    pub fn constant(g_rad_per_us: f64) -> Self {
        GatePhase {
            gate_us: 0.0,
            prefix: vec![g_rad_per_us],
            values: Vec::new(),
        }
    }

    /// G(t) in rad at t in μs.
    pub fn phase_at(&self, t: f64) -> f64 {
        if self.gate_us == 0.0 {
            return self.prefix[0] * t;
        }
        let n_full = (t / self.gate_us).floor();
        let frac = t - n_full * self.gate_us;
        let g_gate = *self.prefix.last().unwrap();
        n_full * g_gate + self.partial(frac)
    }

    /// Instantaneous g (rad/μs) at t in μs.
    pub fn g_at(&self, t: f64) -> f64 {
        if self.gate_us == 0.0 {
            return self.prefix[0];
        }
        let segments = self.values.len() - 1;
        let frac = t - (t / self.gate_us).floor() * self.gate_us;
        let x = (frac / self.gate_us * segments as f64).clamp(0.0, segments as f64);
        let i = (x.floor() as usize).min(segments - 1);
        let w = x - i as f64;
        // rad/ns -> rad/us
        (self.values[i] * (1.0 - w) + self.values[i + 1] * w) * 1e3
    }

    fn partial(&self, frac: f64) -> f64 {
        let segments = self.values.len() - 1;
        let gate_ns = self.gate_us / crate::units::NS_TO_US;
        let x = (frac / self.gate_us * segments as f64).clamp(0.0, segments as f64);
        let i = (x.floor() as usize).min(segments - 1);
        let h_ns = gate_ns / segments as f64;
        let dt_ns = (x - i as f64) * h_ns;
        let v0 = self.values[i];
        let v1 = self.values[i + 1];
        let vt = v0 + (v1 - v0) * (dt_ns / h_ns);
        self.prefix[i] + 0.5 * (v0 + vt) * dt_ns
    }
}

/// Result of a Lindblad propagation: the normalized envelope, its
/// statistical error (zero for averaged mode), and the subspace
/// population at each grid time.
#[derive(Debug, Clone)]
pub struct LindbladResult {
    pub times: Vec<f64>,
    pub normalized: Vec<f64>,
    pub stderr: Vec<f64>,
    pub subspace_population: Vec<f64>,
}

const LIND_DIM: usize = 8; // 4 complex components as (re, im) pairs

fn pack(r: &[Complex64; 4]) -> [f64; LIND_DIM] {
    let mut y = [0.0; LIND_DIM];
    for (i, c) in r.iter().enumerate() {
        y[2 * i] = c.re;
        y[2 * i + 1] = c.im;
    }
    y
}

fn unpack(y: &[f64]) -> [Complex64; 4] {
    [
        Complex64::new(y[0], y[1]),
        Complex64::new(y[2], y[3]),
        Complex64::new(y[4], y[5]),
        Complex64::new(y[6], y[7]),
    ]
}

/// Per-trajectory Lindblad propagation in the interaction picture of the
/// coherent gate train (vectorized σ_x basis), with the full time
/// dependence of G(t) retained and ξ(t) sampled per trajectory.
///
/// The model takes its telegraph amplitude λ and rate γ from the first
/// fluctuator of `model` (the within-gate λ(t) shape is `lambda_shape`).
/// Returns averages of the normalized observable over `n_traj`
/// trajectories; numerator and denominator are averaged separately.
pub fn lindblad_propagate_mc(
    model: &NoiseModel,
    phase: &GatePhase,
    lambda_shape: Option<&super::LambdaProfile>,
    t_grid: &[f64],
    n_traj: u64,
    seed: u64,
) -> Result<LindbladResult> {
    if n_traj == 0 {
        return Err(Error::InvalidInput("n_traj must be >= 1".into()));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("bad time grid".into()));
    }
    model.validate()?;
    let (lambda, gamma) = match model.fluctuators.first() {
        Some(f) => (f.lambda, f.gamma),
        None => (0.0, 0.0),
    };
    let gphi = model.gamma_phi;
    let g1 = model.gamma_1;
    let dg1 = model.delta_gamma_1;

    let n_pts = t_grid.len();
    const CHUNK: u64 = 64;
    let n_chunks = n_traj.div_ceil(CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut num_sum = vec![0.0; n_pts];
            let mut num_sq = vec![0.0; n_pts];
            let mut den_sum = vec![0.0; n_pts];
            let mut den_sq = vec![0.0; n_pts];
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(n_traj);
            for traj in lo..hi {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(substream_seed(seed, 0x11d, traj));
                let (nums, dens) = lindblad_single_trajectory(
                    lambda,
                    gamma,
                    gphi,
                    g1,
                    dg1,
                    phase,
                    lambda_shape,
                    t_grid,
                    &mut rng,
                );
                for k in 0..n_pts {
                    num_sum[k] += nums[k];
                    num_sq[k] += nums[k] * nums[k];
                    den_sum[k] += dens[k];
                    den_sq[k] += dens[k] * dens[k];
                }
            }
            (num_sum, num_sq, den_sum, den_sq)
        })
        .collect();

    let mut num_sum = vec![0.0; n_pts];
    let mut num_sq = vec![0.0; n_pts];
    let mut den_sum = vec![0.0; n_pts];
    let mut den_sq = vec![0.0; n_pts];
    for (a, b, c, d) in partials {
        for k in 0..n_pts {
            num_sum[k] += a[k];
            num_sq[k] += b[k];
            den_sum[k] += c[k];
            den_sq[k] += d[k];
        }
    }
    let n = n_traj as f64;
    let mut normalized = Vec::with_capacity(n_pts);
    let mut stderr = Vec::with_capacity(n_pts);
    let mut population = Vec::with_capacity(n_pts);
    for k in 0..n_pts {
        let num = num_sum[k] / n;
        let den = den_sum[k] / n;
        if den <= 0.0 {
            return Err(Error::UndefinedMeasurement(format!(
                "subspace population vanished at t = {}",
                t_grid[k]
            )));
        }
        let var_num = (num_sq[k] / n - num * num).max(0.0);
        let var_den = (den_sq[k] / n - den * den).max(0.0);
        let ratio = num / den;
        // delta-method error of a ratio of means (covariance neglected)
        let se = ((var_num / (den * den) + num * num * var_den / den.powi(4)) / n).sqrt();
        normalized.push(ratio);
        stderr.push(se);
        population.push(den);
    }
    Ok(LindbladResult {
        times: t_grid.to_vec(),
        normalized,
        stderr,
        subspace_population: population,
    })
}

#[allow(clippy::too_many_arguments)]
fn lindblad_single_trajectory(
    lambda: f64,
    gamma: f64,
    gphi: f64,
    g1: f64,
    dg1: f64,
    phase: &GatePhase,
    lambda_shape: Option<&super::LambdaProfile>,
    t_grid: &[f64],
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let t_end = *t_grid.last().unwrap();
    let mut xi: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let mut t = 0.0f64;
    // initial |01><01| in the sigma_x basis
    let mut y = pack(&[
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
    ]);
    let mut nums = Vec::with_capacity(t_grid.len());
    let mut dens = Vec::with_capacity(t_grid.len());
    let mut grid_idx = 0usize;

    let opts = OdeOptions {
        rel_tol: 1e-8,
        abs_tol: 1e-10,
        max_step: 0.002,
        ..OdeOptions::default()
    };

    while grid_idx < t_grid.len() {
        let next_switch = if gamma > 0.0 {
            t + (-rng.gen::<f64>().ln() / gamma)
        } else {
            f64::INFINITY
        };
        let seg_end = next_switch.min(t_end);
        // grid points inside this constant-xi segment
        let mut seg_grid: Vec<f64> = Vec::new();
        let mut j = grid_idx;
        while j < t_grid.len() && t_grid[j] <= seg_end {
            seg_grid.push(t_grid[j]);
            j += 1;
        }
        let needs_tail = seg_end < t_end || j < t_grid.len();
        let mut grid_for_ode = seg_grid.clone();
        if needs_tail && seg_end > t {
            grid_for_ode.push(seg_end);
        }
        if !grid_for_ode.is_empty() {
            let xi_now = xi;
            let rhs = |tt: f64, yy: &[f64], dyy: &mut [f64]| {
                lindblad_rhs(
                    tt, yy, dyy, xi_now, lambda, gphi, g1, dg1, phase, lambda_shape,
                );
            };
            let states = integrate_to_grid(rhs, &y, t, &grid_for_ode, &opts)
                .expect("lindblad propagation failed");
            for (k, _) in seg_grid.iter().enumerate() {
                let r = unpack(&states[k]);
                // numerator r+- + r-+, denominator r++ + r--
                nums.push((r[1] + r[2]).re);
                dens.push((r[0] + r[3]).re);
            }
            y.copy_from_slice(states.last().unwrap());
        }
        grid_idx = j;
        t = seg_end;
        if t >= t_end && grid_idx >= t_grid.len() {
            break;
        }
        xi = -xi;
    }
    (nums, dens)
}

#[allow(clippy::too_many_arguments)]
fn lindblad_rhs(
    t: f64,
    y: &[f64],
    dy: &mut [f64],
    xi: f64,
    lambda: f64,
    gphi: f64,
    g1: f64,
    dg1: f64,
    phase: &GatePhase,
    lambda_shape: Option<&super::LambdaProfile>,
) {
    let r = unpack(y);
    let g_phase = phase.phase_at(t);
    let e2 = Complex64::from_polar(1.0, 2.0 * g_phase);
    let e2c = e2.conj();
    let e4 = e2 * e2;
    let e4c = e4.conj();
    let lam_t = match lambda_shape {
        Some(p) => lambda * p.shape_at(t),
        None => lambda,
    };
    let diag = -(gphi + 2.0 * g1);
    let i8lam = Complex64::new(0.0, 8.0 * xi * lam_t);

    let d0 = diag * r[0] + dg1 * (e2c * r[1] + e2 * r[2]) + gphi * r[3];
    let d1 = dg1 * e2 * r[0] + (diag - i8lam) * r[1] + gphi * e4 * r[2] + dg1 * e2 * r[3];
    let d2 = dg1 * e2c * r[0] + gphi * e4c * r[1] + (diag + i8lam) * r[2] + dg1 * e2c * r[3];
    let d3 = gphi * r[0] + dg1 * (e2c * r[1] + e2 * r[2]) + diag * r[3];

    let quarter = 0.25;
    dy[0] = quarter * d0.re;
    dy[1] = quarter * d0.im;
    dy[2] = quarter * d1.re;
    dy[3] = quarter * d1.im;
    dy[4] = quarter * d2.re;
    dy[5] = quarter * d2.im;
    dy[6] = quarter * d3.re;
    dy[7] = quarter * d3.im;
}

/// Averaged Shapiro-Loginov propagation of the Lindblad system in the
/// rotating frame: the 8-component (r, μ) complex system with constant
/// coefficients (fast e^{±2iG}, e^{±4iG} terms dropped, so ΔΓ₁ does not
/// enter). The optional `filter_flips` list (sorted times) flips the
/// telegraph coupling sign, implementing CPMG refocusing.
pub fn lindblad_propagate_averaged(
    model: &NoiseModel,
    t_grid: &[f64],
    filter_flips: &[f64],
) -> Result<LindbladResult> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("bad time grid".into()));
    }
    model.validate()?;
    let (lambda, gamma) = match model.fluctuators.first() {
        Some(f) => (f.lambda, f.gamma),
        None => (0.0, 0.0),
    };
    let gphi = model.gamma_phi;
    let g1 = model.gamma_1;

    // state: (r, mu) with 4 complex components each -> 16 reals
    let dim = 16;
    let mut y = vec![0.0; dim];
    // r(0) = (0.5, 0.5, 0.5, 0.5), mu(0) = 0
    for i in 0..4 {
        y[2 * i] = 0.5;
    }

    let rhs_with_sign = |sign: f64| {
        move |_t: f64, yy: &[f64], dyy: &mut [f64]| {
            let r = unpack(&yy[0..8]);
            let mu = unpack(&yy[8..16]);
            let diag = -(gphi + 2.0 * g1) * 0.25;
            let coupling = Complex64::new(0.0, -2.0 * sign * lambda);
            let cross = 0.25 * gphi;

            // L0 r + lambda L1 mu
            let dr = [
                diag * r[0] + cross * r[3],
                diag * r[1] + coupling * mu[1],
                diag * r[2] - coupling * mu[2],
                diag * r[3] + cross * r[0],
            ];
            // lambda L1 r + (L0 - 2 gamma) mu
            let dmu = [
                diag * mu[0] + cross * mu[3] - 2.0 * gamma * mu[0],
                coupling * r[1] + (diag - 2.0 * gamma) * mu[1],
                -coupling * r[2] + (diag - 2.0 * gamma) * mu[2],
                diag * mu[3] + cross * mu[0] - 2.0 * gamma * mu[3],
            ];
            for i in 0..4 {
                dyy[2 * i] = dr[i].re;
                dyy[2 * i + 1] = dr[i].im;
                dyy[8 + 2 * i] = dmu[i].re;
                dyy[8 + 2 * i + 1] = dmu[i].im;
            }
        }
    };

    let opts = OdeOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        ..OdeOptions::default()
    };

    // propagate through sign segments, collecting grid samples
    let mut out_norm = Vec::with_capacity(t_grid.len());
    let mut out_pop = Vec::with_capacity(t_grid.len());
    let mut sign = 1.0f64;
    let mut t = 0.0f64;
    let mut grid_idx = 0usize;
    let t_end = *t_grid.last().unwrap();
    let mut flips = filter_flips.iter().copied().peekable();

    while grid_idx < t_grid.len() {
        let seg_end = flips.peek().copied().unwrap_or(f64::INFINITY).min(t_end);
        let mut seg_grid: Vec<f64> = Vec::new();
        let mut j = grid_idx;
        while j < t_grid.len() && t_grid[j] <= seg_end {
            seg_grid.push(t_grid[j]);
            j += 1;
        }
        let mut grid_for_ode = seg_grid.clone();
        if seg_end > t && (j < t_grid.len() || seg_end < t_end) {
            grid_for_ode.push(seg_end);
        }
        if !grid_for_ode.is_empty() {
            let states = integrate_to_grid(rhs_with_sign(sign), &y, t, &grid_for_ode, &opts)?;
            for (k, _) in seg_grid.iter().enumerate() {
                let r = unpack(&states[k][0..8]);
                let num = (r[1] + r[2]).re;
                let den = (r[0] + r[3]).re;
                if den <= 0.0 {
                    return Err(Error::UndefinedMeasurement(
                        "subspace population vanished".into(),
                    ));
                }
                out_norm.push(num / den);
                out_pop.push(den);
            }
            y.copy_from_slice(states.last().unwrap());
        }
        grid_idx = j;
        t = seg_end;
        if flips.peek().map(|&ft| ft <= t).unwrap_or(false) {
            flips.next();
            sign = -sign;
        }
        if t >= t_end && grid_idx >= t_grid.len() {
            break;
        }
    }

    Ok(LindbladResult {
        times: t_grid.to_vec(),
        normalized: out_norm,
        stderr: vec![0.0; t_grid.len()],
        subspace_population: out_pop,
    })
}
