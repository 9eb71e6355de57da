//! Coupler Ramsey and Coupler CPMG schedules.
//!
//! Both sequences are trains of identical two-qubit gates. The CPMG
//! variant inserts a z-axis refocusing pulse every 2m gates, so the
//! cycle time is T_C = 2m·t_g and the measurement happens at n·T_C.
//! In the time domain the refocusing train acts through the piecewise
//! ±1 filter h(t), flipping sign at (k+½)T_C.
//!
//! Durations are in ns; couplings in rad/ns.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::device_flux::{g_noise_amplitude_rad_per_ns, DeviceParams};
use crate::error::{Error, Result};
use crate::numerics::quad;

/// Smoothed trapezoidal coupling pulse with raised-cosine edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatePulse {
    /// Total gate duration t_g (ns).
    pub t_g: f64,
    /// Rise (and fall) time of the cosine ramp (ns).
    pub rise_time: f64,
    /// Plateau coupling magnitude (rad/ns).
    pub g_max: f64,
}

impl GatePulse {
    pub fn new(t_g: f64, rise_time: f64, g_max: f64) -> Result<Self> {
        if !(t_g > 0.0) || rise_time < 0.0 || 2.0 * rise_time > t_g {
            return Err(Error::InvalidInput(format!(
                "need 0 <= 2*rise_time <= t_g (got rise {rise_time}, t_g {t_g})"
            )));
        }
        if !(g_max >= 0.0) {
            return Err(Error::InvalidInput("g_max must be non-negative".into()));
        }
        Ok(GatePulse {
            t_g,
            rise_time,
            g_max,
        })
    }

    /// 40 ns smoothed trapezoid with an 8 ns ramp; g_max in rad/ns.
    pub fn standard(g_max: f64) -> Self {
        GatePulse {
            t_g: 40.0,
            rise_time: 8.0,
            g_max,
        }
    }

    /// Area ∫g(t)dt of one gate; for cosine ramps this is
    /// g_max·(t_g - rise_time).
    pub fn area(&self) -> f64 {
        self.g_max * (self.t_g - self.rise_time)
    }

    /// Rescale g_max so the accumulated phase 2∫g dt equals k·π.
    pub fn calibrated_to_phase(&self, k: u32) -> Result<Self> {
        if self.t_g <= self.rise_time {
            return Err(Error::InvalidInput("degenerate pulse".into()));
        }
        let g_max = k as f64 * PI / (2.0 * (self.t_g - self.rise_time));
        Ok(GatePulse { g_max, ..*self })
    }
}

/// Pulse value g(t) at time t within the gate; zero outside [0, t_g].
pub fn gate_pulse_value(pulse: &GatePulse, t: f64) -> f64 {
    if t < 0.0 || t > pulse.t_g {
        return 0.0;
    }
    let r = pulse.rise_time;
    if r == 0.0 {
        return pulse.g_max;
    }
    if t < r {
        0.5 * pulse.g_max * (1.0 - (PI * t / r).cos())
    } else if t <= pulse.t_g - r {
        pulse.g_max
    } else {
        0.5 * pulse.g_max * (1.0 - (PI * (pulse.t_g - t) / r).cos())
    }
}

/// Kind of decoupling schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceKind {
    /// Free evolution over `n_gates` back-to-back gates.
    Ramsey { n_gates: u32 },
    /// n echo cycles of 2m gates each.
    Cpmg { n: u32, m: u32 },
}

/// A complete schedule: gate pulse plus the decoupling pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(flatten)]
    pub kind: SequenceKind,
    pub pulse: GatePulse,
    /// Refocusing pulse duration (ns); 0 means instantaneous.
    #[serde(default)]
    pub t_p: f64,
}

impl SequenceSpec {
    pub fn ramsey(n_gates: u32, pulse: GatePulse) -> Result<Self> {
        if n_gates == 0 {
            return Err(Error::InvalidInput("Ramsey needs n_gates >= 1".into()));
        }
        Ok(SequenceSpec {
            kind: SequenceKind::Ramsey { n_gates },
            pulse,
            t_p: 0.0,
        })
    }

    pub fn cpmg(n: u32, m: u32, pulse: GatePulse) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("CPMG needs n >= 1 and m >= 1".into()));
        }
        Ok(SequenceSpec {
            kind: SequenceKind::Cpmg { n, m },
            pulse,
            t_p: 0.0,
        })
    }

    /// CPMG cycle time T_C = 2m·t_g (ns). Errors for a Ramsey spec.
    pub fn cycle_time(&self) -> Result<f64> {
        match self.kind {
            SequenceKind::Cpmg { m, .. } => Ok(2.0 * m as f64 * self.pulse.t_g),
            SequenceKind::Ramsey { .. } => Err(Error::InvalidInput(
                "cycle time is defined for CPMG only".into(),
            )),
        }
    }

    /// Total schedule duration (ns), including finite refocusing pulses.
    pub fn total_time(&self) -> f64 {
        match self.kind {
            SequenceKind::Ramsey { n_gates } => n_gates as f64 * self.pulse.t_g,
            SequenceKind::Cpmg { n, m } => {
                n as f64 * (2.0 * m as f64 * self.pulse.t_g + self.t_p)
            }
        }
    }
}

/// The piecewise ±1 echo filter h(t) on [0, n·T_C].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterFunction {
    /// Interval boundaries: 0, T_C/2, 3T_C/2, ..., n·T_C.
    pub breakpoints: Vec<f64>,
    /// Sign on each interval, starting at +1.
    pub signs: Vec<i8>,
}

impl FilterFunction {
    /// h(t) at a point (sign of the interval containing t).
    pub fn value(&self, t: f64) -> i8 {
        if t < self.breakpoints[0] || t > *self.breakpoints.last().unwrap() {
            return 0;
        }
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&t).unwrap())
        {
            Ok(i) => self.signs[i.min(self.signs.len() - 1)],
            Err(i) => self.signs[i - 1],
        }
    }

    /// Times at which the sign flips.
    pub fn flip_times(&self) -> &[f64] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    /// ∫h dt over the full domain.
    pub fn integral(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.signs)
            .map(|(w, &s)| s as f64 * (w[1] - w[0]))
            .sum()
    }
}

/// Build the n-pulse CPMG filter: h(0) = +1 and sign flips at
/// (k + ½)·T_C for k = 0..n-1.
pub fn build_filter(n: u32, t_c: f64) -> Result<FilterFunction> {
    if n == 0 || !(t_c > 0.0) {
        return Err(Error::InvalidInput(
            "filter needs n >= 1 and T_C > 0".into(),
        ));
    }
    let mut breakpoints = Vec::with_capacity(n as usize + 2);
    let mut signs = Vec::with_capacity(n as usize + 1);
    breakpoints.push(0.0);
    let mut sign: i8 = 1;
    for k in 0..n {
        breakpoints.push((k as f64 + 0.5) * t_c);
        signs.push(sign);
        sign = -sign;
    }
    breakpoints.push(n as f64 * t_c);
    signs.push(sign);
    Ok(FilterFunction { breakpoints, signs })
}

/// Gate-averaged g-noise amplitude (1/t_g)·∫λ(g(t))dt in rad/ns,
/// by adaptive quadrature to 1e-8 relative.
pub fn gate_averaged_lambda(pulse: &GatePulse, p: &DeviceParams) -> Result<f64> {
    // propagate branch errors from a probe of the plateau first
    g_noise_amplitude_rad_per_ns(pulse.g_max, p)?;
    let f = |t: f64| g_noise_amplitude_rad_per_ns(gate_pulse_value(pulse, t), p).unwrap_or(0.0);
    // integrate ramp, plateau, ramp separately; the plateau is constant
    let r = pulse.rise_time;
    let total = if r > 0.0 {
        let up = quad::integrate(f, 0.0, r, 1e-8);
        let down = quad::integrate(f, pulse.t_g - r, pulse.t_g, 1e-8);
        let plateau = g_noise_amplitude_rad_per_ns(pulse.g_max, p)? * (pulse.t_g - 2.0 * r);
        up + plateau + down
    } else {
        g_noise_amplitude_rad_per_ns(pulse.g_max, p)? * pulse.t_g
    };
    Ok(total / pulse.t_g)
}

/// One row of an exported schedule: time (ns), coupling g (rad/ns),
/// and the echo filter sign.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SchedulePoint {
    pub t_ns: f64,
    pub g: f64,
    pub h: i8,
}

/// Sample the full schedule (gate train and filter) on a uniform grid,
/// for CSV export and plotting.
pub fn sample_schedule(seq: &SequenceSpec, points: usize) -> Result<Vec<SchedulePoint>> {
    if points < 2 {
        return Err(Error::InvalidInput("need at least 2 sample points".into()));
    }
    let total = seq.total_time();
    let filter = match seq.kind {
        SequenceKind::Cpmg { n, .. } => Some(build_filter(n, seq.cycle_time()? + seq.t_p)?),
        SequenceKind::Ramsey { .. } => None,
    };
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let t = total * i as f64 / (points - 1) as f64;
        // position within the repeating gate train (refocusing windows hold g = 0)
        let g = match seq.kind {
            SequenceKind::Ramsey { .. } => {
                let within = t % seq.pulse.t_g;
                gate_pulse_value(&seq.pulse, within)
            }
            SequenceKind::Cpmg { m, .. } => {
                let cycle = 2.0 * m as f64 * seq.pulse.t_g + seq.t_p;
                let tc = t % cycle;
                let gates_half = m as f64 * seq.pulse.t_g;
                if tc < gates_half {
                    gate_pulse_value(&seq.pulse, tc % seq.pulse.t_g)
                } else if tc < gates_half + seq.t_p {
                    0.0
                } else {
                    gate_pulse_value(&seq.pulse, (tc - gates_half - seq.t_p) % seq.pulse.t_g)
                }
            }
        };
        let h = filter.as_ref().map(|f| f.value(t)).unwrap_or(1);
        out.push(SchedulePoint { t_ns: t, g, h });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_shape_reference_points() {
        let p = GatePulse::new(40.0, 8.0, 0.5).unwrap();
        assert_eq!(gate_pulse_value(&p, 20.0), 0.5);
        assert_eq!(gate_pulse_value(&p, 0.0), 0.0);
        assert_eq!(gate_pulse_value(&p, 40.0), 0.0);
        assert_eq!(gate_pulse_value(&p, -1.0), 0.0);
        assert_eq!(gate_pulse_value(&p, 41.0), 0.0);
        // C1 continuity at the ramp joints
        let eps = 1e-9;
        assert!((gate_pulse_value(&p, 8.0 - eps) - gate_pulse_value(&p, 8.0 + eps)).abs() < 1e-8);
    }

    #[test]
    fn pulse_area_matches_analytic() {
        let p = GatePulse::new(40.0, 8.0, 0.7).unwrap();
        let num = quad::integrate(|t| gate_pulse_value(&p, t), 0.0, p.t_g, 1e-12);
        assert!((num - p.area()).abs() < 1e-9);
        assert!((p.area() - 0.7 * 32.0).abs() < 1e-12);
    }

    #[test]
    fn pulse_validation() {
        assert!(GatePulse::new(40.0, 21.0, 0.5).is_err());
        assert!(GatePulse::new(0.0, 0.0, 0.5).is_err());
        assert!(GatePulse::new(40.0, 8.0, -0.5).is_err());
    }

    #[test]
    fn calibration_hits_target_phase() {
        let p = GatePulse::standard(0.1).calibrated_to_phase(1).unwrap();
        assert!((2.0 * p.area() - PI).abs() < 1e-12);
        let p2 = GatePulse::standard(0.1).calibrated_to_phase(4).unwrap();
        assert!((2.0 * p2.area() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn filter_single_echo() {
        let f = build_filter(1, 2.0).unwrap();
        assert_eq!(f.value(0.5), 1);
        assert_eq!(f.value(1.5), -1);
        assert!(f.integral().abs() < 1e-15);
        assert_eq!(f.flip_times(), &[1.0]);
    }

    #[test]
    fn filter_two_echoes() {
        let f = build_filter(2, 2.0).unwrap();
        assert_eq!(f.flip_times(), &[1.0, 3.0]);
        assert!(f.integral().abs() < 1e-15);
        assert_eq!(f.value(0.2), 1);
        assert_eq!(f.value(2.0), -1);
        assert_eq!(f.value(3.5), 1);
    }

    #[test]
    fn filter_sign_change_count() {
        for n in 1..20u32 {
            let f = build_filter(n, 1.3).unwrap();
            let changes = f.signs.windows(2).filter(|w| w[0] != w[1]).count();
            assert_eq!(changes, n as usize);
            assert_eq!(f.signs[0], 1);
            let last = *f.breakpoints.last().unwrap();
            assert!((last - n as f64 * 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn sequence_times() {
        let p = GatePulse::standard(0.1);
        let r = SequenceSpec::ramsey(10, p.clone()).unwrap();
        assert_eq!(r.total_time(), 400.0);
        let c = SequenceSpec::cpmg(3, 5, p).unwrap();
        assert_eq!(c.cycle_time().unwrap(), 400.0);
        assert_eq!(c.total_time(), 1200.0);
        assert!(r.cycle_time().is_err());
    }

    #[test]
    fn averaged_lambda_limits() {
        use crate::device_flux::DeviceParams;
        let dev = DeviceParams::wide_tuning();
        let g_max = 0.03 * crate::units::GHZ_TO_RAD_PER_NS;

        // rectangular limit: average equals lambda(g_max)
        let rect = GatePulse::new(40.0, 0.0, g_max).unwrap();
        let avg = gate_averaged_lambda(&rect, &dev).unwrap();
        let plateau = g_noise_amplitude_rad_per_ns(g_max, &dev).unwrap();
        assert!((avg - plateau).abs() < 1e-12);

        // no flux noise: zero regardless of shape
        let mut quiet = dev.clone();
        quiet.delta_phi_m = 0.0;
        let p = GatePulse::new(40.0, 8.0, g_max).unwrap();
        assert_eq!(gate_averaged_lambda(&p, &quiet).unwrap(), 0.0);
    }

    #[test]
    fn averaged_lambda_vs_riemann_sum() {
        use crate::device_flux::DeviceParams;
        let dev = DeviceParams::wide_tuning();
        let g_max = 0.03 * crate::units::GHZ_TO_RAD_PER_NS;
        let p = GatePulse::new(40.0, 8.0, g_max).unwrap();
        let avg = gate_averaged_lambda(&p, &dev).unwrap();

        let n = 1_000_000usize;
        let mut sum = 0.0;
        for i in 0..n {
            let t = p.t_g * (i as f64 + 0.5) / n as f64;
            sum += g_noise_amplitude_rad_per_ns(gate_pulse_value(&p, t), &dev).unwrap();
        }
        let riemann = sum / n as f64;
        assert!(
            (avg - riemann).abs() / riemann < 1e-6,
            "avg = {avg}, riemann = {riemann}"
        );

        // average sits between the edge and plateau values
        let low = g_noise_amplitude_rad_per_ns(0.0, &dev).unwrap();
        let high = g_noise_amplitude_rad_per_ns(g_max, &dev).unwrap();
        assert!(avg > low && avg < high);
    }

    #[test]
    fn schedule_sampling_covers_domain() {
        let seq = SequenceSpec::cpmg(2, 2, GatePulse::standard(0.1)).unwrap();
        let rows = sample_schedule(&seq, 101).unwrap();
        assert_eq!(rows.len(), 101);
        assert_eq!(rows[0].t_ns, 0.0);
        assert!((rows.last().unwrap().t_ns - seq.total_time()).abs() < 1e-9);
        // filter starts +1 and ends with the n=2 parity (+1)
        assert_eq!(rows[1].h, 1);
        assert_eq!(rows[99].h, 1);
        assert!(rows.iter().any(|r| r.h == -1));
    }
}
