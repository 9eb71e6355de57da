//! Adaptive Dormand–Prince 5(4) integration for small dense systems.

use crate::error::{Error, Result};

/// Butcher tableau of the Dormand–Prince 5(4) pair.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
/// Embedded 4th-order weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrator working tolerance and step bounds.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            min_step: 1e-14,
        }
    }
}

/// Integrate dy/dt = rhs(t, y) from `t0` to each time in `t_grid`
/// (strictly increasing, all ≥ t0), returning the states at the grid
/// points. The step controller lands exactly on every grid point.
pub fn integrate_to_grid<F>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    t_grid: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut out = Vec::with_capacity(t_grid.len());

    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; dim]).collect();
    let mut ytmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];

    // first-same-as-last: k[0] holds rhs at the current point
    rhs(t, &y, &mut k[0]);

    let mut h = opts.max_step.min(1e-3);

    for &t_target in t_grid {
        if t_target < t - 1e-15 {
            return Err(Error::InvalidInput(
                "ODE grid times must be non-decreasing".into(),
            ));
        }
        while t < t_target {
            let mut step = h.min(t_target - t).min(opts.max_step);
            loop {
                // stages 2..7
                for s in 0..6 {
                    for i in 0..dim {
                        let mut acc = 0.0;
                        for (j, kj) in k.iter().enumerate().take(s + 1) {
                            acc += A[s][j] * kj[i];
                        }
                        ytmp[i] = y[i] + step * acc;
                    }
                    rhs(t + C[s] * step, &ytmp, &mut k[s + 1]);
                }
                // 5th-order solution is stage 6's argument (FSAL form)
                let mut err_norm: f64 = 0.0;
                for i in 0..dim {
                    let mut acc5 = 0.0;
                    for (j, kj) in k.iter().enumerate().take(6) {
                        acc5 += A[5][j] * kj[i];
                    }
                    y5[i] = y[i] + step * acc5;
                    let mut acc4 = 0.0;
                    for (j, kj) in k.iter().enumerate() {
                        acc4 += B4[j] * kj[i];
                    }
                    let y4 = y[i] + step * acc4;
                    let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y5[i].abs());
                    let e = (y5[i] - y4) / scale;
                    err_norm += e * e;
                }
                err_norm = (err_norm / dim as f64).sqrt();

                if err_norm <= 1.0 {
                    t += step;
                    std::mem::swap(&mut y, &mut y5);
                    k.swap(0, 6); // FSAL
                    let grow = if err_norm == 0.0 {
                        5.0
                    } else {
                        (0.9 * err_norm.powf(-0.2)).min(5.0)
                    };
                    h = (step * grow).min(opts.max_step);
                    break;
                }
                step *= (0.9 * err_norm.powf(-0.2)).max(0.1);
                if step < opts.min_step {
                    return Err(Error::Stiffness(format!(
                        "step size underflow at t = {t}: required step {step:.3e}"
                    )));
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
