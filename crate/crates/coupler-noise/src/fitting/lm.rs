//! Damped least squares (Levenberg–Marquardt) with numeric Jacobians,
//! box bounds, and seeded multi-start.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::substream_seed;

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative decrease of the cost below which iteration stops.
    pub ftol: f64,
    /// Relative step size below which iteration stops.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 200,
            ftol: 1e-12,
            xtol: 1e-12,
        }
    }
}

/// One converged (or exhausted) minimization.
#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared weighted residuals.
    pub chi_square: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Index of the start that produced this outcome (set by multi-start).
    pub start_index: usize,
}

fn eval<F>(f: &F, p: &[f64], out: &mut DVector<f64>)
where
    F: Fn(&[f64], &mut [f64]),
{
    f(p, out.as_mut_slice());
}

fn jacobian<F>(f: &F, p: &[f64], r0: &DVector<f64>, bounds: &[(f64, f64)]) -> DMatrix<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = r0.len();
    let m = p.len();
    let mut jac = DMatrix::zeros(n, m);
    let mut probe = p.to_vec();
    let mut r1 = DVector::zeros(n);
    for j in 0..m {
        let scale = p[j].abs().max(1e-8 * (bounds[j].1 - bounds[j].0).abs()).max(1e-12);
        let mut h = 1e-6 * scale;
        // step inside the box
        if p[j] + h > bounds[j].1 {
            h = -h;
        }
        probe[j] = p[j] + h;
        eval(f, &probe, &mut r1);
        for i in 0..n {
            jac[(i, j)] = (r1[i] - r0[i]) / h;
        }
        probe[j] = p[j];
    }
    jac
}

fn clamp(p: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in p.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Minimize ‖r(p)‖² from a single start, bounded by `bounds`.
pub fn minimize<F>(
    residuals: &F,
    n_residuals: usize,
    p0: &[f64],
    bounds: &[(f64, f64)],
    opts: &LmOptions,
) -> Result<LmOutcome>
where
    F: Fn(&[f64], &mut [f64]),
{
    if p0.len() != bounds.len() {
        return Err(Error::InvalidInput("bounds/parameter mismatch".into()));
    }
    if n_residuals < p0.len() {
        return Err(Error::InvalidInput(format!(
            "{} parameters but only {} residuals",
            p0.len(),
            n_residuals
        )));
    }
    let mut p = p0.to_vec();
    clamp(&mut p, bounds);
    let mut r = DVector::zeros(n_residuals);
    eval(residuals, &p, &mut r);
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iter = 0;

    while iter < opts.max_iter {
        iter += 1;
        let jac = jacobian(residuals, &p, &r, bounds);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        if jtr.amax() < 1e-14 {
            converged = true;
            break;
        }
        let mut stepped = false;
        for _ in 0..25 {
            // damped normal equations, scaled by the diagonal
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-30);
            }
            let delta = match a.cholesky() {
                Some(ch) => ch.solve(&(-&jtr)),
                None => {
                    mu *= 10.0;
                    continue;
                }
            };
            let mut p_new: Vec<f64> =
                p.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            clamp(&mut p_new, bounds);
            let mut r_new = DVector::zeros(n_residuals);
            eval(residuals, &p_new, &mut r_new);
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new < cost {
                let rel_step = p
                    .iter()
                    .zip(&p_new)
                    .map(|(a, b)| (a - b).abs() / a.abs().max(1e-12))
                    .fold(0.0f64, f64::max);
                let rel_drop = (cost - cost_new) / cost.max(1e-300);
                p = p_new;
                r = r_new;
                cost = cost_new;
                mu = (mu / 3.0).max(1e-12);
                stepped = true;
                if rel_drop < opts.ftol || rel_step < opts.xtol {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
        if !stepped {
            // no downhill step found: local minimum at current damping
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    Ok(LmOutcome {
        params: p,
        chi_square: cost,
        n_iter: iter,
        converged,
        start_index: 0,
    })
}

/// Multi-start minimization: an optional caller guess plus seeded uniform
/// starts over the bounds, run in parallel, returning the best outcome
/// (lowest cost, ties broken by start index).
pub fn multi_start<F>(
    residuals: &F,
    n_residuals: usize,
    bounds: &[(f64, f64)],
    initial_guess: Option<&[f64]>,
    n_starts: usize,
    seed: u64,
    opts: &LmOptions,
) -> Result<LmOutcome>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let n_starts = n_starts.max(8);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n_starts);
    if let Some(g) = initial_guess {
        if g.len() != bounds.len() {
            return Err(Error::InvalidInput("initial guess length mismatch".into()));
        }
        starts.push(g.to_vec());
    }
    // midpoint start, log-spaced when the box spans decades
    let midpoint: Vec<f64> = bounds
        .iter()
        .map(|&(lo, hi)| {
            if lo > 0.0 && hi / lo > 100.0 {
                (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp()
            } else {
                0.5 * (lo + hi)
            }
        })
        .collect();
    starts.push(midpoint);
    while starts.len() < n_starts {
        let k = starts.len();
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, 0xf17, k as u64));
        let p: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| {
                if lo > 0.0 && hi / lo > 100.0 {
                    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + rng.gen::<f64>() * (hi - lo)
                }
            })
            .collect();
        starts.push(p);
    }

    let outcomes: Vec<Result<LmOutcome>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            minimize(residuals, n_residuals, s, bounds, opts).map(|mut o| {
                o.start_index = i;
                o
            })
        })
        .collect();

    let mut best: Option<LmOutcome> = None;
    for o in outcomes {
        let o = o?;
        best = match best {
            None => Some(o),
            Some(b) => {
                if o.chi_square < b.chi_square
                    || (o.chi_square == b.chi_square && o.start_index < b.start_index)
                {
                    Some(o)
                } else {
                    Some(b)
                }
            }
        };
    }
    let best = best.ok_or_else(|| Error::Convergence("no start produced a fit".into()))?;
    if !best.chi_square.is_finite() {
        return Err(Error::Convergence(
            "all starts diverged to non-finite cost".into(),
        ));
    }
    Ok(best)
}

/// Covariance-based 2σ half-widths and the curvature spectrum of the
/// final fit. Returns (confidence per parameter, flat-direction notes).
pub fn confidence_and_curvature<F>(
    residuals: &F,
    n_residuals: usize,
    params: &[f64],
    bounds: &[(f64, f64)],
    chi_square: f64,
    param_names: &[&str],
) -> (Vec<f64>, Vec<String>)
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut r = DVector::zeros(n_residuals);
    eval(residuals, params, &mut r);
    let jac = jacobian(residuals, params, &r, bounds);
    let jtj = jac.transpose() * &jac;
    let dof = (n_residuals as f64 - params.len() as f64).max(1.0);
    let variance_scale = chi_square / dof;

    let eig = nalgebra::SymmetricEigen::new(jtj.clone());
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut warnings = Vec::new();
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= 1e-12 * max_eig {
            // name the parameters dominating the flat direction
            let col = eig.eigenvectors.column(k);
            let mut dominant: Vec<(f64, usize)> = col
                .iter()
                .enumerate()
                .map(|(i, &v)| (v.abs(), i))
                .collect();
            dominant.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let names: Vec<&str> = dominant
                .iter()
                .take(2)
                .map(|&(_, i)| *param_names.get(i).unwrap_or(&"?"))
                .collect();
            warnings.push(format!(
                "weakly identifiable direction (curvature ratio {:.1e}) dominated by {}",
                ev / max_eig.max(1e-300),
                names.join(", ")
            ));
        }
    }

    let conf = match jtj.clone().try_inverse() {
        Some(inv) => (0..params.len())
            .map(|i| 2.0 * (variance_scale * inv[(i, i)].max(0.0)).sqrt())
            .collect(),
        None => vec![f64::INFINITY; params.len()],
    };
    (conf, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential() {
        // y = a e^{-b t}, data from (2, 0.5)
        let ts: Vec<f64> = (0..30).map(|i| i as f64 * 0.3).collect();
        let data: Vec<f64> = ts.iter().map(|&t| 2.0 * (-0.5 * t).exp()).collect();
        let ts2 = ts.clone();
        let resid = move |p: &[f64], out: &mut [f64]| {
            for (i, (&t, &d)) in ts2.iter().zip(&data).enumerate() {
                out[i] = p[0] * (-p[1] * t).exp() - d;
            }
        };
        let out = multi_start(
            &resid,
            ts.len(),
            &[(0.1, 10.0), (0.01, 5.0)],
            None,
            8,
            1,
            &LmOptions::default(),
        )
        .unwrap();
        assert!((out.params[0] - 2.0).abs() < 1e-6);
        assert!((out.params[1] - 0.5).abs() < 1e-6);
        assert!(out.chi_square < 1e-12);
    }

    #[test]
    fn exact_start_is_fixed_point() {
        let ts: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let data: Vec<f64> = ts.iter().map(|&t| (-0.3 * t).exp()).collect();
        let resid = move |p: &[f64], out: &mut [f64]| {
            for (i, (&t, &d)) in ts.iter().zip(&data).enumerate() {
                out[i] = (-p[0] * t).exp() - d;
            }
        };
        let out = minimize(&resid, 10, &[0.3], &[(0.0, 1.0)], &LmOptions::default()).unwrap();
        assert_eq!(out.params[0], 0.3);
        assert_eq!(out.chi_square, 0.0);
        assert!(out.converged);
    }

    #[test]
    fn rejects_underdetermined() {
        let resid = |_p: &[f64], out: &mut [f64]| out.fill(0.0);
        assert!(minimize(&resid, 1, &[1.0, 2.0], &[(0.0, 1.0); 2], &LmOptions::default()).is_err());
    }

    #[test]
    fn flat_direction_detected() {
        // residuals depend only on p0+p1: degenerate direction
        let resid = |p: &[f64], out: &mut [f64]| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (p[0] + p[1]) * (i as f64 + 1.0) - 3.0;
            }
        };
        let (_, warnings) = confidence_and_curvature(
            &resid,
            5,
            &[1.0, 2.0],
            &[(0.0, 10.0); 2],
            0.1,
            &["a", "b"],
        );
        assert!(!warnings.is_empty());
    }
}
