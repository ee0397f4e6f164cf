use alloc::vec::Vec;
use num_complex::Complex64;

use super::{SolveOptions, SolveReport};
use crate::error::{invalid, Result};
use crate::linalg::{singular_value_shrink, CMatrix};
use crate::math;
use crate::model::SampleSet;
use crate::signal::Signal;

const RHO_MIN: f64 = 1e-4;
const RHO_MAX: f64 = 1e4;
const RHO_UPDATE_EVERY: usize = 10;

/// Constraint handling for the observed entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// `P_Ω(y) = P_Ω(ỹ)`.
    Exact,
    /// `‖P_Ω(y − ỹ)‖₂ ≤ η`.
    Bounded(f64),
    /// `‖𝓗_D y‖_* + λ‖[𝓗e | …]‖₁` with `P_Ω(y + e) = P_Ω(ỹ)`; `None` picks
    /// `λ = 1/√(M log N)`.
    Robust(Option<f64>),
}

/// `1 / √(M log N)`.
pub fn auto_lambda(observed: usize, len: usize) -> f64 {
    1.0 / math::sqrt(observed as f64 * math::log(len as f64))
}

/// Nuclear-norm recovery by ADMM on the splitting `M = 𝓗_D(y)`.
///
/// Scaled-form iterations:
/// `M ← SVT_{1/ρ}(𝓗_D y − U)`, `y ← argmin_y ‖𝓗_D y − (M + U)‖²` over the
/// mode's feasible set, `U ← U + M − 𝓗_D y`. Since `𝓗_D*𝓗_D` is diagonal
/// the `y`-step is the structured pseudo-inverse followed by a closed-form
/// correction on the observed entries.
pub fn demac(samples: &SampleSet, mode: Mode, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    if samples.is_empty() {
        return Err(invalid!("no observed samples"));
    }
    let shape = &opts.shape;
    if samples.dims() != shape.dims().as_slice() {
        return Err(invalid!(
            "samples are on a {:?} grid, shape expects {:?}",
            samples.dims(),
            shape.dims()
        ));
    }
    let n = shape.len();
    let lambda = match mode {
        Mode::Bounded(eta) if !(eta >= 0.0 && eta.is_finite()) => {
            return Err(invalid!("noise bound must be finite and non-negative, got {eta}"));
        }
        Mode::Robust(Some(l)) if !(l > 0.0 && l.is_finite()) => {
            return Err(invalid!("lambda must be positive, got {l}"));
        }
        Mode::Robust(l) => l.unwrap_or_else(|| auto_lambda(samples.len(), n)),
        _ => 0.0,
    };
    let model = opts.model;
    let weights = model.gram_weights(shape);
    let multiplicity = crate::hankel::antidiag_weights(shape);
    let y_obs = samples.zero_filled();
    let omega = samples.omega();
    let blocks = model.blocks() as f64;

    let mut rho = opts.rho.unwrap_or(1.0 / math::sqrt(n as f64));
    let mut y = y_obs.clone();
    let mut hy = model.forward(&y, shape)?;
    let mut u = CMatrix::zeros(hy.nrows(), hy.ncols());
    let mut objective_trace = Vec::new();
    let mut primal_residuals = Vec::new();
    let mut dual_residuals = Vec::new();
    let mut converged = false;
    let mut iters = 0;

    for it in 1..=opts.max_iters {
        iters = it;
        let shrunk = singular_value_shrink(&(&hy - &u), 1.0 / rho);
        let m = shrunk.matrix;
        let v = model.pinv(&(&m + &u), shape)?;
        let mut y_next = v;
        let penalty = update_observed(
            &mut y_next,
            &y_obs,
            omega,
            &weights,
            &multiplicity,
            mode,
            lambda * blocks,
            rho,
        );
        let hy_next = model.forward(&y_next, shape)?;
        let r = &m - &hy_next;
        u += &r;
        let primal = r.norm();
        let dual = rho * (&hy_next - &hy).norm();
        let rel_primal = primal / m.norm().max(hy_next.norm()).max(f64::MIN_POSITIVE);
        let rel_dual = dual / (rho * u.norm()).max(f64::MIN_POSITIVE);
        objective_trace.push(shrunk.nuclear_norm + penalty);
        primal_residuals.push(rel_primal);
        dual_residuals.push(rel_dual);
        y = y_next;
        hy = hy_next;
        if rel_primal.max(rel_dual) < opts.tol_rel {
            converged = true;
            break;
        }
        if opts.adaptive_rho && it % RHO_UPDATE_EVERY == 0 {
            let scale = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            let next = (rho * scale).clamp(RHO_MIN, RHO_MAX);
            if next != rho {
                u *= Complex64::new(rho / next, 0.0);
                rho = next;
            }
        }
    }

    let e_hat = match mode {
        Mode::Robust(_) => {
            let mut e = Signal::zeros(samples.dims())?;
            for &i in omega {
                e.as_mut_slice()[i] = y_obs.as_slice()[i] - y.as_slice()[i];
            }
            Some(e)
        }
        _ => None,
    };
    Ok(SolveReport {
        y_hat: y,
        iters,
        converged,
        objective_trace,
        primal_residuals,
        dual_residuals,
        e_hat,
    })
}

/// Applies the observed-entry part of the `y`-update in place and returns the
/// sparse penalty value (zero outside robust mode).
#[allow(clippy::too_many_arguments)]
fn update_observed(
    y: &mut Signal,
    y_obs: &Signal,
    omega: &[usize],
    weights: &[f64],
    multiplicity: &[usize],
    mode: Mode,
    lambda: f64,
    rho: f64,
) -> f64 {
    let obs = y_obs.as_slice();
    let ys = y.as_mut_slice();
    match mode {
        Mode::Exact | Mode::Bounded(0.0) => {
            for &i in omega {
                ys[i] = obs[i];
            }
            0.0
        }
        Mode::Bounded(eta) => {
            project_weighted_ball(ys, obs, omega, weights, eta);
            0.0
        }
        Mode::Robust(_) => {
            let mut penalty = 0.0;
            for &i in omega {
                let diff = obs[i] - ys[i];
                let t = lambda * multiplicity[i] as f64 / (rho * weights[i]);
                let mag = diff.norm();
                let e = if mag > t { diff * ((mag - t) / mag) } else { Complex64::new(0.0, 0.0) };
                ys[i] = obs[i] - e;
                penalty += lambda * multiplicity[i] as f64 * e.norm();
            }
            penalty
        }
    }
}

/// `argmin Σ_Ω w_n |y_n − v_n|²` subject to `‖y_Ω − ỹ_Ω‖₂ ≤ η`, in place.
///
/// The KKT conditions give `y_n − ỹ_n = w_n (v_n − ỹ_n) / (w_n + μ)`; `μ ≥ 0`
/// is found by bisection on the monotone residual norm.
fn project_weighted_ball(ys: &mut [Complex64], obs: &[Complex64], omega: &[usize], w: &[f64], eta: f64) {
    let dist = |mu: f64| -> f64 {
        math::sqrt(
            omega
                .iter()
                .map(|&i| {
                    let f = w[i] / (w[i] + mu);
                    f * f * (ys[i] - obs[i]).norm_sqr()
                })
                .sum::<f64>(),
        )
    };
    let d0 = dist(0.0);
    if d0 <= eta {
        return;
    }
    let wmax = omega.iter().map(|&i| w[i]).fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, wmax * d0 / eta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist(mid) > eta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mu = hi;
    for &i in omega {
        let f = w[i] / (w[i] + mu);
        ys[i] = obs[i] + (ys[i] - obs[i]) * f;
    }
    let r = math::sqrt(omega.iter().map(|&i| (ys[i] - obs[i]).norm_sqr()).sum::<f64>());
    if r > eta {
        let s = eta / r;
        for &i in omega {
            ys[i] = obs[i] + (ys[i] - obs[i]) * s;
        }
    }
}
