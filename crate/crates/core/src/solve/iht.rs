use alloc::vec::Vec;
use num_complex::Complex64;

use super::{SolveOptions, SolveReport};
use crate::error::{invalid, Result};
use crate::linalg::hard_threshold;
use crate::math;
use crate::model::SampleSet;

/// Iterative hard thresholding on the structured matrix.
///
/// Starting from `y₀ = ỹ`, each iteration takes a gradient step of the LS loss
/// with `α_t = 1/√t`, projects the structured matrix onto rank `K`, and maps
/// back with the structured pseudo-inverse. Stops once
/// `‖y_{t+1} − y_t‖ / ‖y_t‖ < tol_rel`.
pub fn iht(samples: &SampleSet, k: usize, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    if !samples.is_full() {
        return Err(invalid!("IHT needs every grid entry observed"));
    }
    if samples.dims() != opts.shape.dims().as_slice() {
        return Err(invalid!(
            "samples are on a {:?} grid, shape expects {:?}",
            samples.dims(),
            opts.shape.dims()
        ));
    }
    let (rows, cols) = opts.model.matrix_shape(&opts.shape);
    if k == 0 || k >= rows.min(cols) {
        return Err(invalid!("K={k} must lie in [1, {})", rows.min(cols)));
    }
    let y_obs = samples.zero_filled();
    let mut y = y_obs.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for t in 1..=opts.max_iters {
        iters = t;
        let alpha = 1.0 / math::sqrt(t as f64);
        let mut step = y.clone();
        for (s, o) in step.as_mut_slice().iter_mut().zip(y_obs.as_slice()) {
            *s += (o - *s) * Complex64::new(alpha, 0.0);
        }
        let d = opts.model.forward(&step, &opts.shape)?;
        let g = hard_threshold(&d, k);
        let next = opts.model.pinv(&g, &opts.shape)?;
        let change = math::sqrt(next.dist_sqr(&y)?);
        let base = y.norm();
        trace.push(0.5 * next.dist_sqr(&y_obs)?);
        y = next;
        if (base > 0.0 && change / base < opts.tol_rel) || (base == 0.0 && change == 0.0) {
            converged = true;
            break;
        }
    }
    Ok(SolveReport {
        y_hat: y,
        iters,
        converged,
        objective_trace: trace,
        primal_residuals: Vec::new(),
        dual_residuals: Vec::new(),
        e_hat: None,
    })
}
