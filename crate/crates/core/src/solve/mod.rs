//! Signal recovery with the single- or double-Hankel model.
//!
//! [`iht`] is the nonconvex rank-`K` projection scheme for fully sampled data;
//! [`demac`] solves the nuclear-norm programs (exact, bounded-noise and
//! sparse-noise variants) by ADMM.

mod admm;
mod iht;

use alloc::vec::Vec;

pub use crate::linalg::hard_threshold;
pub use admm::{auto_lambda, demac, Mode};
pub use iht::iht;

use crate::error::{invalid, Result};
use crate::hankel::{LevelShape, Model};
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub model: Model,
    pub shape: LevelShape,
    pub max_iters: usize,
    /// Relative stopping tolerance.
    pub tol_rel: f64,
    /// ADMM penalty; `None` picks `1/√N`.
    pub rho: Option<f64>,
    pub adaptive_rho: bool,
    pub seed: u64,
}

impl SolveOptions {
    /// 3000 iterations, relative change below `1e-5`.
    pub fn iht(model: Model, shape: LevelShape) -> Self {
        Self { model, shape, max_iters: 3000, tol_rel: 1e-5, rho: None, adaptive_rho: false, seed: 0 }
    }

    /// 5000 iterations, primal/dual residuals below `1e-8`, adaptive `ρ`.
    pub fn admm(model: Model, shape: LevelShape) -> Self {
        Self { model, shape, max_iters: 5000, tol_rel: 1e-8, rho: None, adaptive_rho: true, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0) {
            return Err(invalid!("tol_rel must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid!("max_iters must be at least 1"));
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(invalid!("rho must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub y_hat: Signal,
    pub iters: usize,
    pub converged: bool,
    /// One entry per iteration: LS loss for IHT, objective value for ADMM.
    pub objective_trace: Vec<f64>,
    /// ADMM relative primal residuals (empty for IHT).
    pub primal_residuals: Vec<f64>,
    /// ADMM relative dual residuals (empty for IHT).
    pub dual_residuals: Vec<f64>,
    /// Recovered sparse corruption (robust mode only), zero off the samples.
    pub e_hat: Option<Signal>,
}
