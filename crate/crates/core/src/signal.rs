//! Dense d-way complex arrays stored row-major (last index varies fastest).

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{invalid, Result};

/// A d-way complex array. Entry `(j_1, ..., j_d)` (0-based) lives at the
/// row-major linear offset `Σ j_l · stride_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl Signal {
    pub fn new(dims: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(invalid!("dimensions must be positive, got {:?}", dims));
        }
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(invalid!(
                "dims {:?} hold {} entries but {} were given",
                dims,
                len,
                data.len()
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn from_vec(data: Vec<Complex64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let len = dims.iter().product();
        Self::new(dims.to_vec(), vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Row-major strides of the array.
    pub fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    /// Multi-index of a linear offset.
    pub fn unravel(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for (slot, &n) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = linear % n;
            linear /= n;
        }
        idx
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        crate::math::sqrt(self.norm_sqr())
    }

    /// `‖self − other‖₂²`; both arrays must share dims.
    pub fn dist_sqr(&self, other: &Signal) -> Result<f64> {
        if self.dims != other.dims {
            return Err(invalid!("shape mismatch {:?} vs {:?}", self.dims, other.dims));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum())
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for j in (0..dims.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * dims[j + 1];
    }
    s
}

/// Normalized mean squared error `‖estimate − reference‖² / ‖reference‖²`.
pub fn nmse(estimate: &Signal, reference: &Signal) -> Result<f64> {
    let denom = reference.norm_sqr();
    if denom == 0.0 {
        return Err(invalid!("nmse reference has zero norm"));
    }
    Ok(estimate.dist_sqr(reference)? / denom)
}
