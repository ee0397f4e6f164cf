//! Incoherence, shape factor and sample-complexity estimates.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::hankel::LevelShape;
use crate::linalg::{self, CMatrix};
pub use crate::linalg::{numeric_rank, RankProfile};
use crate::math;
use crate::model::SpectralParams;

/// Minimum eigenvalues of the normalized Vandermonde Gram matrices and the
/// derived incoherence parameter `μ₁ = 1 / min(λ_min(G₁), λ_min(G₂))`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncoherenceReport {
    pub lambda_min_g1: f64,
    pub lambda_min_g2: f64,
    /// Single-Hankel counterpart `G₂' = conj(A₂ᴴA₂) / N₂`.
    pub lambda_min_g2_single: f64,
    pub mu1: f64,
    pub c_s: f64,
    pub order: usize,
    pub len: usize,
}

impl IncoherenceReport {
    /// `c₁ μ₁ c_s K log⁴ N`: order-wise noiseless sample bound. `c₁` is an
    /// unknown universal constant; 1 is a placeholder.
    pub fn sample_bound_estimate(&self, c1: f64) -> f64 {
        let l = math::log(self.len as f64);
        c1 * self.mu1 * self.c_s * self.order as f64 * l * l * l * l
    }

    /// `c₁ μ₁² c_s² K² log³ N`: order-wise bound under sparse corruption.
    pub fn robust_sample_bound_estimate(&self, c1: f64) -> f64 {
        let l = math::log(self.len as f64);
        let k = self.order as f64;
        c1 * self.mu1 * self.mu1 * self.c_s * self.c_s * k * k * l * l * l
    }
}

/// Khatri-Rao product of per-dimension Vandermonde matrices; `sizes[j]`
/// rows per dimension, row-major over the dimensions.
fn khatri_rao_vandermonde(params: &SpectralParams, sizes: &[usize]) -> CMatrix {
    let d = params.dim();
    let rows: usize = sizes.iter().product();
    let st = crate::signal::strides(sizes);
    CMatrix::from_fn(rows, params.order(), |r, k| {
        (0..d).fold(Complex64::new(1.0, 0.0), |acc, j| {
            let p = (r / st[j]) % sizes[j];
            acc * math::unit_phasor(params.freq(k, j), p as f64)
        })
    })
}

pub fn incoherence(params: &SpectralParams, shape: &LevelShape) -> Result<IncoherenceReport> {
    if !params.is_on_circle() {
        return Err(invalid!("incoherence is defined for undamped poles only"));
    }
    if params.order() == 0 {
        return Err(invalid!("incoherence needs K >= 1"));
    }
    if params.dim() != shape.ndim() {
        return Err(invalid!("params have d={}, shape has d={}", params.dim(), shape.ndim()));
    }
    if params.amps().iter().any(|s| s.norm() == 0.0) {
        return Err(invalid!("zero amplitude has no phase"));
    }
    let row_sizes: Vec<usize> = shape.levels().iter().map(|l| l.rows).collect();
    let col_sizes: Vec<usize> = shape.levels().iter().map(|l| l.cols).collect();
    let a1 = khatri_rao_vandermonde(params, &row_sizes);
    let a2 = khatri_rao_vandermonde(params, &col_sizes);
    let (n1, n2) = (shape.rows() as f64, shape.cols() as f64);
    let k = params.order();

    // column k of A₂ Z^{1−N} S̃: z^{1−N} = ∏_j conj(z_j)^{N_j−1}, S̃ = sgn(s)^{-2}
    let scale: Vec<Complex64> = (0..k)
        .map(|kk| {
            let z = shape.levels().iter().enumerate().fold(Complex64::new(1.0, 0.0), |acc, (j, l)| {
                acc * math::unit_phasor(params.freq(kk, j), (l.n - 1) as f64).conj()
            });
            let sgn = params.amps()[kk] / params.amps()[kk].norm();
            z * (sgn.conj() * sgn.conj())
        })
        .collect();
    let mut a2_tilde = CMatrix::zeros(2 * a2.nrows(), k);
    a2_tilde.rows_mut(0, a2.nrows()).copy_from(&a2);
    for kk in 0..k {
        for r in 0..a2.nrows() {
            a2_tilde[(a2.nrows() + r, kk)] = a2[(r, kk)] * scale[kk];
        }
    }
    let g1 = a1.adjoint() * &a1 / Complex64::new(n1, 0.0);
    let g2 = (a2_tilde.adjoint() * &a2_tilde).map(|v| v.conj()) / Complex64::new(2.0 * n2, 0.0);
    let g2_single = (a2.adjoint() * &a2).map(|v| v.conj()) / Complex64::new(n2, 0.0);
    let lambda_min_g1 = linalg::hermitian_min_eigenvalue(&g1);
    let lambda_min_g2 = linalg::hermitian_min_eigenvalue(&g2);
    let lambda_min_g2_single = linalg::hermitian_min_eigenvalue(&g2_single);
    Ok(IncoherenceReport {
        lambda_min_g1,
        lambda_min_g2,
        lambda_min_g2_single,
        mu1: 1.0 / lambda_min_g1.min(lambda_min_g2),
        c_s: shape_factor(shape),
        order: k,
        len: shape.len(),
    })
}

/// `c_s = max(N / N₁, N / (2 N₂))` with `N₁ = R`, `N₂ = C`.
pub fn shape_factor(shape: &LevelShape) -> f64 {
    let n = shape.len() as f64;
    (n / shape.rows() as f64).max(n / (2.0 * shape.cols() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::{double_hankel, Level};
    use crate::model::{random_params, synthesize, AmpLaw, Separation};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_component_is_perfectly_incoherent() {
        let p = SpectralParams::on_circle(1, vec![0.37], vec![c(-0.3, 2.0)]).unwrap();
        let r = incoherence(&p, &LevelShape::one_d(20, 11).unwrap()).unwrap();
        assert!((r.lambda_min_g1 - 1.0).abs() < 1e-12);
        assert!((r.lambda_min_g2 - 1.0).abs() < 1e-12);
        assert!((r.mu1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn antipodal_columns_are_orthogonal() {
        // brute-force Gram oracle: the off-diagonal is Σ_{n<N₁} (−1)^n / N₁, which
        // vanishes for even N₁ and leaves 1/N₁ for odd N₁.
        for n1 in [4usize, 5, 6, 7, 9] {
            let p = SpectralParams::on_circle(1, vec![0.0, 0.5], vec![c(1., 0.), c(1., 0.)]).unwrap();
            let shape = LevelShape::one_d(2 * n1 - 1, n1).unwrap();
            let r = incoherence(&p, &shape).unwrap();
            let off: f64 = (0..n1).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).sum::<f64>() / n1 as f64;
            let expect = 1.0 - off.abs();
            assert!((r.lambda_min_g1 - expect).abs() < 1e-12, "N1={n1}");
            if n1 % 2 == 0 {
                assert!((r.lambda_min_g1 - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn double_gram_dominates_single() {
        for seed in 0..50 {
            let p = random_params(4, 1, Separation::NONE, AmpLaw::HalfPlusNormal, seed).unwrap();
            let r = incoherence(&p, &LevelShape::one_d(21, 12).unwrap()).unwrap();
            assert!(r.lambda_min_g2 >= r.lambda_min_g2_single - 1e-10);
        }
    }

    #[test]
    fn zero_amplitude_rejected() {
        let p = SpectralParams::on_circle(1, vec![0.1], vec![c(0., 0.)]).unwrap();
        assert!(incoherence(&p, &LevelShape::one_d(9, 5).unwrap()).is_err());
    }

    #[test]
    fn shape_factor_examples() {
        let cs = shape_factor(&LevelShape::one_d(65, 33).unwrap());
        assert!((cs - 65.0 / 33.0).abs() < 1e-12);
        assert!(shape_factor(&LevelShape::one_d(9, 5).unwrap()) < 2.0);
        assert!((shape_factor(&LevelShape::one_d(9, 7).unwrap()) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn shape_factor_two_level() {
        let s = LevelShape::new(vec![Level::new(11, 6).unwrap(), Level::new(11, 6).unwrap()]).unwrap();
        assert!((shape_factor(&s) - 121.0 / 36.0).abs() < 1e-12);
    }

    #[test]
    fn rank_of_three_component_double_hankel() {
        let p = random_params(3, 1, Separation::at_least(0.05), AmpLaw::HalfPlusNormal, 17).unwrap();
        let shape = LevelShape::one_d(30, 16).unwrap();
        let m = double_hankel(&synthesize(&p, &[30]).unwrap(), &shape).unwrap();
        assert_eq!(numeric_rank(&m.matrix, 1e-10).rank, 3);
    }
}
