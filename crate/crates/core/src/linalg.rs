//! Dense complex linear algebra on top of nalgebra: truncated SVDs,
//! singular-value shrinkage, numeric rank and a Schur-based eigensolver.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::math;

pub type CMatrix = DMatrix<Complex64>;

/// Thin SVD with singular values in descending order.
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v_t: CMatrix,
}

/// Backward-error budget of the fast path, relative to `‖m‖_F`.
const SVD_CHECK: f64 = 1e-11;

/// Thin SVD. nalgebra's bidiagonal QR is tried first; its result is
/// accepted only if it reconstructs `m`, otherwise a one-sided Jacobi SVD is
/// used (the QR path loses accuracy on some clustered spectra).
pub fn svd(m: &CMatrix) -> Svd {
    let s = m.clone().svd(true, true);
    let fast = sorted(Svd {
        u: s.u.expect("u requested"),
        singular_values: s.singular_values.iter().copied().collect(),
        v_t: s.v_t.expect("v_t requested"),
    });
    let scale = m.norm();
    if (reconstruct(&fast, &fast.singular_values) - m).norm() <= SVD_CHECK * scale.max(f64::MIN_POSITIVE) {
        return fast;
    }
    jacobi_svd(m)
}

fn sorted(s: Svd) -> Svd {
    let sv = &s.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(core::cmp::Ordering::Equal));
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return s;
    }
    let u = CMatrix::from_fn(s.u.nrows(), order.len(), |i, k| s.u[(i, order[k])]);
    let v_t = CMatrix::from_fn(order.len(), s.v_t.ncols(), |k, j| s.v_t[(order[k], j)]);
    let singular_values = order.iter().map(|&o| sv[o]).collect();
    Svd { u, singular_values, v_t }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn jacobi_svd(m: &CMatrix) -> Svd {
    if m.ncols() > m.nrows() {
        let t = jacobi_svd(&m.adjoint());
        return Svd { u: t.v_t.adjoint(), singular_values: t.singular_values, v_t: t.u.adjoint() };
    }
    let (rows, n) = m.shape();
    let mut w = m.clone();
    let mut v = CMatrix::identity(n, n);
    let tol = f64::EPSILON * rows as f64;
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= tol * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (math::abs(zeta) + math::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s, phase);
                rotate_pair(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    let singular_values: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut u = CMatrix::zeros(rows, n);
    for j in 0..n {
        if singular_values[j] > 0.0 {
            u.set_column(j, &(w.column(j) / Complex64::new(singular_values[j], 0.0)));
        }
    }
    complete_orthonormal(&mut u, &singular_values);
    sorted(Svd { u, singular_values, v_t: v.adjoint() })
}

/// `x_p ← c x_p − s conj(φ) x_q`, `x_q ← s φ x_p + c x_q` on columns `p`, `q`.
fn rotate_pair(x: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    for i in 0..x.nrows() {
        let (a, b) = (x[(i, p)], x[(i, q)]);
        x[(i, p)] = a * c - b * phase.conj() * s;
        x[(i, q)] = a * phase * s + b * c;
    }
}

/// Fills the columns of zero singular values with unit vectors orthogonal to
/// the rest.
fn complete_orthonormal(u: &mut CMatrix, sv: &[f64]) {
    let rows = u.nrows();
    for j in (0..sv.len()).filter(|&j| sv[j] == 0.0) {
        for e in 0..rows {
            let mut cand = nalgebra::DVector::<Complex64>::zeros(rows);
            cand[e] = Complex64::new(1.0, 0.0);
            for _ in 0..2 {
                for k in 0..u.ncols() {
                    if k != j && (sv[k] > 0.0 || k < j) {
                        let proj = u.column(k).dotc(&cand);
                        cand -= u.column(k) * proj;
                    }
                }
            }
            let nrm = cand.norm();
            if nrm > 0.5 {
                u.set_column(j, &(cand / Complex64::new(nrm, 0.0)));
                break;
            }
        }
    }
}

fn reconstruct(s: &Svd, weights: &[f64]) -> CMatrix {
    let (m, n) = (s.u.nrows(), s.v_t.ncols());
    let mut out = CMatrix::zeros(m, n);
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let uk = s.u.column(k) * Complex64::new(w, 0.0);
        out.ger(Complex64::new(1.0, 0.0), &uk, &s.v_t.row(k).transpose(), Complex64::new(1.0, 0.0));
    }
    out
}

/// Best rank-`k` approximation (keeps the first `k` triplets in SVD order).
pub fn hard_threshold(m: &CMatrix, k: usize) -> CMatrix {
    if k == 0 {
        return CMatrix::zeros(m.nrows(), m.ncols());
    }
    let s = svd(m);
    if k >= s.singular_values.len() {
        return m.clone();
    }
    let w: Vec<f64> = s.singular_values.iter().take(k).copied().collect();
    reconstruct(&s, &w)
}

/// Singular-value soft thresholding at `tau`.
pub struct Shrunk {
    pub matrix: CMatrix,
    /// Nuclear norm of the shrunk matrix.
    pub nuclear_norm: f64,
    pub rank: usize,
}

pub fn singular_value_shrink(m: &CMatrix, tau: f64) -> Shrunk {
    let s = svd(m);
    let w: Vec<f64> = s.singular_values.iter().map(|&v| (v - tau).max(0.0)).collect();
    let rank = w.iter().filter(|&&v| v > 0.0).count();
    Shrunk { matrix: reconstruct(&s, &w), nuclear_norm: w.iter().sum(), rank }
}

pub fn nuclear_norm(m: &CMatrix) -> f64 {
    svd(m).singular_values.iter().sum()
}

/// Rank estimate plus the full singular-value profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RankProfile {
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

/// `#{k : σ_k / σ_1 ≥ tol}`; the zero matrix has rank 0.
pub fn numeric_rank(m: &CMatrix, tol: f64) -> RankProfile {
    let sv = svd(m).singular_values;
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = if top == 0.0 { 0 } else { sv.iter().filter(|&&s| s / top >= tol).count() };
    RankProfile { rank, singular_values: sv }
}

/// Least-squares solution of `a x = b` through the SVD pseudo-inverse.
pub fn lstsq(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != b.nrows() {
        return Err(invalid!("least squares: {} equations but {} right-hand rows", a.nrows(), b.nrows()));
    }
    let s = svd(a);
    let top = s.singular_values.first().copied().unwrap_or(0.0);
    let eps = top * 1e-14 * (a.nrows().max(a.ncols()) as f64);
    let mut x = s.u.adjoint() * b;
    for (k, &sv) in s.singular_values.iter().enumerate() {
        let inv = if sv > eps { 1.0 / sv } else { 0.0 };
        x.row_mut(k).scale_mut(inv);
    }
    Ok(s.v_t.adjoint() * x)
}

/// Eigen-decomposition `m = T Λ T⁻¹` of a general complex matrix.
pub struct Eigen {
    pub values: Vec<Complex64>,
    /// Unit-norm eigenvectors stored as columns.
    pub vectors: CMatrix,
}

/// Eigenvalues from the complex Schur form `m = Q T Qᴴ`; eigenvectors by back
/// substitution on the triangular factor.
pub fn eigen(m: &CMatrix) -> Result<Eigen> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(invalid!("eigen-decomposition needs a square matrix"));
    }
    let (q, t) = m.clone().schur().unpack();
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = t.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tiny = scale * f64::EPSILON;
    let mut x = CMatrix::zeros(n, n);
    for i in 0..n {
        x[(i, i)] = Complex64::new(1.0, 0.0);
        for j in (0..i).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in j + 1..=i {
                acc += t[(j, k)] * x[(k, i)];
            }
            let mut d = t[(j, j)] - values[i];
            if d.norm() < tiny {
                d = Complex64::new(tiny, 0.0);
            }
            x[(j, i)] = -acc / d;
        }
    }
    let mut vectors = q * x;
    for mut col in vectors.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col.unscale_mut(nrm);
        }
    }
    Ok(Eigen { values, vectors })
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    m.clone()
        .try_inverse()
        .ok_or(Error::Degenerate { rank: m.rank(1e-12), requested: m.nrows() })
}

/// Smallest eigenvalue of a Hermitian matrix. The eigen-decomposition is
/// checked against `m`; on failure the value is read from the SVD of the
/// positive definite shift `m + ‖m‖_F I`.
pub fn hermitian_min_eigenvalue(m: &CMatrix) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let scale = herm.norm();
    let e = herm.clone().symmetric_eigen();
    let lambda = CMatrix::from_diagonal(&e.eigenvalues.map(|v| Complex64::new(v, 0.0)));
    let resid = (&herm * &e.eigenvectors - &e.eigenvectors * lambda).norm();
    if resid <= SVD_CHECK * scale.max(f64::MIN_POSITIVE) {
        return e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    }
    let n = herm.nrows();
    let shifted = herm + CMatrix::identity(n, n) * Complex64::new(scale, 0.0);
    jacobi_svd(&shifted).singular_values.last().copied().unwrap_or(0.0) - scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMatrix {
        CMatrix::from_fn(m, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_fn(v.len(), v.len(), |i, j| {
            Complex64::new(if i == j { v[i] } else { 0.0 }, 0.0)
        })
    }

    #[test]
    fn hard_threshold_zero_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng, 4, 5);
        assert_eq!(hard_threshold(&m, 0), CMatrix::zeros(4, 5));
    }

    #[test]
    fn hard_threshold_diagonal() {
        let out = hard_threshold(&diag(&[3.0, 2.0, 1.0]), 2);
        assert!((out - diag(&[3.0, 2.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn hard_threshold_keeps_full_rank_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_matrix(&mut rng, 3, 6);
        assert_eq!(hard_threshold(&m, 3), m);
    }

    #[test]
    fn hard_threshold_residual_is_tail_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 10, 10);
        let sv = svd(&m).singular_values;
        let tail: f64 = sv[4..].iter().map(|s| s * s).sum();
        let resid = (&m - hard_threshold(&m, 4)).norm_squared();
        assert!((resid - tail).abs() / tail < 1e-10);
    }

    #[test]
    fn singular_values_descend() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sv = svd(&random_matrix(&mut rng, 7, 12)).singular_values;
        assert!(sv.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numeric_rank(&CMatrix::zeros(3, 3), 1e-10).rank, 0);
        assert_eq!(numeric_rank(&diag(&[1.0, 1e-14]), 1e-10).rank, 1);
    }

    #[test]
    fn shrink_reduces_each_singular_value() {
        let s = singular_value_shrink(&diag(&[3.0, 2.0, 0.5]), 1.0);
        assert_eq!(s.rank, 2);
        assert!((s.nuclear_norm - 3.0).abs() < 1e-12);
        assert!((s.matrix - diag(&[2.0, 1.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 6, 6);
        let e = eigen(&m).unwrap();
        for (k, lambda) in e.values.iter().enumerate() {
            let v = e.vectors.column(k);
            assert!((&m * v - v * *lambda).norm() < 1e-12);
        }
    }

    fn check_svd(m: &CMatrix, s: &Svd) {
        let k = s.singular_values.len();
        assert_eq!(k, m.nrows().min(m.ncols()));
        assert!((reconstruct(s, &s.singular_values) - m).norm() < 1e-12 * m.norm().max(1.0));
        assert!((s.u.adjoint() * &s.u - CMatrix::identity(k, k)).norm() < 1e-12);
        assert!((&s.v_t * s.v_t.adjoint() - CMatrix::identity(k, k)).norm() < 1e-12);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn jacobi_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (r, c) in [(6, 4), (4, 9), (7, 7), (1, 5)] {
            let m = random_matrix(&mut rng, r, c);
            check_svd(&m, &jacobi_svd(&m));
        }
    }

    #[test]
    fn jacobi_handles_rank_deficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 6, 2);
        let b = random_matrix(&mut rng, 2, 5);
        let m = &a * &b;
        let s = jacobi_svd(&m);
        check_svd(&m, &s);
        assert!(s.singular_values[2] < 1e-14 * s.singular_values[0]);
        check_svd(&CMatrix::zeros(3, 4), &jacobi_svd(&CMatrix::zeros(3, 4)));
    }

    #[test]
    fn clustered_spectrum_reconstructs() {
        // orthonormal columns with one row removed: all but one singular value equal 1
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let q = random_matrix(&mut rng, 9, 8).qr().q();
            let m = q.rows(0, 8).into_owned();
            check_svd(&m, &svd(&m));
        }
    }

    #[test]
    fn hermitian_min_eigenvalue_of_known_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let q = random_matrix(&mut rng, 5, 5).qr().q();
        let d = diag(&[-0.5, 1.0, 1.0, 1.0, 2.0]);
        let m = &q * d * q.adjoint();
        assert!((hermitian_min_eigenvalue(&m) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn lstsq_consistent_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_matrix(&mut rng, 8, 3);
        let x = random_matrix(&mut rng, 3, 1);
        let b = &a * &x;
        assert!((lstsq(&a, &b).unwrap() - x).norm() < 1e-12);
    }
}
