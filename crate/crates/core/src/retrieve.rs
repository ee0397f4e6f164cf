//! Pole retrieval by SVD + ESPRIT on the structured matrix of a recovered
//! signal, amplitude fitting and estimation metrics.
//!
//! The signal subspace is spanned by the `K` leading left singular vectors
//! `U`. Along dimension `j`, the rows of `U` whose level-`j` index can be
//! shifted by one satisfy `U_down = U_up Ψ_j` with `Ψ_j = T Z_j T⁻¹`; all `Ψ_j`
//! share the basis `T`, which pairs the per-dimension poles.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::hankel::{LevelShape, Model};
use crate::linalg::{self, CMatrix};
use crate::math::{self, wrap_dist};
use crate::model::{pole_frequency, SpectralParams};
use crate::signal::{strides, Signal};

/// Subspaces whose `σ_K / σ_1` falls below this are rejected.
pub const RANK_COLLAPSE: f64 = 1e-12;
/// Level-1 eigenvalues closer than this trigger the joint pairing fallback.
pub const PAIRING_GAP: f64 = 1e-6;
/// Vandermonde condition numbers above this flag the amplitude fit.
pub const ILL_CONDITIONED: f64 = 1e10;
const PAIRING_SEED: u64 = 0x005E_ED0F_E5B1;

/// Estimated poles (row-major `K × d`) and amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleEstimates {
    pub dim: usize,
    pub poles: Vec<Complex64>,
    pub amps: Vec<Complex64>,
    /// Per pole, `Σ_j (|z_{k,j}| − 1)²`.
    pub circle_dist: Vec<f64>,
    /// Condition number of the Vandermonde system used for the amplitudes.
    pub condition: f64,
    pub ill_conditioned: bool,
}

impl PoleEstimates {
    pub fn order(&self) -> usize {
        self.amps.len()
    }

    pub fn pole(&self, k: usize, j: usize) -> Complex64 {
        self.poles[k * self.dim + j]
    }

    /// `arg(ẑ)/2π mod 1`, row-major `K × d`. Magnitudes are not touched.
    pub fn frequencies(&self) -> Vec<f64> {
        self.poles.iter().map(|z| pole_frequency(*z)).collect()
    }
}

struct ShiftRows {
    up: Vec<usize>,
    down: Vec<usize>,
}

fn shift_rows(shape: &LevelShape, j: usize) -> ShiftRows {
    let sizes: Vec<usize> = shape.levels().iter().map(|l| l.rows).collect();
    let st = strides(&sizes);
    let (mut up, mut down) = (Vec::new(), Vec::new());
    for r in 0..shape.rows() {
        if (r / st[j]) % sizes[j] + 1 < sizes[j] {
            up.push(r);
            down.push(r + st[j]);
        }
    }
    ShiftRows { up, down }
}

fn select_rows(u: &CMatrix, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), u.ncols(), |i, k| u[(rows[i], k)])
}

/// ESPRIT on the `model` matrix of `y_hat`; `K` poles per dimension, paired.
pub fn estimate_poles(y_hat: &Signal, k: usize, shape: &LevelShape, model: Model) -> Result<PoleEstimates> {
    let d = shape.ndim();
    if k == 0 {
        return Err(invalid!("model order must be at least 1"));
    }
    let shifts: Vec<ShiftRows> = (0..d).map(|j| shift_rows(shape, j)).collect();
    let (_, cols) = model.matrix_shape(shape);
    let usable = shifts.iter().map(|s| s.up.len()).min().unwrap_or(0).min(cols);
    if k > usable {
        return Err(invalid!("K={k} exceeds the {usable}-dimensional shift-invariant subspace"));
    }
    let m = model.forward(y_hat, shape)?;
    let s = linalg::svd(&m);
    let top = s.singular_values[0];
    if !(top > 0.0) || s.singular_values[k - 1] / top < RANK_COLLAPSE {
        let rank = if top > 0.0 {
            s.singular_values.iter().filter(|&&v| v / top >= RANK_COLLAPSE).count()
        } else {
            0
        };
        return Err(Error::Degenerate { rank, requested: k });
    }
    let u = s.u.columns(0, k).into_owned();
    let psi: Vec<CMatrix> = shifts
        .iter()
        .map(|sh| linalg::lstsq(&select_rows(&u, &sh.up), &select_rows(&u, &sh.down)))
        .collect::<Result<_>>()?;

    let poles = if d == 1 {
        linalg::eigen(&psi[0])?.values
    } else {
        paired_poles(&psi)?
    };
    let fit = fit_amplitudes(y_hat, &poles, d)?;
    let circle_dist = poles
        .chunks(d)
        .map(|p| p.iter().map(|z| (z.norm() - 1.0) * (z.norm() - 1.0)).sum())
        .collect();
    Ok(PoleEstimates {
        dim: d,
        poles,
        amps: fit.amps,
        circle_dist,
        condition: fit.condition,
        ill_conditioned: fit.ill_conditioned,
    })
}

fn min_gap(values: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for a in 0..values.len() {
        for b in a + 1..values.len() {
            gap = gap.min((values[a] - values[b]).norm());
        }
    }
    gap
}

/// Shared eigenbasis of the shift matrices, read back dimension by dimension.
fn paired_poles(psi: &[CMatrix]) -> Result<Vec<Complex64>> {
    let k = psi[0].nrows();
    let mut basis = linalg::eigen(&psi[0])?;
    if min_gap(&basis.values) < PAIRING_GAP {
        let mut rng = ChaCha8Rng::seed_from_u64(PAIRING_SEED);
        let mut mix = psi[0].clone();
        for p in &psi[1..] {
            mix += p * math::unit_phasor(rng.random::<f64>(), 1.0);
        }
        basis = linalg::eigen(&mix)?;
    }
    let t = basis.vectors;
    let t_inv = linalg::inverse(&t)?;
    let d = psi.len();
    let mut poles = vec![Complex64::new(0.0, 0.0); k * d];
    for (j, p) in psi.iter().enumerate() {
        let diag = &t_inv * p * &t;
        for kk in 0..k {
            poles[kk * d + j] = diag[(kk, kk)];
        }
    }
    Ok(poles)
}

/// Least-squares amplitudes for fixed poles.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeFit {
    pub amps: Vec<Complex64>,
    /// `σ_max / σ_min` of the Vandermonde matrix.
    pub condition: f64,
    pub ill_conditioned: bool,
}

/// Vandermonde matrix `V[n, k] = ∏_l z_{k,l}^{j_l(n)}` over the grid of `dims`.
pub fn vandermonde(dims: &[usize], poles: &[Complex64]) -> CMatrix {
    let d = dims.len();
    let k = poles.len() / d;
    let st = strides(dims);
    let n: usize = dims.iter().product();
    let tables: Vec<Vec<Vec<Complex64>>> = (0..k)
        .map(|kk| {
            (0..d)
                .map(|j| {
                    let z = poles[kk * d + j];
                    let mut acc = Complex64::new(1.0, 0.0);
                    (0..dims[j])
                        .map(|_| {
                            let v = acc;
                            acc *= z;
                            v
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    CMatrix::from_fn(n, k, |row, kk| {
        (0..d).fold(Complex64::new(1.0, 0.0), |acc, j| acc * tables[kk][j][(row / st[j]) % dims[j]])
    })
}

pub fn fit_amplitudes(y_hat: &Signal, poles: &[Complex64], dim: usize) -> Result<AmplitudeFit> {
    if dim != y_hat.ndim() || !poles.len().is_multiple_of(dim) {
        return Err(invalid!("poles do not match a {}-D signal", y_hat.ndim()));
    }
    if poles.is_empty() {
        return Ok(AmplitudeFit { amps: Vec::new(), condition: 1.0, ill_conditioned: false });
    }
    let v = vandermonde(y_hat.dims(), poles);
    let sv = v.singular_values();
    let smin = sv.min();
    let condition = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    let rhs = DMatrix::from_column_slice(y_hat.len(), 1, y_hat.as_slice());
    let amps = linalg::lstsq(&v, &rhs)?.column(0).iter().copied().collect();
    Ok(AmplitudeFit { amps, condition, ill_conditioned: condition > ILL_CONDITIONED })
}

/// Mean `| |ẑ| − 1 |` for `d = 1`; `√((1/K) Σ_k Σ_l (|ẑ_{k,l}| − 1)²)` for `d ≥ 2`.
pub fn distance_to_torus(poles: &[Complex64], dim: usize) -> f64 {
    let k = poles.len() / dim.max(1);
    if k == 0 {
        return 0.0;
    }
    if dim == 1 {
        poles.iter().map(|z| math::abs(z.norm() - 1.0)).sum::<f64>() / k as f64
    } else {
        let ss: f64 = poles.iter().map(|z| (z.norm() - 1.0) * (z.norm() - 1.0)).sum();
        math::sqrt(ss / k as f64)
    }
}

/// Brute-force matching is used up to this order; greedy above it.
pub const BRUTE_FORCE_MAX: usize = 8;

/// RMS wrap-around frequency distance under the best matching of estimates
/// to true components.
pub fn freq_error(truth: &SpectralParams, est: &PoleEstimates) -> Result<f64> {
    if truth.order() != est.order() || truth.dim() != est.dim {
        return Err(invalid!(
            "order/dimension mismatch: truth K={} d={}, estimate K={} d={}",
            truth.order(),
            truth.dim(),
            est.order(),
            est.dim
        ));
    }
    Ok(matched_rms(truth.freqs(), &est.frequencies(), truth.dim()))
}

/// Matched RMS distance between two frequency sets (row-major `K × d`).
pub fn matched_rms(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let k = a.len() / dim;
    if k == 0 {
        return 0.0;
    }
    let cost = |i: usize, j: usize| -> f64 {
        (0..dim)
            .map(|l| {
                let w = wrap_dist(a[i * dim + l], b[j * dim + l]);
                w * w
            })
            .sum()
    };
    let best = if k <= BRUTE_FORCE_MAX {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = f64::INFINITY;
        for_each_permutation(&mut perm, &mut |p| {
            let c: f64 = p.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
            best = best.min(c);
        });
        best
    } else {
        let mut used = vec![false; k];
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                pairs.push((cost(i, j), i, j));
            }
        }
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(core::cmp::Ordering::Equal));
        let mut done = vec![false; k];
        let mut total = 0.0;
        for (c, i, j) in pairs {
            if !done[i] && !used[j] {
                done[i] = true;
                used[j] = true;
                total += c;
            }
        }
        total
    };
    math::sqrt(best / k as f64)
}

/// Heap's algorithm.
fn for_each_permutation(items: &mut [usize], visit: &mut dyn FnMut(&[usize])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_params, synthesize, AmpLaw, Separation};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn estimates(poles: Vec<Complex64>, dim: usize) -> PoleEstimates {
        let k = poles.len() / dim;
        PoleEstimates {
            dim,
            circle_dist: vec![0.0; k],
            poles,
            amps: vec![c(1., 0.); k],
            condition: 1.0,
            ill_conditioned: false,
        }
    }

    #[test]
    fn single_pole_exact() {
        let p = SpectralParams::on_circle(1, vec![0.3], vec![c(1., 0.)]).unwrap();
        let y = synthesize(&p, &[9]).unwrap();
        let est = estimate_poles(&y, 1, &LevelShape::recommended(&[9]).unwrap(), Model::Double)
            .unwrap();
        assert!((est.pole(0, 0) - p.pole(0, 0)).norm() < 1e-12);
        assert!((est.amps[0] - c(1., 0.)).norm() < 1e-12);
    }

    #[test]
    fn too_many_poles_rejected() {
        let y = Signal::from_vec(vec![c(1., 0.); 9]).unwrap();
        let shape = LevelShape::one_d(9, 3).unwrap();
        assert!(matches!(estimate_poles(&y, 3, &shape, Model::Double), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rank_collapse_reported() {
        let p = SpectralParams::on_circle(1, vec![0.3], vec![c(1., 0.)]).unwrap();
        let y = synthesize(&p, &[9]).unwrap();
        let r = estimate_poles(&y, 2, &LevelShape::one_d(9, 5).unwrap(), Model::Double);
        assert_eq!(r, Err(Error::Degenerate { rank: 1, requested: 2 }));
    }

    #[test]
    fn two_d_pairing_with_shared_first_frequency() {
        // repeated level-1 frequency forces the joint fallback
        let p = SpectralParams::on_circle(2, vec![0.2, 0.1, 0.2, 0.6, 0.7, 0.35], vec![c(1., 0.), c(0.8, 0.3), c(-0.5, 1.)])
            .unwrap();
        let y = synthesize(&p, &[8, 8]).unwrap();
        let shape = LevelShape::with_fraction(&[8, 8], 0.5).unwrap();
        let est = estimate_poles(&y, 3, &shape, Model::Double).unwrap();
        assert!(matched_rms(p.freqs(), &est.frequencies(), 2) < 1e-9);
    }

    #[test]
    fn amplitudes_of_alternating_signal() {
        let y = Signal::from_vec(vec![c(2., 0.), c(0., 0.), c(2., 0.), c(0., 0.)]).unwrap();
        let fit = fit_amplitudes(&y, &[c(1., 0.), c(-1., 0.)], 1).unwrap();
        assert!((fit.amps[0] - c(1., 0.)).norm() < 1e-14);
        assert!((fit.amps[1] - c(1., 0.)).norm() < 1e-14);
    }

    #[test]
    fn amplitudes_exact_instance() {
        let p = random_params(4, 1, Separation::at_least(0.05), AmpLaw::HalfPlusNormal, 8).unwrap();
        let y = synthesize(&p, &[40]).unwrap();
        let fit = fit_amplitudes(&y, &p.poles(), 1).unwrap();
        for (a, b) in fit.amps.iter().zip(p.amps()) {
            assert!((a - b).norm() < 1e-10);
        }
        assert!(!fit.ill_conditioned);
    }

    #[test]
    fn coincident_poles_flagged() {
        let y = Signal::from_vec(vec![c(1., 0.); 10]).unwrap();
        let z = c(1., 0.);
        let fit = fit_amplitudes(&y, &[z, z * c(1.0, 1e-13)], 1).unwrap();
        assert!(fit.ill_conditioned);
    }

    #[test]
    fn torus_distance_examples() {
        assert_eq!(distance_to_torus(&[c(1., 0.), c(0., 1.)], 1), 0.0);
        let d = distance_to_torus(&[c(1.0002, 0.), c(0., 0.9998)], 1);
        assert!((d - 2e-4).abs() < 1e-15);
        let d = distance_to_torus(&[c(1.01, 0.), c(0., 1.0)], 2);
        assert!((d - 0.01).abs() < 1e-15);
    }

    #[test]
    fn freq_error_examples() {
        let truth = SpectralParams::on_circle(1, vec![0.1, 0.2], vec![c(1., 0.); 2]).unwrap();
        let same = estimates(truth.poles(), 1);
        assert!(freq_error(&truth, &same).unwrap() < 1e-15);
        let swapped = estimates(vec![truth.pole(1, 0), truth.pole(0, 0)], 1);
        assert!(freq_error(&truth, &swapped).unwrap() < 1e-15);

        let truth = SpectralParams::on_circle(1, vec![0.99], vec![c(1., 0.)]).unwrap();
        let est = estimates(vec![crate::math::unit_phasor(0.01, 1.0)], 1);
        assert!((freq_error(&truth, &est).unwrap() - 0.02).abs() < 1e-12);

        let est = estimates(vec![c(1., 0.), c(-1., 0.)], 1);
        assert!(freq_error(&truth, &est).is_err());
    }

    #[test]
    fn greedy_matching_large_order() {
        let a: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
        let mut b = a.clone();
        b.reverse();
        assert!(matched_rms(&a, &b, 1) < 1e-15);
    }
}
