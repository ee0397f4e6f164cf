use dhankel_core::hankel::{
    antidiag_weights, conj_backward, double_hankel, double_hankel_pinv, level_hankel, level_hankel_pinv,
    reversal_matrix, Level, Side,
};
use dhankel_core::linalg::{numeric_rank, CMatrix};
use dhankel_core::model::{random_params, synthesize, AmpLaw, Separation};
use dhankel_core::{LevelShape, Model, Signal, SpectralParams};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_signal(rng: &mut ChaCha8Rng, dims: &[usize]) -> Signal {
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    Signal::new(dims.to_vec(), data).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(r, cols, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn random_shape(rng: &mut ChaCha8Rng, d: usize, max_n: usize) -> LevelShape {
    let levels = (0..d)
        .map(|_| {
            let n = rng.random_range(1..=max_n);
            Level::new(n, rng.random_range(1..=n)).unwrap()
        })
        .collect();
    LevelShape::new(levels).unwrap()
}

/// Dense real-linear least squares: unknowns `[Re y; Im y]`, residual stacked
/// as `[Re vec(F y − G); Im vec(F y − G)]`, solved by SVD.
fn dense_ls_oracle(model: Model, g: &CMatrix, shape: &LevelShape) -> Vec<Complex64> {
    let n = shape.len();
    let dims = shape.dims();
    let m = g.len();
    let mut a = DMatrix::<f64>::zeros(2 * m, 2 * n);
    for col in 0..2 * n {
        let mut e = vec![c(0.0, 0.0); n];
        e[col % n] = if col < n { c(1.0, 0.0) } else { c(0.0, 1.0) };
        let img = model.forward(&Signal::new(dims.clone(), e).unwrap(), shape).unwrap();
        for (i, v) in img.iter().enumerate() {
            a[(i, col)] = v.re;
            a[(m + i, col)] = v.im;
        }
    }
    let b = DVector::from_iterator(2 * m, g.iter().map(|v| v.re).chain(g.iter().map(|v| v.im)));
    let x = a.svd(true, true).solve(&b, 1e-12).unwrap();
    (0..n).map(|i| c(x[i], x[n + i])).collect()
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

#[test]
fn double_pinv_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let d = rng.random_range(1..=2);
        let shape = random_shape(&mut rng, d, if d == 1 { 8 } else { 3 });
        let g = random_matrix(&mut rng, shape.rows(), 2 * shape.cols());
        let fast = double_hankel_pinv(&g, &shape).unwrap();
        let slow = dense_ls_oracle(Model::Double, &g, &shape);
        assert!(rel_err(fast.as_slice(), &slow) < 1e-12, "{shape:?}");
    }
}

#[test]
fn single_pinv_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let d = rng.random_range(1..=2);
        let shape = random_shape(&mut rng, d, if d == 1 { 8 } else { 3 });
        let g = random_matrix(&mut rng, shape.rows(), shape.cols());
        let fast = level_hankel_pinv(&g, &shape).unwrap();
        let slow = dense_ls_oracle(Model::Single, &g, &shape);
        assert!(rel_err(fast.as_slice(), &slow) < 1e-12, "{shape:?}");
    }
}

#[test]
fn backward_identity_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..100 {
        let d = 1 + trial % 2;
        let shape = random_shape(&mut rng, d, if d == 1 { 12 } else { 6 });
        let y = random_signal(&mut rng, &shape.dims());
        let h = level_hankel(&y, &shape).unwrap();
        let j1 = reversal_matrix(&shape, Side::Rows);
        let j2 = reversal_matrix(&shape, Side::Cols);
        let lhs = level_hankel(&conj_backward(&y), &shape).unwrap();
        assert_eq!(lhs, &j1 * h.map(|v| v.conj()) * &j2);
        let dh = double_hankel(&y, &shape).unwrap();
        assert_eq!(dh.forward_block(), h);
        assert_eq!(dh.backward_block(), lhs);
    }
}

#[test]
fn reversal_matrix_is_linear_reversal() {
    let shape = LevelShape::new(vec![Level::new(5, 3).unwrap(), Level::new(4, 2).unwrap()]).unwrap();
    let j = reversal_matrix(&shape, Side::Rows);
    let r = shape.rows();
    for a in 0..r {
        for b in 0..r {
            let expect = if a + b == r - 1 { 1.0 } else { 0.0 };
            assert_eq!(j[(a, b)], c(expect, 0.0));
        }
    }
}

#[test]
fn conj_backward_is_an_involution() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for dims in [vec![7usize], vec![3, 4], vec![2, 3, 2]] {
        let y = random_signal(&mut rng, &dims);
        assert_eq!(conj_backward(&conj_backward(&y)), y);
    }
}

/// `[H y | J₁ conj(H y) J₂] = A₁ S [A₂ᵀ | S̃ Z^{1−N} A₂ᵀ]` from the poles
/// directly, with `S̃ = conj(S) S⁻¹` absorbed as `conj(s_k)`.
fn vandermonde_factor_oracle(p: &SpectralParams, shape: &LevelShape) -> CMatrix {
    let k = p.order();
    let d = p.dim();
    let vander = |sizes: &[usize]| {
        let rows: usize = sizes.iter().product();
        CMatrix::from_fn(rows, k, |r, kk| {
            let mut rem = r;
            let mut acc = c(1.0, 0.0);
            for j in (0..d).rev() {
                let idx = rem % sizes[j];
                rem /= sizes[j];
                acc *= p.pole(kk, j).powu(idx as u32);
            }
            acc
        })
    };
    let rows: Vec<usize> = shape.levels().iter().map(|l| l.rows).collect();
    let cols: Vec<usize> = shape.levels().iter().map(|l| l.cols).collect();
    let a1 = vander(&rows);
    let a2 = vander(&cols);
    let s = CMatrix::from_diagonal(&DVector::from_vec(p.amps().to_vec()));
    let back = CMatrix::from_diagonal(&DVector::from_iterator(
        k,
        (0..k).map(|kk| {
            let zpow = shape
                .levels()
                .iter()
                .enumerate()
                .fold(c(1.0, 0.0), |acc, (j, l)| acc * p.pole(kk, j).powi(1 - l.n as i32));
            p.amps()[kk].conj() * zpow
        }),
    ));
    let mut out = CMatrix::zeros(shape.rows(), 2 * shape.cols());
    out.columns_mut(0, shape.cols()).copy_from(&(&a1 * s * a2.transpose()));
    out.columns_mut(shape.cols(), shape.cols()).copy_from(&(&a1 * back * a2.transpose()));
    out
}

#[test]
fn double_hankel_matches_vandermonde_factorization() {
    for seed in 0..20u64 {
        let d = 1 + (seed % 2) as usize;
        let dims: Vec<usize> = if d == 1 { vec![17] } else { vec![7, 6] };
        let shape = LevelShape::recommended(&dims).unwrap();
        let p = random_params(3, d, Separation::NONE, AmpLaw::HalfPlusNormal, seed).unwrap();
        let got = double_hankel(&synthesize(&p, &dims).unwrap(), &shape).unwrap().matrix;
        let want = vandermonde_factor_oracle(&p, &shape);
        assert!((got - &want).norm() < 1e-12 * want.norm());
    }
}

#[test]
fn single_on_circle_pole_has_rank_one() {
    let p = SpectralParams::on_circle(1, vec![0.3], vec![c(1.0, 0.0)]).unwrap();
    let shape = LevelShape::one_d(9, 5).unwrap();
    let m = double_hankel(&synthesize(&p, &[9]).unwrap(), &shape).unwrap().matrix;
    assert_eq!(m.shape(), (5, 10));
    let prof = numeric_rank(&m, 1e-12);
    assert_eq!(prof.rank, 1);
    assert!(prof.singular_values[1] / prof.singular_values[0] < 1e-12);
}

#[test]
fn conjugate_reciprocal_pair_has_rank_two() {
    let z = Complex64::from_polar(1.02, std::f64::consts::TAU * 0.3);
    let z_star = c(1.0, 0.0) / z.conj();
    let p = SpectralParams::from_poles(1, &[z, z_star], vec![c(1.0, 0.5), c(-0.3, 0.8)]).unwrap();
    let y = synthesize(&p, &[9]).unwrap();
    let shape = LevelShape::one_d(9, 5).unwrap();
    assert_eq!(numeric_rank(&level_hankel(&y, &shape).unwrap(), 1e-10).rank, 2);
    assert_eq!(numeric_rank(&double_hankel(&y, &shape).unwrap().matrix, 1e-10).rank, 2);
}

#[test]
fn single_damped_pole_separates_the_models() {
    let z = Complex64::from_polar(1.1, std::f64::consts::TAU * 0.3);
    let p = SpectralParams::from_poles(1, &[z], vec![c(1.0, 0.0)]).unwrap();
    let y = synthesize(&p, &[9]).unwrap();
    let shape = LevelShape::one_d(9, 5).unwrap();
    assert_eq!(numeric_rank(&level_hankel(&y, &shape).unwrap(), 1e-10).rank, 1);
    assert_eq!(numeric_rank(&double_hankel(&y, &shape).unwrap().matrix, 1e-10).rank, 2);
}

#[test]
fn leading_impulse_is_expelled_from_the_double_model() {
    let mut data = vec![c(0.0, 0.0); 9];
    data[0] = c(2.0, -1.0);
    let y = Signal::from_vec(data).unwrap();
    let shape = LevelShape::one_d(9, 5).unwrap();
    assert_eq!(numeric_rank(&level_hankel(&y, &shape).unwrap(), 1e-10).rank, 1);
    assert_eq!(numeric_rank(&double_hankel(&y, &shape).unwrap().matrix, 1e-10).rank, 2);
}

#[test]
fn rank_certificate_on_random_instances() {
    let shape = LevelShape::recommended(&[65]).unwrap();
    for seed in 0..200u64 {
        let k = 1 + (seed % 10) as usize;
        let p = random_params(k, 1, Separation::NONE, AmpLaw::HalfPlusNormal, seed).unwrap();
        let m = double_hankel(&synthesize(&p, &[65]).unwrap(), &shape).unwrap().matrix;
        let sv = numeric_rank(&m, 1e-10).singular_values;
        assert!(sv[k] / sv[0] < 1e-10, "seed {seed}: {}", sv[k] / sv[0]);
    }
}

#[test]
fn forward_after_pinv_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for model in [Model::Single, Model::Double] {
        for d in 1..=2 {
            let shape = random_shape(&mut rng, d, if d == 1 { 12 } else { 5 });
            let (r, cols) = model.matrix_shape(&shape);
            let g = random_matrix(&mut rng, r, cols);
            let p1 = model.forward(&model.pinv(&g, &shape).unwrap(), &shape).unwrap();
            let p2 = model.forward(&model.pinv(&p1, &shape).unwrap(), &shape).unwrap();
            assert!((p2 - &p1).norm() < 1e-12 * p1.norm().max(1.0));
        }
    }
}

#[test]
fn weights_are_products_of_level_counts() {
    let shape = LevelShape::new(vec![Level::new(4, 2).unwrap(), Level::new(5, 3).unwrap()]).unwrap();
    let w = antidiag_weights(&shape);
    let a = [1usize, 2, 2, 1];
    let b = [1usize, 2, 3, 2, 1];
    for i in 0..4 {
        for j in 0..5 {
            assert_eq!(w[i * 5 + j], a[i] * b[j]);
        }
    }
}
