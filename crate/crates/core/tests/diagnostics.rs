use dhankel_core::diag::{incoherence, shape_factor};
use dhankel_core::hankel::Level;
use dhankel_core::model::{random_params, AmpLaw, Separation};
use dhankel_core::{LevelShape, SpectralParams};
use num_complex::Complex64;

#[test]
fn double_gram_bound_holds_on_random_instances() {
    for seed in 0..500u64 {
        let k = 1 + (seed % 6) as usize;
        let n = 12 + (seed % 20) as usize;
        let rows = n / 2 + (seed % 3) as usize;
        let p = random_params(k, 1, Separation::NONE, AmpLaw::HalfPlusNormal, seed).unwrap();
        let r = incoherence(&p, &LevelShape::one_d(n, rows).unwrap()).unwrap();
        assert!(r.lambda_min_g2 >= r.lambda_min_g2_single - 1e-10, "seed {seed}");
        assert!(r.mu1 > 0.0);
    }
}

#[test]
fn single_component_has_unit_incoherence() {
    for (f, s) in [(0.0, Complex64::new(1.0, 0.0)), (0.73, Complex64::new(-0.2, 3.0))] {
        let p = SpectralParams::on_circle(1, vec![f], vec![s]).unwrap();
        let r = incoherence(&p, &LevelShape::recommended(&[65]).unwrap()).unwrap();
        assert!((r.mu1 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn incoherence_ignores_common_amplitude_scale() {
    let shape = LevelShape::recommended(&[40]).unwrap();
    for seed in 0..20u64 {
        let p = random_params(4, 1, Separation::NONE, AmpLaw::HalfPlusNormal, seed).unwrap();
        let scale = Complex64::from_polar(2.5, 1.1);
        let q = SpectralParams::on_circle(1, p.freqs().to_vec(), p.amps().iter().map(|s| s * scale).collect()).unwrap();
        let (a, b) = (incoherence(&p, &shape).unwrap(), incoherence(&q, &shape).unwrap());
        assert!((a.mu1 - b.mu1).abs() < 1e-9 * a.mu1);
    }
}

#[test]
fn shape_factor_minimised_inside_window() {
    for n in 2..=100usize {
        let cs = |rows: usize| shape_factor(&LevelShape::one_d(n, rows).unwrap());
        let best = (1..=n).map(cs).fold(f64::INFINITY, f64::min);
        let lo = n.div_ceil(2);
        let hi = (2 * n).div_ceil(3);
        let window = (lo..=hi).map(cs).fold(f64::INFINITY, f64::min);
        assert!((window - best).abs() < 1e-12, "N={n}");
    }
}

#[test]
fn shape_factor_reference_values() {
    assert!((shape_factor(&LevelShape::one_d(65, 33).unwrap()) - 65.0 / 33.0).abs() < 1e-12);
    assert!((shape_factor(&LevelShape::one_d(9, 7).unwrap()) - 1.5).abs() < 1e-12);
    let two = LevelShape::new(vec![Level::new(11, 6).unwrap(), Level::new(11, 6).unwrap()]).unwrap();
    assert!((shape_factor(&two) - 121.0 / 36.0).abs() < 1e-12);
}
