//! Float helpers that resolve on `no_std` targets.

pub use libm::{atan2, cos, exp, fabs as abs, floor, log, pow, sin, sqrt};

pub(crate) const TAU: f64 = core::f64::consts::TAU;

/// `e^{i2π·f·j}` with the phase reduced mod 1 before scaling.
pub(crate) fn unit_phasor(freq: f64, power: f64) -> num_complex::Complex64 {
    let x = freq * power;
    let theta = TAU * (x - floor(x));
    num_complex::Complex64::new(cos(theta), sin(theta))
}

/// Wrap-around distance on the unit circle `[0, 1)`.
pub fn wrap_dist(a: f64, b: f64) -> f64 {
    let d = abs(a - b);
    let d = d - floor(d);
    if d > 0.5 {
        1.0 - d
    } else {
        d
    }
}
