//! Ground-truth side of every experiment: spectral parameters, synthesis of
//! sums of d-D complex exponentials, and sampling/corruption.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::math::{self, wrap_dist};
use crate::signal::Signal;

/// Poles `z_{k,j} = r_{k,j} e^{i2π f_{k,j}}` and amplitudes `s_k`.
///
/// Frequencies and magnitudes are stored row-major as `K × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralParams {
    dim: usize,
    freqs: Vec<f64>,
    amps: Vec<Complex64>,
    damping: Vec<f64>,
}

impl SpectralParams {
    pub fn new(dim: usize, freqs: Vec<f64>, amps: Vec<Complex64>, damping: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid!("dimension count must be at least 1"));
        }
        let k = amps.len();
        if freqs.len() != k * dim || damping.len() != k * dim {
            return Err(invalid!(
                "expected {} frequencies and magnitudes for K={k}, d={dim}",
                k * dim
            ));
        }
        if let Some(f) = freqs.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return Err(invalid!("frequency {f} outside [0, 1)"));
        }
        if let Some(r) = damping.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(invalid!("pole magnitude {r} must be positive"));
        }
        let params = Self { dim, freqs, amps, damping };
        for a in 0..k {
            for b in a + 1..k {
                if params.pole_tuple(a) == params.pole_tuple(b) {
                    return Err(invalid!("poles {a} and {b} coincide"));
                }
            }
        }
        Ok(params)
    }

    /// Undamped parameters (every magnitude exactly 1).
    pub fn on_circle(dim: usize, freqs: Vec<f64>, amps: Vec<Complex64>) -> Result<Self> {
        let damping = vec![1.0; freqs.len()];
        Self::new(dim, freqs, amps, damping)
    }

    /// Parameters from explicit poles (row-major `K × d`).
    pub fn from_poles(dim: usize, poles: &[Complex64], amps: Vec<Complex64>) -> Result<Self> {
        let freqs = poles.iter().map(|z| pole_frequency(*z)).collect();
        let damping = poles.iter().map(|z| z.norm()).collect();
        Self::new(dim, freqs, amps, damping)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.amps.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn freq(&self, k: usize, j: usize) -> f64 {
        self.freqs[k * self.dim + j]
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn is_on_circle(&self) -> bool {
        self.damping.iter().all(|&r| r == 1.0)
    }

    pub fn pole(&self, k: usize, j: usize) -> Complex64 {
        let i = k * self.dim + j;
        math::unit_phasor(self.freqs[i], 1.0) * self.damping[i]
    }

    /// All poles, row-major `K × d`.
    pub fn poles(&self) -> Vec<Complex64> {
        (0..self.order())
            .flat_map(|k| (0..self.dim).map(move |j| (k, j)))
            .map(|(k, j)| self.pole(k, j))
            .collect()
    }

    fn pole_tuple(&self, k: usize) -> (&[f64], &[f64]) {
        let r = k * self.dim..(k + 1) * self.dim;
        (&self.freqs[r.clone()], &self.damping[r])
    }

    /// `z^p` for pole `(k, j)`; on-circle poles reduce the phase mod 1 first.
    fn pole_power(&self, k: usize, j: usize, p: usize) -> Complex64 {
        let i = k * self.dim + j;
        let r = self.damping[i];
        let mag = if r == 1.0 { 1.0 } else { math::pow(r, p as f64) };
        math::unit_phasor(self.freqs[i], p as f64) * mag
    }
}

/// `arg(z) / 2π` wrapped into `[0, 1)`.
pub fn pole_frequency(z: Complex64) -> f64 {
    let f = math::atan2(z.im, z.re) / math::TAU;
    let f = f - math::floor(f);
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Evaluates `y[j] = Σ_k s_k ∏_l z_{k,l}^{j_l}` on the grid `dims`.
pub fn synthesize(params: &SpectralParams, dims: &[usize]) -> Result<Signal> {
    if dims.len() != params.dim() {
        return Err(invalid!(
            "params have d={} but {} grid dimensions were given",
            params.dim(),
            dims.len()
        ));
    }
    let mut out = Signal::zeros(dims)?;
    let strides = out.strides();
    for (k, &s) in params.amps().iter().enumerate() {
        // per-dimension power tables
        let tables: Vec<Vec<Complex64>> = dims
            .iter()
            .enumerate()
            .map(|(j, &n)| (0..n).map(|p| params.pole_power(k, j, p)).collect())
            .collect();
        for (lin, slot) in out.as_mut_slice().iter_mut().enumerate() {
            let mut term = s;
            for (j, table) in tables.iter().enumerate() {
                term *= table[(lin / strides[j]) % dims[j]];
            }
            *slot += term;
        }
    }
    Ok(out)
}

/// Distribution of the complex amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmpLaw {
    /// `|s| = 0.5 + |w|` with `w` real standard normal, uniform phase.
    HalfPlusNormal,
    /// `|s| = 1`, uniform phase.
    UnitModulus,
}

/// How frequencies are spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    /// Minimum pairwise wrap-around distance, per dimension. Zero means none.
    pub min_sep: f64,
    /// Place the first two frequencies exactly `min_sep` apart (1-D only).
    pub exact_pair: bool,
}

impl Separation {
    pub const NONE: Separation = Separation { min_sep: 0.0, exact_pair: false };

    pub fn at_least(min_sep: f64) -> Self {
        Self { min_sep, exact_pair: false }
    }

    pub fn exact(min_sep: f64) -> Self {
        Self { min_sep, exact_pair: true }
    }
}

const POINT_RETRIES: usize = 2_000;
const RESTARTS: usize = 200;

/// Random on-circle parameters drawn from `seed`.
pub fn random_params(
    k: usize,
    dim: usize,
    sep: Separation,
    amp_law: AmpLaw,
    seed: u64,
) -> Result<SpectralParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_params_with(k, dim, sep, amp_law, &mut rng)
}

pub fn random_params_with<R: Rng>(
    k: usize,
    dim: usize,
    sep: Separation,
    amp_law: AmpLaw,
    rng: &mut R,
) -> Result<SpectralParams> {
    if dim == 0 {
        return Err(invalid!("dimension count must be at least 1"));
    }
    if !(sep.min_sep >= 0.0 && sep.min_sep <= 0.5) {
        return Err(invalid!("separation {} outside [0, 0.5]", sep.min_sep));
    }
    if sep.exact_pair && dim != 1 {
        return Err(invalid!("exact-pair separation is only defined for d = 1"));
    }
    if k as f64 * sep.min_sep > 1.0 {
        return Err(Error::Generation(alloc::format!(
            "{k} frequencies cannot be {} apart on the unit circle",
            sep.min_sep
        )));
    }
    let freqs = draw_frequencies(k, dim, sep, rng)?;
    let amps = (0..k)
        .map(|_| {
            let mag = match amp_law {
                AmpLaw::HalfPlusNormal => 0.5 + math::abs(rng.sample::<f64, _>(StandardNormal)),
                AmpLaw::UnitModulus => 1.0,
            };
            math::unit_phasor(rng.random::<f64>(), 1.0) * mag
        })
        .collect();
    SpectralParams::on_circle(dim, freqs, amps)
}

fn draw_frequencies<R: Rng>(k: usize, dim: usize, sep: Separation, rng: &mut R) -> Result<Vec<f64>> {
    let exact = sep.exact_pair && sep.min_sep > 0.0 && k >= 2;
    'restart: for _ in 0..RESTARTS {
        let mut freqs: Vec<f64> = Vec::with_capacity(k * dim);
        if exact {
            let f0: f64 = rng.random();
            let mut f1 = f0 + sep.min_sep;
            if f1 >= 1.0 {
                f1 -= 1.0;
            }
            freqs.push(f0);
            freqs.push(f1);
        }
        while freqs.len() < k * dim {
            let placed = freqs.len() / dim;
            let mut accepted = false;
            for _ in 0..POINT_RETRIES {
                let cand: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                let ok = (0..placed).all(|p| {
                    (0..dim).all(|j| wrap_dist(freqs[p * dim + j], cand[j]) >= sep.min_sep)
                }) && (0..placed).all(|p| freqs[p * dim..(p + 1) * dim] != cand[..]);
                if ok {
                    freqs.extend_from_slice(&cand);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                continue 'restart;
            }
        }
        return Ok(freqs);
    }
    Err(Error::Generation(alloc::format!(
        "could not place {k} frequencies with separation {}",
        sep.min_sep
    )))
}

/// Which grid entries are observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    Full,
    /// `M` entries uniformly without replacement.
    Subsample(usize),
}

/// Additive corruption applied to the observed entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    None,
    /// Complex Gaussian rescaled so `10 log10(‖y_Ω‖² / ‖e_Ω‖²)` equals the value.
    SnrDb(f64),
    /// Complex Gaussian rescaled so `‖e_Ω‖₂ = η` exactly.
    L2(f64),
    /// This many observed entries replaced by outliers.
    SparseCount(usize),
    /// Each observed entry is an outlier independently with this probability.
    SparseFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptSpec {
    pub sampling: Sampling,
    pub noise: Noise,
}

impl CorruptSpec {
    pub fn clean(sampling: Sampling) -> Self {
        Self { sampling, noise: Noise::None }
    }
}

/// Record of what was done to the observations.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMeta {
    pub kind: Noise,
    /// `‖P_Ω(e)‖₂` actually added.
    pub realized_l2: f64,
    /// Linear indices of outliers (sparse noise only), increasing.
    pub corrupted: Vec<usize>,
}

/// Observed entries of a d-way grid. Indices are 0-based linear offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dims: Vec<usize>,
    omega: Vec<usize>,
    values: Vec<Complex64>,
    pub noise: Option<NoiseMeta>,
}

impl SampleSet {
    pub fn new(dims: Vec<usize>, omega: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n == 0 {
            return Err(invalid!("grid dimensions must be positive"));
        }
        if omega.len() != values.len() {
            return Err(invalid!("{} indices but {} values", omega.len(), values.len()));
        }
        if omega.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid!("sample indices must be strictly increasing"));
        }
        if omega.last().is_some_and(|&i| i >= n) {
            return Err(invalid!("sample index out of bounds for {n} grid entries"));
        }
        Ok(Self { dims, omega, values, noise: None })
    }

    /// Every entry of `signal` observed.
    pub fn full(signal: &Signal) -> Self {
        Self {
            dims: signal.dims().to_vec(),
            omega: (0..signal.len()).collect(),
            values: signal.as_slice().to_vec(),
            noise: None,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn grid_len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.omega.len() == self.grid_len()
    }

    /// Observations scattered onto the grid, zeros elsewhere.
    pub fn zero_filled(&self) -> Signal {
        let mut out = Signal::zeros(&self.dims).expect("validated dims");
        for (&i, &v) in self.omega.iter().zip(&self.values) {
            out.as_mut_slice()[i] = v;
        }
        out
    }

    /// Boolean mask of observed grid entries.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.grid_len()];
        for &i in &self.omega {
            m[i] = true;
        }
        m
    }
}

fn complex_gaussian<R: Rng>(rng: &mut R, std: f64) -> Complex64 {
    let s = std * core::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s)
}

/// Samples and corrupts `signal` deterministically from `seed`.
pub fn corrupt(signal: &Signal, spec: &CorruptSpec, seed: u64) -> Result<SampleSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    corrupt_with(signal, spec, &mut rng)
}

pub fn corrupt_with<R: Rng>(signal: &Signal, spec: &CorruptSpec, rng: &mut R) -> Result<SampleSet> {
    let n = signal.len();
    let omega = match spec.sampling {
        Sampling::Full => (0..n).collect(),
        Sampling::Subsample(m) if m > n => {
            return Err(invalid!("cannot observe {m} of {n} entries"));
        }
        Sampling::Subsample(m) => {
            let mut idx = index::sample(rng, n, m).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    let clean: Vec<Complex64> = omega.iter().map(|&i| signal.as_slice()[i]).collect();
    let mut values = clean.clone();
    let mut corrupted = Vec::new();
    let observed_energy: f64 = clean.iter().map(|v| v.norm_sqr()).sum();

    let rescaled_gaussian = |rng: &mut R, target: f64| -> Vec<Complex64> {
        let mut e: Vec<Complex64> = (0..clean.len()).map(|_| complex_gaussian(rng, 1.0)).collect();
        let nrm = math::sqrt(e.iter().map(|v| v.norm_sqr()).sum::<f64>());
        let scale = if nrm > 0.0 { target / nrm } else { 0.0 };
        e.iter_mut().for_each(|v| *v *= scale);
        e
    };

    let noise: Vec<Complex64> = match spec.noise {
        Noise::None => vec![Complex64::new(0.0, 0.0); clean.len()],
        Noise::L2(eta) => {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(invalid!("noise budget must be finite and non-negative, got {eta}"));
            }
            rescaled_gaussian(rng, eta)
        }
        Noise::SnrDb(snr) => {
            if snr.is_nan() {
                return Err(invalid!("SNR must be a number"));
            }
            let target = math::sqrt(observed_energy / math::pow(10.0, snr / 10.0));
            rescaled_gaussian(rng, target)
        }
        Noise::SparseCount(_) | Noise::SparseFraction(_) => {
            let positions: Vec<usize> = match spec.noise {
                Noise::SparseCount(c) if c > clean.len() => {
                    return Err(invalid!("cannot corrupt {c} of {} observations", clean.len()));
                }
                Noise::SparseCount(c) => {
                    let mut p = index::sample(rng, clean.len(), c).into_vec();
                    p.sort_unstable();
                    p
                }
                Noise::SparseFraction(tau) => {
                    if !(0.0..=1.0).contains(&tau) {
                        return Err(invalid!("corruption fraction {tau} outside [0, 1]"));
                    }
                    (0..clean.len()).filter(|_| rng.random::<f64>() < tau).collect()
                }
                _ => unreachable!(),
            };
            let rms = math::sqrt(signal.norm_sqr() / n as f64);
            let mut e = vec![Complex64::new(0.0, 0.0); clean.len()];
            for &p in &positions {
                e[p] = complex_gaussian(rng, rms);
                corrupted.push(omega[p]);
            }
            e
        }
    };
    for (v, e) in values.iter_mut().zip(&noise) {
        *v += e;
    }
    let realized_l2 = math::sqrt(noise.iter().map(|v| v.norm_sqr()).sum::<f64>());
    let mut set = SampleSet::new(signal.dims().to_vec(), omega, values)?;
    if spec.noise != Noise::None {
        set.noise = Some(NoiseMeta { kind: spec.noise, realized_l2, corrupted });
    }
    Ok(set)
}

/// Short label for a noise specification.
pub fn noise_label(noise: &Noise) -> String {
    match noise {
        Noise::None => "none".into(),
        Noise::SnrDb(v) => alloc::format!("snr_db={v}"),
        Noise::L2(v) => alloc::format!("eta={v}"),
        Noise::SparseCount(c) => alloc::format!("outliers={c}"),
        Noise::SparseFraction(t) => alloc::format!("tau={t}"),
    }
}
