//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` are comments. Later assignments override earlier
//! ones, so `--set key=value` flags are appended after the file contents.
//! Numeric grids accept comma-separated items; each item is a scalar or an
//! inclusive range `start:stop` / `start:step:stop`, optionally followed by a
//! divisor `/N` (the first grid dimension) or `/<number>`.

use std::collections::BTreeMap;
use std::fmt;

use dhankel_core::{LevelShape, Model};
use dhankel_core::hankel::Level;

use crate::error::{usage, CliError};

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    PhaseTransition,
    ErrorCurve,
    SparseNoisePhase,
    NdCurve,
    CircleHistogram,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::PhaseTransition => "phase_transition",
            Kind::ErrorCurve => "error_curve",
            Kind::SparseNoisePhase => "sparse_noise_phase",
            Kind::NdCurve => "nd_curve",
            Kind::CircleHistogram => "circle_histogram",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "phase_transition" => Kind::PhaseTransition,
            "error_curve" => Kind::ErrorCurve,
            "sparse_noise_phase" => Kind::SparseNoisePhase,
            "nd_curve" => Kind::NdCurve,
            "circle_histogram" => Kind::CircleHistogram,
            _ => return Err(usage!("unknown experiment kind '{s}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Iht,
    Demac,
    NoisyDemac,
    RobustDemac,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Iht => "iht",
            Method::Demac => "demac",
            Method::NoisyDemac => "noisy-demac",
            Method::RobustDemac => "robust-demac",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "iht" => Method::Iht,
            "demac" => Method::Demac,
            "noisy-demac" => Method::NoisyDemac,
            "robust-demac" => Method::RobustDemac,
            _ => return Err(usage!("unknown method '{s}' (iht, demac, noisy-demac, robust-demac)")),
        })
    }
}

pub fn model_name(model: Model) -> &'static str {
    match model {
        Model::Single => "single",
        Model::Double => "double",
    }
}

pub fn parse_model(s: &str) -> Result<Model> {
    match s {
        "single" | "single-hankel" => Ok(Model::Single),
        "double" | "double-hankel" => Ok(Model::Double),
        _ => Err(usage!("unknown model '{s}' (single, double)")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSpec {
    pub method: Method,
    pub model: Model,
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.method.name(), model_name(self.model))
    }
}

/// Observed sample count of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleCount {
    Full,
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationRule {
    /// Every pair at least `Δf` apart.
    AtLeast,
    /// First two frequencies exactly `Δf` apart, the rest at least `Δf`.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub dims: Vec<usize>,
    pub split: f64,
    /// Explicit per-dimension row counts; overrides `split`.
    pub rows: Option<Vec<usize>>,
    pub k: Vec<usize>,
    pub delta_f: Vec<f64>,
    pub m: Vec<SampleCount>,
    pub eta: Vec<f64>,
    /// SNR levels in dB; `None` is noiseless.
    pub snr: Vec<Option<f64>>,
    pub corruptions: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<MethodSpec>,
    pub success_nmse: f64,
    pub circle_tol: f64,
    pub separation: SeparationRule,
    pub iht_max_iters: usize,
    pub iht_tol: f64,
    pub admm_max_iters: usize,
    pub admm_tol: f64,
    /// Stopping tolerance for `noisy-demac`.
    pub noisy_admm_tol: f64,
    pub rho: Option<f64>,
    pub lambda: Lambda,
    pub timing: bool,
}

const KEYS: &[&str] = &[
    "kind",
    "dims",
    "split",
    "rows",
    "k",
    "delta_f",
    "m",
    "eta",
    "snr",
    "corruptions",
    "trials",
    "seed",
    "methods",
    "success_nmse",
    "circle_tol",
    "separation",
    "iht_max_iters",
    "iht_tol",
    "admm_max_iters",
    "admm_tol",
    "noisy_admm_tol",
    "rho",
    "lambda",
    "timing",
];

impl ExperimentConfig {
    /// Defaults for each kind, sized for N = 65.
    pub fn defaults(kind: Kind) -> Self {
        let n = 65usize;
        let nf = n as f64;
        let spec = |method, model| MethodSpec { method, model };
        let mut c = Self {
            kind,
            dims: vec![n],
            split: 0.6,
            rows: None,
            k: vec![3],
            delta_f: vec![0.0],
            m: vec![SampleCount::Count(30)],
            eta: vec![1.0],
            snr: vec![None],
            corruptions: vec![6],
            trials: 20,
            seed: 0,
            methods: vec![spec(Method::Demac, Model::Double)],
            success_nmse: 1e-6,
            circle_tol: 1e-4,
            separation: SeparationRule::AtLeast,
            iht_max_iters: 3000,
            iht_tol: 1e-5,
            admm_max_iters: 5000,
            admm_tol: 1e-8,
            noisy_admm_tol: 1e-6,
            rho: None,
            lambda: Lambda::Auto,
            timing: false,
        };
        match kind {
            Kind::PhaseTransition => {
                c.k = (1..=20).collect();
                c.delta_f = (0..=20).map(|i| i as f64 * 0.1 / nf).collect();
            }
            Kind::ErrorCurve => {
                c.k = vec![2];
                c.rows = Some(vec![33]);
                c.delta_f = (0..10).map(|i| (0.1 + 0.2 * i as f64) / nf).collect();
                c.separation = SeparationRule::Exact;
                c.methods = vec![spec(Method::NoisyDemac, Model::Single), spec(Method::NoisyDemac, Model::Double)];
            }
            Kind::SparseNoisePhase => {
                c.k = vec![2];
                c.delta_f = vec![2.0 / nf];
                c.m = vec![SampleCount::Full];
                c.corruptions = (0..=10).map(|i| 2 * i).collect();
                c.methods = vec![spec(Method::RobustDemac, Model::Single), spec(Method::RobustDemac, Model::Double)];
            }
            Kind::NdCurve => {
                c.dims = vec![11, 11];
                c.rows = Some(vec![6, 6]);
                c.m = (0..=5).map(|i| SampleCount::Count(20 + 20 * i)).collect();
                c.methods = vec![spec(Method::NoisyDemac, Model::Single), spec(Method::NoisyDemac, Model::Double)];
            }
            Kind::CircleHistogram => {
                c.delta_f = vec![0.0, 4.0 / nf];
                c.m = vec![SampleCount::Full];
                c.snr = vec![None, Some(0.0)];
                c.trials = 100;
                c.methods = vec![spec(Method::Iht, Model::Single), spec(Method::Iht, Model::Double)];
            }
        }
        c
    }

    /// Parses configuration text followed by `overrides` (`key=value`).
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_pair(line).ok_or_else(|| usage!("line {}: expected key = value", lineno + 1))?;
            pairs.push((k, v));
        }
        for o in overrides {
            pairs.push(split_pair(o).ok_or_else(|| usage!("override '{o}': expected key=value"))?);
        }
        Self::from_pairs(pairs)
    }

    pub fn from_pairs(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(usage!("unknown config key '{k}'"));
            }
            map.insert(k, v);
        }
        let kind = Kind::parse(map.get("kind").ok_or_else(|| usage!("config needs a 'kind'"))?)?;
        let mut c = Self::defaults(kind);
        if let Some(v) = map.get("dims") {
            c.dims = parse_dims(v)?;
            if !map.contains_key("rows") && c.rows.as_ref().is_some_and(|r| r.len() != c.dims.len()) {
                c.rows = None;
            }
        }
        let n = c.dims[0] as f64;
        for (key, v) in &map {
            let v = v.as_str();
            match key.as_str() {
                "kind" | "dims" => {}
                "split" => c.split = parse_f64(key, v)?,
                "rows" => c.rows = Some(parse_dims(v)?),
                "k" => c.k = parse_usize_grid(key, v, n)?,
                "delta_f" => c.delta_f = parse_grid(key, v, n)?,
                "m" => {
                    c.m = if v == "full" {
                        vec![SampleCount::Full]
                    } else {
                        parse_usize_grid(key, v, n)?.into_iter().map(SampleCount::Count).collect()
                    }
                }
                "eta" => c.eta = parse_grid(key, v, n)?,
                "snr" => {
                    c.snr = v
                        .split(',')
                        .map(|s| match s.trim() {
                            "inf" | "none" => Ok(None),
                            t => parse_f64(key, t).map(Some),
                        })
                        .collect::<Result<_>>()?
                }
                "corruptions" => c.corruptions = parse_usize_grid(key, v, n)?,
                "trials" => c.trials = parse_usize(key, v)?,
                "seed" => c.seed = v.parse().map_err(|_| usage!("seed: '{v}' is not an unsigned integer"))?,
                "methods" => c.methods = v.split(',').map(|s| parse_method_spec(s.trim())).collect::<Result<_>>()?,
                "success_nmse" => c.success_nmse = parse_f64(key, v)?,
                "circle_tol" => c.circle_tol = parse_f64(key, v)?,
                "separation" => {
                    c.separation = match v {
                        "at_least" => SeparationRule::AtLeast,
                        "exact" => SeparationRule::Exact,
                        _ => return Err(usage!("separation must be 'at_least' or 'exact'")),
                    }
                }
                "iht_max_iters" => c.iht_max_iters = parse_usize(key, v)?,
                "iht_tol" => c.iht_tol = parse_f64(key, v)?,
                "admm_max_iters" => c.admm_max_iters = parse_usize(key, v)?,
                "admm_tol" => c.admm_tol = parse_f64(key, v)?,
                "noisy_admm_tol" => c.noisy_admm_tol = parse_f64(key, v)?,
                "rho" => c.rho = if v == "auto" { None } else { Some(parse_f64(key, v)?) },
                "lambda" => c.lambda = if v == "auto" { Lambda::Auto } else { Lambda::Value(parse_f64(key, v)?) },
                "timing" => c.timing = v.parse().map_err(|_| usage!("timing must be true or false"))?,
                _ => unreachable!("key list checked above"),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(usage!("dims must be positive"));
        }
        let grids = [
            ("k", self.k.is_empty()),
            ("delta_f", self.delta_f.is_empty()),
            ("m", self.m.is_empty()),
            ("eta", self.eta.is_empty()),
            ("snr", self.snr.is_empty()),
            ("corruptions", self.corruptions.is_empty()),
            ("methods", self.methods.is_empty()),
        ];
        if let Some((name, _)) = grids.iter().find(|(_, empty)| *empty) {
            return Err(usage!("grid '{name}' is empty"));
        }
        if self.trials == 0 {
            return Err(usage!("trials must be at least 1"));
        }
        for (name, v) in [
            ("success_nmse", self.success_nmse),
            ("circle_tol", self.circle_tol),
            ("iht_tol", self.iht_tol),
            ("admm_tol", self.admm_tol),
            ("noisy_admm_tol", self.noisy_admm_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(usage!("{name} must be positive"));
            }
        }
        if self.iht_max_iters == 0 || self.admm_max_iters == 0 {
            return Err(usage!("iteration caps must be at least 1"));
        }
        if let Lambda::Value(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(usage!("lambda must be positive"));
            }
        }
        if self.k.contains(&0) {
            return Err(usage!("k must be at least 1"));
        }
        if self.delta_f.iter().chain(&self.eta).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(usage!("delta_f and eta must be non-negative"));
        }
        let len: usize = self.dims.iter().product();
        if self.m.iter().any(|m| matches!(m, SampleCount::Count(c) if *c == 0 || *c > len)) {
            return Err(usage!("m must lie in 1..={len}"));
        }
        self.shape()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Result<LevelShape> {
        match &self.rows {
            Some(rows) => shape_from_rows(&self.dims, rows),
            None => Ok(LevelShape::with_fraction(&self.dims, self.split)?),
        }
    }
}

pub fn shape_from_rows(dims: &[usize], rows: &[usize]) -> Result<LevelShape> {
    if rows.len() != dims.len() {
        return Err(usage!("rows needs one entry per dimension ({} given for {})", rows.len(), dims.len()));
    }
    let levels = dims.iter().zip(rows).map(|(&n, &r)| Level::new(n, r)).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(LevelShape::new(levels)?)
}

fn split_pair(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty()).then(|| (k.to_string(), v.to_string()))
}

/// `65` or `11x11`.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| usage!("bad dimension list '{s}'")))
        .collect()
}

pub fn parse_method_spec(s: &str) -> Result<MethodSpec> {
    let (m, model) = match s.split_once(':') {
        Some((m, model)) => (m, parse_model(model)?),
        None => (s, Model::Double),
    };
    Ok(MethodSpec { method: Method::parse(m)?, model })
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse().map_err(|_| usage!("{key}: '{v}' is not a number"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| usage!("{key}: '{v}' is not an unsigned integer"))
}

/// Parses one grid value such as `1.5/N`, `0:0.1:2/N` or `1,2,5`.
pub fn parse_grid(key: &str, s: &str, n: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        let (body, div) = match item.split_once('/') {
            Some((b, "N")) => (b, n),
            Some((b, d)) => (b, parse_f64(key, d)?),
            None => (item, 1.0),
        };
        if !(div > 0.0 && div.is_finite()) {
            return Err(usage!("{key}: divisor must be positive in '{item}'"));
        }
        let parts = body.split(':').map(|p| parse_f64(key, p)).collect::<Result<Vec<_>>>()?;
        let (start, step, stop) = match parts[..] {
            [v] => (v, 1.0, v),
            [a, b] => (a, 1.0, b),
            [a, st, b] => (a, st, b),
            _ => return Err(usage!("{key}: bad range '{item}'")),
        };
        if !(step > 0.0) || stop < start {
            return Err(usage!("{key}: range '{item}' needs start <= stop and a positive step"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        out.extend((0..count).map(|i| (start + i as f64 * step) / div));
    }
    Ok(out)
}

fn parse_usize_grid(key: &str, s: &str, n: f64) -> Result<Vec<usize>> {
    parse_grid(key, s, n)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(usage!("{key}: {v} is not an unsigned integer"))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, &[])
    }

    #[test]
    fn ranges_expand_inclusively() {
        assert_eq!(parse_grid("k", "1:4", 65.0).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        let df = parse_grid("delta_f", "0:0.1:2/N", 65.0).unwrap();
        assert_eq!(df.len(), 21);
        assert!((df[20] - 2.0 / 65.0).abs() < 1e-15);
        assert_eq!(parse_grid("x", "1,3:2:7/2", 1.0).unwrap(), vec![1.0, 1.5, 2.5, 3.5]);
        assert!(parse_grid("x", "3:1", 1.0).is_err());
        assert!(parse_grid("x", "1:0:3", 1.0).is_err());
    }

    #[test]
    fn phase_transition_defaults_match_protocol() {
        let c = cfg("kind = phase_transition").unwrap();
        assert_eq!((c.k.len(), c.delta_f.len(), c.trials), (20, 21, 20));
        assert_eq!(c.m, vec![SampleCount::Count(30)]);
        assert_eq!(c.shape().unwrap().levels()[0].rows, 39);
    }

    #[test]
    fn overrides_win_and_comments_are_ignored() {
        let c = ExperimentConfig::parse(
            "# comment\nkind=error_curve\ntrials = 5\nmethods = iht:single, demac\n",
            &["trials=7".into(), "dims=11x11".into(), "rows=6x6".into()],
        )
        .unwrap();
        assert_eq!(c.trials, 7);
        assert_eq!(c.dims, vec![11, 11]);
        assert_eq!(c.rows, Some(vec![6, 6]));
        assert_eq!(c.methods[1], MethodSpec { method: Method::Demac, model: Model::Double });
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for bad in [
            "trials = 1",
            "kind = nope",
            "kind = phase_transition\ntrials = 0",
            "kind = phase_transition\nk = ",
            "kind = phase_transition\nsuccess_nmse = 0",
            "kind = phase_transition\ncircle_tol = -1",
            "kind = phase_transition\nbogus = 1",
            "kind = phase_transition\nm = 100",
            "kind = phase_transition\nmethods = iht:triple",
            "kind = phase_transition\nrows = 70",
            "kind = phase_transition\nk = 1.5",
        ] {
            assert_eq!(cfg(bad).unwrap_err().exit_code(), 2, "{bad}");
        }
    }
}
