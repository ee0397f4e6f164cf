//! CSV readers and writers for signals, samples, spectral parameters, pole
//! estimates, matrices and diagnostics reports. Indices in files are 1-based.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use dhankel_core::diag::IncoherenceReport;
use dhankel_core::retrieve::PoleEstimates;
use dhankel_core::{SampleSet, Signal, SpectralParams};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{usage, CliError};

type Result<T> = std::result::Result<T, CliError>;

/// Shortest round-trip form (`1.5e-17`, `0.25`, `NaN`, `inf`).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))
}

fn write_rows<W: Write>(w: &mut csv::Writer<W>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> csv::Result<()> {
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn save(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    write_rows(&mut w, header, rows).map_err(|e| CliError::csv(path, e))
}

/// Reads a CSV with the expected header, returning each row's fields.
fn load(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let got = r.headers().map_err(|e| CliError::csv(path, e))?.clone();
    if got.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(usage!("{}: expected header '{}'", path.display(), header.join(",")));
    }
    r.records().map(|rec| rec.map_err(|e| CliError::csv(path, e))).collect()
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    let s = rec.get(i).unwrap_or("").trim();
    s.parse().map_err(|_| {
        let line = rec.position().map_or(0, |p| p.line());
        usage!("{}: line {line}: cannot parse '{s}'", path.display())
    })
}

const SIGNAL_HEADER: [&str; 3] = ["index", "re", "im"];
const PARAMS_HEADER: [&str; 6] = ["k", "dim", "freq", "amp_re", "amp_im", "damping"];
const POLES_HEADER: [&str; 7] = ["k", "dim", "pole_re", "pole_im", "amp_re", "amp_im", "abs_minus_1"];
const MATRIX_HEADER: [&str; 4] = ["row", "col", "re", "im"];

fn complex_row(index: usize, v: Complex64) -> Vec<String> {
    vec![index.to_string(), fmt_f64(v.re), fmt_f64(v.im)]
}

/// Row-major signal, one row per grid entry.
pub fn write_signal(path: &Path, y: &Signal) -> Result<()> {
    save(path, &SIGNAL_HEADER, y.as_slice().iter().enumerate().map(|(i, &v)| complex_row(i + 1, v)))
}

pub fn write_samples(path: &Path, s: &SampleSet) -> Result<()> {
    save(path, &SIGNAL_HEADER, s.omega().iter().zip(s.values()).map(|(&i, &v)| complex_row(i + 1, v)))
}

/// Reads observed entries (any subset, any order) of a grid of size `dims`.
pub fn read_samples(path: &Path, dims: &[usize]) -> Result<SampleSet> {
    let len: usize = dims.iter().product();
    let mut entries = BTreeMap::new();
    for rec in load(path, &SIGNAL_HEADER)? {
        let index: usize = field(path, &rec, 0)?;
        if index == 0 || index > len {
            return Err(usage!("{}: index {index} outside 1..={len}", path.display()));
        }
        let v = Complex64::new(field(path, &rec, 1)?, field(path, &rec, 2)?);
        if entries.insert(index - 1, v).is_some() {
            return Err(usage!("{}: index {index} repeated", path.display()));
        }
    }
    let (omega, values) = entries.into_iter().unzip();
    Ok(SampleSet::new(dims.to_vec(), omega, values)?)
}

/// Reads a complete signal on `dims`.
pub fn read_signal(path: &Path, dims: &[usize]) -> Result<Signal> {
    let s = read_samples(path, dims)?;
    if !s.is_full() {
        return Err(usage!("{}: signal needs all {} entries, found {}", path.display(), s.grid_len(), s.len()));
    }
    Ok(s.zero_filled())
}

/// One row per (component, dimension); amplitudes repeat across dimensions.
pub fn write_params(path: &Path, p: &SpectralParams) -> Result<()> {
    let d = p.dim();
    let rows = (0..p.order()).flat_map(|k| {
        (0..d).map(move |j| {
            let a = p.amps()[k];
            vec![
                (k + 1).to_string(),
                (j + 1).to_string(),
                fmt_f64(p.freq(k, j)),
                fmt_f64(a.re),
                fmt_f64(a.im),
                fmt_f64(p.damping()[k * d + j]),
            ]
        })
    });
    save(path, &PARAMS_HEADER, rows)
}

pub fn read_params(path: &Path) -> Result<SpectralParams> {
    let recs = load(path, &PARAMS_HEADER)?;
    let mut table: BTreeMap<(usize, usize), (f64, Complex64, f64)> = BTreeMap::new();
    for rec in &recs {
        let (k, j): (usize, usize) = (field(path, rec, 0)?, field(path, rec, 1)?);
        let amp = Complex64::new(field(path, rec, 3)?, field(path, rec, 4)?);
        if k == 0 || j == 0 || table.insert((k, j), (field(path, rec, 2)?, amp, field(path, rec, 5)?)).is_some() {
            return Err(usage!("{}: bad or repeated (k, dim) = ({k}, {j})", path.display()));
        }
    }
    let order = table.keys().map(|&(k, _)| k).max().unwrap_or(0);
    let dim = table.keys().map(|&(_, j)| j).max().unwrap_or(0);
    if order == 0 || table.len() != order * dim {
        return Err(usage!("{}: expected a complete k × dim table", path.display()));
    }
    let mut freqs = Vec::with_capacity(order * dim);
    let mut damping = Vec::with_capacity(order * dim);
    let mut amps = Vec::with_capacity(order);
    for k in 1..=order {
        for j in 1..=dim {
            let (f, a, g) = table[&(k, j)];
            freqs.push(f);
            damping.push(g);
            if j == 1 {
                amps.push(a);
            } else if a != amps[k - 1] {
                return Err(usage!("{}: component {k} has different amplitudes per dimension", path.display()));
            }
        }
    }
    Ok(SpectralParams::new(dim, freqs, amps, damping)?)
}

pub fn write_poles(path: &Path, est: &PoleEstimates) -> Result<()> {
    let d = est.dim;
    let rows = (0..est.order()).flat_map(|k| {
        (0..d).map(move |j| {
            let z = est.pole(k, j);
            let a = est.amps[k];
            vec![
                (k + 1).to_string(),
                (j + 1).to_string(),
                fmt_f64(z.re),
                fmt_f64(z.im),
                fmt_f64(a.re),
                fmt_f64(a.im),
                fmt_f64(z.norm() - 1.0),
            ]
        })
    });
    save(path, &POLES_HEADER, rows)
}

/// Row-major matrix dump.
pub fn write_matrix(path: &Path, m: &DMatrix<Complex64>) -> Result<()> {
    let rows = (0..m.nrows()).flat_map(|r| {
        (0..m.ncols()).map(move |c| {
            let v = m[(r, c)];
            vec![(r + 1).to_string(), (c + 1).to_string(), fmt_f64(v.re), fmt_f64(v.im)]
        })
    });
    save(path, &MATRIX_HEADER, rows)
}

pub const DIAG_HEADER: [&str; 11] = [
    "instance",
    "K",
    "N",
    "lambda_min_g1",
    "lambda_min_g2",
    "lambda_min_g2_single",
    "mu1",
    "c_s",
    "c1",
    "sample_bound",
    "robust_sample_bound",
];

pub fn diag_row(instance: usize, r: &IncoherenceReport, c1: f64) -> Vec<String> {
    vec![
        instance.to_string(),
        r.order.to_string(),
        r.len.to_string(),
        fmt_f64(r.lambda_min_g1),
        fmt_f64(r.lambda_min_g2),
        fmt_f64(r.lambda_min_g2_single),
        fmt_f64(r.mu1),
        fmt_f64(r.c_s),
        fmt_f64(c1),
        fmt_f64(r.sample_bound_estimate(c1)),
        fmt_f64(r.robust_sample_bound_estimate(c1)),
    ]
}

/// Writes CSV rows to any sink (stdout or a file).
pub fn write_table<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> csv::Result<()> {
    write_rows(&mut csv::Writer::from_writer(out), header, rows)
}

pub fn save_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    save(path, header, rows)
}
