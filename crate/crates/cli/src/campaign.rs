//! Monte-Carlo campaigns over a grid of cells.
//!
//! Every (cell, trial) pair draws its instance from its own seed, every method
//! sees the same instance, and rows are assembled in (cell, trial, method)
//! order regardless of how the worker pool scheduled them.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use dhankel_core::model::{corrupt, noise_label, random_params, synthesize, AmpLaw, CorruptSpec, Noise, Sampling, Separation};
use dhankel_core::retrieve::{distance_to_torus, estimate_poles, freq_error};
use dhankel_core::solve::{demac, iht, Mode, SolveOptions, SolveReport};
use dhankel_core::{nmse, LevelShape, Model, SampleSet, Signal, SpectralParams};
use rayon::prelude::*;

use crate::config::{model_name, ExperimentConfig, Kind, Lambda, Method, MethodSpec, SampleCount, SeparationRule};
use crate::error::CliError;
use crate::io::fmt_f64;
use crate::seed::{stream, trial_seed};

pub const TRIAL_HEADER: [&str; 16] = [
    "kind", "K", "delta_f", "M", "eta", "tau", "method", "model", "trial", "seed", "nmse", "freq_rmse", "circle_dist",
    "iters", "converged", "wall_ms",
];

pub const AGGREGATE_HEADER: [&str; 14] = [
    "kind",
    "K",
    "delta_f",
    "M",
    "eta",
    "tau",
    "method",
    "model",
    "trials",
    "success_rate",
    "mean_nmse",
    "mean_freq_rmse",
    "mean_circle_dist",
    "skipped",
];

/// Solver knobs shared by campaigns and single solves.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub iht_max_iters: usize,
    pub iht_tol: f64,
    pub admm_max_iters: usize,
    pub admm_tol: f64,
    pub noisy_admm_tol: f64,
    pub rho: Option<f64>,
    pub lambda: Lambda,
}

impl SolverSettings {
    pub fn from_config(c: &ExperimentConfig) -> Self {
        Self {
            iht_max_iters: c.iht_max_iters,
            iht_tol: c.iht_tol,
            admm_max_iters: c.admm_max_iters,
            admm_tol: c.admm_tol,
            noisy_admm_tol: c.noisy_admm_tol,
            rho: c.rho,
            lambda: c.lambda,
        }
    }
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self::from_config(&ExperimentConfig::defaults(Kind::PhaseTransition))
    }
}

/// Runs one method. `eta` is the bound for `noisy-demac`; `k` the IHT rank.
pub fn run_method(
    samples: &SampleSet,
    spec: MethodSpec,
    k: usize,
    eta: f64,
    shape: &LevelShape,
    settings: &SolverSettings,
    seed: u64,
) -> dhankel_core::Result<SolveReport> {
    if spec.method == Method::Iht {
        let mut opts = SolveOptions::iht(spec.model, shape.clone());
        opts.max_iters = settings.iht_max_iters;
        opts.tol_rel = settings.iht_tol;
        opts.seed = seed;
        return iht(samples, k, &opts);
    }
    let mut opts = SolveOptions::admm(spec.model, shape.clone());
    opts.max_iters = settings.admm_max_iters;
    opts.tol_rel = settings.admm_tol;
    opts.rho = settings.rho;
    opts.seed = seed;
    let mode = match spec.method {
        Method::Demac => Mode::Exact,
        Method::NoisyDemac => {
            opts.tol_rel = settings.noisy_admm_tol;
            Mode::Bounded(eta)
        }
        Method::RobustDemac => Mode::Robust(match settings.lambda {
            Lambda::Auto => None,
            Lambda::Value(l) => Some(l),
        }),
        Method::Iht => unreachable!(),
    };
    demac(samples, mode, &opts)
}

/// Retrieval errors of an estimate against the truth: `(freq_rmse, circle_dist)`,
/// NaN where retrieval fails.
pub fn retrieval_errors(y_hat: &Signal, truth: &SpectralParams, shape: &LevelShape, model: Model) -> (f64, f64) {
    match estimate_poles(y_hat, truth.order(), shape, model) {
        Ok(est) => (freq_error(truth, &est).unwrap_or(f64::NAN), distance_to_torus(&est.poles, est.dim)),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

/// One grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub k: usize,
    pub delta_f: f64,
    pub sampling: Sampling,
    pub noise: Noise,
}

impl Cell {
    /// Observed sample count.
    pub fn observed(&self, len: usize) -> usize {
        match self.sampling {
            Sampling::Full => len,
            Sampling::Subsample(m) => m,
        }
    }

    /// Value of the `eta` column.
    pub fn eta_label(&self, kind: Kind) -> String {
        match (kind, self.noise) {
            (Kind::CircleHistogram, noise) => noise_label(&noise),
            (_, Noise::L2(eta)) => fmt_f64(eta),
            _ => fmt_f64(0.0),
        }
    }

    /// Corrupted fraction of the observations.
    pub fn tau(&self, len: usize) -> f64 {
        match self.noise {
            Noise::SparseCount(c) => c as f64 / self.observed(len) as f64,
            Noise::SparseFraction(t) => t,
            _ => 0.0,
        }
    }
}

/// Grid cells in row-major order over K, Δf, M and the kind's noise axis.
pub fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let noises: Vec<Noise> = match config.kind {
        Kind::PhaseTransition => vec![Noise::None],
        Kind::ErrorCurve | Kind::NdCurve => config.eta.iter().map(|&e| Noise::L2(e)).collect(),
        Kind::SparseNoisePhase => config.corruptions.iter().map(|&c| Noise::SparseCount(c)).collect(),
        Kind::CircleHistogram => config.snr.iter().map(|s| s.map_or(Noise::None, Noise::SnrDb)).collect(),
    };
    let mut out = Vec::new();
    for &k in &config.k {
        for &delta_f in &config.delta_f {
            for m in &config.m {
                let sampling = match *m {
                    SampleCount::Full => Sampling::Full,
                    SampleCount::Count(c) => Sampling::Subsample(c),
                };
                for &noise in &noises {
                    out.push(Cell { k, delta_f, sampling, noise });
                }
            }
        }
    }
    out
}

/// One CSV row of the per-trial table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub cell: usize,
    pub trial: usize,
    pub method: MethodSpec,
    pub seed: u64,
    pub nmse: f64,
    pub freq_rmse: f64,
    pub circle_dist: f64,
    pub iters: usize,
    pub converged: bool,
    pub wall_ms: f64,
    /// `‖𝓗ŷ − 𝓗y°‖_F` under the method's model; kept in memory only.
    pub hankel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub cell: usize,
    pub method: MethodSpec,
    pub trials: usize,
    pub successes: usize,
    pub mean_nmse: f64,
    pub mean_freq_rmse: f64,
    pub mean_circle_dist: f64,
    pub skipped: usize,
}

impl AggregateRow {
    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            f64::NAN
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// Outcome of one method on one trial: a row, or a skip.
type MethodOutcome = Option<TrialRow>;

/// Runs the campaign on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<CampaignResult, CliError> {
    config.validate()?;
    let shape = config.shape()?;
    let settings = SolverSettings::from_config(config);
    let cells = cells(config);
    let jobs: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..config.trials).map(move |t| (c, t))).collect();
    let outcomes: Vec<Vec<MethodOutcome>> = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(config, &cells[c], c, t, &shape, &settings))
        .collect();

    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for (c, per_cell) in outcomes.chunks(config.trials).enumerate() {
        for (mi, &method) in config.methods.iter().enumerate() {
            let cell_rows: Vec<TrialRow> = per_cell.iter().filter_map(|o| o[mi].clone()).collect();
            aggregates.push(aggregate(config, c, method, &cell_rows, config.trials - cell_rows.len()));
        }
        for outcome in per_cell {
            rows.extend(outcome.iter().flatten().cloned());
        }
    }
    Ok(CampaignResult { config: config.clone(), cells, rows, aggregates })
}

/// Runs the campaign on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<CampaignResult, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run_experiment(config))
}

fn run_trial(
    config: &ExperimentConfig,
    cell: &Cell,
    cell_index: usize,
    trial: usize,
    shape: &LevelShape,
    settings: &SolverSettings,
) -> Vec<MethodOutcome> {
    let seed = trial_seed(config.seed, cell_index as u64, trial as u64);
    let skip_all = || vec![None; config.methods.len()];
    let sep = match config.separation {
        SeparationRule::Exact if config.dims.len() == 1 => Separation::exact(cell.delta_f),
        _ => Separation::at_least(cell.delta_f),
    };
    let Ok(params) = random_params(cell.k, config.dims.len(), sep, AmpLaw::HalfPlusNormal, stream(seed, 1)) else {
        return skip_all();
    };
    let Ok(clean) = synthesize(&params, &config.dims) else {
        return skip_all();
    };
    let spec = CorruptSpec { sampling: cell.sampling, noise: cell.noise };
    let Ok(samples) = corrupt(&clean, &spec, stream(seed, 2)) else {
        return skip_all();
    };
    let eta = match cell.noise {
        Noise::L2(eta) => eta,
        _ => samples.noise.as_ref().map_or(0.0, |n| n.realized_l2),
    };

    config
        .methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let report = run_method(&samples, method, cell.k, eta, shape, settings, seed).ok()?;
            let wall_ms = if config.timing { (start.elapsed().as_secs_f64() * 1e6).round() / 1e3 } else { 0.0 };
            let (freq_rmse, circle_dist) = retrieval_errors(&report.y_hat, &params, shape, method.model);
            let hankel_err = match (method.model.forward(&report.y_hat, shape), method.model.forward(&clean, shape)) {
                (Ok(a), Ok(b)) => (a - b).norm(),
                _ => f64::NAN,
            };
            Some(TrialRow {
                cell: cell_index,
                trial,
                method,
                seed,
                nmse: nmse(&report.y_hat, &clean).unwrap_or(f64::NAN),
                freq_rmse,
                circle_dist,
                iters: report.iters,
                converged: report.converged,
                wall_ms,
                hankel_err,
            })
        })
        .collect()
}

/// Whether a trial row counts as a success under the config's thresholds.
pub fn is_success(config: &ExperimentConfig, row: &TrialRow) -> bool {
    match config.kind {
        Kind::CircleHistogram => row.circle_dist < config.circle_tol,
        _ => row.nmse <= config.success_nmse,
    }
}

/// Mean over the finite entries; NaN if there are none.
pub fn finite_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.filter(|v| v.is_finite()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn aggregate(config: &ExperimentConfig, cell: usize, method: MethodSpec, rows: &[TrialRow], skipped: usize) -> AggregateRow {
    AggregateRow {
        cell,
        method,
        trials: rows.len(),
        successes: rows.iter().filter(|r| is_success(config, r)).count(),
        mean_nmse: finite_mean(rows.iter().map(|r| r.nmse)),
        mean_freq_rmse: finite_mean(rows.iter().map(|r| r.freq_rmse)),
        mean_circle_dist: finite_mean(rows.iter().map(|r| r.circle_dist)),
        skipped,
    }
}

impl CampaignResult {
    fn cell_columns(&self, cell: usize) -> [String; 6] {
        let c = &self.cells[cell];
        let len = self.config.len();
        [
            self.config.kind.name().to_string(),
            c.k.to_string(),
            fmt_f64(c.delta_f),
            c.observed(len).to_string(),
            c.eta_label(self.config.kind),
            fmt_f64(c.tau(len)),
        ]
    }

    pub fn write_trials<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRIAL_HEADER)?;
        for r in &self.rows {
            let mut rec: Vec<String> = self.cell_columns(r.cell).into();
            rec.extend([
                r.method.method.name().to_string(),
                model_name(r.method.model).to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                fmt_f64(r.nmse),
                fmt_f64(r.freq_rmse),
                fmt_f64(r.circle_dist),
                r.iters.to_string(),
                r.converged.to_string(),
                fmt_f64(r.wall_ms),
            ]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregate<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(AGGREGATE_HEADER)?;
        for a in &self.aggregates {
            let mut rec: Vec<String> = self.cell_columns(a.cell).into();
            rec.extend([
                a.method.method.name().to_string(),
                model_name(a.method.model).to_string(),
                a.trials.to_string(),
                fmt_f64(a.success_rate()),
                fmt_f64(a.mean_nmse),
                fmt_f64(a.mean_freq_rmse),
                fmt_f64(a.mean_circle_dist),
                a.skipped.to_string(),
            ]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn trials_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_trials(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn aggregate_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_aggregate(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Writes `trials.csv` and `aggregate.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let trials = dir.join("trials.csv");
        std::fs::write(&trials, self.trials_csv()).map_err(|e| CliError::io(&trials, e))?;
        let agg = dir.join("aggregate.csv");
        std::fs::write(&agg, self.aggregate_csv()).map_err(|e| CliError::io(&agg, e))?;
        Ok(())
    }

    /// Aggregate rows of one method, in cell order.
    pub fn aggregates_for(&self, method: MethodSpec) -> impl Iterator<Item = &AggregateRow> {
        self.aggregates.iter().filter(move |a| a.method == method)
    }

    /// Trial rows of one method, in (cell, trial) order.
    pub fn rows_for(&self, method: MethodSpec) -> impl Iterator<Item = &TrialRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }
}
