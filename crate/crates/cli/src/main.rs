use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dhankel::campaign::{retrieval_errors, run_method, SolverSettings};
use dhankel::config::{self, parse_dims, parse_grid, Lambda, Method, MethodSpec};
use dhankel::error::CliError;
use dhankel::io::{self, fmt_f64};
use dhankel::{run_experiment, ExperimentConfig};
use dhankel_core::diag::incoherence;
use dhankel_core::model::{corrupt, random_params, synthesize, AmpLaw, CorruptSpec, Noise, Sampling, Separation};
use dhankel_core::retrieve::estimate_poles;
use dhankel_core::solve::auto_lambda;
use dhankel_core::{nmse, LevelShape, SpectralParams};

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "dhankel", version, about = "Double-Hankel spectral compressed sensing")]
struct Cli {
    /// Worker threads for campaigns (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random spectrally sparse signal and its observations.
    Synth(SynthArgs),
    /// Recover one signal and retrieve its poles.
    Solve(SolveArgs),
    /// Run a Monte-Carlo campaign from a config file.
    Bench(BenchArgs),
    /// Incoherence and sample-complexity diagnostics.
    Diag(DiagArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Grid size: `65` or `11x11`.
    #[arg(long, conflicts_with = "n")]
    dims: Option<String>,
    /// 1-D grid length (shorthand for --dims).
    #[arg(long)]
    n: Option<usize>,
    /// Hankel row counts per dimension, e.g. `33` or `6x6`.
    #[arg(long)]
    rows: Option<String>,
    /// Row split as a fraction of N+1 when --rows is absent.
    #[arg(long, default_value_t = 0.6)]
    split: f64,
}

impl GridArgs {
    fn dims(&self, default: Option<usize>) -> Result<Vec<usize>> {
        match (&self.dims, self.n.or(default)) {
            (Some(d), _) => parse_dims(d),
            (None, Some(n)) if n > 0 => Ok(vec![n]),
            _ => Err(CliError::Usage("--dims or --n is required".into())),
        }
    }

    fn shape(&self, dims: &[usize]) -> Result<LevelShape> {
        match &self.rows {
            Some(r) => config::shape_from_rows(dims, &parse_dims(r)?),
            None => Ok(LevelShape::with_fraction(dims, self.split)?),
        }
    }
}

#[derive(Args)]
struct InstanceArgs {
    /// Model order K.
    #[arg(long)]
    k: Option<usize>,
    /// Minimum frequency separation, e.g. `0.03` or `2/N`.
    #[arg(long, default_value = "0")]
    sep: String,
    /// Place the first two frequencies exactly --sep apart.
    #[arg(long)]
    exact_pair: bool,
    /// Unit-modulus amplitudes instead of 0.5 + |normal|.
    #[arg(long)]
    unit_amps: bool,
    /// Number of observed entries (default: all).
    #[arg(long)]
    m: Option<usize>,
    /// Additive noise at this SNR in dB.
    #[arg(long, conflicts_with = "corruptions")]
    snr: Option<f64>,
    /// Replace this many observed entries by outliers.
    #[arg(long)]
    corruptions: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InstanceArgs {
    fn separation(&self, n: usize) -> Result<Separation> {
        let v = parse_grid("sep", &self.sep, n as f64)?;
        let [sep] = v[..] else {
            return Err(CliError::Usage("--sep takes a single value".into()));
        };
        Ok(if self.exact_pair { Separation::exact(sep) } else { Separation::at_least(sep) })
    }

    fn params(&self, k: usize, dims: &[usize]) -> Result<SpectralParams> {
        let law = if self.unit_amps { AmpLaw::UnitModulus } else { AmpLaw::HalfPlusNormal };
        Ok(random_params(k, dims.len(), self.separation(dims[0])?, law, self.seed)?)
    }

    fn corrupt_spec(&self, eta: Option<f64>) -> CorruptSpec {
        let sampling = self.m.map_or(Sampling::Full, Sampling::Subsample);
        let noise = match (eta, self.snr, self.corruptions) {
            (Some(e), _, _) => Noise::L2(e),
            (_, Some(s), _) => Noise::SnrDb(s),
            (_, _, Some(c)) => Noise::SparseCount(c),
            _ => Noise::None,
        };
        CorruptSpec { sampling, noise }
    }
}

/// Sub-stream of the instance seed used for sampling and noise.
fn corrupt_seed(seed: u64) -> u64 {
    dhankel::seed::stream(seed, 2)
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    /// Additive noise with this exact l2 norm on the observations.
    #[arg(long, conflicts_with_all = ["snr", "corruptions"])]
    eta: Option<f64>,
    /// Output directory for params.csv, signal.csv and samples.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// iht, demac, noisy-demac or robust-demac.
    #[arg(long)]
    method: String,
    /// single or double.
    #[arg(long, default_value = "double")]
    model: String,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    /// noisy-demac: noise bound (and, for generated instances, the noise norm).
    #[arg(long)]
    eta: Option<f64>,
    /// robust-demac: sparse penalty weight or `auto`.
    #[arg(long)]
    lambda: Option<String>,
    /// Observed entries (`index,re,im`) instead of a generated instance.
    #[arg(long, conflicts_with_all = ["snr", "corruptions", "m"])]
    samples: Option<PathBuf>,
    /// Ground-truth signal for NMSE.
    #[arg(long, requires = "samples")]
    truth: Option<PathBuf>,
    /// Ground-truth parameters for frequency errors.
    #[arg(long, requires = "samples")]
    params: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// ADMM penalty (default 1/sqrt(N), adapted).
    #[arg(long)]
    rho: Option<f64>,
    /// Directory for solve.csv, estimate.csv and poles.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Flat `key = value` experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Base seed (overrides the config's).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for trials.csv and aggregate.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Parameters file; otherwise random instances are drawn.
    #[arg(long, conflicts_with_all = ["k", "instances"])]
    params: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    instances: usize,
    #[arg(long, default_value = "0")]
    sep: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Universal constant in the sample bounds.
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    /// Directory for diag.csv (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 || rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            eprintln!("error: cannot start {t} worker threads");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Diag(a) => diag(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let dims = a.grid.dims(Some(65))?;
    let k = a.instance.k.ok_or_else(|| CliError::Usage("--k is required".into()))?;
    let params = a.instance.params(k, &dims)?;
    let y = synthesize(&params, &dims)?;
    let samples = corrupt(&y, &a.instance.corrupt_spec(a.eta), corrupt_seed(a.instance.seed))?;
    io::write_params(&a.out.join("params.csv"), &params)?;
    io::write_signal(&a.out.join("signal.csv"), &y)?;
    io::write_samples(&a.out.join("samples.csv"), &samples)?;
    Ok(())
}

const SOLVE_HEADER: [&str; 12] =
    ["method", "model", "N", "M", "K", "iters", "converged", "nmse", "freq_rmse", "circle_dist", "eta", "lambda"];

fn solve(a: SolveArgs) -> Result<()> {
    let spec = MethodSpec { method: Method::parse(&a.method)?, model: config::parse_model(&a.model)? };
    if spec.method == Method::Iht && a.instance.k.is_none() {
        return Err(CliError::Usage("--k is required for --method iht".into()));
    }
    if a.eta.is_some() && spec.method != Method::NoisyDemac {
        return Err(CliError::Usage("--eta applies only to --method noisy-demac".into()));
    }
    if a.lambda.is_some() && spec.method != Method::RobustDemac {
        return Err(CliError::Usage("--lambda applies only to --method robust-demac".into()));
    }
    let lambda = match a.lambda.as_deref() {
        None | Some("auto") => Lambda::Auto,
        Some(v) => Lambda::Value(v.parse().map_err(|_| CliError::Usage(format!("--lambda: '{v}' is not a number")))?),
    };

    let dims = a.grid.dims(None)?;
    let shape = a.grid.shape(&dims)?;
    let (samples, truth, params) = match &a.samples {
        Some(path) => {
            let samples = io::read_samples(path, &dims)?;
            let params = a.params.as_deref().map(io::read_params).transpose()?;
            let truth = match (&a.truth, &params) {
                (Some(t), _) => Some(io::read_signal(t, &dims)?),
                (None, Some(p)) => Some(synthesize(p, &dims)?),
                (None, None) => None,
            };
            (samples, truth, params)
        }
        None => {
            let k = a.instance.k.ok_or_else(|| CliError::Usage("--k is required to generate an instance".into()))?;
            let params = a.instance.params(k, &dims)?;
            let y = synthesize(&params, &dims)?;
            let samples = corrupt(&y, &a.instance.corrupt_spec(a.eta), corrupt_seed(a.instance.seed))?;
            (samples, Some(y), Some(params))
        }
    };
    let eta = match (spec.method, a.eta) {
        (Method::NoisyDemac, Some(e)) => e,
        (Method::NoisyDemac, None) => match samples.noise.as_ref() {
            Some(n) => n.realized_l2,
            None => return Err(CliError::Usage("--method noisy-demac needs --eta".into())),
        },
        _ => 0.0,
    };

    let mut settings = SolverSettings { lambda, rho: a.rho, ..SolverSettings::default() };
    if let Some(it) = a.max_iters {
        settings.iht_max_iters = it;
        settings.admm_max_iters = it;
    }
    if let Some(tol) = a.tol {
        settings.iht_tol = tol;
        settings.admm_tol = tol;
        settings.noisy_admm_tol = tol;
    }
    let k = a.instance.k.or(params.as_ref().map(SpectralParams::order)).unwrap_or(0);
    let report = run_method(&samples, spec, k, eta, &shape, &settings, a.instance.seed)?;

    let err = truth.as_ref().map(|t| nmse(&report.y_hat, t)).transpose()?;
    let (freq_rmse, circle_dist) = match &params {
        Some(p) => retrieval_errors(&report.y_hat, p, &shape, spec.model),
        None => (f64::NAN, f64::NAN),
    };
    let poles = (k > 0).then(|| estimate_poles(&report.y_hat, k, &shape, spec.model)).and_then(|r| r.ok());
    let circle_dist = match (&poles, circle_dist.is_nan()) {
        (Some(est), true) => dhankel_core::retrieve::distance_to_torus(&est.poles, est.dim),
        _ => circle_dist,
    };
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let row = vec![
        spec.method.name().to_string(),
        config::model_name(spec.model).to_string(),
        samples.grid_len().to_string(),
        samples.len().to_string(),
        k.to_string(),
        report.iters.to_string(),
        report.converged.to_string(),
        opt(err),
        opt(Some(freq_rmse).filter(|v| !v.is_nan())),
        opt(Some(circle_dist).filter(|v| !v.is_nan())),
        opt((spec.method == Method::NoisyDemac).then_some(eta)),
        opt((spec.method == Method::RobustDemac).then(|| match lambda {
            Lambda::Auto => auto_lambda(samples.len(), samples.grid_len()),
            Lambda::Value(l) => l,
        })),
    ];

    let stdout = std::io::stdout();
    io::write_table(stdout.lock(), &SOLVE_HEADER, [row.clone()]).map_err(|e| CliError::csv(Path::new("<stdout>"), e))?;
    if let Some(dir) = &a.out {
        io::save_table(&dir.join("solve.csv"), &SOLVE_HEADER, [row])?;
        io::write_signal(&dir.join("estimate.csv"), &report.y_hat)?;
        if let Some(est) = &poles {
            io::write_poles(&dir.join("poles.csv"), est)?;
        }
        if a.samples.is_none() {
            io::write_samples(&dir.join("samples.csv"), &samples)?;
            if let Some(p) = &params {
                io::write_params(&dir.join("params.csv"), p)?;
            }
        }
        if let Some(e) = &report.e_hat {
            io::write_signal(&dir.join("outliers.csv"), e)?;
        }
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| CliError::io(&a.config, e))?;
    let mut overrides = a.overrides.clone();
    if let Some(s) = a.seed {
        overrides.push(format!("seed={s}"));
    }
    let config = ExperimentConfig::parse(&text, &overrides)?;
    let result = run_experiment(&config)?;
    result.save(&a.out)?;
    let stderr = std::io::stderr();
    let mut err = stderr.lock();
    let _ = writeln!(
        err,
        "{}: {} cells x {} trials x {} methods -> {} rows in {}",
        config.kind.name(),
        result.cells.len(),
        config.trials,
        config.methods.len(),
        result.rows.len(),
        a.out.display()
    );
    Ok(())
}

fn diag(a: DiagArgs) -> Result<()> {
    let dims = a.grid.dims(Some(65))?;
    let shape = a.grid.shape(&dims)?;
    if !(a.c1 > 0.0) {
        return Err(CliError::Usage("--c1 must be positive".into()));
    }
    let instances: Vec<SpectralParams> = match &a.params {
        Some(path) => vec![io::read_params(path)?],
        None => {
            let k = a.k.ok_or_else(|| CliError::Usage("--k or --params is required".into()))?;
            let sep = parse_grid("sep", &a.sep, dims[0] as f64)?;
            let [sep] = sep[..] else {
                return Err(CliError::Usage("--sep takes a single value".into()));
            };
            (0..a.instances)
                .map(|i| {
                    let seed = dhankel::seed::trial_seed(a.seed, 0, i as u64);
                    random_params(k, dims.len(), Separation::at_least(sep), AmpLaw::HalfPlusNormal, seed)
                })
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let rows = instances
        .iter()
        .enumerate()
        .map(|(i, p)| incoherence(p, &shape).map(|r| io::diag_row(i + 1, &r, a.c1)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match &a.out {
        Some(dir) => io::save_table(&dir.join("diag.csv"), &io::DIAG_HEADER, rows),
        None => io::write_table(std::io::stdout().lock(), &io::DIAG_HEADER, rows)
            .map_err(|e| CliError::csv(Path::new("<stdout>"), e)),
    }
}
