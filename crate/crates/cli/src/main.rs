//! `nmsse`: run non-Markovian SSE ensembles and the reference solvers, and
//! write Bloch-vector CSV files.

mod config;
mod csv;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use nmsse_core::{
    compare, evolve_enlarged, lindblad_reference_markov, noise_statistics, run_ensemble,
    EnlargedConfig, EnlargedSpace, EnsembleConfig, Method, Simulation, SystemModel,
};

use config::{ConfigError, RunConfig};

const WORKERS_ENV: &str = "NMSSE_WORKERS";

#[derive(Parser)]
#[command(name = "nmsse", version, about = "Non-Markovian stochastic Schrodinger equation solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble average of the perturbative (or configured) SSE.
    RunSse(RunArgs),
    /// Exact reduced dynamics from the pseudomode model.
    RunEnlarged(RunArgs),
    /// Markovian Lindblad reference with rate `gamma`.
    RunMarkov(RunArgs),
    /// Ensemble average with the first-order post-Markovian drift.
    RunPostmarkovian(RunArgs),
    /// Pointwise difference `a - b` of two Bloch CSV files on the same grid.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Empirical noise correlations against the kernel (`ntraj` paths).
    NoiseCheck(RunArgs),
    /// Pseudomode model against the Lindblad limit; writes the difference.
    MarkovCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output CSV (stdout if absent).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    flags: Overrides,
}

/// One optional flag per config key.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    kernel: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    chi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    initial: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    unravelling: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    order: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    method: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    variant: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    scheme: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<String>,
    #[arg(long = "t-final", allow_hyphen_values = true)]
    t_final: Option<String>,
    #[arg(long = "record-stride", allow_hyphen_values = true)]
    record_stride: Option<String>,
    #[arg(long = "noise-substeps", allow_hyphen_values = true)]
    noise_substeps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    ntraj: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    workers: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    nmax: Option<String>,
    #[arg(long = "enlarged-dt", allow_hyphen_values = true)]
    enlarged_dt: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("gamma", &self.gamma),
            ("kappa", &self.kappa),
            ("omega", &self.omega),
            ("kernel", &self.kernel),
            ("delta", &self.delta),
            ("chi", &self.chi),
            ("initial", &self.initial),
            ("unravelling", &self.unravelling),
            ("order", &self.order),
            ("method", &self.method),
            ("variant", &self.variant),
            ("scheme", &self.scheme),
            ("dt", &self.dt),
            ("t_final", &self.t_final),
            ("record_stride", &self.record_stride),
            ("noise_substeps", &self.noise_substeps),
            ("ntraj", &self.ntraj),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("nmax", &self.nmax),
            ("enlarged_dt", &self.enlarged_dt),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        cfg.apply_text(&text)
            .map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?;
    }
    for (k, v) in args.flags.pairs() {
        cfg.set(k, v)
            .map_err(|e| ConfigError(format!("--{}: {}", k.replace('_', "-"), e.0)))?;
    }
    if let Ok(w) = std::env::var(WORKERS_ENV) {
        cfg.set("workers", &w)
            .map_err(|e| ConfigError(format!("{WORKERS_ENV}: {}", e.0)))?;
    }
    if let Some(out) = &args.output {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => csv::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn model(cfg: &RunConfig) -> Result<SystemModel> {
    Ok(SystemModel::driven_tla(cfg.delta, cfg.chi)?)
}

fn enlarged_config(cfg: &RunConfig) -> Result<EnlargedConfig> {
    let stride = cfg.record_stride as f64 * cfg.dt / cfg.enlarged_dt;
    if (stride - stride.round()).abs() > 1e-9 || stride.round() < 1.0 {
        return Err(ConfigError(format!(
            "enlarged_dt: record spacing {} is not a multiple of {}",
            cfg.record_stride as f64 * cfg.dt,
            cfg.enlarged_dt
        ))
        .into());
    }
    // RK4 is stable on the negative real axis up to about 2.78; the most
    // damped enlarged state decays at nmax * sum(kappa)
    let rate: f64 = cfg.nmax as f64 * cfg.memory_kernel()?.components().iter().map(|c| c.kappa).sum::<f64>();
    if rate * cfg.enlarged_dt > 2.5 {
        return Err(ConfigError(format!(
            "enlarged_dt: {} is unstable for nmax = {} (need enlarged_dt * nmax * sum(kappa) <= 2.5)",
            cfg.enlarged_dt, cfg.nmax
        ))
        .into());
    }
    Ok(EnlargedConfig {
        dt: cfg.enlarged_dt,
        t_final: cfg.t_final,
        record_stride: stride.round() as usize,
    })
}

fn run_sse(cfg: &RunConfig) -> Result<()> {
    let sim = Simulation::new(model(cfg)?, cfg.memory_kernel()?, cfg.trajectory(), cfg.initial_state())?;
    let mut ens = EnsembleConfig::new(cfg.ntraj, cfg.seed);
    ens.workers = cfg.workers;
    let r = run_ensemble(&sim, &ens)?;
    eprintln!(
        "{} of {} trajectories completed in {:.2} s; max norm drift {:.2e}",
        r.n_completed,
        r.n_completed + r.n_failed,
        r.runtime_seconds,
        r.max_norm_drift
    );
    emit(cfg.output.as_deref(), &csv::bloch_csv(&r.series()))
}

fn run_enlarged(cfg: &RunConfig) -> Result<nmsse_core::BlochSeries> {
    let kernel = cfg.memory_kernel()?;
    let space = EnlargedSpace::uniform(2, kernel.len(), cfg.nmax)?;
    let r = evolve_enlarged(&space, &model(cfg)?, &kernel, &cfg.initial_state(), &enlarged_config(cfg)?)?;
    eprintln!("largest top-level Fock population {:.2e}", r.max_top_population);
    Ok(r.bloch()?)
}

fn run_markov(cfg: &RunConfig) -> Result<nmsse_core::BlochSeries> {
    let r = lindblad_reference_markov(&model(cfg)?, cfg.gamma, &cfg.initial_state(), &enlarged_config(cfg)?)?;
    Ok(r.bloch()?)
}

fn noise_check(cfg: &RunConfig) -> Result<()> {
    let kernel = cfg.memory_kernel()?;
    let span = cfg.t_final.min(4.0);
    let pairs: Vec<(f64, f64)> = [(0.0, 0.0), (0.125, 0.0), (0.25, 0.0625), (0.5, 0.125), (1.0, 0.25)]
        .iter()
        .map(|&(t, s)| snap_pair(t * span, s * span, cfg.dt))
        .collect();
    let r = noise_statistics(&kernel, cfg.unravelling, cfg.seed, cfg.ntraj.max(2), cfg.dt, &pairs)?;
    let mut out = String::from(
        "t,s,cross_re,cross_im,cross_re_err,cross_im_err,kernel_re,kernel_im,pair_re,pair_im,pair_re_err,pair_im_err\n",
    );
    for e in &r.estimates {
        let a = kernel.alpha_eval(e.t - e.s)?;
        let a = match cfg.unravelling {
            nmsse_core::Unravelling::Coherent => a,
            nmsse_core::Unravelling::Quadrature => nmsse_core::Complex64::new(a.re, 0.0),
        };
        let cols = [
            e.t,
            e.s,
            e.cross.re,
            e.cross.im,
            e.cross_err[0],
            e.cross_err[1],
            a.re,
            a.im,
            e.pair.re,
            e.pair.im,
            e.pair_err[0],
            e.pair_err[1],
        ]
        .map(|v| format!("{v:.11e}"));
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    eprintln!(
        "{} paths: E|z|^2 = {:.6} +- {:.6} (kernel at 0: {:.6}); max |Im z| = {:e}",
        r.n_paths,
        r.variance,
        r.variance_err,
        kernel.alpha_eval(0.0)?.re,
        r.max_imag
    );
    emit(cfg.output.as_deref(), &out)
}

fn snap_pair(t: f64, s: f64, dt: f64) -> (f64, f64) {
    ((t / dt).round() * dt, (s / dt).round() * dt)
}

fn markov_check(cfg: &RunConfig) -> Result<()> {
    let e = run_enlarged(cfg)?;
    let m = run_markov(cfg)?;
    let metrics = compare(&e, &m)?;
    eprintln!(
        "kappa = {}: enlarged vs Lindblad sup-norm {:.3e}, time-averaged L1 {:.3e}",
        cfg.kappa, metrics.sup_norm, metrics.l1_time_avg
    );
    emit(cfg.output.as_deref(), &csv::diff_csv(&metrics))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::RunSse(a) => run_sse(&load(&a)?),
        Command::RunPostmarkovian(a) => {
            let mut cfg = load(&a)?;
            cfg.method = Method::Ydgs;
            run_sse(&cfg)
        }
        Command::RunEnlarged(a) => {
            let cfg = load(&a)?;
            let s = run_enlarged(&cfg)?;
            emit(cfg.output.as_deref(), &csv::bloch_csv(&s))
        }
        Command::RunMarkov(a) => {
            let cfg = load(&a)?;
            let s = run_markov(&cfg)?;
            emit(cfg.output.as_deref(), &csv::bloch_csv(&s))
        }
        Command::Compare { a, b, output } => {
            let read = |p: &Path| -> Result<nmsse_core::BlochSeries> {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                csv::parse_bloch(&text, &p.display().to_string()).map_err(|e| ConfigError(format!("{e:#}")).into())
            };
            let metrics = compare(&read(&a)?, &read(&b)?)?;
            eprintln!(
                "sup-norm {:.6e}, time-averaged L1 {:.6e}",
                metrics.sup_norm, metrics.l1_time_avg
            );
            emit(output.as_deref(), &csv::diff_csv(&metrics))
        }
        Command::NoiseCheck(a) => noise_check(&load(&a)?),
        Command::MarkovCheck(a) => markov_check(&load(&a)?),
    }
}

/// 2: configuration, 3: numerical failure, 4: I/O.
fn exit_code(err: &anyhow::Error) -> u8 {
    use nmsse_core::Error as E;
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::TrajectoryFailure { .. }
                | E::Truncation { .. }
                | E::EnsembleFailure { .. }
                | E::DegenerateState => 3,
                _ => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 4;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
