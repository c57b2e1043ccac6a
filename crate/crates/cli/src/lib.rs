//! Command-line front end for the `splitdr` benchmarks.
//!
//! Each subcommand has a `*_output` function that runs the experiment and
//! returns its CSV text, and a `cmd_*` wrapper that writes the text and maps
//! the outcome to an exit code: 0 on success, 1 on a step-size condition or
//! convergence failure, 2 on a configuration error.

// Parameter checks are written `!(x > 0.0)` on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod config;
pub mod equiv;
pub mod huber;
pub mod table;
pub mod tv;

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use check::{check_output, cmd_check};
pub use config::{CheckOperator, Experiment, RunConfig};
pub use equiv::{cmd_equiv, equiv_output, run_equivalences, EquivReport};
pub use huber::{cmd_huber, huber_output};
pub use tv::{cmd_tv, tv_output};

/// Environment variable capping the number of worker threads in sweeps.
pub const THREADS_ENV: &str = "SPLITDR_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] splitdr::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(splitdr::Error::Io(_) | splitdr::Error::Format(_)) => 2,
            _ => 1,
        }
    }
}

/// Text produced by a command and whether every run succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub text: String,
    pub ok: bool,
}

impl CommandOutput {
    pub fn exit_code(&self) -> i32 {
        if self.ok {
            0
        } else {
            1
        }
    }
}

/// Writes `out` to the configured path (or stdout) and returns the exit code.
pub(crate) fn finish(cfg: &RunConfig, out: Result<CommandOutput, CliError>) -> i32 {
    let out = match out {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let written = match &cfg.out {
        Some(path) => fs::write(path, &out.text),
        None => std::io::stdout().write_all(out.text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return 2;
    }
    out.exit_code()
}

/// Worker count: the configured value, capped by `SPLITDR_THREADS`.
pub fn thread_count(cfg: &RunConfig) -> usize {
    let env = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let base = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    env.map_or(base, |cap| base.min(cap)).max(1)
}

/// Runs `f` on every job in a pool sized by [`thread_count`], keeping the
/// input order in the result.
pub(crate) fn par_map<T, R, F>(cfg: &RunConfig, jobs: Vec<T>, f: F) -> Result<Vec<R>, CliError>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| jobs.into_par_iter().map(f).collect()))
}

#[derive(Debug, Parser)]
#[command(name = "splitdr", version, about = "Operator-splitting benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Total-variation restoration sweep.
    Tv(TvArgs),
    /// Huber + l1 spectral-split sweep.
    Huber(HuberArgs),
    /// Step-size condition check.
    Check(CheckArgs),
    /// Iterate-level equivalence demonstration.
    Equiv(EquivArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Flat `key = value` file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Additional `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Skip the construction-time step-size check.
    #[arg(long)]
    unchecked: bool,
}

#[derive(Debug, Args)]
struct TvArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// PGM image to degrade and restore.
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Synthetic image size and first seed.
    #[arg(long, num_args = 2, value_names = ["N", "SEED"])]
    synthetic: Option<Vec<u64>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise standard deviation on the [0, 1] scale.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    no_noise: bool,
    /// Denoise only (`R = Id`).
    #[arg(long)]
    no_blur: bool,
    /// `a:b` or a list of κ values.
    #[arg(long = "kappa-sweep", alias = "kappa")]
    kappa: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma1: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    /// Use the boundary split with parameter `--ell`.
    #[arg(long)]
    boundary: bool,
    #[arg(long)]
    ell: Option<f64>,
    /// Directory receiving one final-iterate file per run.
    #[arg(long)]
    dump_iterates: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HuberArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Problem sizes.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    classes: Option<String>,
    #[arg(long, alias = "eta")]
    etas: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `grad` for `(∇; Id)` on an n1×n2 grid, `identity` for `Id`.
    #[arg(long)]
    operator: Option<String>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma1: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
}

#[derive(Debug, Args)]
struct EquivArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    iters: Option<usize>,
    /// Largest instance dimension.
    #[arg(long)]
    dim: Option<usize>,
}

/// `(key, value)` pairs for the flags that were given, in application order.
#[derive(Default)]
struct Overrides(Vec<(String, String)>);

impl Overrides {
    fn opt<T: ToString>(&mut self, key: &str, v: &Option<T>) {
        if let Some(v) = v {
            self.0.push((key.to_string(), v.to_string()));
        }
    }

    fn path(&mut self, key: &str, v: &Option<PathBuf>) {
        self.opt(key, &v.as_ref().map(|p| p.display().to_string()));
    }

    fn flag(&mut self, key: &str, on: bool, value: &str) {
        if on {
            self.0.push((key.to_string(), value.to_string()));
        }
    }
}

fn common_overrides(c: &CommonArgs, o: &mut Overrides) {
    o.path("out", &c.out);
    o.opt("seeds", &c.seeds);
    o.opt("seed", &c.seed);
    o.opt("eps", &c.eps);
    o.opt("max_iter", &c.max_iter);
    o.opt("threads", &c.threads);
    o.flag("unchecked", c.unchecked, "true");
}

/// Builds the layered configuration: defaults, then `--config`, then typed
/// flags, then `--set` pairs.
fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut o = Overrides::default();
    let (experiment, common) = match &cli.command {
        Command::Tv(a) => {
            o.path("input", &a.input);
            if let Some(s) = &a.synthetic {
                o.0.push(("synthetic".into(), s[0].to_string()));
                o.0.push(("seed".into(), s[1].to_string()));
            }
            o.opt("alpha", &a.alpha);
            o.opt("noise", &a.noise);
            o.flag("noise", a.no_noise, "0");
            o.flag("blur", a.no_blur, "false");
            o.opt("kappa", &a.kappa);
            o.opt("tau", &a.tau);
            o.opt("sigma1", &a.sigma1);
            o.opt("sigma2", &a.sigma2);
            o.flag("boundary", a.boundary, "true");
            o.opt("ell", &a.ell);
            o.path("dump_iterates", &a.dump_iterates);
            (Experiment::Tv, &a.common)
        }
        Command::Huber(a) => {
            o.opt("n", &a.n);
            o.opt("classes", &a.classes);
            o.opt("etas", &a.etas);
            o.opt("alpha", &a.alpha);
            o.opt("delta", &a.delta);
            o.opt("tau", &a.tau);
            o.opt("sigma", &a.sigma);
            (Experiment::Huber, &a.common)
        }
        Command::Check(a) => {
            o.opt("operator", &a.operator);
            o.opt("n1", &a.n1);
            o.opt("n2", &a.n2);
            o.opt("kappa", &a.kappa);
            o.opt("tau", &a.tau);
            o.opt("sigma1", &a.sigma1);
            o.opt("sigma2", &a.sigma2);
            o.opt("ell", &a.ell);
            (Experiment::Check, &a.common)
        }
        Command::Equiv(a) => {
            o.opt("iters", &a.iters);
            o.opt("dim", &a.dim);
            (Experiment::Equiv, &a.common)
        }
    };
    common_overrides(common, &mut o);
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        o.0.push((k.to_string(), v.to_string()));
    }
    let mut cfg = RunConfig::new(experiment);
    if let Some(path) = &common.config {
        cfg.load_file(path)?;
    }
    for (k, v) in &o.0 {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match cfg.experiment {
        Experiment::Tv => cmd_tv(&cfg),
        Experiment::Huber => cmd_huber(&cfg),
        Experiment::Check => cmd_check(&cfg),
        Experiment::Equiv => cmd_equiv(&cfg),
    }
}
