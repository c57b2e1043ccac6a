//! Flat `key = value` run configuration.
//!
//! Values are layered: built-in defaults, then a config file, then
//! command-line flags. Every layer goes through [`RunConfig::set`], so a key
//! means the same thing wherever it appears.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use splitdr::experiments::HuberClass;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Tv,
    Huber,
    Equiv,
    Check,
}

/// Operator examined by `check`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOperator {
    /// `L = (∇; Id)` with `Υ = τId` and `Σ = diag(σ₁Id, σ₂Id)`.
    Gradient,
    /// `L = Id` with `Υ = τId` and `Σ = σ₁Id`.
    Identity,
}

/// Every parameter of a run. Options left at `None` take an
/// experiment-specific default when the command starts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Number of seeds; runs use `seed, seed + 1, …`.
    pub seeds: Option<usize>,
    pub seed: u64,
    pub eps: f64,
    pub max_iter: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub unchecked: bool,
    pub dump_iterates: Option<PathBuf>,

    pub input: Option<PathBuf>,
    pub synthetic: usize,
    pub noise: f64,
    pub blur: bool,
    pub alpha: f64,
    pub kappa: Vec<f64>,
    pub tau: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub ell: Option<f64>,
    pub boundary: bool,

    pub n: Vec<usize>,
    pub classes: Vec<HuberClass>,
    pub etas: Vec<f64>,
    pub delta: f64,
    pub sigma: Option<f64>,

    pub operator: CheckOperator,
    pub n1: usize,
    pub n2: usize,

    pub iters: usize,
    pub dim: usize,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seeds: None,
            seed: 0,
            eps: 1e-6,
            max_iter: None,
            out: None,
            threads: None,
            unchecked: false,
            dump_iterates: None,
            input: None,
            synthetic: 32,
            noise: 1e-3,
            blur: true,
            alpha: 0.1,
            kappa: Vec::new(),
            tau: None,
            sigma1: None,
            sigma2: None,
            ell: None,
            boundary: false,
            n: vec![50],
            classes: HuberClass::ALL.to_vec(),
            etas: vec![0.0, 0.8, 0.9, 1.0],
            delta: 0.01,
            sigma: None,
            operator: CheckOperator::Gradient,
            n1: 8,
            n2: 8,
            iters: 100,
            dim: 12,
        }
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "seeds" => self.seeds = Some(parse(key, v)?),
            "seed" => self.seed = parse(key, v)?,
            "eps" => self.eps = parse(key, v)?,
            "max_iter" => self.max_iter = Some(parse(key, v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            "threads" => self.threads = Some(parse(key, v)?),
            "unchecked" => self.unchecked = parse_bool(key, v)?,
            "dump_iterates" => self.dump_iterates = Some(PathBuf::from(v)),
            "input" => self.input = Some(PathBuf::from(v)),
            "synthetic" => self.synthetic = parse(key, v)?,
            "noise" => self.noise = parse(key, v)?,
            "blur" => self.blur = parse_bool(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "kappa" => self.kappa = parse_range(key, v)?,
            "tau" => self.tau = Some(parse(key, v)?),
            "sigma1" => self.sigma1 = Some(parse(key, v)?),
            "sigma2" => self.sigma2 = Some(parse(key, v)?),
            "ell" => self.ell = Some(parse(key, v)?),
            "boundary" => self.boundary = parse_bool(key, v)?,
            "n" => self.n = parse_list(key, v)?,
            "classes" | "class" => self.classes = parse_list(key, v)?,
            "etas" | "eta" => self.etas = parse_list(key, v)?,
            "delta" => self.delta = parse(key, v)?,
            "sigma" => self.sigma = Some(parse(key, v)?),
            "operator" => {
                self.operator = match v {
                    "grad" | "gradient" => CheckOperator::Gradient,
                    "identity" | "id" => CheckOperator::Identity,
                    _ => return Err(config_error(key, v, "expected grad or identity")),
                }
            }
            "n1" => self.n1 = parse(key, v)?,
            "n2" => self.n2 = parse(key, v)?,
            "iters" => self.iters = parse(key, v)?,
            "dim" => self.dim = parse(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a file of `key = value` lines; `#` starts a comment.
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.load_str(&text)
    }

    pub fn load_str(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "line {}: expected key = value, got {line:?}",
                    i + 1
                ))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Rejects values no command can run with.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.max_iter == Some(0) {
            return bad("max_iter must be positive".into());
        }
        if self.seeds == Some(0) {
            return bad("seeds must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if !(self.alpha >= 0.0) || !(self.noise >= 0.0) || !(self.delta > 0.0) {
            return bad("alpha and noise must be nonnegative and delta positive".into());
        }
        if self.etas.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad("every eta must lie in [0, 1]".into());
        }
        if self.n.iter().any(|&n| n < 2) || self.synthetic < 2 || self.n1 < 1 || self.n2 < 1 {
            return bad("dimensions are too small".into());
        }
        if self.dim < 2 || self.iters == 0 {
            return bad("equiv needs dim >= 2 and iters >= 1".into());
        }
        for path in [&self.out, &self.dump_iterates].into_iter().flatten() {
            if path.as_os_str().is_empty() {
                return bad("empty output path".into());
            }
        }
        Ok(())
    }

    pub fn seed_list(&self, default_count: usize) -> Vec<u64> {
        let count = self.seeds.unwrap_or(default_count) as u64;
        (0..count).map(|i| self.seed + i).collect()
    }
}

fn config_error(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key} = {value:?}: {why}"))
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| config_error(key, v, e))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(config_error(key, v, "expected a boolean")),
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let items = v
        .split(',')
        .map(|s| parse(key, s.trim()))
        .collect::<Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err(config_error(key, v, "empty list"));
    }
    Ok(items)
}

/// `a:b` (integer steps from `a` to `b`) or a comma-separated list.
fn parse_range(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    if let Some((a, b)) = v.split_once(':') {
        let (a, b): (i64, i64) = (parse(key, a.trim())?, parse(key, b.trim())?);
        if a > b {
            return Err(config_error(key, v, "empty range"));
        }
        return Ok((a..=b).map(|k| k as f64).collect());
    }
    parse_list(key, v)
}
