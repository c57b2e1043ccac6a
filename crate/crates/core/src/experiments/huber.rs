//! Huber data fit with an analysis ℓ1 penalty,
//! `min_p Σφ(p − z) + α‖Mp‖₁`, solved by split ADMM on the spectral
//! factorization `M = KT`, `K = PD^{1−η}Pᵀ`, `T = PD^ηPᵀ`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::linops::{DenseOp, Metric, SharedOp};
use crate::prox::{huber_value, LeastSquaresProx, ResolventOp};
use crate::solvers::{solve, SadmmProblem, SadmmRunner, SolveReport, StoppingRule};
use crate::{seeded_rng, Error, Matrix, Result, Vector};

/// Ratio `λmax / λmin` of every generated `M`.
pub const CONDITION_NUMBER: f64 = 50.0;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_TAU: f64 = 1.0;
/// Default `σ = SIGMA_FACTOR / (τ‖K‖²)`.
pub const SIGMA_FACTOR: f64 = 0.99;

/// Spectral class of `M`, fixing `λmax` as a function of `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HuberClass {
    /// `λmax = N/1000`.
    A,
    /// `λmax = 4N`.
    B,
    /// `λmax = 100N`.
    C,
}

impl HuberClass {
    pub const ALL: [HuberClass; 3] = [HuberClass::A, HuberClass::B, HuberClass::C];

    pub fn lambda_max(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            HuberClass::A => n / 1000.0,
            HuberClass::B => 4.0 * n,
            HuberClass::C => 100.0 * n,
        }
    }
}

impl fmt::Display for HuberClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HuberClass::A => "A",
            HuberClass::B => "B",
            HuberClass::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for HuberClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(HuberClass::A),
            "B" | "b" => Ok(HuberClass::B),
            "C" | "c" => Ok(HuberClass::C),
            other => Err(Error::InvalidParameter(format!("unknown class {other:?}"))),
        }
    }
}

/// A generated instance `M = PDPᵀ`, `z`, `α`, `δ`.
#[derive(Debug, Clone)]
pub struct HuberProblem {
    pub n: usize,
    pub class: HuberClass,
    pub seed: u64,
    /// Orthogonal eigenvector matrix.
    pub p: Matrix,
    /// Eigenvalues of `M`.
    pub d: Vector,
    pub m: Matrix,
    pub z: Vector,
    pub alpha: f64,
    pub delta: f64,
}

/// Builds the seeded instance of size `n` in `class` with the default
/// `α` and `δ`.
pub fn build_huber(n: usize, class: HuberClass, seed: u64) -> Result<HuberProblem> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "N = {n} must be at least 2"
        )));
    }
    let mut rng = seeded_rng(seed);
    let g = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let p = g.qr().q();
    let hi = class.lambda_max(n);
    let lo = hi / CONDITION_NUMBER;
    let (lhi, llo) = (hi.ln(), lo.ln());
    let d = Vector::from_fn(n, |i, _| match i {
        0 => hi,
        1 => lo,
        _ => (llo + (lhi - llo) * rng.random::<f64>()).exp(),
    });
    let z = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let m = spectral_power(&p, &d, 1.0);
    Ok(HuberProblem {
        n,
        class,
        seed,
        p,
        d,
        m,
        z,
        alpha: DEFAULT_ALPHA,
        delta: DEFAULT_DELTA,
    })
}

fn spectral_power(p: &Matrix, d: &Vector, power: f64) -> Matrix {
    let scaled = Matrix::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)] * d[j].powf(power));
    let out = scaled * p.transpose();
    (&out + out.transpose()) * 0.5
}

impl HuberProblem {
    pub fn with_params(mut self, alpha: f64, delta: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need alpha >= 0 and delta > 0 (got {alpha}, {delta})"
            )));
        }
        self.alpha = alpha;
        self.delta = delta;
        Ok(self)
    }

    /// `(K, T) = (PD^{1−η}Pᵀ, PD^ηPᵀ)`.
    pub fn split(&self, eta: f64) -> Result<(Matrix, Matrix)> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("eta {eta} outside [0, 1]")));
        }
        Ok((
            spectral_power(&self.p, &self.d, 1.0 - eta),
            spectral_power(&self.p, &self.d, eta),
        ))
    }

    /// `‖K‖² = λmax^{2(1−η)}`.
    pub fn k_norm_sq(&self, eta: f64) -> f64 {
        self.d.max().powf(2.0 * (1.0 - eta))
    }

    /// `F(p) = Σφ(p − z) + α‖Mp‖₁`.
    pub fn objective(&self, p: &Vector) -> f64 {
        huber_value(&(p - &self.z), self.delta) + self.alpha * (&self.m * p).lp_norm(1)
    }

    pub fn g(&self) -> Result<ResolventOp> {
        ResolventOp::huber(self.delta, self.z.clone())
    }

    pub fn f(&self) -> Result<ResolventOp> {
        ResolventOp::l1(self.alpha)
    }
}

/// `p = zer(σ∇h(· − z) + T*(T· − (Tpₙ − σK*y)))`, solved by semismooth Newton
/// started at `p_prev`.
#[allow(clippy::too_many_arguments)]
pub fn huber_p_update(
    t: &Matrix,
    k: &Matrix,
    sigma: f64,
    y: &Vector,
    p_prev: &Vector,
    z: &Vector,
    delta: f64,
) -> Result<Vector> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} <= 0")));
    }
    let g = ResolventOp::huber(delta, z.clone())?;
    let top: SharedOp = Arc::new(DenseOp::new(t.clone()));
    let sub = LeastSquaresProx::new(g, top, Metric::scalar(t.nrows(), 1.0 / sigma)?)?;
    let c = t * p_prev - k.transpose() * y * sigma;
    Ok(sub.solve(&c, Some(p_prev))?.p)
}

/// Solver settings for [`run_huber`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberOptions {
    pub tau: f64,
    /// Defaults to `SIGMA_FACTOR / (τ‖K‖²)`.
    pub sigma: Option<f64>,
    pub record_objective: bool,
}

impl Default for HuberOptions {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            sigma: None,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HuberRun {
    pub report: SolveReport,
    pub p: Vector,
    pub objective: f64,
    pub sigma: f64,
    pub inner_iterations: usize,
}

/// Runs split ADMM from `p₀ = q₀ = x₀ = 0`; `η = 0` uses the explicit
/// p-update, `η > 0` the Newton subproblem.
pub fn run_huber(
    prob: &HuberProblem,
    eta: f64,
    opts: &HuberOptions,
    rule: &StoppingRule,
) -> Result<HuberRun> {
    if !(opts.tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau {} <= 0", opts.tau)));
    }
    let sigma = opts
        .sigma
        .unwrap_or(SIGMA_FACTOR / (opts.tau * prob.k_norm_sq(eta)));
    let n = prob.n;
    let (k, t) = prob.split(eta)?;
    let kop: SharedOp = Arc::new(DenseOp::new(k));
    let upsilon = Metric::scalar(n, opts.tau)?;
    let sig = Metric::scalar(n, sigma)?;
    let sadmm = if eta == 0.0 {
        SadmmProblem::explicit(prob.g()?, prob.f()?, kop, upsilon, sig)?
    } else {
        let top: SharedOp = Arc::new(DenseOp::new(t));
        SadmmProblem::new(prob.g()?, prob.f()?, top, kop, upsilon, sig)?
    };
    let zero = Vector::zeros(n);
    let state = sadmm.initial_state(zero.clone(), zero.clone(), zero)?;
    let mut runner = SadmmRunner::new(&sadmm, state);
    let mut inner = 0;
    let record = opts.record_objective;
    let report = solve(&mut runner, rule, |s| {
        inner += s.inner_iterations;
        record.then(|| prob.objective(&s.p))
    })?;
    let p = runner.state.p;
    Ok(HuberRun {
        objective: prob.objective(&p),
        report,
        p,
        sigma,
        inner_iterations: inner,
    })
}

/// Percentage of improvement `(F̄ − F)·100/F̄` of `value` over the reference
/// `reference`.
pub fn improvement(reference: f64, value: f64) -> f64 {
    (reference - value) * 100.0 / reference
}
