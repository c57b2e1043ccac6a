//! `equiv`: runs the iterate-level equivalences on seeded random instances
//! and reports the largest deviation of each.
//!
//! * SDR against its primal-dual form, started from the mapped dual point.
//! * SDR against preconditioned Douglas-Rachford when `L` is surjective and
//!   `Σ = (LΥL*)⁻¹`.
//! * Split ADMM against SDR on the dual problem, comparing `Tpₙ`, `qₙ`
//!   and `xₙ`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use splitdr::linops::{DenseOp, Metric, SharedOp};
use splitdr::prox::ResolventOp;
use splitdr::solvers::{ComposedResolvent, DrsProblem, SadmmProblem, SdrProblem};
use splitdr::{Matrix, Vector};

use crate::table::{num, Table};
use crate::{finish, CliError, CommandOutput, RunConfig};

pub const DEFAULT_SEEDS: usize = 10;
/// Largest scaled deviation accepted by `equiv`.
pub const EQUIV_TOL: f64 = 1e-9;
/// Ratio `τσ‖L‖²` used for the random scalar metrics.
const STEP_RATIO: f64 = 0.9;

/// Largest deviation of each equivalence, scaled by `1 + ‖reference‖∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivReport {
    pub instances: usize,
    pub iterations: usize,
    pub sdr_pds: f64,
    pub sdr_drs: f64,
    pub sadmm_sdr: f64,
}

impl EquivReport {
    pub fn max(&self) -> f64 {
        self.sdr_pds.max(self.sdr_drs).max(self.sadmm_sdr)
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn dense(m: Matrix) -> SharedOp {
    Arc::new(DenseOp::new(m))
}

fn norm_sq(m: &Matrix) -> f64 {
    (m.transpose() * m).symmetric_eigen().eigenvalues.max()
}

fn deviation(a: &Vector, b: &Vector) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

/// Lasso-type SDR: `A = α∂‖·‖₁`, `B = ∂½‖· − c‖²`.
fn sdr_vs_pds(rng: &mut ChaCha8Rng, dim: usize, iters: usize) -> Result<f64, CliError> {
    let (n, m) = (rng.random_range(2..=dim), rng.random_range(2..=dim));
    let l = gaussian_matrix(rng, m, n);
    let c = gaussian_vector(rng, m);
    let tau = rng.random_range(0.2..2.0);
    let sigma = STEP_RATIO / (tau * norm_sq(&l));
    let prob = SdrProblem::new(
        &ResolventOp::l1(rng.random_range(0.05..1.0))?,
        &ResolventOp::quadratic(dense(Matrix::identity(m, m)), c)?,
        dense(l),
        Metric::scalar(n, tau)?,
        Metric::scalar(m, sigma)?,
    )?;
    let (x0, u0) = (gaussian_vector(rng, n), gaussian_vector(rng, m));
    let mut s = prob.initial_state(x0.clone(), u0.clone())?;
    let (mut x, mut v) = (x0.clone(), prob.pds_initial_dual(&x0, &u0)?);
    let mut worst = 0.0_f64;
    for _ in 0..iters {
        prob.step(&mut s)?;
        (x, v) = prob.pds_step(&x, &v)?;
        worst = worst.max(deviation(&x, &s.x));
    }
    Ok(worst)
}

/// Surjective `L`, diagonal `Υ`, `Σ = (LΥL*)⁻¹`, `A = α∂‖·‖₁`, `B = βId`.
fn sdr_vs_drs(rng: &mut ChaCha8Rng, dim: usize, iters: usize) -> Result<f64, CliError> {
    let n = rng.random_range(2..=dim);
    let m = rng.random_range(2..=n);
    let l = gaussian_matrix(rng, m, n);
    let ups = Vector::from_fn(n, |_, _| rng.random_range(0.3..2.0));
    let upsilon = Metric::diagonal(ups.clone())?;
    let lul = &l * Matrix::from_diagonal(&ups) * l.transpose();
    let inv = lul
        .try_inverse()
        .ok_or_else(|| splitdr::Error::Singular("L Υ L*".into()))?;
    let sigma = Metric::dense((&inv + inv.transpose()) * 0.5)?;
    let bmat = Matrix::identity(m, m) * rng.random_range(0.2..3.0);
    let a = ResolventOp::l1(rng.random_range(0.1..1.0))?;
    let lop = dense(l);
    let sdr = SdrProblem::new(
        &a,
        &ResolventOp::linear(bmat.clone())?,
        lop.clone(),
        upsilon.clone(),
        sigma,
    )?;
    let drs = DrsProblem::new(
        &a,
        &upsilon,
        ComposedResolvent::linear(lop.as_ref(), &upsilon, &bmat)?,
    )?;
    let mut s = sdr.initial_state(gaussian_vector(rng, n), gaussian_vector(rng, m))?;
    // The first SDR step produces the DRS starting point z₀.
    sdr.step(&mut s)?;
    let mut z = s.z.clone();
    let mut worst = 0.0_f64;
    for _ in 0..iters {
        sdr.step(&mut s)?;
        z = drs.step(&z)?;
        worst = worst.max(deviation(&s.z, &z));
    }
    Ok(worst)
}

/// `min Σφ(p − z) + α‖KTp‖₁` with `T` injective, against SDR on its dual.
fn sadmm_vs_sdr(rng: &mut ChaCha8Rng, dim: usize, iters: usize) -> Result<f64, CliError> {
    let np = rng.random_range(2..=dim.saturating_sub(1).max(2));
    let ng = rng.random_range(np..=dim.max(np));
    let nh = rng.random_range(2..=dim);
    let t = gaussian_matrix(rng, ng, np);
    let k = gaussian_matrix(rng, nh, ng);
    let tau = rng.random_range(0.3..2.0);
    let sigma = STEP_RATIO / (tau * norm_sq(&k));
    let z = gaussian_vector(rng, np);
    let prob = SadmmProblem::new(
        ResolventOp::huber(rng.random_range(0.2..2.0), z)?,
        ResolventOp::l1(rng.random_range(0.1..1.0))?,
        dense(t.clone()),
        dense(k.clone()),
        Metric::scalar(nh, tau)?,
        Metric::scalar(ng, sigma)?,
    )?;
    let sdr = prob.dual_sdr_problem()?;
    let p0 = gaussian_vector(rng, np);
    let x0 = gaussian_vector(rng, nh);
    // q₀ = KTp₀ makes the first extrapolated multiplier equal x₀.
    let q0 = &k * (&t * &p0);
    let mut a = prob.initial_state(p0, q0, x0.clone())?;
    let mut b = sdr.initial_state(x0, a.u.clone())?;
    let mut worst = 0.0_f64;
    for _ in 0..iters {
        let x_prev = b.x.clone();
        prob.step(&mut a)?;
        sdr.step(&mut b)?;
        // SDR's dual point is −Tpₙ₊₁ and qₙ₊₁ = KTpₙ₊₁ − Υ⁻¹(xₙ₊₁ − xₙ).
        let tp = -&b.v;
        let q = &k * &tp - (&b.x - &x_prev) / tau;
        worst = worst
            .max(deviation(&a.tp, &tp))
            .max(deviation(&a.q, &q))
            .max(deviation(&a.x, &b.x));
    }
    Ok(worst)
}

/// Runs every equivalence on `seeds.len()` instances of dimension at most
/// `dim` for `iters` iterations each.
pub fn run_equivalences(seeds: &[u64], dim: usize, iters: usize) -> Result<EquivReport, CliError> {
    if dim < 2 || iters == 0 {
        return Err(CliError::Config(
            "equiv needs dim >= 2 and iters >= 1".into(),
        ));
    }
    let mut r = EquivReport {
        instances: seeds.len(),
        iterations: iters,
        sdr_pds: 0.0,
        sdr_drs: 0.0,
        sadmm_sdr: 0.0,
    };
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        r.sdr_pds = r.sdr_pds.max(sdr_vs_pds(&mut rng, dim, iters)?);
        r.sdr_drs = r.sdr_drs.max(sdr_vs_drs(&mut rng, dim, iters)?);
        r.sadmm_sdr = r.sadmm_sdr.max(sadmm_vs_sdr(&mut rng, dim, iters)?);
    }
    Ok(r)
}

pub fn equiv_output(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let seeds = cfg.seed_list(DEFAULT_SEEDS);
    let r = run_equivalences(&seeds, cfg.dim, cfg.iters)?;
    let mut table = Table::new(&["check", "instances", "iterations", "max_deviation"])?;
    for (name, dev) in [
        ("sdr_vs_pds", r.sdr_pds),
        ("sdr_vs_drs", r.sdr_drs),
        ("sadmm_vs_sdr", r.sadmm_sdr),
    ] {
        table.row(&[
            name.into(),
            r.instances.to_string(),
            r.iterations.to_string(),
            num(dev),
        ])?;
    }
    Ok(CommandOutput {
        text: table.finish()?,
        ok: r.max() <= EQUIV_TOL,
    })
}

pub fn cmd_equiv(cfg: &RunConfig) -> i32 {
    finish(cfg, equiv_output(cfg))
}
