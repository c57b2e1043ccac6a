//! Seeded random instances shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use splitdr::linops::{DenseOp, Metric, SharedOp};
use splitdr::prox::ResolventOp;
use splitdr::solvers::SdrProblem;
use splitdr::{Matrix, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `GGᵀ + shift·I`, symmetric positive definite for `shift > 0`.
pub fn spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Matrix {
    let g = gaussian_matrix(rng, n, n);
    let m = &g * g.transpose() / n as f64 + Matrix::identity(n, n) * shift;
    (&m + m.transpose()) * 0.5
}

pub fn dense(m: Matrix) -> SharedOp {
    Arc::new(DenseOp::new(m))
}

/// Exact `‖L‖²` from the dense spectrum.
pub fn op_norm_sq(l: &Matrix) -> f64 {
    (l.transpose() * l).symmetric_eigen().eigenvalues.max()
}

/// Scalar steps with `τσ‖L‖² = ratio`.
pub fn scalar_steps(rng: &mut ChaCha8Rng, l: &Matrix, ratio: f64) -> (f64, f64) {
    let tau = rng.random_range(0.2..2.0);
    (tau, ratio / (tau * op_norm_sq(l)))
}

/// A random lasso-type SDR instance `0 ∈ α∂‖x‖₁ + Lᵀ(Lx − c)` with
/// dimensions at most 12.
pub struct LassoInstance {
    pub l: Matrix,
    pub c: Vector,
    pub alpha: f64,
    pub tau: f64,
    pub sigma: f64,
}

impl LassoInstance {
    pub fn random(seed: u64, ratio: f64) -> Self {
        let mut r = rng(seed);
        let n = r.random_range(2..=12);
        let m = r.random_range(2..=12);
        let l = gaussian_matrix(&mut r, m, n);
        let c = gaussian_vector(&mut r, m) * 2.0;
        let alpha = r.random_range(0.05..1.0);
        let (tau, sigma) = scalar_steps(&mut r, &l, ratio);
        Self {
            l,
            c,
            alpha,
            tau,
            sigma,
        }
    }

    pub fn sdr(&self) -> SdrProblem {
        let (m, n) = self.l.shape();
        let a = ResolventOp::l1(self.alpha).unwrap();
        let b = ResolventOp::quadratic(dense(Matrix::identity(m, m)), self.c.clone()).unwrap();
        SdrProblem::new(
            &a,
            &b,
            dense(self.l.clone()),
            Metric::scalar(n, self.tau).unwrap(),
            Metric::scalar(m, self.sigma).unwrap(),
        )
        .unwrap()
    }
}

/// A linear-quadratic SDR instance `0 ∈ Rᵀ(Rx − b) + LᵀSLx` whose unique
/// Kuhn-Tucker pair comes from one dense solve.
pub struct LinearInstance {
    pub r: Matrix,
    pub b: Vector,
    pub l: Matrix,
    pub s: Matrix,
    pub tau: f64,
    pub sigma: f64,
}

impl LinearInstance {
    pub fn random(seed: u64, ratio: f64) -> Self {
        let mut g = rng(seed);
        let n = g.random_range(2..=10);
        let m = g.random_range(2..=10);
        let r = gaussian_matrix(&mut g, n + 2, n);
        let b = gaussian_vector(&mut g, n + 2);
        let l = gaussian_matrix(&mut g, m, n);
        let s = spd(&mut g, m, 0.1);
        let (tau, sigma) = scalar_steps(&mut g, &l, ratio);
        Self {
            r,
            b,
            l,
            s,
            tau,
            sigma,
        }
    }

    pub fn sdr(&self) -> SdrProblem {
        let (m, n) = self.l.shape();
        let a = ResolventOp::quadratic(dense(self.r.clone()), self.b.clone()).unwrap();
        let b = ResolventOp::linear(self.s.clone()).unwrap();
        SdrProblem::new(
            &a,
            &b,
            dense(self.l.clone()),
            Metric::scalar(n, self.tau).unwrap(),
            Metric::scalar(m, self.sigma).unwrap(),
        )
        .unwrap()
    }

    /// `(x̂, û)` with `x̂ = (RᵀR + LᵀSL)⁻¹Rᵀb` and `û = SLx̂`.
    pub fn kkt_pair(&self) -> (Vector, Vector) {
        let h = self.r.transpose() * &self.r + self.l.transpose() * &self.s * &self.l;
        let x = h.lu().solve(&(self.r.transpose() * &self.b)).unwrap();
        let u = &self.s * &self.l * &x;
        (x, u)
    }
}

pub fn max_abs_diff(a: &Vector, b: &Vector) -> f64 {
    (a - b).amax()
}

pub fn apply(op: &SharedOp, x: &Vector) -> Vector {
    op.apply(x)
}
