//! Reference solver and certificate for the box-constrained anisotropic TV
//! problem `min_{lo ≤ x ≤ hi} ½‖Rx − b‖² + α‖∇x‖₁` on small grids.

use super::composite::gram_norm;
use crate::experiments::Gradient2d;
use crate::linops::LinearOp;
use crate::{Matrix, Result, Vector};

/// Iteration cap of the inner dual projection computing the prox.
const INNER_MAX_ITER: usize = 20_000;
/// Iteration cap of the certificate's bounded least-squares solve.
const CERT_MAX_ITER: usize = 50_000;

pub(crate) struct TvInstance<'a> {
    pub grad: Gradient2d,
    pub r: &'a Matrix,
    pub b: &'a Vector,
    pub alpha: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TvInstance<'_> {
    /// `prox_{λTV + ι_box}(w)` by fast gradient projection on the dual,
    /// warm-started from `u` (updated in place).
    fn prox(&self, w: &Vector, lambda: f64, u: &mut Vector, tol: f64) -> Vector {
        let primal = |u: &Vector| (w - self.grad.adjoint(u)).map(|v| v.clamp(self.lo, self.hi));
        // ‖∇‖² < 8, so 1/8 is a safe dual step.
        let step = 1.0 / 8.0;
        let mut v = u.clone();
        let mut t = 1.0_f64;
        for _ in 0..INNER_MAX_ITER {
            let x = primal(&v);
            let u_new = (&v + self.grad.apply(&x) * step).map(|c| c.clamp(-lambda, lambda));
            let diff = &u_new - &*u;
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            v = &u_new + &diff * ((t - 1.0) / t_new);
            t = t_new;
            *u = u_new;
            if diff.norm() <= tol * (1.0 + u.norm()) {
                break;
            }
        }
        primal(u)
    }

    /// Accelerated proximal gradient on `x` with step `1/‖R‖²`.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<(Vector, usize)> {
        let step = 1.0 / gram_norm(self.r)?;
        let mut x = self.b.map(|v| v.clamp(self.lo, self.hi));
        let mut w = x.clone();
        let mut u = Vector::zeros(self.grad.out_dim());
        let mut t = 1.0_f64;
        let inner_tol = tol * 1e-3;
        for k in 1..=max_iter {
            let g = self.r.transpose() * (self.r * &w - self.b);
            let x_new = self.prox(&(&w - g * step), self.alpha * step, &mut u, inner_tol);
            let diff = &x_new - &x;
            if (&w - &x_new).dot(&diff) > 0.0 {
                t = 1.0;
                w = x_new.clone();
            } else {
                let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                w = &x_new + &diff * ((t - 1.0) / t_new);
                t = t_new;
            }
            x = x_new;
            if diff.norm() <= tol * (1.0 + x.norm()) {
                return Ok((x, k));
            }
        }
        Ok((x, max_iter))
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        0.5 * (self.r * x - self.b).norm_squared() + self.alpha * self.grad.apply(x).lp_norm(1)
    }

    /// Upper bound on `dist(0, ∂F(x))`: the residual of a feasible choice of
    /// subgradient of the ℓ1 term on the zero set of `∇x` and of the normal
    /// cone of the box, optimized by projected gradient.
    pub fn certificate(&self, x: &Vector, zero_tol: f64) -> f64 {
        let n = x.len();
        let dx = self.grad.apply(x);
        let sign = dx.map(|v| if v.abs() > zero_tol { v.signum() } else { 0.0 });
        let free: Vec<bool> = dx.iter().map(|v| v.abs() <= zero_tol).collect();
        let base =
            self.r.transpose() * (self.r * x - self.b) + self.grad.adjoint(&sign) * self.alpha;
        // Projection of a residual component onto the complement of the
        // normal cone at that pixel.
        let cone = |i: usize, r: f64| {
            if x[i] >= self.hi - zero_tol {
                r.max(0.0)
            } else if x[i] <= self.lo + zero_tol {
                r.min(0.0)
            } else {
                r
            }
        };
        let residual = |u: &Vector| {
            let r = &base + self.grad.adjoint(u) * self.alpha;
            Vector::from_fn(n, |i, _| cone(i, r[i]))
        };
        let project = |u: Vector| {
            Vector::from_fn(
                u.len(),
                |k, _| if free[k] { u[k].clamp(-1.0, 1.0) } else { 0.0 },
            )
        };
        let lip = 8.0 * self.alpha * self.alpha;
        let mut u = Vector::zeros(dx.len());
        let mut best = residual(&u).norm();
        if lip == 0.0 {
            return best;
        }
        let mut v = u.clone();
        let mut t = 1.0_f64;
        for _ in 0..CERT_MAX_ITER {
            let rho = residual(&v);
            let g = self.grad.apply(&rho) * self.alpha;
            let u_new = project(&v - g / lip);
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            v = &u_new + (&u_new - &u) * ((t - 1.0) / t_new);
            t = t_new;
            u = u_new;
            let r = residual(&u).norm();
            best = best.min(r);
            if best <= 1e-15 {
                break;
            }
        }
        best
    }
}
