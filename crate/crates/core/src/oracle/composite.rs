//! Reference solvers for `min_y s(y) + α‖y‖₁` with `s` smooth.

use crate::linops::{power_iteration, DenseOp};
use crate::prox::{huber_derivative, soft_threshold};
use crate::{Error, Matrix, Result, Vector};

/// Safety factor on the power-iteration estimate of the Lipschitz constant,
/// which approaches the true value from below.
const LIPSCHITZ_SAFETY: f64 = 1.01;

/// Smooth part `s` of the composite objective.
pub(crate) trait Smooth {
    fn dim(&self) -> usize;
    fn gradient(&self, y: &Vector) -> Vector;
    /// An element of the generalized Hessian at `y`.
    fn hessian(&self, y: &Vector) -> Matrix;
    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
}

/// `λmax(AᵀA)` by power iteration.
pub(crate) fn gram_norm(a: &Matrix) -> Result<f64> {
    let est = power_iteration(&DenseOp::new(a.clone()), 1e-12, 100_000, 0)?;
    Ok(est.value * LIPSCHITZ_SAFETY)
}

/// `½‖Ry − b‖²`.
pub(crate) struct LeastSquares<'a> {
    pub r: &'a Matrix,
    pub b: &'a Vector,
    rtr: Matrix,
    lip: f64,
}

impl<'a> LeastSquares<'a> {
    pub fn new(r: &'a Matrix, b: &'a Vector) -> Result<Self> {
        Ok(Self {
            r,
            b,
            rtr: r.transpose() * r,
            lip: gram_norm(r)?,
        })
    }
}

impl Smooth for LeastSquares<'_> {
    fn dim(&self) -> usize {
        self.r.ncols()
    }

    fn gradient(&self, y: &Vector) -> Vector {
        self.r.transpose() * (self.r * y - self.b)
    }

    fn hessian(&self, _y: &Vector) -> Matrix {
        self.rtr.clone()
    }

    fn lipschitz(&self) -> f64 {
        self.lip
    }
}

/// `Σφ_δ(Ay − z)`, the Huber fit written in the coordinates `y = A⁻¹p`.
pub(crate) struct HuberFit<'a> {
    pub a: &'a Matrix,
    pub z: &'a Vector,
    pub delta: f64,
    lip: f64,
}

impl<'a> HuberFit<'a> {
    pub fn new(a: &'a Matrix, z: &'a Vector, delta: f64) -> Result<Self> {
        Ok(Self {
            a,
            z,
            delta,
            lip: gram_norm(a)? / delta,
        })
    }
}

impl Smooth for HuberFit<'_> {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn gradient(&self, y: &Vector) -> Vector {
        let r = self.a * y - self.z;
        self.a.transpose() * r.map(|v| huber_derivative(v, self.delta))
    }

    fn hessian(&self, y: &Vector) -> Matrix {
        let r = self.a * y - self.z;
        let mut scaled = self.a.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            if r[i].abs() > self.delta {
                row.fill(0.0);
            } else {
                row /= self.delta;
            }
        }
        self.a.transpose() * scaled
    }

    fn lipschitz(&self) -> f64 {
        self.lip
    }
}

/// `y − prox_{γα‖·‖₁}(y − γ∇s(y))` with `γ = 1/L`.
pub(crate) fn natural_map(s: &dyn Smooth, alpha: f64, y: &Vector) -> Result<Vector> {
    let gamma = 1.0 / s.lipschitz();
    Ok(y - soft_threshold(&(y - s.gradient(y) * gamma), gamma * alpha)?)
}

/// Componentwise closest element `u ∈ ∂‖·‖₁(y)` to `−g/α`; entries with
/// `|yᵢ| ≤ zero_tol` are treated as zero.
pub(crate) fn l1_subgradient_choice(g: &Vector, alpha: f64, y: &Vector, zero_tol: f64) -> Vector {
    Vector::from_fn(y.len(), |i, _| {
        if y[i].abs() > zero_tol {
            y[i].signum()
        } else if alpha > 0.0 {
            (-g[i] / alpha).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    })
}

/// Stopping test on a natural-map-sized quantity `r`, measured in gradient
/// units (`L·r`) relative to `1 + ‖∇s(y)‖`.
fn converged(s: &dyn Smooth, r: f64, y: &Vector, tol: f64) -> bool {
    r * s.lipschitz() <= tol * (1.0 + s.gradient(y).norm())
}

/// Accelerated proximal gradient with step `1/L` and gradient-based restart.
/// Returns the last iterate and the iteration count.
pub(crate) fn fista(
    s: &dyn Smooth,
    alpha: f64,
    y0: Vector,
    tol: f64,
    max_iter: usize,
) -> Result<(Vector, usize)> {
    let step = 1.0 / s.lipschitz();
    let mut y = y0;
    let mut w = y.clone();
    let mut t = 1.0_f64;
    for k in 1..=max_iter {
        let y_new = soft_threshold(&(&w - s.gradient(&w) * step), step * alpha)?;
        let diff = &y_new - &y;
        if (&w - &y_new).dot(&diff) > 0.0 {
            t = 1.0;
            w = y_new.clone();
        } else {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            w = &y_new + &diff * ((t - 1.0) / t_new);
            t = t_new;
        }
        y = y_new;
        if converged(s, diff.norm(), &y, tol)
            && converged(s, natural_map(s, alpha, &y)?.norm(), &y, tol)
        {
            return Ok((y, k));
        }
    }
    Ok((y, max_iter))
}

/// Globalized semismooth Newton on the natural map. The generalized
/// Jacobian is `I − D(I − γH)` with `D` the active pattern of the soft
/// threshold, shifted by `μI`; a failed line search falls back to a
/// proximal-gradient step.
pub(crate) fn semismooth_newton(
    s: &dyn Smooth,
    alpha: f64,
    y0: Vector,
    tol: f64,
    max_iter: usize,
) -> Result<(Vector, usize)> {
    let gamma = 1.0 / s.lipschitz();
    let n = y0.len();
    let mut y = y0;
    let mut f = natural_map(s, alpha, &y)?;
    for k in 1..=max_iter {
        let fnorm = f.norm();
        if converged(s, fnorm, &y, tol) {
            return Ok((y, k - 1));
        }
        let w = &y - s.gradient(&y) * gamma;
        let h = s.hessian(&y);
        // The shift `μ = min(‖F‖, 1)` keeps the system solvable when `H` is
        // singular and vanishes at the solution.
        let mu = fnorm.min(1.0);
        let mut jac = Matrix::identity(n, n) * (1.0 + mu);
        for i in 0..n {
            if w[i].abs() > gamma * alpha {
                for j in 0..n {
                    jac[(i, j)] = gamma * h[(i, j)];
                }
                jac[(i, i)] += mu;
            }
        }
        let dir = jac.lu().solve(&(-&f));
        let mut accepted = false;
        if let Some(d) = dir.filter(|d| d.iter().all(|v| v.is_finite())) {
            let mut t = 1.0;
            while t > 1e-10 {
                let trial = &y + &d * t;
                let ft = natural_map(s, alpha, &trial)?;
                if ft.norm() <= (1.0 - 1e-4 * t) * fnorm {
                    y = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            y -= &f;
            f = natural_map(s, alpha, &y)?;
        }
    }
    let residual = f.norm();
    if converged(s, residual, &y, tol) {
        Ok((y, max_iter))
    } else {
        Err(Error::InnerSolver {
            iterations: max_iter,
            residual,
        })
    }
}
