//! Solver for `argmin_p f(p) + ½‖Op·p − c‖²_W`.
//!
//! When `Op = s·Id` the minimizer is a scaled resolvent of `∂f`. Otherwise
//! `f` must be smooth (zero, Huber or quadratic) and the problem is solved by
//! a damped semismooth Newton method on the optimality map
//! `F(p) = ∇f(p) + Op*W(Op p − c)`.

use nalgebra::Cholesky;

use super::{Hessian, Resolvent, ResolventOp};
use crate::error::check_dim;
use crate::linops::{Metric, SharedOp};
use crate::{Error, Matrix, Result, Vector};

/// Relative stopping tolerance on `‖F(p)‖`.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub p: Vector,
    pub iterations: usize,
    /// Relative optimality residual at `p` (zero in the closed-form case).
    pub residual: f64,
}

enum Mode {
    Closed { resolvent: Resolvent, scale: f64 },
    Newton { gram: Matrix },
}

pub struct LeastSquaresProx {
    func: ResolventOp,
    op: SharedOp,
    weight: Metric,
    mode: Mode,
    tol: f64,
    max_iter: usize,
}

impl std::fmt::Debug for LeastSquaresProx {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LeastSquaresProx")
            .field("func", &self.func)
            .field("op", &self.op)
            .finish()
    }
}

impl LeastSquaresProx {
    pub fn new(func: ResolventOp, op: SharedOp, weight: Metric) -> Result<Self> {
        check_dim(op.out_dim(), weight.dim(), "subproblem weight")?;
        let mode = match op.scaled_identity() {
            Some(s) if s != 0.0 => {
                // f(p) + ½ s²‖p − c/s‖²_W  is  J_{(s²W)⁻¹∂f}(c/s)
                let metric = weight.scaled(s * s).inverse();
                Mode::Closed {
                    resolvent: func.prepare(&metric)?,
                    scale: s,
                }
            }
            _ => {
                let probe = Vector::zeros(op.in_dim());
                if func.gradient(&probe).is_none() {
                    return Err(Error::Unsupported(format!(
                        "subproblem with a general operator needs a smooth function, got {:?}",
                        func
                    )));
                }
                let l = op.dense();
                let wl = weight.to_dense() * &l;
                let gram = l.transpose() * wl;
                Mode::Newton {
                    gram: (&gram + gram.transpose()) * 0.5,
                }
            }
        };
        Ok(Self {
            func,
            op,
            weight,
            mode,
            tol: NEWTON_TOL,
            max_iter: NEWTON_MAX_ITER,
        })
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Self {
        self.tol = tol;
        self.max_iter = max_iter;
        self
    }

    pub fn dim(&self) -> usize {
        self.op.in_dim()
    }

    /// Objective `f(p) + ½‖Op p − c‖²_W`.
    pub fn objective(&self, p: &Vector, c: &Vector) -> Option<f64> {
        let r = self.op.apply(p) - c;
        Some(self.func.value(p)? + 0.5 * self.weight.norm_sq(&r))
    }

    pub fn solve(&self, c: &Vector, warm: Option<&Vector>) -> Result<SubproblemSolution> {
        check_dim(self.op.out_dim(), c.len(), "subproblem data")?;
        match &self.mode {
            Mode::Closed { resolvent, scale } => Ok(SubproblemSolution {
                p: resolvent.apply(&(c / *scale))?,
                iterations: 0,
                residual: 0.0,
            }),
            Mode::Newton { gram } => self.newton(gram, c, warm),
        }
    }

    fn newton(
        &self,
        gram: &Matrix,
        c: &Vector,
        warm: Option<&Vector>,
    ) -> Result<SubproblemSolution> {
        let n = self.op.in_dim();
        let b = self.op.adjoint(&self.weight.apply(c));
        let scale = 1.0 + b.norm();
        let mut p = match warm {
            Some(w) if w.len() == n => w.clone(),
            _ => Vector::zeros(n),
        };
        let fgrad = |p: &Vector| -> Vector { self.func.gradient(p).expect("smooth function") };
        let mut gp = gram * &p;
        let mut g = fgrad(&p) + &gp - &b;
        let mut res = g.norm() / scale;
        let mut it = 0;
        while res > self.tol {
            if it >= self.max_iter {
                return Err(Error::InnerSolver {
                    iterations: it,
                    residual: res,
                });
            }
            it += 1;
            let mut h = gram.clone();
            match self.func.hessian(&p).expect("smooth function") {
                Hessian::Diagonal(d) => {
                    for i in 0..n {
                        h[(i, i)] += d[i];
                    }
                }
                Hessian::Dense(m) => h += m,
            }
            let dir = newton_direction(h, &g)?;
            let gd = gram * &dir;
            // The objective is convex along `dir`, so its directional
            // derivative is nondecreasing in the step.
            let slope =
                |t: f64| -> f64 { (fgrad(&(&p + &dir * t)) + &gp + &gd * t - &b).dot(&dir) };
            let t = exact_line_search(slope, g.dot(&dir));
            p += &dir * t;
            gp += &gd * t;
            g = fgrad(&p) + &gp - &b;
            res = g.norm() / scale;
            if !res.is_finite() {
                return Err(Error::NonFinite("newton subproblem"));
            }
        }
        Ok(SubproblemSolution {
            p,
            iterations: it,
            residual: res,
        })
    }
}

/// Root of the nondecreasing directional derivative `slope` with
/// `slope(0) = slope0 < 0`, by bracketing and Illinois regula falsi. The unit
/// step is returned whenever it already satisfies the first-order condition
/// to rounding.
fn exact_line_search(slope: impl Fn(f64) -> f64, slope0: f64) -> f64 {
    if !(slope0 < 0.0) {
        return 1.0;
    }
    let small = 1e-12 * slope0.abs();
    let (mut lo, mut flo) = (0.0, slope0);
    let (mut hi, mut fhi) = (1.0, slope(1.0));
    if fhi.abs() <= small {
        return 1.0;
    }
    let mut doublings = 0;
    while fhi < 0.0 && doublings < 60 {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        fhi = slope(hi);
        doublings += 1;
    }
    if fhi < 0.0 {
        return hi;
    }
    let mut side = 0;
    for _ in 0..100 {
        let t = (lo * fhi - hi * flo) / (fhi - flo);
        let ft = slope(t);
        if ft.abs() <= small || (hi - lo) <= 1e-15 * hi {
            return t;
        }
        if ft < 0.0 {
            lo = t;
            flo = ft;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            fhi = ft;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (lo + hi)
}

fn newton_direction(h: Matrix, g: &Vector) -> Result<Vector> {
    let n = h.nrows();
    if let Some(ch) = Cholesky::new(h.clone()) {
        return Ok(-ch.solve(g));
    }
    // A singular generalized Hessian occurs when the operator is not injective
    // and the function is locally affine; a small shift restores definiteness.
    let shift = 1e-10 * (1.0 + h.diagonal().amax());
    let shifted = h + Matrix::identity(n, n) * shift;
    Cholesky::new(shifted)
        .map(|ch| -ch.solve(g))
        .ok_or_else(|| Error::Singular("subproblem Hessian".into()))
}
