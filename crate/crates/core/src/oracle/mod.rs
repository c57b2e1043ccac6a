//! Independent reference solvers and numerical certificates.
//!
//! The oracle shares no iteration code with [`crate::solvers`]: nonsmooth
//! problems are solved by accelerated proximal gradient or by a dense
//! semismooth Newton method, linear-quadratic ones by a dense KKT solve, and
//! every answer is certified by a subgradient residual.

mod composite;
mod tv;

use composite::{fista, l1_subgradient_choice, semismooth_newton, HuberFit, LeastSquares, Smooth};
use tv::TvInstance;

use crate::error::check_dim;
use crate::experiments::Gradient2d;
use crate::prox::{huber_derivative, huber_value};
use crate::{Error, Matrix, Result, Vector};

/// Zero threshold used when a solver certifies its own output.
const ACTIVE_TOL: f64 = 1e-12;
/// Relative zero threshold for the jumps of a TV reference solution.
const TV_ACTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    /// Direct solve of the optimality system: a dense linear KKT solve for
    /// linear-quadratic problems and semismooth Newton on the proximal
    /// natural map for ℓ1 composites.
    DenseKkt,
    /// Accelerated proximal gradient with step `1/L`, finished by a Newton
    /// polish on ℓ1 composites.
    ProximalGradient,
    /// Certification only; [`oracle_solve`] rejects it.
    SubgradientCheck,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub method: OracleMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl OracleConfig {
    pub fn new(method: OracleMethod, tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0) || max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "oracle needs tol > 0 and max_iter >= 1 (got {tol}, {max_iter})"
            )));
        }
        Ok(Self {
            method,
            tol,
            max_iter,
        })
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            method: OracleMethod::ProximalGradient,
            tol: 1e-10,
            max_iter: 200_000,
        }
    }
}

/// The problem families the oracle can solve and certify.
#[derive(Debug, Clone)]
pub enum OracleProblem {
    /// `min ½‖Rx − b‖² + α‖x‖₁`.
    Lasso { r: Matrix, b: Vector, alpha: f64 },
    /// `min Σφ_δ(p − z) + α‖Mp‖₁` with `M` symmetric positive definite.
    HuberL1 {
        m: Matrix,
        z: Vector,
        alpha: f64,
        delta: f64,
    },
    /// `min ½xᵀQx − cᵀx` subject to `Ex = d` (`E` may have no rows).
    LinearQuadratic {
        q: Matrix,
        c: Vector,
        e: Matrix,
        d: Vector,
    },
    /// `min_{lo ≤ x ≤ hi} ½‖Rx − b‖² + α‖∇x‖₁` on an `n1 × n2` grid.
    Tv {
        n1: usize,
        n2: usize,
        r: Matrix,
        b: Vector,
        alpha: f64,
        lo: f64,
        hi: f64,
    },
}

impl OracleProblem {
    pub fn dim(&self) -> usize {
        match self {
            OracleProblem::Lasso { r, .. } => r.ncols(),
            OracleProblem::HuberL1 { m, .. } => m.ncols(),
            OracleProblem::LinearQuadratic { q, .. } => q.ncols(),
            OracleProblem::Tv { n1, n2, .. } => n1 * n2,
        }
    }

    /// Objective value at `x`; `+∞` outside the TV box.
    pub fn objective(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len(), "oracle point")?;
        Ok(match self {
            OracleProblem::Lasso { r, b, alpha } => {
                0.5 * (r * x - b).norm_squared() + alpha * x.lp_norm(1)
            }
            OracleProblem::HuberL1 { m, z, alpha, delta } => {
                huber_value(&(x - z), *delta) + alpha * (m * x).lp_norm(1)
            }
            OracleProblem::LinearQuadratic { q, c, .. } => 0.5 * x.dot(&(q * x)) - c.dot(x),
            OracleProblem::Tv { lo, hi, .. } => {
                if x.iter().any(|v| v < lo || v > hi) {
                    f64::INFINITY
                } else {
                    self.tv_instance()?.objective(x)
                }
            }
        })
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        match self {
            OracleProblem::Lasso { r, b, alpha } => {
                check_dim(r.nrows(), b.len(), "lasso data")?;
                if !(*alpha >= 0.0) {
                    return bad("lasso alpha must be >= 0");
                }
            }
            OracleProblem::HuberL1 { m, z, alpha, delta } => {
                check_dim(m.nrows(), m.ncols(), "Huber matrix (square)")?;
                check_dim(m.nrows(), z.len(), "Huber shift")?;
                if !(*alpha >= 0.0) || !(*delta > 0.0) {
                    return bad("Huber problem needs alpha >= 0 and delta > 0");
                }
            }
            OracleProblem::LinearQuadratic { q, c, e, d } => {
                check_dim(q.nrows(), q.ncols(), "quadratic form (square)")?;
                check_dim(q.nrows(), c.len(), "linear term")?;
                check_dim(e.nrows(), d.len(), "constraint right-hand side")?;
                if e.nrows() > 0 {
                    check_dim(q.ncols(), e.ncols(), "constraint matrix")?;
                }
            }
            OracleProblem::Tv {
                n1,
                n2,
                r,
                b,
                alpha,
                lo,
                hi,
            } => {
                check_dim(n1 * n2, r.ncols(), "TV forward operator")?;
                check_dim(r.nrows(), b.len(), "TV observation")?;
                if !(*alpha >= 0.0) || !(lo < hi) {
                    return bad("TV problem needs alpha >= 0 and lo < hi");
                }
            }
        }
        Ok(())
    }

    fn tv_instance(&self) -> Result<TvInstance<'_>> {
        match self {
            OracleProblem::Tv {
                n1,
                n2,
                r,
                b,
                alpha,
                lo,
                hi,
            } => Ok(TvInstance {
                grad: Gradient2d::new(*n1, *n2)?,
                r,
                b,
                alpha: *alpha,
                lo: *lo,
                hi: *hi,
            }),
            _ => Err(Error::Unsupported("not a TV problem".into())),
        }
    }
}

/// A certified reference solution.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub x: Vector,
    pub value: f64,
    /// Relative subgradient residual, see [`subgradient_check`].
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `problem` with the configured method and certifies the result:
/// fails when the relative subgradient residual exceeds `10·tol`.
pub fn oracle_solve(problem: &OracleProblem, config: &OracleConfig) -> Result<OracleSolution> {
    problem.validate()?;
    let (tol, max_iter) = (config.tol, config.max_iter);
    let (x, iterations) = match (problem, config.method) {
        (_, OracleMethod::SubgradientCheck) => {
            return Err(Error::Unsupported(
                "subgradient_check certifies points; choose a solving method".into(),
            ))
        }
        (OracleProblem::Lasso { r, b, alpha }, method) => {
            let s = LeastSquares::new(r, b)?;
            solve_composite(&s, *alpha, method, tol, max_iter)?
        }
        (OracleProblem::HuberL1 { m, z, alpha, delta }, method) => {
            // In `y = Mp` the penalty is separable and the fit is smooth.
            let inv = m
                .clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidMetric("Huber matrix is not SPD".into()))?
                .inverse();
            let s = HuberFit::new(&inv, z, *delta)?;
            let (y, it) = solve_composite(&s, *alpha, method, tol, max_iter)?;
            (&inv * y, it)
        }
        (OracleProblem::LinearQuadratic { q, c, e, d }, OracleMethod::DenseKkt) => {
            (dense_kkt(q, c, e, d)?, 1)
        }
        (OracleProblem::LinearQuadratic { q, c, e, d }, OracleMethod::ProximalGradient) => {
            projected_gradient(q, c, e, d, tol, max_iter)?
        }
        (OracleProblem::Tv { .. }, OracleMethod::ProximalGradient) => {
            problem.tv_instance()?.solve(tol, max_iter)?
        }
        (OracleProblem::Tv { .. }, OracleMethod::DenseKkt) => {
            return Err(Error::Unsupported(
                "the TV oracle runs proximal gradient only".into(),
            ))
        }
    };
    let zero_tol = match problem {
        // First-order TV iterates only approach the flat regions, so the
        // zero set of `∇x` is read off at the solver's accuracy.
        OracleProblem::Tv { .. } => TV_ACTIVE_TOL * (1.0 + x.amax()),
        _ => ACTIVE_TOL,
    };
    let residual = subgradient_check(problem, &x, zero_tol)?;
    let limit = 10.0 * tol;
    if !(residual <= limit) {
        return Err(Error::Certification { residual, limit });
    }
    Ok(OracleSolution {
        value: problem.objective(&x)?,
        x,
        residual,
        iterations,
    })
}

fn solve_composite(
    s: &dyn Smooth,
    alpha: f64,
    method: OracleMethod,
    tol: f64,
    max_iter: usize,
) -> Result<(Vector, usize)> {
    let n = s.dim();
    match method {
        OracleMethod::DenseKkt => semismooth_newton(s, alpha, Vector::zeros(n), tol, max_iter),
        _ => {
            let (y, it) = fista(s, alpha, Vector::zeros(n), tol, max_iter)?;
            let (y, polish) = semismooth_newton(s, alpha, y, tol, 100)?;
            Ok((y, it + polish))
        }
    }
}

/// Solves the KKT system `[Q Eᵀ; E 0][x; λ] = [c; d]` densely.
fn dense_kkt(q: &Matrix, c: &Vector, e: &Matrix, d: &Vector) -> Result<Vector> {
    let (n, m) = (q.ncols(), e.nrows());
    let mut kkt = Matrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(q);
    if m > 0 {
        kkt.view_mut((n, 0), (m, n)).copy_from(e);
        kkt.view_mut((0, n), (n, m)).copy_from(&e.transpose());
    }
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(c);
    rhs.rows_mut(n, m).copy_from(d);
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("KKT matrix is singular".into()))?;
    Ok(sol.rows(0, n).into_owned())
}

/// Accelerated projected gradient on the affine set `{Ex = d}`, started at
/// its least-norm point. Requires `Q` positive semidefinite.
fn projected_gradient(
    q: &Matrix,
    c: &Vector,
    e: &Matrix,
    d: &Vector,
    tol: f64,
    max_iter: usize,
) -> Result<(Vector, usize)> {
    let n = q.ncols();
    let (x0, basis) = if e.nrows() == 0 {
        (Vector::zeros(n), Matrix::identity(n, n))
    } else {
        let x0 = e
            .clone()
            .svd(true, true)
            .solve(d, 1e-12)
            .map_err(|m| Error::Singular(m.to_string()))?;
        // Orthonormal basis of ker E from the null eigenvectors of EᵀE.
        let eig = (e.transpose() * e).symmetric_eigen();
        let cut = 1e-12 * eig.eigenvalues.amax().max(1.0);
        let keep: Vec<usize> = (0..n)
            .filter(|&i| eig.eigenvalues[i].abs() <= cut)
            .collect();
        let basis = Matrix::from_fn(n, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
        (x0, basis)
    };
    let qr = basis.transpose() * q * &basis;
    let cr = basis.transpose() * (c - q * &x0);
    let lip = gram_norm_sym(&qr)?;
    if lip == 0.0 {
        return Ok((x0, 0));
    }
    let step = 1.0 / lip;
    let mut y = Vector::zeros(basis.ncols());
    let mut w = y.clone();
    let mut t = 1.0_f64;
    for k in 1..=max_iter {
        let y_new = &w - (&qr * &w - &cr) * step;
        let diff = &y_new - &y;
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        w = &y_new + &diff * ((t - 1.0) / t_new);
        t = t_new;
        y = y_new;
        if (&qr * &y - &cr).norm() <= tol * (1.0 + cr.norm()) {
            return Ok((&x0 + &basis * y, k));
        }
    }
    Ok((&x0 + &basis * y, max_iter))
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
fn gram_norm_sym(q: &Matrix) -> Result<f64> {
    if q.ncols() == 0 {
        return Ok(0.0);
    }
    Ok(q.clone().symmetric_eigen().eigenvalues.max().max(0.0))
}

/// Relative distance from `0` to `∂F(x)`, normalized by
/// `1 + ‖∇(smooth part)(x)‖`. Components of nonsmooth terms with magnitude
/// at most `zero_tol` are treated as kinks. The value is exact for the
/// lasso, and an upper bound attained at the solution for the others (the
/// subgradient choice is feasible but not always distance-minimizing).
pub fn subgradient_check(problem: &OracleProblem, x: &Vector, zero_tol: f64) -> Result<f64> {
    problem.validate()?;
    check_dim(problem.dim(), x.len(), "certified point")?;
    Ok(match problem {
        OracleProblem::Lasso { r, b, alpha } => {
            let g = r.transpose() * (r * x - b);
            let u = l1_subgradient_choice(&g, *alpha, x, zero_tol);
            (&g + u * *alpha).norm() / (1.0 + g.norm())
        }
        OracleProblem::HuberL1 { m, z, alpha, delta } => {
            let g = (x - z).map(|v| huber_derivative(v, *delta));
            // Choose u componentwise in the coordinates y = Mp, where the
            // penalty is separable, then measure the residual in p.
            let y = m * x;
            let gy = m
                .clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidMetric("Huber matrix is not SPD".into()))?
                .solve(&g);
            let u = l1_subgradient_choice(&gy, *alpha, &y, zero_tol);
            (&g + m * u * *alpha).norm() / (1.0 + g.norm())
        }
        OracleProblem::LinearQuadratic { q, c, e, d } => {
            let g = q * x - c;
            let stat = if e.nrows() == 0 {
                g.norm()
            } else {
                // Remove the component of g in range(Eᵀ), the normal space.
                let et = e.transpose();
                let lam = et
                    .clone()
                    .svd(true, true)
                    .solve(&g, 1e-12)
                    .map_err(|m| Error::Singular(m.to_string()))?;
                (&g - et * lam).norm()
            };
            let feas = if e.nrows() == 0 {
                0.0
            } else {
                (e * x - d).norm()
            };
            (stat + feas) / (1.0 + g.norm())
        }
        OracleProblem::Tv { r, b, .. } => {
            let tv = problem.tv_instance()?;
            let g = r.transpose() * (r * x - b);
            tv.certificate(x, zero_tol) / (1.0 + g.norm())
        }
    })
}

/// A differentiable term whose gradient can be cross-checked numerically.
#[derive(Debug, Clone)]
pub enum SmoothPiece {
    Zero {
        dim: usize,
    },
    /// `Σφ_δ(x − shift)`.
    Huber {
        delta: f64,
        shift: Vector,
    },
    /// `½‖Rx − b‖²`.
    Quadratic {
        r: Matrix,
        b: Vector,
    },
}

impl SmoothPiece {
    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            SmoothPiece::Zero { .. } => 0.0,
            SmoothPiece::Huber { delta, shift } => huber_value(&(x - shift), *delta),
            SmoothPiece::Quadratic { r, b } => 0.5 * (r * x - b).norm_squared(),
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            SmoothPiece::Zero { dim } => Vector::zeros(*dim),
            SmoothPiece::Huber { delta, shift } => (x - shift).map(|v| huber_derivative(v, *delta)),
            SmoothPiece::Quadratic { r, b } => r.transpose() * (r * x - b),
        }
    }
}

/// Largest relative defect `|D_h f(x)ᵢ − ∂ᵢf(x)| / (1 + |∂ᵢf(x)|)` between
/// central differences with step `h` and the analytic gradient.
pub fn finite_difference_check(piece: &SmoothPiece, x: &Vector, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step {h} <= 0")));
    }
    let g = piece.gradient(x);
    check_dim(g.len(), x.len(), "finite-difference point")?;
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (piece.value(&xp) - piece.value(&xm)) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / (1.0 + g[i].abs()));
    }
    Ok(worst)
}
