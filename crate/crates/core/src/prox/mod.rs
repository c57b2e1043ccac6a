//! Proximity operators and metric resolvents.
//!
//! Convention: for a metric `M`, [`ResolventOp::prepare`] returns
//! `J_{MA} = (Id + M A)⁻¹`. When `A = ∂f` this is
//! `argmin_y f(y) + ½‖y − w‖²_{M⁻¹}`, so the metric proximity operator
//! `prox^Υ_f = argmin f(y) + ½‖w − y‖²_Υ` is `J_{Υ⁻¹∂f}`; see [`metric_prox`].

mod subproblem;

use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::Cholesky;

use crate::error::check_dim;
use crate::linops::{Metric, SharedOp};
use crate::{Error, Matrix, Result, Vector};

pub use subproblem::{LeastSquaresProx, SubproblemSolution, NEWTON_MAX_ITER, NEWTON_TOL};

type ScalarCallback = Arc<dyn Fn(f64, &Vector) -> Result<Vector> + Send + Sync>;
type MetricCallback = Arc<dyn Fn(&Metric, &Vector) -> Result<Vector> + Send + Sync>;
type BoundResolvent = Box<dyn Fn(&Vector) -> Result<Vector> + Send + Sync>;

/// What a [`ResolventOp`] represents.
#[derive(Clone)]
pub enum Descriptor {
    /// The zero operator (`f = 0`).
    Zero,
    /// `∂(α‖·‖₁)`.
    L1 { alpha: f64 },
    /// Normal cone of `[lo, hi]^n`.
    Box { lo: f64, hi: f64 },
    /// Gradient of `Σ φ(x_i − z_i)`, with `φ` the Huber function of width `δ`.
    Huber { delta: f64, shift: Vector },
    /// Gradient of `½‖R· − b‖²`.
    Quadratic { op: SharedOp, b: Vector },
    /// A monotone linear operator `S` (`S + Sᵀ ⪰ 0`).
    Linear { matrix: Matrix },
    /// `(∂f)⁻¹ = ∂f*` for the wrapped operator `∂f`.
    Conjugate(Box<ResolventOp>),
    /// `∂(g* ∘ −T*)`, resolved through the subproblem
    /// `argmin_p g(p) + ½‖Tp + M⁻¹u‖²_M`.
    DualComposite { g: Box<ResolventOp>, t: SharedOp },
    /// Product of operators on consecutive blocks.
    Separable {
        parts: Vec<ResolventOp>,
        dims: Vec<usize>,
    },
    /// User resolvent `(t, w) ↦ J_{tA} w`, valid for scalar metrics only.
    Custom(ScalarCallback),
    /// User resolvent that accepts any metric.
    CustomMetric(MetricCallback),
}

impl fmt::Debug for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Descriptor::Zero => write!(f, "Zero"),
            Descriptor::L1 { alpha } => write!(f, "L1({alpha})"),
            Descriptor::Box { lo, hi } => write!(f, "Box[{lo}, {hi}]"),
            Descriptor::Huber { delta, .. } => write!(f, "Huber({delta})"),
            Descriptor::Quadratic { .. } => write!(f, "Quadratic"),
            Descriptor::Linear { .. } => write!(f, "Linear"),
            Descriptor::Conjugate(inner) => write!(f, "Conjugate({inner:?})"),
            Descriptor::DualComposite { g, .. } => write!(f, "DualComposite({g:?})"),
            Descriptor::Separable { parts, .. } => f.debug_list().entries(parts).finish(),
            Descriptor::Custom(_) => write!(f, "Custom"),
            Descriptor::CustomMetric(_) => write!(f, "CustomMetric"),
        }
    }
}

/// A maximally monotone operator represented through its resolvent.
#[derive(Clone, Debug)]
pub struct ResolventOp {
    desc: Descriptor,
}

/// Second-order information of a smooth function, used by Newton solves.
#[derive(Debug, Clone)]
pub enum Hessian {
    Diagonal(Vector),
    Dense(Matrix),
}

/// A resolvent bound to a fixed metric, with any factorization precomputed.
pub struct Resolvent {
    f: BoundResolvent,
    dim: Option<usize>,
}

impl fmt::Debug for Resolvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Resolvent").field("dim", &self.dim).finish()
    }
}

impl Resolvent {
    fn new(
        dim: Option<usize>,
        f: impl Fn(&Vector) -> Result<Vector> + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Box::new(f),
            dim,
        }
    }

    pub fn apply(&self, w: &Vector) -> Result<Vector> {
        if let Some(d) = self.dim {
            check_dim(d, w.len(), "resolvent input")?;
        }
        let y = (self.f)(w)?;
        crate::ensure_finite(&y, "resolvent")?;
        Ok(y)
    }
}

fn require_diagonal(metric: &Metric, what: &str) -> Result<Vector> {
    metric.diagonal_entries().ok_or_else(|| {
        Error::Unsupported(format!(
            "{what} resolvent needs a scalar or diagonal metric"
        ))
    })
}

impl ResolventOp {
    pub fn new(desc: Descriptor) -> Self {
        Self { desc }
    }

    pub fn zero() -> Self {
        Self::new(Descriptor::Zero)
    }

    pub fn l1(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("l1 weight {alpha} < 0")));
        }
        Ok(Self::new(Descriptor::L1 { alpha }))
    }

    pub fn box_indicator(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidParameter(format!("box bounds {lo} > {hi}")));
        }
        Ok(Self::new(Descriptor::Box { lo, hi }))
    }

    pub fn huber(delta: f64, shift: Vector) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("huber width {delta} <= 0")));
        }
        Ok(Self::new(Descriptor::Huber { delta, shift }))
    }

    pub fn quadratic(op: SharedOp, b: Vector) -> Result<Self> {
        check_dim(op.out_dim(), b.len(), "quadratic data")?;
        Ok(Self::new(Descriptor::Quadratic { op, b }))
    }

    pub fn linear(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidParameter(
                "linear operator must be square".into(),
            ));
        }
        Ok(Self::new(Descriptor::Linear { matrix }))
    }

    /// The inverse operator `A⁻¹` (the subdifferential of the conjugate).
    pub fn conjugate(self) -> Self {
        Self::new(Descriptor::Conjugate(Box::new(self)))
    }

    /// `∂(g* ∘ −T*)` where `self = ∂g`.
    pub fn dual_composite(self, t: SharedOp) -> Self {
        Self::new(Descriptor::DualComposite {
            g: Box::new(self),
            t,
        })
    }

    pub fn separable(parts: Vec<ResolventOp>, dims: Vec<usize>) -> Result<Self> {
        if parts.len() != dims.len() || parts.is_empty() {
            return Err(Error::InvalidParameter(
                "separable operator needs one dimension per part".into(),
            ));
        }
        Ok(Self::new(Descriptor::Separable { parts, dims }))
    }

    pub fn custom(f: impl Fn(f64, &Vector) -> Result<Vector> + Send + Sync + 'static) -> Self {
        Self::new(Descriptor::Custom(Arc::new(f)))
    }

    pub fn custom_metric(
        f: impl Fn(&Metric, &Vector) -> Result<Vector> + Send + Sync + 'static,
    ) -> Self {
        Self::new(Descriptor::CustomMetric(Arc::new(f)))
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.desc
    }

    /// Binds the operator to `metric`, returning `J_{metric · A}`.
    pub fn prepare(&self, metric: &Metric) -> Result<Resolvent> {
        let n = metric.dim();
        match &self.desc {
            Descriptor::Zero => Ok(Resolvent::new(Some(n), |w| Ok(w.clone()))),
            Descriptor::L1 { alpha } => {
                let levels = require_diagonal(metric, "l1")? * *alpha;
                Ok(Resolvent::new(Some(n), move |w| {
                    Ok(w.zip_map(&levels, soft_scalar))
                }))
            }
            Descriptor::Box { lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                require_diagonal(metric, "box")?;
                Ok(Resolvent::new(Some(n), move |w| {
                    Ok(w.map(|v| v.clamp(lo, hi)))
                }))
            }
            Descriptor::Huber { delta, shift } => {
                check_dim(n, shift.len(), "huber shift")?;
                let gammas = require_diagonal(metric, "huber")?;
                let (delta, shift) = (*delta, shift.clone());
                Ok(Resolvent::new(Some(n), move |w| {
                    Ok(Vector::from_fn(w.len(), |i, _| {
                        shift[i] + huber_prox_scalar(w[i] - shift[i], gammas[i], delta)
                    }))
                }))
            }
            Descriptor::Quadratic { op, b } => prepare_quadratic(op.clone(), b, metric),
            Descriptor::Linear { matrix } => {
                check_dim(n, matrix.nrows(), "linear operator")?;
                let system = Matrix::identity(n, n) + metric.to_dense() * matrix;
                let lu = system.lu();
                if !lu.is_invertible() {
                    return Err(Error::Singular("Id + M S".into()));
                }
                Ok(Resolvent::new(Some(n), move |w| {
                    lu.solve(w)
                        .ok_or_else(|| Error::Singular("Id + M S".into()))
                }))
            }
            Descriptor::Conjugate(inner) => {
                let inv = metric.inverse();
                let inner = inner.prepare(&inv)?;
                let metric = metric.clone();
                Ok(Resolvent::new(Some(n), move |w| {
                    let y = inner.apply(&metric.solve(w))?;
                    Ok(w - metric.apply(&y))
                }))
            }
            Descriptor::DualComposite { g, t } => {
                check_dim(n, t.out_dim(), "dual composite")?;
                let sub = LeastSquaresProx::new((**g).clone(), t.clone(), metric.clone())?;
                let t = t.clone();
                let metric = metric.clone();
                let warm: Mutex<Option<Vector>> = Mutex::new(None);
                Ok(Resolvent::new(Some(n), move |u| {
                    let c = -metric.solve(u);
                    let mut guard = warm.lock().expect("warm start lock");
                    let sol = sub.solve(&c, guard.as_ref())?;
                    let tp = t.apply(&sol.p);
                    *guard = Some(sol.p);
                    Ok(u + metric.apply(&tp))
                }))
            }
            Descriptor::Separable { parts, dims } => {
                let metrics = metric.split(dims).ok_or_else(|| {
                    Error::Unsupported("metric does not split along operator blocks".into())
                })?;
                let prepared = parts
                    .iter()
                    .zip(&metrics)
                    .enumerate()
                    .map(|(i, (p, m))| p.prepare(m).map_err(|e| e.in_block(i)))
                    .collect::<Result<Vec<_>>>()?;
                let dims = dims.clone();
                Ok(Resolvent::new(Some(n), move |w| {
                    let mut out = Vector::zeros(w.len());
                    let mut off = 0;
                    for (i, (r, &d)) in prepared.iter().zip(&dims).enumerate() {
                        let part = w.rows(off, d).into_owned();
                        let y = r.apply(&part).map_err(|e| e.in_block(i))?;
                        out.rows_mut(off, d).copy_from(&y);
                        off += d;
                    }
                    Ok(out)
                }))
            }
            Descriptor::Custom(cb) => {
                let t = metric.as_scalar().ok_or_else(|| {
                    Error::Unsupported(
                        "custom resolvent is not metric-aware; use a scalar metric".into(),
                    )
                })?;
                let cb = cb.clone();
                Ok(Resolvent::new(Some(n), move |w| cb(t, w)))
            }
            Descriptor::CustomMetric(cb) => {
                let cb = cb.clone();
                let metric = metric.clone();
                Ok(Resolvent::new(Some(n), move |w| cb(&metric, w)))
            }
        }
    }

    /// One-shot `J_{metric · A}(w)`.
    pub fn resolve(&self, metric: &Metric, w: &Vector) -> Result<Vector> {
        self.prepare(metric)?.apply(w)
    }

    /// Function value when the operator is the subdifferential of a known
    /// function.
    pub fn value(&self, x: &Vector) -> Option<f64> {
        match &self.desc {
            Descriptor::Zero => Some(0.0),
            Descriptor::L1 { alpha } => Some(alpha * x.lp_norm(1)),
            Descriptor::Box { lo, hi } => Some(if x.iter().all(|v| *lo <= *v && *v <= *hi) {
                0.0
            } else {
                f64::INFINITY
            }),
            Descriptor::Huber { delta, shift } => Some(huber_value(&(x - shift), *delta)),
            Descriptor::Quadratic { op, b } => Some(0.5 * (op.apply(x) - b).norm_squared()),
            Descriptor::Separable { parts, dims } => {
                let mut off = 0;
                let mut total = 0.0;
                for (p, &d) in parts.iter().zip(dims) {
                    total += p.value(&x.rows(off, d).into_owned())?;
                    off += d;
                }
                Some(total)
            }
            _ => None,
        }
    }

    /// Gradient for smooth descriptors.
    pub fn gradient(&self, x: &Vector) -> Option<Vector> {
        match &self.desc {
            Descriptor::Zero => Some(Vector::zeros(x.len())),
            Descriptor::Huber { delta, shift } => {
                Some((x - shift).map(|r| huber_derivative(r, *delta)))
            }
            Descriptor::Quadratic { op, b } => Some(op.adjoint(&(op.apply(x) - b))),
            Descriptor::Linear { matrix } => Some(matrix * x),
            _ => None,
        }
    }

    /// Generalized Hessian for smooth descriptors. For the Huber function
    /// the kink points take the quadratic branch.
    pub fn hessian(&self, x: &Vector) -> Option<Hessian> {
        match &self.desc {
            Descriptor::Zero => Some(Hessian::Diagonal(Vector::zeros(x.len()))),
            Descriptor::Huber { delta, shift } => Some(Hessian::Diagonal((x - shift).map(|r| {
                if r.abs() <= *delta {
                    1.0 / delta
                } else {
                    0.0
                }
            }))),
            Descriptor::Quadratic { op, .. } => {
                let r = op.dense();
                Some(Hessian::Dense(r.transpose() * r))
            }
            _ => None,
        }
    }
}

fn prepare_quadratic(op: SharedOp, b: &Vector, metric: &Metric) -> Result<Resolvent> {
    let n = op.in_dim();
    check_dim(n, metric.dim(), "quadratic resolvent metric")?;
    let rtb = op.adjoint(b);
    if let Some(t) = metric.as_scalar() {
        let probe = Vector::zeros(n);
        if op.shifted_gram_solve(t, &probe).is_some() {
            return Ok(Resolvent::new(Some(n), move |w| {
                let rhs = w + &rtb * t;
                op.shifted_gram_solve(t, &rhs)
                    .ok_or_else(|| Error::Singular("shifted gram".into()))
            }));
        }
    }
    // (M⁻¹ + R*R) y = M⁻¹ w + R*b
    let r = op.dense();
    let minv = metric.inverse().to_dense();
    let system = &minv + r.transpose() * &r;
    let chol = Cholesky::new(system)
        .ok_or_else(|| Error::Singular("Id + M R*R is not positive definite".into()))?;
    Ok(Resolvent::new(Some(n), move |w| {
        let rhs = &minv * w + &rtb;
        Ok(chol.solve(&rhs))
    }))
}

#[inline]
fn soft_scalar(x: f64, level: f64) -> f64 {
    x.signum() * (x.abs() - level).max(0.0)
}

#[inline]
pub(crate) fn huber_prox_scalar(w: f64, gamma: f64, delta: f64) -> f64 {
    if w.abs() <= delta + gamma {
        w * delta / (delta + gamma)
    } else {
        w - gamma * w.signum()
    }
}

/// Huber function `φ(ξ) = ξ²/(2δ)` for `|ξ| ≤ δ`, `|ξ| − δ/2` otherwise.
#[inline]
pub fn huber_scalar(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        r * r / (2.0 * delta)
    } else {
        r.abs() - delta / 2.0
    }
}

#[inline]
pub fn huber_derivative(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        r / delta
    } else {
        r.signum()
    }
}

/// `Σ φ(r_i)`.
pub fn huber_value(r: &Vector, delta: f64) -> f64 {
    r.iter().map(|&v| huber_scalar(v, delta)).sum()
}

/// Componentwise `sign(ξ)·max(|ξ| − level, 0)`.
pub fn soft_threshold(x: &Vector, level: f64) -> Result<Vector> {
    if !(level >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold level {level} < 0"
        )));
    }
    Ok(x.map(|v| soft_scalar(v, level)))
}

/// Componentwise clamp onto `[lo, hi]`.
pub fn project_box(x: &Vector, lo: f64, hi: f64) -> Result<Vector> {
    if !(lo <= hi) {
        return Err(Error::InvalidParameter(format!("box bounds {lo} > {hi}")));
    }
    Ok(x.map(|v| v.clamp(lo, hi)))
}

/// `J_{τ(∂g)⁻¹}(x) = τ (x/τ − prox_{g/τ}(x/τ))`.
pub fn conjugate_resolvent(prox_g: &ResolventOp, tau: f64, x: &Vector) -> Result<Vector> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("step {tau} <= 0")));
    }
    let scaled = x / tau;
    let p = prox_g.resolve(&Metric::scalar(x.len(), 1.0 / tau)?, &scaled)?;
    Ok((scaled - p) * tau)
}

/// Metric form `J_{ΣB⁻¹}(x) = Σ(Id − J_{Σ⁻¹B})(Σ⁻¹x)`.
pub fn conjugate_resolvent_metric(b: &ResolventOp, sigma: &Metric, x: &Vector) -> Result<Vector> {
    let inner = b.resolve(&sigma.inverse(), &sigma.solve(x))?;
    Ok(x - sigma.apply(&inner))
}

/// `shift + prox_{γφ}(x − shift)` componentwise.
pub fn prox_huber(x: &Vector, gamma: f64, delta: f64, shift: &Vector) -> Result<Vector> {
    if !(gamma > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "huber prox needs gamma > 0 and delta > 0 (got {gamma}, {delta})"
        )));
    }
    check_dim(x.len(), shift.len(), "huber shift")?;
    Ok(Vector::from_fn(x.len(), |i, _| {
        shift[i] + huber_prox_scalar(x[i] - shift[i], gamma, delta)
    }))
}

/// `argmin_y ½‖Ry − b‖² + (1/2τ)‖y − w‖² = (Id + τR*R)⁻¹(w + τR*b)`.
pub fn resolvent_quadratic(r: SharedOp, b: &Vector, tau: f64, w: &Vector) -> Result<Vector> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("step {tau} <= 0")));
    }
    let n = r.in_dim();
    prepare_quadratic(r, b, &Metric::scalar(n, tau)?)?.apply(w)
}

/// `prox^Υ_f(w) = argmin_y f(y) + ½‖w − y‖²_Υ`, with `f_desc = ∂f`.
pub fn metric_prox(f_desc: &ResolventOp, upsilon: &Metric, w: &Vector) -> Result<Vector> {
    f_desc.resolve(&upsilon.inverse(), w)
}
