//! Linear operator and metric algebra.

mod condition;
mod metric;

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;

use crate::error::check_dim;
use crate::{seeded_rng, Matrix, Result, Vector};

pub use condition::{
    check_metric_condition, cocoercivity_constant, ConditionMethod, ConditionReport,
    DENSE_CHECK_LIMIT,
};
pub use metric::Metric;

/// A bounded linear map between finite-dimensional spaces together with its
/// adjoint.
///
/// `apply` and `adjoint` assume correctly sized inputs; problem constructors
/// validate dimensions once so the hot loops do not.
pub trait LinearOp: Send + Sync + fmt::Debug {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    fn adjoint(&self, u: &Vector) -> Vector;

    /// Dense materialization, column by column.
    fn dense(&self) -> Matrix {
        let n = self.in_dim();
        let mut m = Matrix::zeros(self.out_dim(), n);
        let mut e = Vector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            m.set_column(j, &self.apply(&e));
            e[j] = 0.0;
        }
        m
    }

    /// `L*Lx`.
    fn gram_apply(&self, x: &Vector) -> Vector {
        self.adjoint(&self.apply(x))
    }

    /// Writes `L*Lx` into `out` (of length `in_dim`); operators with a fused
    /// allocation-free form override this.
    fn gram_apply_into(&self, x: &Vector, out: &mut Vector) {
        out.copy_from(&self.gram_apply(x));
    }

    /// One power-iteration sweep: writes `out = s·L*Lx` and returns
    /// `(x·out, ‖out‖²)`. Stencil operators fuse this into a single pass.
    fn gram_power_step(&self, x: &Vector, s: f64, out: &mut Vector) -> (f64, f64) {
        self.gram_apply_into(x, out);
        scale_dot_norm_sq(x.as_slice(), out.as_mut_slice(), s)
    }

    /// `Some(s)` when the operator is `s * Id`.
    fn scaled_identity(&self) -> Option<f64> {
        None
    }

    /// Fast solve of `(Id + t L*L) y = rhs` when the operator has one.
    fn shifted_gram_solve(&self, _t: f64, _rhs: &Vector) -> Option<Vector> {
        None
    }
}

pub type SharedOp = Arc<dyn LinearOp>;

/// `s * Id` on R^n.
#[derive(Debug, Clone)]
pub struct ScaledIdentity {
    dim: usize,
    scale: f64,
}

impl ScaledIdentity {
    pub fn new(dim: usize, scale: f64) -> Self {
        Self { dim, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, 1.0)
    }
}

impl LinearOp for ScaledIdentity {
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &Vector) -> Vector {
        if self.scale == 1.0 {
            x.clone()
        } else {
            x * self.scale
        }
    }
    fn adjoint(&self, u: &Vector) -> Vector {
        self.apply(u)
    }
    fn dense(&self) -> Matrix {
        Matrix::identity(self.dim, self.dim) * self.scale
    }
    fn scaled_identity(&self) -> Option<f64> {
        Some(self.scale)
    }
    fn shifted_gram_solve(&self, t: f64, rhs: &Vector) -> Option<Vector> {
        Some(rhs / (1.0 + t * self.scale * self.scale))
    }
}

/// Operator given by an explicit matrix.
#[derive(Debug, Clone)]
pub struct DenseOp {
    matrix: Matrix,
    transpose: Matrix,
}

impl DenseOp {
    pub fn new(matrix: Matrix) -> Self {
        let transpose = matrix.transpose();
        Self { matrix, transpose }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

impl LinearOp for DenseOp {
    fn in_dim(&self) -> usize {
        self.matrix.ncols()
    }
    fn out_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &Vector) -> Vector {
        &self.matrix * x
    }
    fn adjoint(&self, u: &Vector) -> Vector {
        &self.transpose * u
    }
    fn dense(&self) -> Matrix {
        self.matrix.clone()
    }
}

/// `x -> (L_1 x, ..., L_m x)`, the product-space stacking of operators with a
/// common domain.
#[derive(Debug, Clone)]
pub struct StackedOp {
    blocks: Vec<SharedOp>,
    in_dim: usize,
    out_dim: usize,
}

impl StackedOp {
    pub fn new(blocks: Vec<SharedOp>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| crate::Error::InvalidParameter("empty operator stack".into()))?;
        let in_dim = first.in_dim();
        for b in &blocks {
            check_dim(in_dim, b.in_dim(), "stacked operator domain")?;
        }
        let out_dim = blocks.iter().map(|b| b.out_dim()).sum();
        Ok(Self {
            blocks,
            in_dim,
            out_dim,
        })
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.out_dim()).collect()
    }
}

impl LinearOp for StackedOp {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn apply(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.out_dim);
        let mut offset = 0;
        for b in &self.blocks {
            let y = b.apply(x);
            out.rows_mut(offset, y.len()).copy_from(&y);
            offset += y.len();
        }
        out
    }
    fn adjoint(&self, u: &Vector) -> Vector {
        let mut out = Vector::zeros(self.in_dim);
        let mut offset = 0;
        for b in &self.blocks {
            let m = b.out_dim();
            let part = u.rows(offset, m).into_owned();
            out += b.adjoint(&part);
            offset += m;
        }
        out
    }
}

/// The adjoint `L*` of a shared operator.
#[derive(Debug, Clone)]
pub struct AdjointOp(pub SharedOp);

impl LinearOp for AdjointOp {
    fn in_dim(&self) -> usize {
        self.0.out_dim()
    }
    fn out_dim(&self) -> usize {
        self.0.in_dim()
    }
    fn apply(&self, x: &Vector) -> Vector {
        self.0.adjoint(x)
    }
    fn adjoint(&self, u: &Vector) -> Vector {
        self.0.apply(u)
    }
    fn scaled_identity(&self) -> Option<f64> {
        self.0.scaled_identity()
    }
}

/// `outer ∘ inner`.
#[derive(Debug, Clone)]
pub struct ComposedOp {
    pub outer: SharedOp,
    pub inner: SharedOp,
}

impl ComposedOp {
    pub fn new(outer: SharedOp, inner: SharedOp) -> Result<Self> {
        check_dim(outer.in_dim(), inner.out_dim(), "composition")?;
        Ok(Self { outer, inner })
    }
}

impl LinearOp for ComposedOp {
    fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.outer.out_dim()
    }
    fn apply(&self, x: &Vector) -> Vector {
        self.outer.apply(&self.inner.apply(x))
    }
    fn adjoint(&self, u: &Vector) -> Vector {
        self.inner.adjoint(&self.outer.adjoint(u))
    }
}

/// Metric sandwich `Σ^{1/2} L Υ^{1/2}` used by the power-iteration path of the
/// condition checker.
#[derive(Debug)]
pub(crate) struct SandwichOp<'a> {
    pub left: &'a Metric,
    pub op: &'a dyn LinearOp,
    pub right: &'a Metric,
}

impl LinearOp for SandwichOp<'_> {
    fn in_dim(&self) -> usize {
        self.op.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.op.out_dim()
    }
    fn apply(&self, x: &Vector) -> Vector {
        self.left
            .sqrt_apply(&self.op.apply(&self.right.sqrt_apply(x)))
    }
    fn adjoint(&self, u: &Vector) -> Vector {
        self.right
            .sqrt_apply(&self.op.adjoint(&self.left.sqrt_apply(u)))
    }
}

fn uniform_vector(rng: &mut crate::Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Largest relative violation of `<Lx, u> = <x, L*u>` over seeded random
/// pairs.
pub fn adjoint_check(op: &dyn LinearOp, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(crate::Error::InvalidParameter("trials must be >= 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = uniform_vector(&mut rng, op.in_dim());
        let u = uniform_vector(&mut rng, op.out_dim());
        let lx = op.apply(&x);
        let ltu = op.adjoint(&u);
        check_dim(op.out_dim(), lx.len(), "apply output")?;
        check_dim(op.in_dim(), ltu.len(), "adjoint output")?;
        let lhs = lx.dot(&u);
        let rhs = x.dot(&ltu);
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    Ok(worst)
}

/// Outcome of [`power_iteration`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    /// Estimate of `‖L‖²`.
    pub value: f64,
    pub iterations: usize,
    /// `false` when `max_iter` was exhausted; `value` is then the best estimate.
    pub converged: bool,
}

/// Estimates `‖L‖²` by power iteration on `L*L` from a seeded uniform start.
pub fn power_iteration(
    op: &dyn LinearOp,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<NormEstimate> {
    if !(tol > 0.0) {
        return Err(crate::Error::InvalidParameter(format!(
            "power iteration tolerance must be positive, got {tol}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut x = Vector::from_fn(op.in_dim(), |_, _| rng.random_range(0.0..1.0));
    let nrm = x.norm();
    if nrm == 0.0 {
        return Ok(NormEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    x /= nrm;
    let mut estimate = 0.0;
    let mut w = Vector::zeros(x.len());
    // `x` holds the current direction up to the factor `scale`; folding the
    // normalization into the next sweep saves a pass over memory.
    let mut scale = 1.0;
    for k in 1..=max_iter {
        let (dot, wn2) = op.gram_power_step(&x, scale, &mut w);
        let next = scale * dot;
        let wn = wn2.sqrt();
        if wn == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                iterations: k,
                converged: true,
            });
        }
        std::mem::swap(&mut x, &mut w);
        scale = wn.recip();
        if (next - estimate).abs() < tol {
            return Ok(NormEstimate {
                value: next,
                iterations: k,
                converged: true,
            });
        }
        estimate = next;
    }
    Ok(NormEstimate {
        value: estimate,
        iterations: max_iter,
        converged: false,
    })
}

/// Scales `b` by `s` in place and returns `(a·b, b·b)` of the result,
/// keeping independent partial sums per lane so the loop vectorizes.
pub fn scale_dot_norm_sq(a: &[f64], b: &mut [f64], s: f64) -> (f64, f64) {
    const LANES: usize = 16;
    let mut dot = [0.0; LANES];
    let mut nrm = [0.0; LANES];
    let bulk = a.len().min(b.len()) / LANES * LANES;
    let (a_bulk, a_tail) = a.split_at(bulk);
    let (b_bulk, b_tail) = b.split_at_mut(bulk);
    for (ca, cb) in a_bulk
        .chunks_exact(LANES)
        .zip(b_bulk.chunks_exact_mut(LANES))
    {
        let ca: &[f64; LANES] = ca.try_into().expect("exact chunk");
        let cb: &mut [f64; LANES] = cb.try_into().expect("exact chunk");
        for l in 0..LANES {
            let y = cb[l] * s;
            cb[l] = y;
            dot[l] += ca[l] * y;
            nrm[l] += y * y;
        }
    }
    let mut d: f64 = dot.iter().sum();
    let mut n: f64 = nrm.iter().sum();
    for (&x, y) in a_tail.iter().zip(b_tail) {
        *y *= s;
        d += x * *y;
        n += *y * *y;
    }
    (d, n)
}
