//! Total-variation restoration `min ½‖Rx − b‖² + α‖∇x‖₁ + ι_{[0,255]}(x)`.

use std::sync::Arc;

use crate::error::check_dim;
use crate::linops::{LinearOp, Metric, ScaledIdentity, SharedOp};
use crate::prox::ResolventOp;
use crate::solvers::{
    solve, Block, MultiblockProblem, MultiblockRunner, SolveReport, StoppingRule,
};
use crate::{Error, Result, Vector};

use super::imaging::Gradient2d;

/// Slack allowed on `τσ₁‖∇‖² + τσ₂ ≤ 1`.
pub const BOUNDARY_SLACK: f64 = 1e-9;
pub const PIXEL_MIN: f64 = 0.0;
pub const PIXEL_MAX: f64 = 255.0;

/// Step sizes `(τ, σ₁, σ₂)` of the blockwise iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvSteps {
    pub tau: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl TvSteps {
    /// `τ = σ₁ = σ₂ = κ / (10 √(1 + ‖∇‖²))`; `κ = 10` is on the boundary.
    pub fn kappa(kappa: f64, grad_norm_sq: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa {kappa} <= 0")));
        }
        let s = kappa / (10.0 * (1.0 + grad_norm_sq).sqrt());
        Ok(Self {
            tau: s,
            sigma1: s,
            sigma2: s,
        })
    }

    /// Boundary split `σ₁ = (1 − ℓ)/(τ‖∇‖²)`, `σ₂ = ℓ/τ` for `ℓ ∈ (0, 1)`.
    pub fn ell_split(tau: f64, ell: f64, grad_norm_sq: f64) -> Result<Self> {
        if !(tau > 0.0) || !(ell > 0.0 && ell < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "boundary split needs tau > 0 and 0 < ell < 1 (got {tau}, {ell})"
            )));
        }
        Ok(Self {
            tau,
            sigma1: (1.0 - ell) / (tau * grad_norm_sq),
            sigma2: ell / tau,
        })
    }

    /// `τσ₁‖∇‖² + τσ₂`.
    pub fn boundary_value(&self, grad_norm_sq: f64) -> f64 {
        self.tau * self.sigma1 * grad_norm_sq + self.tau * self.sigma2
    }
}

/// A TV restoration instance.
#[derive(Debug, Clone)]
pub struct TvProblem {
    pub n1: usize,
    pub n2: usize,
    /// Degradation operator `R` (blur or identity).
    pub forward: SharedOp,
    pub b: Vector,
    pub alpha: f64,
    pub grad: Arc<Gradient2d>,
    pub grad_norm_sq: f64,
    pub steps: TvSteps,
    pub unchecked: bool,
}

impl TvProblem {
    /// Validates dimensions and, unless `unchecked`, the step-size boundary.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n1: usize,
        n2: usize,
        forward: SharedOp,
        b: Vector,
        alpha: f64,
        grad_norm_sq: f64,
        steps: TvSteps,
        unchecked: bool,
    ) -> Result<Self> {
        let grad = Arc::new(Gradient2d::new(n1, n2)?);
        check_dim(n1 * n2, forward.in_dim(), "forward operator domain")?;
        check_dim(n1 * n2, forward.out_dim(), "forward operator range")?;
        check_dim(n1 * n2, b.len(), "observation")?;
        if !(alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha {alpha} < 0")));
        }
        if !(steps.tau > 0.0 && steps.sigma1 > 0.0 && steps.sigma2 > 0.0) {
            return Err(Error::InvalidParameter(
                "step sizes must be positive".into(),
            ));
        }
        if !(grad_norm_sq > 0.0) {
            return Err(Error::InvalidParameter(
                "gradient norm must be positive".into(),
            ));
        }
        let bv = steps.boundary_value(grad_norm_sq);
        if !unchecked && bv > 1.0 + BOUNDARY_SLACK {
            return Err(Error::ConditionViolated { margin: 1.0 - bv });
        }
        Ok(Self {
            n1,
            n2,
            forward,
            b,
            alpha,
            grad,
            grad_norm_sq,
            steps,
            unchecked,
        })
    }

    pub fn dim(&self) -> usize {
        self.n1 * self.n2
    }

    /// `½‖Rx − b‖² + α‖∇x‖₁`.
    pub fn objective(&self, x: &Vector) -> f64 {
        tv_objective(self.forward.as_ref(), &self.b, self.alpha, &self.grad, x)
    }

    /// The blockwise problem with blocks `(α‖·‖₁, ∇, σ₁)` and
    /// `(ι_box, Id, σ₂)` and `A = ∂(½‖R· − b‖²)`.
    ///
    /// The step-size condition is the scalar inequality validated in
    /// [`TvProblem::new`], so the operator-level check is not repeated.
    pub fn multiblock(&self) -> Result<MultiblockProblem> {
        let n = self.dim();
        let a = ResolventOp::quadratic(self.forward.clone(), self.b.clone())?;
        let blocks = vec![
            Block {
                op: ResolventOp::l1(self.alpha)?,
                l: self.grad.clone(),
                sigma: Metric::scalar(2 * n, self.steps.sigma1)?,
            },
            Block {
                op: ResolventOp::box_indicator(PIXEL_MIN, PIXEL_MAX)?,
                l: Arc::new(ScaledIdentity::identity(n)),
                sigma: Metric::scalar(n, self.steps.sigma2)?,
            },
        ];
        let upsilon = Metric::scalar(n, self.steps.tau)?;
        if self.unchecked {
            MultiblockProblem::new_unchecked(&a, blocks, upsilon)
        } else {
            MultiblockProblem::new_prechecked(&a, blocks, upsilon)
        }
    }
}

/// `½‖Rx − b‖² + α‖∇x‖₁` (anisotropic total variation).
pub fn tv_objective(
    forward: &dyn LinearOp,
    b: &Vector,
    alpha: f64,
    grad: &Gradient2d,
    x: &Vector,
) -> f64 {
    0.5 * (forward.apply(x) - b).norm_squared() + alpha * grad.apply(x).lp_norm(1)
}

/// Outcome of a TV run.
#[derive(Debug, Clone)]
pub struct TvRun {
    pub report: SolveReport,
    pub x: Vector,
    pub objective: f64,
}

/// Runs the blockwise iteration from `x₀ = b` (clamped to the box) with
/// zero duals, recording `F^TV` after every iteration.
pub fn run_tv(prob: &TvProblem, rule: &StoppingRule) -> Result<TvRun> {
    let mb = prob.multiblock()?;
    let x0 = prob.b.map(|v| v.clamp(PIXEL_MIN, PIXEL_MAX));
    let mut runner = MultiblockRunner::new(&mb, mb.initial_state(x0, None)?);
    let report = solve(&mut runner, rule, |s| Some(prob.objective(&s.x)))?;
    let x = runner.state.x;
    Ok(TvRun {
        objective: prob.objective(&x),
        report,
        x,
    })
}
