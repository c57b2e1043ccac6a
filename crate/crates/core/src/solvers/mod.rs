//! Iteration state machines and the generic driver.
//!
//! Every method exposes a problem type holding prepared resolvents and a plain
//! state value. Runners wrap `(problem, state)` pairs and implement
//! [`Iterative`], which is all [`solve`] needs.

mod drs;
mod multiblock;
mod sadmm;
mod sdr;

use std::time::{Duration, Instant};

use crate::linops::{check_metric_condition, LinearOp, Metric};
use crate::{Error, Result, Vector};

pub use drs::{drs_step, ComposedResolvent, DrsProblem};
pub use multiblock::{
    sdr_multiblock_step, Block, MultiblockProblem, MultiblockRunner, MultiblockState,
};
pub use sadmm::{
    admm2_step, explicit_split_step, sadmm_step, Admm2Problem, Admm2Runner, Admm2State,
    SadmmProblem, SadmmRunner, SadmmState,
};
pub use sdr::{apply_t, pds_step, sdr_step, PdsRunner, SdrProblem, SdrRunner, SdrState};

/// Absolute tolerance on the normalized step-size margin used by problem
/// constructors.
pub const CONDITION_TOL: f64 = 1e-9;

/// `sqrt(‖new − old‖² / ‖old‖²)` over a tuple of blocks; the absolute change
/// `‖new − old‖` when `old = 0`.
pub fn relative_residual(new: &[&Vector], old: &[&Vector]) -> f64 {
    debug_assert_eq!(new.len(), old.len());
    let mut diff = 0.0;
    let mut base = 0.0;
    for (n, o) in new.iter().zip(old) {
        diff += (*n - *o).norm_squared();
        base += o.norm_squared();
    }
    if base == 0.0 {
        diff.sqrt()
    } else {
        (diff / base).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualKind {
    RelativeChange,
    Kkt,
}

/// When to stop iterating.
///
/// `tol = 0` is accepted and means "never stop early": the run always ends
/// with [`Status::MaxIter`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub tol: f64,
    pub max_iter: usize,
    pub residual: ResidualKind,
}

impl StoppingRule {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tolerance {tol} must be >= 0"
            )));
        }
        if max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(Self {
            tol,
            max_iter,
            residual: ResidualKind::RelativeChange,
        })
    }

    pub fn with_residual(mut self, kind: ResidualKind) -> Self {
        self.residual = kind;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub status: Status,
    pub residual_history: Vec<f64>,
    pub objective_history: Option<Vec<f64>>,
    pub wall_time: Duration,
    /// Set when the problem was built without the step-size check.
    pub warning: Option<String>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// A method that can be advanced one iteration at a time.
pub trait Iterative {
    type State;

    /// Performs one iteration and returns the relative change of the
    /// iterate pair.
    fn step(&mut self) -> Result<f64>;

    /// Natural-map residual of the current iterate; zero iff it is a
    /// Kuhn-Tucker point.
    fn kkt_residual(&self) -> Result<f64>;

    fn state(&self) -> &Self::State;

    fn warning(&self) -> Option<String> {
        None
    }
}

/// Runs `stepper` until the chosen residual drops to `rule.tol` or
/// `rule.max_iter` iterations have been made. `objective` is called after
/// every iteration; returning `Some` records a value.
pub fn solve<I: Iterative>(
    stepper: &mut I,
    rule: &StoppingRule,
    mut objective: impl FnMut(&I::State) -> Option<f64>,
) -> Result<SolveReport> {
    let start = Instant::now();
    let mut residuals = Vec::new();
    let mut objectives = Vec::new();
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    for n in 1..=rule.max_iter {
        let change = stepper.step().map_err(|e| e.at_iteration(n))?;
        let r = match rule.residual {
            ResidualKind::RelativeChange => change,
            ResidualKind::Kkt => stepper.kkt_residual().map_err(|e| e.at_iteration(n))?,
        };
        iterations = n;
        residuals.push(r);
        if let Some(f) = objective(stepper.state()) {
            objectives.push(f);
        }
        if rule.tol > 0.0 && r <= rule.tol {
            status = Status::Converged;
            break;
        }
    }
    Ok(SolveReport {
        iterations,
        status,
        residual_history: residuals,
        objective_history: (!objectives.is_empty()).then_some(objectives),
        wall_time: start.elapsed(),
        warning: stepper.warning(),
    })
}

/// Runs the step-size check for `Υ⁻¹ − L*ΣL` and converts a violation into an
/// error.
pub(crate) fn enforce_condition(upsilon: &Metric, sigma: &Metric, op: &dyn LinearOp) -> Result<()> {
    let report = check_metric_condition(upsilon, sigma, op, CONDITION_TOL)?;
    if report.is_monotone {
        Ok(())
    } else {
        Err(Error::ConditionViolated {
            margin: report.margin,
        })
    }
}

pub(crate) const UNCHECKED_WARNING: &str =
    "step-size condition not verified; convergence is not guaranteed";
