//! `check`: reports whether `Υ⁻¹ − L*ΣL` is monotone for a configured
//! operator and scalar metrics.

use std::fmt::Write as _;
use std::sync::Arc;

use splitdr::experiments::{Gradient2d, TvSteps};
use splitdr::linops::{
    check_metric_condition, ConditionMethod, Metric, ScaledIdentity, SharedOp, StackedOp,
};
use splitdr::solvers::CONDITION_TOL;

use crate::table::num;
use crate::{finish, CheckOperator, CliError, CommandOutput, RunConfig};

/// Steps from `κ`, from the boundary split `(τ, ℓ)`, or given explicitly
/// (each defaulting to 1).
fn steps(cfg: &RunConfig, grad_norm_sq: f64) -> Result<TvSteps, CliError> {
    let cfg_err = |e: splitdr::Error| CliError::Config(e.to_string());
    match (cfg.kappa.as_slice(), cfg.ell) {
        ([k], None) => TvSteps::kappa(*k, grad_norm_sq).map_err(cfg_err),
        ([], Some(ell)) => {
            let tau = cfg
                .tau
                .ok_or_else(|| CliError::Config("the boundary split needs tau".into()))?;
            TvSteps::ell_split(tau, ell, grad_norm_sq).map_err(cfg_err)
        }
        ([], None) => Ok(TvSteps {
            tau: cfg.tau.unwrap_or(1.0),
            sigma1: cfg.sigma1.unwrap_or(1.0),
            sigma2: cfg.sigma2.unwrap_or(1.0),
        }),
        _ => Err(CliError::Config(
            "give one kappa, or ell, or explicit steps".into(),
        )),
    }
}

pub fn check_output(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let n = cfg.n1 * cfg.n2;
    let grad = Gradient2d::new(cfg.n1, cfg.n2)?;
    let grad_norm_sq = grad.norm_sq_exact();
    let s = steps(cfg, grad_norm_sq)?;
    let positive = |v: f64, name: &str| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(CliError::Config(format!(
                "{name} must be positive, got {v}"
            )))
        }
    };
    positive(s.tau, "tau")?;
    positive(s.sigma1, "sigma1")?;
    positive(s.sigma2, "sigma2")?;
    let upsilon = Metric::scalar(n, s.tau)?;
    let (op, sigma, name): (SharedOp, Metric, &str) = match cfg.operator {
        CheckOperator::Gradient => (
            Arc::new(StackedOp::new(vec![
                Arc::new(grad),
                Arc::new(ScaledIdentity::identity(n)),
            ])?),
            Metric::block_scalars(&[(2 * n, s.sigma1), (n, s.sigma2)])?,
            "grad",
        ),
        CheckOperator::Identity => (
            Arc::new(ScaledIdentity::identity(n)),
            Metric::scalar(n, s.sigma1)?,
            "identity",
        ),
    };
    let report = check_metric_condition(&upsilon, &sigma, op.as_ref(), CONDITION_TOL)?;
    let method = match report.method {
        ConditionMethod::DenseEigen => "dense-eigen",
        ConditionMethod::PowerIteration => "power-iteration",
    };
    let mut text = String::new();
    let _ = writeln!(text, "operator: {name} ({}x{})", cfg.n1, cfg.n2);
    let _ = writeln!(text, "tau: {}", num(s.tau));
    let _ = writeln!(text, "sigma1: {}", num(s.sigma1));
    if cfg.operator == CheckOperator::Gradient {
        let _ = writeln!(text, "sigma2: {}", num(s.sigma2));
        let _ = writeln!(
            text,
            "boundary_value: {}",
            num(s.boundary_value(grad_norm_sq))
        );
    }
    let _ = writeln!(text, "method: {method}");
    let _ = writeln!(text, "margin: {}", num(report.margin));
    let _ = writeln!(text, "tolerance: {}", num(report.tolerance));
    let _ = writeln!(text, "monotone: {}", report.is_monotone);
    Ok(CommandOutput {
        text,
        ok: report.is_monotone,
    })
}

pub fn cmd_check(cfg: &RunConfig) -> i32 {
    finish(cfg, check_output(cfg))
}
