use super::{power_iteration, LinearOp, Metric, SandwichOp};
use crate::error::check_dim;
use crate::{Error, Matrix, Result};

/// Above this total dimension (`in_dim + out_dim`) only the power-iteration
/// path runs.
pub const DENSE_CHECK_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionMethod {
    DenseEigen,
    PowerIteration,
}

/// Result of checking that `Υ⁻¹ − L*ΣL` is monotone.
///
/// `margin` is `1 − ‖Σ^{1/2} L Υ^{1/2}‖²`. On the dense path it is computed as
/// the smallest eigenvalue of `Id − Υ^{1/2} L*ΣL Υ^{1/2}`, which is the same
/// quantity, so both paths report comparable numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub is_monotone: bool,
    pub margin: f64,
    pub method: ConditionMethod,
    pub tolerance: f64,
}

/// Checks the step-size condition `Υ⁻¹ − L*ΣL ⪰ 0`, equivalently
/// `‖Σ^{1/2} L Υ^{1/2}‖ ≤ 1`.
pub fn check_metric_condition(
    upsilon: &Metric,
    sigma: &Metric,
    op: &dyn LinearOp,
    tol: f64,
) -> Result<ConditionReport> {
    check_metric_condition_with(upsilon, sigma, op, tol, None)
}

pub(crate) fn check_metric_condition_with(
    upsilon: &Metric,
    sigma: &Metric,
    op: &dyn LinearOp,
    tol: f64,
    force: Option<ConditionMethod>,
) -> Result<ConditionReport> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "condition tolerance must be nonnegative, got {tol}"
        )));
    }
    check_dim(op.in_dim(), upsilon.dim(), "primal metric")?;
    check_dim(op.out_dim(), sigma.dim(), "dual metric")?;
    let method = force.unwrap_or(if op.in_dim() + op.out_dim() <= DENSE_CHECK_LIMIT {
        ConditionMethod::DenseEigen
    } else {
        ConditionMethod::PowerIteration
    });
    let margin = match method {
        ConditionMethod::DenseEigen => {
            let n = op.in_dim();
            let l = op.dense();
            let sl = sigma.to_dense() * &l;
            let sqrt_u = sqrt_dense(upsilon);
            let inner = sqrt_u.transpose() * l.transpose() * sl * &sqrt_u;
            let defect = Matrix::identity(n, n) - inner;
            let defect = (&defect + defect.transpose()) * 0.5;
            defect.symmetric_eigen().eigenvalues.min()
        }
        ConditionMethod::PowerIteration => {
            let sandwich = SandwichOp {
                left: sigma,
                op,
                right: upsilon,
            };
            1.0 - power_iteration(&sandwich, 1e-12, 100_000, 0)?.value
        }
    };
    Ok(ConditionReport {
        is_monotone: margin >= -tol,
        margin,
        method,
        tolerance: tol,
    })
}

fn sqrt_dense(m: &Metric) -> Matrix {
    let n = m.dim();
    let mut out = Matrix::zeros(n, n);
    let mut e = crate::Vector::zeros(n);
    for j in 0..n {
        e[j] = 1.0;
        out.set_column(j, &m.sqrt_apply(&e));
        e[j] = 0.0;
    }
    out
}

/// Cocoercivity constant `τσ/(τ+σ)` of the block operator
/// `V: (x,u) ↦ (Υ⁻¹x − L*u, Σ⁻¹u − Lx)`, where `τ`, `σ` are the strong
/// monotonicity constants of the metrics.
pub fn cocoercivity_constant(upsilon: &Metric, sigma: &Metric) -> Result<f64> {
    let tau = upsilon.strong_monotonicity();
    let s = sigma.strong_monotonicity();
    if !(tau > 0.0 && s > 0.0) {
        return Err(Error::InvalidParameter(
            "metrics must have positive strong monotonicity".into(),
        ));
    }
    Ok(tau * s / (tau + s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{DenseOp, ScaledIdentity};
    use crate::Vector;

    #[test]
    fn identity_boundary() {
        let r = check_metric_condition(
            &Metric::identity(4),
            &Metric::identity(4),
            &ScaledIdentity::identity(4),
            1e-12,
        )
        .unwrap();
        assert!(r.is_monotone);
        assert_close!(r.margin, 0.0, 1e-14);
        assert_eq!(r.method, ConditionMethod::DenseEigen);
    }

    #[test]
    fn violated_condition() {
        let r = check_metric_condition(
            &Metric::scalar(3, 2.0).unwrap(),
            &Metric::identity(3),
            &ScaledIdentity::identity(3),
            1e-12,
        )
        .unwrap();
        assert!(!r.is_monotone);
        assert_close!(r.margin, -1.0, 1e-12);
    }

    #[test]
    fn dense_and_power_paths_agree() {
        let l = DenseOp::new(Matrix::from_row_slice(
            3,
            2,
            &[0.4, -0.2, 0.1, 0.3, -0.5, 0.25],
        ));
        let u = Metric::diagonal(Vector::from_vec(vec![0.7, 1.3])).unwrap();
        let s = Metric::scalar(3, 0.9).unwrap();
        let d = check_metric_condition_with(&u, &s, &l, 0.0, Some(ConditionMethod::DenseEigen))
            .unwrap();
        let p = check_metric_condition_with(&u, &s, &l, 0.0, Some(ConditionMethod::PowerIteration))
            .unwrap();
        assert_close!(d.margin, p.margin, 1e-6);
    }

    #[test]
    fn cocoercivity_examples() {
        let one = Metric::identity(2);
        assert_close!(cocoercivity_constant(&one, &one).unwrap(), 0.5, 1e-15);
        let three = Metric::scalar(2, 3.0).unwrap();
        assert_close!(cocoercivity_constant(&one, &three).unwrap(), 0.75, 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let l = ScaledIdentity::identity(2);
        assert!(
            check_metric_condition(&Metric::identity(3), &Metric::identity(2), &l, 0.0).is_err()
        );
        assert!(
            check_metric_condition(&Metric::identity(2), &Metric::identity(2), &l, -1.0).is_err()
        );
    }
}
