//! First-order operator splitting built around the Split-Douglas-Rachford
//! iteration and the Split-ADMM family.
//!
//! The crate is organised bottom-up:
//!
//! * [`linops`]: linear operators, metrics and the step-size condition checker.
//! * [`prox`]: proximity operators and metric resolvents.
//! * [`solvers`]: SDR, its primal-dual and multi-block forms, preconditioned
//!   Douglas-Rachford, SADMM, two-operator ADMM and the explicit split.
//! * [`experiments`]: total-variation restoration and the Huber + l1 study.
//! * [`oracle`]: independent reference solvers and certification.

// Parameter checks are written `!(x > 0.0)` on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{} vs {} (tol {:e})", a, b, $tol);
    }};
}

pub mod error;
pub mod experiments;
pub mod linops;
pub mod oracle;
pub mod prox;
pub mod solvers;

pub use error::{Error, Result};

/// Dense real vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense real matrix.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Deterministic random generator used by every seeded routine.
pub type Rng = rand_chacha::ChaCha8Rng;

pub(crate) fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

pub(crate) fn ensure_finite(v: &Vector, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
