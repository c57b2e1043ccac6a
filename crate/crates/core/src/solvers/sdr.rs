use super::{enforce_condition, relative_residual, Iterative, UNCHECKED_WARNING};
use crate::error::check_dim;
use crate::linops::{Metric, SharedOp};
use crate::prox::{Resolvent, ResolventOp};
use crate::{Result, Vector};

/// Find `x` with `0 ∈ Ax + L*B(Lx)`, solved by the split Douglas-Rachford
/// iteration with preconditioners `Υ` (primal) and `Σ` (dual).
#[derive(Debug)]
pub struct SdrProblem {
    l: SharedOp,
    upsilon: Metric,
    sigma: Metric,
    /// `J_{ΥA}`.
    ja: Resolvent,
    /// `J_{Σ⁻¹B}`.
    jb: Resolvent,
    warning: Option<String>,
}

/// Iterate `(xₙ, uₙ)` with the cached `Lxₙ` and the last intermediate
/// `vₙ₋₁`, `zₙ₋₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdrState {
    pub x: Vector,
    pub u: Vector,
    pub lx: Vector,
    pub v: Vector,
    pub z: Vector,
}

impl SdrProblem {
    /// Builds the problem after verifying that `Υ⁻¹ − L*ΣL` is monotone.
    pub fn new(
        a: &ResolventOp,
        b: &ResolventOp,
        l: SharedOp,
        upsilon: Metric,
        sigma: Metric,
    ) -> Result<Self> {
        check_dim(l.in_dim(), upsilon.dim(), "primal metric")?;
        check_dim(l.out_dim(), sigma.dim(), "dual metric")?;
        enforce_condition(&upsilon, &sigma, l.as_ref())?;
        Self::build(a, b, l, upsilon, sigma, None)
    }

    /// Builds the problem without the step-size check; reports carry a
    /// warning.
    pub fn new_unchecked(
        a: &ResolventOp,
        b: &ResolventOp,
        l: SharedOp,
        upsilon: Metric,
        sigma: Metric,
    ) -> Result<Self> {
        check_dim(l.in_dim(), upsilon.dim(), "primal metric")?;
        check_dim(l.out_dim(), sigma.dim(), "dual metric")?;
        Self::build(a, b, l, upsilon, sigma, Some(UNCHECKED_WARNING.to_string()))
    }

    fn build(
        a: &ResolventOp,
        b: &ResolventOp,
        l: SharedOp,
        upsilon: Metric,
        sigma: Metric,
        warning: Option<String>,
    ) -> Result<Self> {
        let ja = a.prepare(&upsilon)?;
        let jb = b.prepare(&sigma.inverse())?;
        Ok(Self {
            l,
            upsilon,
            sigma,
            ja,
            jb,
            warning,
        })
    }

    pub fn op(&self) -> &SharedOp {
        &self.l
    }

    pub fn upsilon(&self) -> &Metric {
        &self.upsilon
    }

    pub fn sigma(&self) -> &Metric {
        &self.sigma
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    pub fn initial_state(&self, x0: Vector, u0: Vector) -> Result<SdrState> {
        check_dim(self.l.in_dim(), x0.len(), "initial primal point")?;
        check_dim(self.l.out_dim(), u0.len(), "initial dual point")?;
        let lx = self.l.apply(&x0);
        Ok(SdrState {
            v: Vector::zeros(u0.len()),
            z: x0.clone(),
            x: x0,
            u: u0,
            lx,
        })
    }

    /// `J_{ΣB⁻¹}(s) = s − ΣJ_{Σ⁻¹B}(Σ⁻¹s)`.
    fn dual_resolvent(&self, s: &Vector) -> Result<Vector> {
        Ok(s - self.sigma.apply(&self.jb.apply(&self.sigma.solve(s))?))
    }

    /// `v = Σ(Id − J_{Σ⁻¹B})(Lx + Σ⁻¹u)`.
    fn dual_point(&self, lx: &Vector, u: &Vector) -> Result<Vector> {
        let w = lx + self.sigma.solve(u);
        let j = self.jb.apply(&w)?;
        Ok(self.sigma.apply(&(w - j)))
    }

    /// One SDR iteration in place. Applies `L` and `L*` once each.
    pub fn step(&self, s: &mut SdrState) -> Result<()> {
        let v = self.dual_point(&s.lx, &s.u)?;
        let z = &s.x - self.upsilon.apply(&self.l.adjoint(&v));
        let x_new = self.ja.apply(&z)?;
        let lx_new = self.l.apply(&x_new);
        let u_new = self.sigma.apply(&(&lx_new - &s.lx)) + &v;
        s.x = x_new;
        s.u = u_new;
        s.lx = lx_new;
        s.v = v;
        s.z = z;
        Ok(())
    }

    /// The map `T: (x, u) ↦ (xₙ₊₁, uₙ₊₁)`; its fixed points are the
    /// Kuhn-Tucker points.
    pub fn apply_t(&self, x: &Vector, u: &Vector) -> Result<(Vector, Vector)> {
        let mut s = self.initial_state(x.clone(), u.clone())?;
        self.step(&mut s)?;
        Ok((s.x, s.u))
    }

    /// Dual start `v₀` that makes the primal-dual form reproduce the SDR
    /// primal sequence started at `(x₀, u₀)`.
    pub fn pds_initial_dual(&self, x0: &Vector, u0: &Vector) -> Result<Vector> {
        check_dim(self.l.in_dim(), x0.len(), "initial primal point")?;
        check_dim(self.l.out_dim(), u0.len(), "initial dual point")?;
        self.dual_point(&self.l.apply(x0), u0)
    }

    /// `xₙ₊₁ = J_{ΥA}(xₙ − ΥL*vₙ)`, `vₙ₊₁ = J_{ΣB⁻¹}(vₙ + ΣL(2xₙ₊₁ − xₙ))`.
    pub fn pds_step(&self, x: &Vector, v: &Vector) -> Result<(Vector, Vector)> {
        check_dim(self.l.in_dim(), x.len(), "primal point")?;
        check_dim(self.l.out_dim(), v.len(), "dual point")?;
        let x_new = self
            .ja
            .apply(&(x - self.upsilon.apply(&self.l.adjoint(v))))?;
        let bar = &x_new * 2.0 - x;
        let v_new = self.dual_resolvent(&(v + self.sigma.apply(&self.l.apply(&bar))))?;
        Ok((x_new, v_new))
    }

    /// `max(‖x − J_{ΥA}(x − ΥL*u)‖, ‖u − J_{ΣB⁻¹}(u + ΣLx)‖)`.
    pub fn kkt_residual(&self, x: &Vector, u: &Vector) -> Result<f64> {
        check_dim(self.l.in_dim(), x.len(), "primal point")?;
        check_dim(self.l.out_dim(), u.len(), "dual point")?;
        let rx = x - self
            .ja
            .apply(&(x - self.upsilon.apply(&self.l.adjoint(u))))?;
        let ru = u - self.dual_resolvent(&(u + self.sigma.apply(&self.l.apply(x))))?;
        Ok(rx.norm().max(ru.norm()))
    }

    /// `‖x − x̂‖²_{Υ⁻¹} + ‖u − û‖²_{Σ⁻¹} + ‖x − x_prev‖²_U` with
    /// `U = Υ⁻¹ − L*ΣL`. Nonincreasing along SDR iterates for any
    /// Kuhn-Tucker pair `(x̂, û)`.
    pub fn fejer_quantity(
        &self,
        x: &Vector,
        u: &Vector,
        x_prev: &Vector,
        xhat: &Vector,
        uhat: &Vector,
    ) -> f64 {
        let dx = x - xhat;
        let du = u - uhat;
        let step = x - x_prev;
        let ldx = self.l.apply(&step);
        let u_norm = step.dot(&self.upsilon.solve(&step)) - ldx.dot(&self.sigma.apply(&ldx));
        dx.dot(&self.upsilon.solve(&dx)) + du.dot(&self.sigma.solve(&du)) + u_norm
    }
}

/// Functional form of [`SdrProblem::step`].
pub fn sdr_step(prob: &SdrProblem, s: &SdrState) -> Result<SdrState> {
    let mut next = s.clone();
    prob.step(&mut next)?;
    Ok(next)
}

/// Functional form of [`SdrProblem::apply_t`].
pub fn apply_t(prob: &SdrProblem, point: (&Vector, &Vector)) -> Result<(Vector, Vector)> {
    prob.apply_t(point.0, point.1)
}

/// Functional form of [`SdrProblem::pds_step`].
pub fn pds_step(prob: &SdrProblem, x: &Vector, v: &Vector) -> Result<(Vector, Vector)> {
    prob.pds_step(x, v)
}

/// Drives [`SdrProblem::step`]; the residual is measured on `(x, u)`.
#[derive(Debug)]
pub struct SdrRunner<'a> {
    pub problem: &'a SdrProblem,
    pub state: SdrState,
}

impl<'a> SdrRunner<'a> {
    pub fn new(problem: &'a SdrProblem, x0: Vector, u0: Vector) -> Result<Self> {
        let state = problem.initial_state(x0, u0)?;
        Ok(Self { problem, state })
    }
}

impl Iterative for SdrRunner<'_> {
    type State = SdrState;

    fn step(&mut self) -> Result<f64> {
        let (x_old, u_old) = (self.state.x.clone(), self.state.u.clone());
        self.problem.step(&mut self.state)?;
        Ok(relative_residual(
            &[&self.state.x, &self.state.u],
            &[&x_old, &u_old],
        ))
    }

    fn kkt_residual(&self) -> Result<f64> {
        self.problem.kkt_residual(&self.state.x, &self.state.u)
    }

    fn state(&self) -> &SdrState {
        &self.state
    }

    fn warning(&self) -> Option<String> {
        self.problem.warning.clone()
    }
}

/// Drives [`SdrProblem::pds_step`]; the state is `(x, v)`.
#[derive(Debug)]
pub struct PdsRunner<'a> {
    pub problem: &'a SdrProblem,
    pub state: (Vector, Vector),
}

impl<'a> PdsRunner<'a> {
    /// Starts from `(x₀, v₀)` with `v₀` mapped from an SDR start `(x₀, u₀)`.
    pub fn from_sdr_start(problem: &'a SdrProblem, x0: Vector, u0: &Vector) -> Result<Self> {
        let v0 = problem.pds_initial_dual(&x0, u0)?;
        Ok(Self {
            problem,
            state: (x0, v0),
        })
    }
}

impl Iterative for PdsRunner<'_> {
    type State = (Vector, Vector);

    fn step(&mut self) -> Result<f64> {
        let (x, v) = self.problem.pds_step(&self.state.0, &self.state.1)?;
        let r = relative_residual(&[&x, &v], &[&self.state.0, &self.state.1]);
        self.state = (x, v);
        Ok(r)
    }

    fn kkt_residual(&self) -> Result<f64> {
        self.problem.kkt_residual(&self.state.0, &self.state.1)
    }

    fn state(&self) -> &(Vector, Vector) {
        &self.state
    }

    fn warning(&self) -> Option<String> {
        self.problem.warning.clone()
    }
}
