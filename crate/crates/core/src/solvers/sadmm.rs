use std::sync::Arc;

use super::{enforce_condition, relative_residual, Iterative, SdrProblem, UNCHECKED_WARNING};
use crate::error::check_dim;
use crate::linops::{AdjointOp, Metric, ScaledIdentity, SharedOp};
use crate::prox::{LeastSquaresProx, Resolvent, ResolventOp};
use crate::{Error, Result, Vector};

#[derive(Debug)]
enum PUpdate {
    /// `argmin g(p) + ½‖Tp − c‖²_{Σ⁻¹}`.
    Subproblem(Box<LeastSquaresProx>),
    /// `T = Id`: `prox^{Σ⁻¹}_g = J_{Σ∂g}`.
    Explicit(Resolvent),
}

/// `min_p g(p) + f(KTp)` with `T: K → G`, `K: G → H`, solved by split ADMM.
#[derive(Debug)]
pub struct SadmmProblem {
    g: ResolventOp,
    f: ResolventOp,
    t: SharedOp,
    k: SharedOp,
    upsilon: Metric,
    sigma: Metric,
    p_update: PUpdate,
    /// `prox^Υ_f = J_{Υ⁻¹∂f}`.
    q_prox: Resolvent,
    g_unit: Resolvent,
    f_conj_unit: Resolvent,
    warning: Option<String>,
}

/// Iterate of split ADMM with cached `Tp`, `KTp` and the recovered dual
/// variable `u` of the equivalent SDR iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SadmmState {
    pub p: Vector,
    pub q: Vector,
    pub x: Vector,
    pub y: Vector,
    pub u: Vector,
    pub tp: Vector,
    pub ktp: Vector,
    /// Newton iterations spent in the last p-update.
    pub inner_iterations: usize,
}

impl SadmmProblem {
    /// Checks that `Σ⁻¹ − K*ΥK` is monotone before building.
    pub fn new(
        g: ResolventOp,
        f: ResolventOp,
        t: SharedOp,
        k: SharedOp,
        upsilon: Metric,
        sigma: Metric,
    ) -> Result<Self> {
        Self::validate(&t, &k, &upsilon, &sigma)?;
        enforce_condition(&sigma, &upsilon, k.as_ref())?;
        Self::build(g, f, t, k, upsilon, sigma, false, None)
    }

    pub fn new_unchecked(
        g: ResolventOp,
        f: ResolventOp,
        t: SharedOp,
        k: SharedOp,
        upsilon: Metric,
        sigma: Metric,
    ) -> Result<Self> {
        Self::validate(&t, &k, &upsilon, &sigma)?;
        Self::build(
            g,
            f,
            t,
            k,
            upsilon,
            sigma,
            false,
            Some(UNCHECKED_WARNING.to_string()),
        )
    }

    /// The fully explicit variant (`T = Id`): the p-update is
    /// `prox^{Σ⁻¹}_g(pₙ − ΣK*yₙ)`.
    pub fn explicit(
        g: ResolventOp,
        f: ResolventOp,
        k: SharedOp,
        upsilon: Metric,
        sigma: Metric,
    ) -> Result<Self> {
        let t: SharedOp = Arc::new(ScaledIdentity::identity(k.in_dim()));
        Self::validate(&t, &k, &upsilon, &sigma)?;
        enforce_condition(&sigma, &upsilon, k.as_ref())?;
        Self::build(g, f, t, k, upsilon, sigma, true, None)
    }

    fn validate(t: &SharedOp, k: &SharedOp, upsilon: &Metric, sigma: &Metric) -> Result<()> {
        check_dim(k.in_dim(), t.out_dim(), "K ∘ T composition")?;
        check_dim(k.out_dim(), upsilon.dim(), "primal metric")?;
        check_dim(t.out_dim(), sigma.dim(), "dual metric")
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        g: ResolventOp,
        f: ResolventOp,
        t: SharedOp,
        k: SharedOp,
        upsilon: Metric,
        sigma: Metric,
        explicit: bool,
        warning: Option<String>,
    ) -> Result<Self> {
        let p_update = if explicit {
            PUpdate::Explicit(g.prepare(&sigma)?)
        } else {
            PUpdate::Subproblem(Box::new(LeastSquaresProx::new(
                g.clone(),
                t.clone(),
                sigma.inverse(),
            )?))
        };
        let q_prox = f.prepare(&upsilon.inverse())?;
        let g_unit = g.prepare(&Metric::identity(t.in_dim()))?;
        let f_conj_unit = f
            .clone()
            .conjugate()
            .prepare(&Metric::identity(k.out_dim()))?;
        Ok(Self {
            g,
            f,
            t,
            k,
            upsilon,
            sigma,
            p_update,
            q_prox,
            g_unit,
            f_conj_unit,
            warning,
        })
    }

    pub fn t(&self) -> &SharedOp {
        &self.t
    }

    pub fn k(&self) -> &SharedOp {
        &self.k
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

    pub fn is_explicit(&self) -> bool {
        matches!(self.p_update, PUpdate::Explicit(_))
    }

    /// State at `(p₀, q₀, x₀)` with `u₀ = −Tp₀`. With `q₀ = KTp₀` the
    /// iterates reproduce SDR on the dual started at `(x₀, u₀)`.
    pub fn initial_state(&self, p0: Vector, q0: Vector, x0: Vector) -> Result<SadmmState> {
        check_dim(self.t.in_dim(), p0.len(), "initial p")?;
        check_dim(self.k.out_dim(), q0.len(), "initial q")?;
        check_dim(self.k.out_dim(), x0.len(), "initial multiplier")?;
        let tp = self.t.apply(&p0);
        let ktp = self.k.apply(&tp);
        let y = &x0 + self.upsilon.apply(&(&ktp - &q0));
        Ok(SadmmState {
            u: -&tp,
            p: p0,
            q: q0,
            x: x0,
            y,
            tp,
            ktp,
            inner_iterations: 0,
        })
    }

    /// One iteration in place:
    /// `yₙ = xₙ + Υ(KTpₙ − qₙ)`,
    /// `pₙ₊₁ = argmin g(p) + ½‖Tp − (Tpₙ − ΣK*yₙ)‖²_{Σ⁻¹}`,
    /// `qₙ₊₁ = prox^Υ_f(Υ⁻¹xₙ + KTpₙ₊₁)`,
    /// `xₙ₊₁ = xₙ + Υ(KTpₙ₊₁ − qₙ₊₁)`.
    pub fn step(&self, s: &mut SadmmState) -> Result<()> {
        let y = &s.x + self.upsilon.apply(&(&s.ktp - &s.q));
        let shift = self.sigma.apply(&self.k.adjoint(&y));
        let (p, inner) = match &self.p_update {
            PUpdate::Subproblem(sub) => {
                let sol = sub.solve(&(&s.tp - shift), Some(&s.p))?;
                (sol.p, sol.iterations)
            }
            PUpdate::Explicit(r) => (r.apply(&(&s.p - shift))?, 0),
        };
        let tp = self.t.apply(&p);
        let ktp = self.k.apply(&tp);
        let q = self.q_prox.apply(&(self.upsilon.solve(&s.x) + &ktp))?;
        let x = &s.x + self.upsilon.apply(&(&ktp - &q));
        let u = self.sigma.apply(&self.k.adjoint(&(&x - &s.x))) - &tp;
        *s = SadmmState {
            p,
            q,
            x,
            y,
            u,
            tp,
            ktp,
            inner_iterations: inner,
        };
        Ok(())
    }

    /// `g(p) + f(KTp)` when both values are available.
    pub fn objective(&self, s: &SadmmState) -> Option<f64> {
        Some(self.g.value(&s.p)? + self.f.value(&s.ktp)?)
    }

    /// `max(‖p − J_{∂g}(p − T*K*x)‖, ‖x − J_{∂f*}(x + KTp)‖)`; zero iff
    /// `(p, x)` is a primal-dual solution.
    pub fn kkt_residual(&self, p: &Vector, x: &Vector) -> Result<f64> {
        check_dim(self.t.in_dim(), p.len(), "p")?;
        check_dim(self.k.out_dim(), x.len(), "multiplier")?;
        let tkx = self.t.adjoint(&self.k.adjoint(x));
        let rp = p - self.g_unit.apply(&(p - tkx))?;
        let ktp = self.k.apply(&self.t.apply(p));
        let rx = x - self.f_conj_unit.apply(&(x + ktp))?;
        Ok(rp.norm().max(rx.norm()))
    }

    /// The SDR problem whose iterates this method reproduces:
    /// `A = ∂f*`, `B = ∂(g* ∘ −T*)`, `L = K*`, with the same metrics.
    pub fn dual_sdr_problem(&self) -> Result<SdrProblem> {
        let a = self.f.clone().conjugate();
        let b = self.g.clone().dual_composite(self.t.clone());
        let l: SharedOp = Arc::new(AdjointOp(self.k.clone()));
        if self.warning.is_some() {
            SdrProblem::new_unchecked(&a, &b, l, self.upsilon.clone(), self.sigma.clone())
        } else {
            SdrProblem::new(&a, &b, l, self.upsilon.clone(), self.sigma.clone())
        }
    }
}

/// Functional form of [`SadmmProblem::step`].
pub fn sadmm_step(prob: &SadmmProblem, s: &SadmmState) -> Result<SadmmState> {
    let mut next = s.clone();
    prob.step(&mut next)?;
    Ok(next)
}

/// One step of the explicit variant; `prob` must come from
/// [`SadmmProblem::explicit`].
pub fn explicit_split_step(prob: &SadmmProblem, s: &SadmmState) -> Result<SadmmState> {
    if !prob.is_explicit() {
        return Err(Error::InvalidParameter(
            "explicit_split_step needs a problem built with SadmmProblem::explicit".into(),
        ));
    }
    sadmm_step(prob, s)
}

/// Drives split ADMM; the residual is measured on `(x, u)`, the iterate of
/// the equivalent SDR iteration.
#[derive(Debug)]
pub struct SadmmRunner<'a> {
    pub problem: &'a SadmmProblem,
    pub state: SadmmState,
}

impl<'a> SadmmRunner<'a> {
    pub fn new(problem: &'a SadmmProblem, state: SadmmState) -> Self {
        Self { problem, state }
    }
}

impl Iterative for SadmmRunner<'_> {
    type State = SadmmState;

    fn step(&mut self) -> Result<f64> {
        let (x_old, u_old) = (self.state.x.clone(), self.state.u.clone());
        self.problem.step(&mut self.state)?;
        Ok(relative_residual(
            &[&self.state.x, &self.state.u],
            &[&x_old, &u_old],
        ))
    }

    fn kkt_residual(&self) -> Result<f64> {
        self.problem.kkt_residual(&self.state.p, &self.state.x)
    }

    fn state(&self) -> &SadmmState {
        &self.state
    }

    fn warning(&self) -> Option<String> {
        self.problem.warning.clone()
    }
}

/// `min g(p) + h(v)` subject to `KTp + Jv = 0`, solved by the two-operator
/// split ADMM.
#[derive(Debug)]
pub struct Admm2Problem {
    t: SharedOp,
    k: SharedOp,
    j: SharedOp,
    upsilon: Metric,
    sigma: Metric,
    p_sub: LeastSquaresProx,
    v_sub: LeastSquaresProx,
    g_unit: Resolvent,
    h_unit: Resolvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Admm2State {
    pub p: Vector,
    pub v: Vector,
    pub x: Vector,
    pub y: Vector,
    pub tp: Vector,
    pub ktp: Vector,
    pub jv: Vector,
}

impl Admm2Problem {
    /// Checks that `Σ⁻¹ − K*ΥK` is monotone before building.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        g: ResolventOp,
        h: ResolventOp,
        t: SharedOp,
        k: SharedOp,
        j: SharedOp,
        upsilon: Metric,
        sigma: Metric,
    ) -> Result<Self> {
        check_dim(k.in_dim(), t.out_dim(), "K ∘ T composition")?;
        check_dim(k.out_dim(), upsilon.dim(), "primal metric")?;
        check_dim(t.out_dim(), sigma.dim(), "dual metric")?;
        check_dim(k.out_dim(), j.out_dim(), "J range")?;
        enforce_condition(&sigma, &upsilon, k.as_ref())?;
        Ok(Self {
            p_sub: LeastSquaresProx::new(g.clone(), t.clone(), sigma.inverse())?,
            v_sub: LeastSquaresProx::new(h.clone(), j.clone(), upsilon.clone())?,
            g_unit: g.prepare(&Metric::identity(t.in_dim()))?,
            h_unit: h.prepare(&Metric::identity(j.in_dim()))?,
            t,
            k,
            j,
            upsilon,
            sigma,
        })
    }

    pub fn initial_state(&self, p0: Vector, v0: Vector, x0: Vector) -> Result<Admm2State> {
        check_dim(self.t.in_dim(), p0.len(), "initial p")?;
        check_dim(self.j.in_dim(), v0.len(), "initial v")?;
        check_dim(self.k.out_dim(), x0.len(), "initial multiplier")?;
        let tp = self.t.apply(&p0);
        let ktp = self.k.apply(&tp);
        let jv = self.j.apply(&v0);
        let y = &x0 + self.upsilon.apply(&(&ktp + &jv));
        Ok(Admm2State {
            p: p0,
            v: v0,
            x: x0,
            y,
            tp,
            ktp,
            jv,
        })
    }

    /// `yₙ = xₙ + Υ(KTpₙ + Jvₙ)`,
    /// `pₙ₊₁ = argmin g(p) + ½‖Tp − (Tpₙ − ΣK*yₙ)‖²_{Σ⁻¹}`,
    /// `vₙ₊₁ = argmin h(v) + ½‖Jv + KTpₙ₊₁ + Υ⁻¹xₙ‖²_Υ`,
    /// `xₙ₊₁ = xₙ + Υ(KTpₙ₊₁ + Jvₙ₊₁)`.
    pub fn step(&self, s: &mut Admm2State) -> Result<()> {
        let y = &s.x + self.upsilon.apply(&(&s.ktp + &s.jv));
        let c = &s.tp - self.sigma.apply(&self.k.adjoint(&y));
        let p = self.p_sub.solve(&c, Some(&s.p))?.p;
        let tp = self.t.apply(&p);
        let ktp = self.k.apply(&tp);
        let cv = -(&ktp + self.upsilon.solve(&s.x));
        let v = self.v_sub.solve(&cv, Some(&s.v))?.p;
        let jv = self.j.apply(&v);
        let x = &s.x + self.upsilon.apply(&(&ktp + &jv));
        *s = Admm2State {
            p,
            v,
            x,
            y,
            tp,
            ktp,
            jv,
        };
        Ok(())
    }

    /// Largest of the two stationarity residuals and the feasibility gap
    /// `‖KTp + Jv‖`.
    pub fn kkt_residual(&self, s: &Admm2State) -> Result<f64> {
        let tkx = self.t.adjoint(&self.k.adjoint(&s.x));
        let rp = &s.p - self.g_unit.apply(&(&s.p - tkx))?;
        let jx = self.j.adjoint(&s.x);
        let rv = &s.v - self.h_unit.apply(&(&s.v - jx))?;
        let feas = self.k.apply(&self.t.apply(&s.p)) + self.j.apply(&s.v);
        Ok(rp.norm().max(rv.norm()).max(feas.norm()))
    }
}

/// Functional form of [`Admm2Problem::step`].
pub fn admm2_step(prob: &Admm2Problem, s: &Admm2State) -> Result<Admm2State> {
    let mut next = s.clone();
    prob.step(&mut next)?;
    Ok(next)
}

#[derive(Debug)]
pub struct Admm2Runner<'a> {
    pub problem: &'a Admm2Problem,
    pub state: Admm2State,
}

impl Iterative for Admm2Runner<'_> {
    type State = Admm2State;

    fn step(&mut self) -> Result<f64> {
        let old = self.state.clone();
        self.problem.step(&mut self.state)?;
        Ok(relative_residual(
            &[&self.state.p, &self.state.v, &self.state.x],
            &[&old.p, &old.v, &old.x],
        ))
    }

    fn kkt_residual(&self) -> Result<f64> {
        self.problem.kkt_residual(&self.state)
    }

    fn state(&self) -> &Admm2State {
        &self.state
    }
}
