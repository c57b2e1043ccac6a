use std::sync::Arc;

use super::{enforce_condition, relative_residual, Iterative, UNCHECKED_WARNING};
use crate::error::check_dim;
use crate::linops::{Metric, SharedOp, StackedOp};
use crate::prox::{Resolvent, ResolventOp};
use crate::{Error, Result, Vector};

/// One dual block `(Bᵢ, Lᵢ, Σᵢ)`.
#[derive(Debug, Clone)]
pub struct Block {
    pub op: ResolventOp,
    pub l: SharedOp,
    pub sigma: Metric,
}

#[derive(Debug)]
struct PreparedBlock {
    l: SharedOp,
    sigma: Metric,
    /// `J_{ΣᵢBᵢ⁻¹}`.
    jconj: Resolvent,
}

/// `0 ∈ Ax + Σᵢ Lᵢ*Bᵢ(Lᵢx)` solved blockwise by the primal-dual form of
/// SDR on the product space.
#[derive(Debug)]
pub struct MultiblockProblem {
    upsilon: Metric,
    ja: Resolvent,
    blocks: Vec<PreparedBlock>,
    warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiblockState {
    pub x: Vector,
    pub v: Vec<Vector>,
}

impl MultiblockProblem {
    /// Builds the problem after checking that `Υ⁻¹ − Σᵢ Lᵢ*ΣᵢLᵢ` is monotone.
    pub fn new(a: &ResolventOp, blocks: Vec<Block>, upsilon: Metric) -> Result<Self> {
        let stacked = Self::validate(&blocks, &upsilon)?;
        let sigma = Metric::Block(blocks.iter().map(|b| b.sigma.clone()).collect());
        enforce_condition(&upsilon, &sigma, &stacked)?;
        Self::build(a, blocks, upsilon, None)
    }

    pub fn new_unchecked(a: &ResolventOp, blocks: Vec<Block>, upsilon: Metric) -> Result<Self> {
        Self::validate(&blocks, &upsilon)?;
        Self::build(a, blocks, upsilon, Some(UNCHECKED_WARNING.to_string()))
    }

    /// For callers that have already established the step-size condition
    /// analytically.
    pub(crate) fn new_prechecked(
        a: &ResolventOp,
        blocks: Vec<Block>,
        upsilon: Metric,
    ) -> Result<Self> {
        Self::validate(&blocks, &upsilon)?;
        Self::build(a, blocks, upsilon, None)
    }

    fn validate(blocks: &[Block], upsilon: &Metric) -> Result<StackedOp> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one block is required".into(),
            ));
        }
        for (i, b) in blocks.iter().enumerate() {
            check_dim(upsilon.dim(), b.l.in_dim(), "block operator domain")
                .map_err(|e| e.in_block(i))?;
            check_dim(b.l.out_dim(), b.sigma.dim(), "block metric").map_err(|e| e.in_block(i))?;
        }
        StackedOp::new(blocks.iter().map(|b| b.l.clone()).collect())
    }

    fn build(
        a: &ResolventOp,
        blocks: Vec<Block>,
        upsilon: Metric,
        warning: Option<String>,
    ) -> Result<Self> {
        let ja = a.prepare(&upsilon)?;
        let blocks = blocks
            .into_iter()
            .enumerate()
            .map(|(i, b)| {
                let jconj =
                    b.op.clone()
                        .conjugate()
                        .prepare(&b.sigma)
                        .map_err(|e| e.in_block(i))?;
                Ok(PreparedBlock {
                    l: b.l,
                    sigma: b.sigma,
                    jconj,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            upsilon,
            ja,
            blocks,
            warning,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// The stacked operator `(L₁, ..., L_m)`.
    pub fn stacked_op(&self) -> Result<SharedOp> {
        Ok(Arc::new(StackedOp::new(
            self.blocks.iter().map(|b| b.l.clone()).collect(),
        )?))
    }

    pub fn initial_state(&self, x0: Vector, v0: Option<Vec<Vector>>) -> Result<MultiblockState> {
        check_dim(self.upsilon.dim(), x0.len(), "initial primal point")?;
        let v = match v0 {
            Some(v) => {
                check_dim(self.blocks.len(), v.len(), "number of dual blocks")?;
                for (i, (vi, b)) in v.iter().zip(&self.blocks).enumerate() {
                    check_dim(b.l.out_dim(), vi.len(), "dual block").map_err(|e| e.in_block(i))?;
                }
                v
            }
            None => self
                .blocks
                .iter()
                .map(|b| Vector::zeros(b.l.out_dim()))
                .collect(),
        };
        Ok(MultiblockState { x: x0, v })
    }

    /// `xₙ₊₁ = J_{ΥA}(xₙ − Υ Σᵢ Lᵢ*vᵢ)`,
    /// `vᵢ ← J_{ΣᵢBᵢ⁻¹}(vᵢ + ΣᵢLᵢ(2xₙ₊₁ − xₙ))`.
    pub fn step(&self, s: &mut MultiblockState) -> Result<()> {
        let mut acc = Vector::zeros(s.x.len());
        for (b, v) in self.blocks.iter().zip(&s.v) {
            acc += b.l.adjoint(v);
        }
        let x_new = self.ja.apply(&(&s.x - self.upsilon.apply(&acc)))?;
        let bar = &x_new * 2.0 - &s.x;
        for (i, (b, v)) in self.blocks.iter().zip(s.v.iter_mut()).enumerate() {
            let arg = &*v + b.sigma.apply(&b.l.apply(&bar));
            *v = b.jconj.apply(&arg).map_err(|e| e.in_block(i))?;
        }
        s.x = x_new;
        Ok(())
    }

    /// Natural-map residual of `(x, v₁, ..., v_m)`, the maximum over the
    /// primal and every dual block.
    pub fn kkt_residual(&self, s: &MultiblockState) -> Result<f64> {
        let mut acc = Vector::zeros(s.x.len());
        for (b, v) in self.blocks.iter().zip(&s.v) {
            acc += b.l.adjoint(v);
        }
        let mut r = (&s.x - self.ja.apply(&(&s.x - self.upsilon.apply(&acc)))?).norm();
        for (i, (b, v)) in self.blocks.iter().zip(&s.v).enumerate() {
            let arg = v + b.sigma.apply(&b.l.apply(&s.x));
            let rv = v - b.jconj.apply(&arg).map_err(|e| e.in_block(i))?;
            r = r.max(rv.norm());
        }
        Ok(r)
    }
}

/// Functional form of [`MultiblockProblem::step`].
pub fn sdr_multiblock_step(
    prob: &MultiblockProblem,
    s: &MultiblockState,
) -> Result<MultiblockState> {
    let mut next = s.clone();
    prob.step(&mut next)?;
    Ok(next)
}

#[derive(Debug)]
pub struct MultiblockRunner<'a> {
    pub problem: &'a MultiblockProblem,
    pub state: MultiblockState,
}

impl<'a> MultiblockRunner<'a> {
    pub fn new(problem: &'a MultiblockProblem, state: MultiblockState) -> Self {
        Self { problem, state }
    }
}

impl Iterative for MultiblockRunner<'_> {
    type State = MultiblockState;

    fn step(&mut self) -> Result<f64> {
        let old = self.state.clone();
        self.problem.step(&mut self.state)?;
        let mut new_refs = vec![&self.state.x];
        new_refs.extend(self.state.v.iter());
        let mut old_refs = vec![&old.x];
        old_refs.extend(old.v.iter());
        Ok(relative_residual(&new_refs, &old_refs))
    }

    fn kkt_residual(&self) -> Result<f64> {
        self.problem.kkt_residual(&self.state)
    }

    fn state(&self) -> &MultiblockState {
        &self.state
    }

    fn warning(&self) -> Option<String> {
        self.problem.warning.clone()
    }
}
