use crate::error::check_dim;
use crate::linops::{LinearOp, Metric};
use crate::prox::{Resolvent, ResolventOp};
use crate::{Error, Matrix, Result, Vector};

/// Dense resolvent `J_{ΥL*BL}` of a composite with a linear monotone `B`.
#[derive(Debug, Clone)]
pub struct ComposedResolvent {
    matrix: Matrix,
}

impl ComposedResolvent {
    /// `J_{ΥL*BL} = Id − ΥL*(LΥL* + B⁻¹)⁻¹L` for an invertible linear `B`.
    pub fn linear(l: &dyn LinearOp, upsilon: &Metric, b: &Matrix) -> Result<Self> {
        check_dim(l.in_dim(), upsilon.dim(), "primal metric")?;
        check_dim(l.out_dim(), b.nrows(), "linear operator")?;
        if !b.is_square() {
            return Err(Error::InvalidParameter("B must be square".into()));
        }
        let binv = b
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("B is not invertible".into()))?;
        let lm = l.dense();
        let ul = upsilon.to_dense() * lm.transpose();
        let inner = &lm * &ul + binv;
        let sol = inner
            .lu()
            .solve(&lm)
            .ok_or_else(|| Error::Singular("L Υ L* + B⁻¹".into()))?;
        let n = l.in_dim();
        Ok(Self {
            matrix: Matrix::identity(n, n) - ul * sol,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn apply(&self, w: &Vector) -> Result<Vector> {
        check_dim(self.matrix.ncols(), w.len(), "composed resolvent input")?;
        Ok(&self.matrix * w)
    }
}

/// Preconditioned Douglas-Rachford for `0 ∈ Ax + L*BLx`.
#[derive(Debug)]
pub struct DrsProblem {
    ja: Resolvent,
    jbl: ComposedResolvent,
}

impl DrsProblem {
    pub fn new(a: &ResolventOp, upsilon: &Metric, jbl: ComposedResolvent) -> Result<Self> {
        check_dim(upsilon.dim(), jbl.matrix.nrows(), "composed resolvent")?;
        Ok(Self {
            ja: a.prepare(upsilon)?,
            jbl,
        })
    }

    /// `zₙ₊₁ = J_{ΥL*BL}(2J_{ΥA}zₙ − zₙ) + zₙ − J_{ΥA}zₙ`.
    pub fn step(&self, z: &Vector) -> Result<Vector> {
        let x = self.ja.apply(z)?;
        let reflected = &x * 2.0 - z;
        Ok(self.jbl.apply(&reflected)? + z - x)
    }

    /// The shadow point `J_{ΥA}z`.
    pub fn shadow(&self, z: &Vector) -> Result<Vector> {
        self.ja.apply(z)
    }
}

/// Functional form of [`DrsProblem::step`].
pub fn drs_step(prob: &DrsProblem, z: &Vector) -> Result<Vector> {
    prob.step(z)
}
