use crate::{Error, Matrix, Result, Vector};

/// A strongly monotone self-adjoint operator used as a step-size or
/// preconditioner (`Υ`, `Σ`).
///
/// Scalar and diagonal metrics are handled in closed form. Dense metrics keep
/// a symmetric eigendecomposition so inverse, square root and the strong
/// monotonicity constant are all exact.
#[derive(Debug, Clone)]
pub enum Metric {
    Scalar {
        dim: usize,
        value: f64,
    },
    Diagonal(Vector),
    Dense(DenseMetric),
    /// Block-diagonal metric on a product space.
    Block(Vec<Metric>),
}

#[derive(Debug, Clone)]
pub struct DenseMetric {
    matrix: Matrix,
    eigenvectors: Matrix,
    eigenvalues: Vector,
}

impl DenseMetric {
    fn from_parts(eigenvectors: Matrix, eigenvalues: Vector) -> Self {
        let matrix = &eigenvectors * Matrix::from_diagonal(&eigenvalues) * eigenvectors.transpose();
        Self {
            matrix,
            eigenvectors,
            eigenvalues,
        }
    }

    fn apply_fn(&self, f: impl Fn(f64) -> f64, x: &Vector) -> Vector {
        let coeffs = self.eigenvectors.tr_mul(x);
        let scaled = coeffs.zip_map(&self.eigenvalues, |c, l| c * f(l));
        &self.eigenvectors * scaled
    }
}

impl Metric {
    pub fn scalar(dim: usize, value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidMetric(format!(
                "scalar metric must be positive, got {value}"
            )));
        }
        Ok(Metric::Scalar { dim, value })
    }

    pub fn identity(dim: usize) -> Self {
        Metric::Scalar { dim, value: 1.0 }
    }

    pub fn diagonal(d: Vector) -> Result<Self> {
        if d.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidMetric(
                "diagonal metric entries must be positive".into(),
            ));
        }
        Ok(Metric::Diagonal(d))
    }

    /// Dense symmetric positive definite metric. Fails when the Cholesky
    /// factorization hits a nonpositive pivot.
    pub fn dense(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidMetric("dense metric must be square".into()));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::InvalidMetric(format!(
                "dense metric is not symmetric (defect {asym:.3e})"
            )));
        }
        let sym = (&m + m.transpose()) * 0.5;
        if sym.clone().cholesky().is_none() {
            return Err(Error::InvalidMetric(
                "nonpositive pivot in Cholesky factorization".into(),
            ));
        }
        let eig = sym.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidMetric("nonpositive eigenvalue".into()));
        }
        Ok(Metric::Dense(DenseMetric {
            matrix: sym,
            eigenvectors: eig.eigenvectors,
            eigenvalues: eig.eigenvalues,
        }))
    }

    /// Block-diagonal metric `diag(σ_1 Id_{d_1}, ..., σ_m Id_{d_m})`.
    pub fn block_scalars(blocks: &[(usize, f64)]) -> Result<Self> {
        blocks
            .iter()
            .map(|&(d, s)| Metric::scalar(d, s))
            .collect::<Result<Vec<_>>>()
            .map(Metric::Block)
    }

    pub fn dim(&self) -> usize {
        match self {
            Metric::Scalar { dim, .. } => *dim,
            Metric::Diagonal(d) => d.len(),
            Metric::Dense(m) => m.matrix.nrows(),
            Metric::Block(bs) => bs.iter().map(Metric::dim).sum(),
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Metric::Scalar { value, .. } => Some(*value),
            Metric::Block(bs) => {
                let first = bs.first()?.as_scalar()?;
                bs.iter()
                    .all(|b| b.as_scalar() == Some(first))
                    .then_some(first)
            }
            _ => None,
        }
    }

    /// Diagonal entries when the metric is diagonal (scalar, diagonal, or a
    /// block of those).
    pub fn diagonal_entries(&self) -> Option<Vector> {
        match self {
            Metric::Scalar { dim, value } => Some(Vector::from_element(*dim, *value)),
            Metric::Diagonal(d) => Some(d.clone()),
            Metric::Dense(_) => None,
            Metric::Block(bs) => {
                let parts = bs
                    .iter()
                    .map(Metric::diagonal_entries)
                    .collect::<Option<Vec<_>>>()?;
                Some(Vector::from_iterator(
                    self.dim(),
                    parts.iter().flat_map(|p| p.iter().copied()),
                ))
            }
        }
    }

    fn map_blocks(&self, x: &Vector, f: impl Fn(&Metric, &Vector) -> Vector) -> Vector {
        let Metric::Block(bs) = self else {
            unreachable!()
        };
        let mut out = Vector::zeros(x.len());
        let mut off = 0;
        for b in bs {
            let d = b.dim();
            let part = x.rows(off, d).into_owned();
            out.rows_mut(off, d).copy_from(&f(b, &part));
            off += d;
        }
        out
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        match self {
            Metric::Scalar { value, .. } => x * *value,
            Metric::Diagonal(d) => x.component_mul(d),
            Metric::Dense(m) => &m.matrix * x,
            Metric::Block(_) => self.map_blocks(x, |b, p| b.apply(p)),
        }
    }

    /// Applies the inverse metric.
    pub fn solve(&self, x: &Vector) -> Vector {
        match self {
            Metric::Scalar { value, .. } => x / *value,
            Metric::Diagonal(d) => x.component_div(d),
            Metric::Dense(m) => m.apply_fn(|l| 1.0 / l, x),
            Metric::Block(_) => self.map_blocks(x, |b, p| b.solve(p)),
        }
    }

    pub fn sqrt_apply(&self, x: &Vector) -> Vector {
        match self {
            Metric::Scalar { value, .. } => x * value.sqrt(),
            Metric::Diagonal(d) => x.zip_map(d, |a, b| a * b.sqrt()),
            Metric::Dense(m) => m.apply_fn(f64::sqrt, x),
            Metric::Block(_) => self.map_blocks(x, |b, p| b.sqrt_apply(p)),
        }
    }

    /// The inverse metric as a metric.
    pub fn inverse(&self) -> Metric {
        match self {
            Metric::Scalar { dim, value } => Metric::Scalar {
                dim: *dim,
                value: 1.0 / value,
            },
            Metric::Diagonal(d) => Metric::Diagonal(d.map(|v| 1.0 / v)),
            Metric::Dense(m) => Metric::Dense(DenseMetric::from_parts(
                m.eigenvectors.clone(),
                m.eigenvalues.map(|l| 1.0 / l),
            )),
            Metric::Block(bs) => Metric::Block(bs.iter().map(Metric::inverse).collect()),
        }
    }

    /// `s * self` for `s > 0`.
    pub fn scaled(&self, s: f64) -> Metric {
        debug_assert!(s > 0.0);
        match self {
            Metric::Scalar { dim, value } => Metric::Scalar {
                dim: *dim,
                value: value * s,
            },
            Metric::Diagonal(d) => Metric::Diagonal(d * s),
            Metric::Dense(m) => Metric::Dense(DenseMetric::from_parts(
                m.eigenvectors.clone(),
                &m.eigenvalues * s,
            )),
            Metric::Block(bs) => Metric::Block(bs.iter().map(|b| b.scaled(s)).collect()),
        }
    }

    /// Largest `c` with `<Mx, x> >= c ‖x‖²`.
    pub fn strong_monotonicity(&self) -> f64 {
        match self {
            Metric::Scalar { value, .. } => *value,
            Metric::Diagonal(d) => d.min(),
            Metric::Dense(m) => m.eigenvalues.min(),
            Metric::Block(bs) => bs
                .iter()
                .map(Metric::strong_monotonicity)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            Metric::Dense(m) => m.matrix.clone(),
            Metric::Block(_) if self.diagonal_entries().is_none() => {
                let n = self.dim();
                let mut out = Matrix::zeros(n, n);
                let Metric::Block(bs) = self else {
                    unreachable!()
                };
                let mut off = 0;
                for b in bs {
                    let d = b.dim();
                    out.view_mut((off, off), (d, d)).copy_from(&b.to_dense());
                    off += d;
                }
                out
            }
            _ => Matrix::from_diagonal(&self.diagonal_entries().expect("diagonal metric")),
        }
    }

    /// `‖x‖²_M = <x, Mx>`.
    pub fn norm_sq(&self, x: &Vector) -> f64 {
        x.dot(&self.apply(x))
    }

    /// Splits the metric into consecutive diagonal blocks of the given sizes.
    pub fn split(&self, dims: &[usize]) -> Option<Vec<Metric>> {
        if dims.iter().sum::<usize>() != self.dim() {
            return None;
        }
        match self {
            Metric::Scalar { value, .. } => Some(
                dims.iter()
                    .map(|&d| Metric::Scalar {
                        dim: d,
                        value: *value,
                    })
                    .collect(),
            ),
            Metric::Diagonal(v) => {
                let mut off = 0;
                Some(
                    dims.iter()
                        .map(|&d| {
                            let m = Metric::Diagonal(v.rows(off, d).into_owned());
                            off += d;
                            m
                        })
                        .collect(),
                )
            }
            Metric::Block(bs) => {
                let own: Vec<usize> = bs.iter().map(Metric::dim).collect();
                if own == dims {
                    Some(bs.clone())
                } else {
                    self.diagonal_entries()
                        .and_then(|d| Metric::Diagonal(d).split(dims))
                }
            }
            Metric::Dense(_) => None,
        }
    }
}
