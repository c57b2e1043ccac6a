//! Images as row-major vectors: discrete gradient, circular Gaussian blur,
//! synthetic test images, noise, PSNR and PGM input/output.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::check_dim;
use crate::linops::LinearOp;
use crate::{seeded_rng, Error, Result, Vector};

/// Forward differences with Neumann boundary on an `n1 × n2` image stored
/// row-major. The output stacks the horizontal differences `D₁x` (along
/// columns) on top of the vertical differences `D₂x` (along rows); the last
/// difference in each direction is zero.
#[derive(Debug, Clone, Copy)]
pub struct Gradient2d {
    pub n1: usize,
    pub n2: usize,
}

impl Gradient2d {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::InvalidParameter(format!(
                "gradient needs at least 2×2 pixels, got {n1}×{n2}"
            )));
        }
        Ok(Self { n1, n2 })
    }

    /// Exact `‖∇‖²` for this boundary convention, `(2 + 2cos(π/n1)) + (2 + 2cos(π/n2))`.
    pub fn norm_sq_exact(&self) -> f64 {
        let pi = std::f64::consts::PI;
        (2.0 + 2.0 * (pi / self.n1 as f64).cos()) + (2.0 + 2.0 * (pi / self.n2 as f64).cos())
    }
}

impl LinearOp for Gradient2d {
    fn in_dim(&self) -> usize {
        self.n1 * self.n2
    }

    fn out_dim(&self) -> usize {
        2 * self.n1 * self.n2
    }

    fn apply(&self, x: &Vector) -> Vector {
        let (n1, n2) = (self.n1, self.n2);
        let n = n1 * n2;
        let xs = x.as_slice();
        let mut out = Vector::zeros(2 * n);
        let o = out.as_mut_slice();
        let (d1, d2) = o.split_at_mut(n);
        for i in 0..n1 {
            let row = &xs[i * n2..(i + 1) * n2];
            let d1row = &mut d1[i * n2..(i + 1) * n2];
            for j in 0..n2 - 1 {
                d1row[j] = row[j + 1] - row[j];
            }
        }
        for i in 0..n1 - 1 {
            for j in 0..n2 {
                d2[i * n2 + j] = xs[(i + 1) * n2 + j] - xs[i * n2 + j];
            }
        }
        out
    }

    fn adjoint(&self, v: &Vector) -> Vector {
        let (n1, n2) = (self.n1, self.n2);
        let n = n1 * n2;
        let vs = v.as_slice();
        let (d1, d2) = vs.split_at(n);
        let mut out = Vector::zeros(n);
        let o = out.as_mut_slice();
        for i in 0..n1 {
            let base = i * n2;
            for j in 0..n2 - 1 {
                o[base + j] -= d1[base + j];
                o[base + j + 1] += d1[base + j];
            }
        }
        for i in 0..n1 - 1 {
            for j in 0..n2 {
                o[i * n2 + j] -= d2[i * n2 + j];
                o[(i + 1) * n2 + j] += d2[i * n2 + j];
            }
        }
        out
    }

    /// Fused Neumann Laplacian `∇*∇x`: each pixel accumulates its
    /// difference to every existing 4-neighbour.
    fn gram_apply(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.n1 * self.n2);
        self.gram_apply_into(x, &mut out);
        out
    }

    fn gram_apply_into(&self, x: &Vector, out: &mut Vector) {
        laplacian_sweep(self.n2, x.as_slice(), out.as_mut_slice(), 1.0);
    }

    fn gram_power_step(&self, x: &Vector, s: f64, out: &mut Vector) -> (f64, f64) {
        laplacian_sweep(self.n2, x.as_slice(), out.as_mut_slice(), s)
    }
}

/// Neumann Laplacian `s·∇*∇x` of an image with rows of length `n2`,
/// computed row by row; returns `(x·out, ‖out‖²)` accumulated in the same
/// sweep. Interior columns run in fixed-width lanes with independent partial
/// sums so they vectorize.
fn laplacian_sweep(n2: usize, xs: &[f64], out: &mut [f64], s: f64) -> (f64, f64) {
    const LANES: usize = 16;
    let m = n2 - 1;
    let mut dot_lanes = [0.0; LANES];
    let mut nrm_lanes = [0.0; LANES];
    let (mut dot, mut nrm) = (0.0, 0.0);
    for (i, (o, c)) in out
        .chunks_exact_mut(n2)
        .zip(xs.chunks_exact(n2))
        .enumerate()
    {
        // A missing neighbour row is replaced by the row itself, so its
        // differences vanish.
        let u = if i > 0 { &xs[(i - 1) * n2..i * n2] } else { c };
        let d = xs.get((i + 1) * n2..(i + 2) * n2).unwrap_or(c);
        let mut j = 1;
        while j + LANES <= m {
            let cl: &[f64; LANES] = c[j - 1..j - 1 + LANES].try_into().unwrap();
            let cm: &[f64; LANES] = c[j..j + LANES].try_into().unwrap();
            let cr: &[f64; LANES] = c[j + 1..j + 1 + LANES].try_into().unwrap();
            let uu: &[f64; LANES] = u[j..j + LANES].try_into().unwrap();
            let dd: &[f64; LANES] = d[j..j + LANES].try_into().unwrap();
            let oo: &mut [f64; LANES] = (&mut o[j..j + LANES]).try_into().unwrap();
            for l in 0..LANES {
                let y = s * (4.0 * cm[l] - uu[l] - dd[l] - cl[l] - cr[l]);
                oo[l] = y;
                dot_lanes[l] += cm[l] * y;
                nrm_lanes[l] += y * y;
            }
            j += LANES;
        }
        let mut put = |j: usize, y: f64| {
            let y = s * y;
            o[j] = y;
            dot += c[j] * y;
            nrm += y * y;
        };
        while j < m {
            put(j, 4.0 * c[j] - u[j] - d[j] - c[j - 1] - c[j + 1]);
            j += 1;
        }
        put(0, 3.0 * c[0] - u[0] - d[0] - c[1]);
        put(m, 3.0 * c[m] - u[m] - d[m] - c[m - 1]);
    }
    (
        dot + dot_lanes.iter().sum::<f64>(),
        nrm + nrm_lanes.iter().sum::<f64>(),
    )
}

/// Discrete divergence, the negative adjoint of the gradient.
pub fn div2d(grad: &Gradient2d, v: &Vector) -> Result<Vector> {
    check_dim(grad.out_dim(), v.len(), "divergence input")?;
    Ok(-grad.adjoint(v))
}

/// Discrete gradient of an `n1 × n2` image.
pub fn grad2d(n1: usize, n2: usize, img: &Vector) -> Result<Vector> {
    let g = Gradient2d::new(n1, n2)?;
    check_dim(g.in_dim(), img.len(), "gradient input")?;
    Ok(g.apply(img))
}

/// Normalized `size × size` Gaussian kernel, row-major.
pub fn gaussian_kernel(size: usize, std: f64) -> Result<Vec<f64>> {
    if size.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "kernel size {size} must be odd"
        )));
    }
    if !(std > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kernel std {std} must be positive"
        )));
    }
    let c = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size * size)
        .map(|idx| {
            let (a, b) = ((idx / size) as f64 - c, (idx % size) as f64 - c);
            (-(a * a + b * b) / (2.0 * std * std)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    Ok(k)
}

/// Circular convolution with a centered kernel, diagonalized by the 2-D
/// discrete Fourier transform.
pub struct CircularBlur {
    n1: usize,
    n2: usize,
    kernel: Vec<f64>,
    ksize: usize,
    /// Transfer function (DFT of the wrapped kernel).
    eig: Vec<Complex<f64>>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CircularBlur {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CircularBlur")
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("ksize", &self.ksize)
            .finish()
    }
}

impl CircularBlur {
    pub fn new(n1: usize, n2: usize, kernel: Vec<f64>, ksize: usize) -> Result<Self> {
        if ksize.is_multiple_of(2) || kernel.len() != ksize * ksize {
            return Err(Error::InvalidParameter(
                "kernel must be odd and square".into(),
            ));
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidParameter("empty image".into()));
        }
        let mut planner = FftPlanner::new();
        let mut blur = Self {
            n1,
            n2,
            row_fwd: planner.plan_fft_forward(n2),
            row_inv: planner.plan_fft_inverse(n2),
            col_fwd: planner.plan_fft_forward(n1),
            col_inv: planner.plan_fft_inverse(n1),
            kernel,
            ksize,
            eig: Vec::new(),
        };
        let c = ksize / 2;
        let mut h = vec![Complex::new(0.0, 0.0); n1 * n2];
        for a in 0..ksize {
            for b in 0..ksize {
                let i = (a + n1 * ksize - c) % n1;
                let j = (b + n2 * ksize - c) % n2;
                h[i * n2 + j].re += blur.kernel[a * ksize + b];
            }
        }
        blur.fft2(&mut h, false);
        blur.eig = h;
        Ok(blur)
    }

    /// The Gaussian blur with the given kernel size and standard deviation.
    pub fn gaussian(n1: usize, n2: usize, size: usize, std: f64) -> Result<Self> {
        Self::new(n1, n2, gaussian_kernel(size, std)?, size)
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Eigenvalues of `R*R`, i.e. `|ĥ|²`.
    pub fn gram_eigenvalues(&self) -> Vec<f64> {
        self.eig.iter().map(|e| e.norm_sqr()).collect()
    }

    fn fft2(&self, data: &mut [Complex<f64>], inverse: bool) {
        let (n1, n2) = (self.n1, self.n2);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(data);
        let mut buf = vec![Complex::new(0.0, 0.0); n1];
        for j in 0..n2 {
            for i in 0..n1 {
                buf[i] = data[i * n2 + j];
            }
            col.process(&mut buf);
            for i in 0..n1 {
                data[i * n2 + j] = buf[i];
            }
        }
        if inverse {
            let s = 1.0 / (n1 * n2) as f64;
            data.iter_mut().for_each(|v| *v *= s);
        }
    }

    fn filter(&self, x: &Vector, f: impl Fn(Complex<f64>) -> Complex<f64>) -> Vector {
        let mut data: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft2(&mut data, false);
        for (d, e) in data.iter_mut().zip(&self.eig) {
            *d *= f(*e);
        }
        self.fft2(&mut data, true);
        Vector::from_iterator(data.len(), data.iter().map(|c| c.re))
    }
}

impl LinearOp for CircularBlur {
    fn in_dim(&self) -> usize {
        self.n1 * self.n2
    }

    fn out_dim(&self) -> usize {
        self.n1 * self.n2
    }

    fn apply(&self, x: &Vector) -> Vector {
        self.filter(x, |e| e)
    }

    fn adjoint(&self, u: &Vector) -> Vector {
        self.filter(u, |e| e.conj())
    }

    fn shifted_gram_solve(&self, t: f64, rhs: &Vector) -> Option<Vector> {
        if rhs.len() != self.in_dim() {
            return None;
        }
        Some(self.filter(rhs, |e| Complex::new(1.0 / (1.0 + t * e.norm_sqr()), 0.0)))
    }
}

/// Builds the `n1 × n2` Gaussian blur operator.
pub fn gaussian_blur_op(n1: usize, n2: usize, size: usize, std: f64) -> Result<CircularBlur> {
    CircularBlur::gaussian(n1, n2, size, std)
}

/// Seeded piecewise-constant test image with values in `[0, 255]`: a
/// background level plus a few axis-aligned rectangles and discs.
pub fn synthetic_image(n: usize, seed: u64) -> Result<Vector> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("image size {n} < 2")));
    }
    let mut rng = seeded_rng(seed);
    let mut img = vec![rng.random_range(20.0..60.0_f64).round(); n * n];
    let nf = n as f64;
    for shape in 0..6 {
        let level = rng.random_range(0.0..=255.0_f64).round();
        if shape % 2 == 0 {
            let (r0, c0) = (rng.random_range(0..n), rng.random_range(0..n));
            let (h, w) = (
                rng.random_range(1..=n / 2 + 1),
                rng.random_range(1..=n / 2 + 1),
            );
            for i in r0..(r0 + h).min(n) {
                for j in c0..(c0 + w).min(n) {
                    img[i * n + j] = level;
                }
            }
        } else {
            let (ci, cj) = (rng.random_range(0.0..nf), rng.random_range(0.0..nf));
            let r = rng.random_range(nf / 10.0..nf / 4.0);
            for i in 0..n {
                for j in 0..n {
                    let (di, dj) = (i as f64 - ci, j as f64 - cj);
                    if di * di + dj * dj <= r * r {
                        img[i * n + j] = level;
                    }
                }
            }
        }
    }
    Ok(Vector::from_vec(img))
}

/// Adds zero-mean Gaussian noise of standard deviation `std · 255` (noise
/// specified on the `[0, 1]` intensity scale).
pub fn add_noise(img: &Vector, std: f64, seed: u64) -> Result<Vector> {
    if !(std >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise std {std} < 0")));
    }
    if std == 0.0 {
        return Ok(img.clone());
    }
    let normal =
        Normal::new(0.0, std * 255.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = seeded_rng(seed);
    Ok(img.map(|v| v + normal.sample(&mut rng)))
}

/// `10 log₁₀(peak² / MSE)`; `+∞` when the images coincide.
pub fn psnr(reference: &Vector, x: &Vector, peak: f64) -> Result<f64> {
    check_dim(reference.len(), x.len(), "psnr")?;
    let mse = (reference - x).norm_squared() / reference.len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    })
}

/// Grayscale image with dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    pub data: Vector,
}

/// Reads an 8-bit PGM (`P2` or `P5`). Values are rescaled to `[0, 255]`
/// when the file declares a different maximum.
pub fn read_pgm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    parse_pgm(&bytes)
}

struct PgmReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmReader<'_> {
    fn token(&mut self) -> Result<&str> {
        let b = self.bytes;
        loop {
            while self.pos < b.len() && b[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < b.len() && b[self.pos] == b'#' {
                while self.pos < b.len() && b[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < b.len() && !b[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format("unexpected end of PGM data".into()));
        }
        std::str::from_utf8(&b[start..self.pos])
            .map_err(|_| Error::Format("non-ASCII PGM header".into()))
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| Error::Format(format!("invalid PGM number {t:?}")))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    let mut r = PgmReader { bytes, pos: 0 };
    let magic = r.token()?.to_string();
    let cols = r.number()?;
    let rows = r.number()?;
    let maxval = r.number()?;
    if cols == 0 || rows == 0 || maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!(
            "unsupported PGM geometry {cols}×{rows} max {maxval}"
        )));
    }
    let scale = 255.0 / maxval as f64;
    let n = rows * cols;
    let data = match magic.as_str() {
        "P2" => (0..n)
            .map(|_| r.number().map(|v| v as f64 * scale))
            .collect::<Result<Vec<_>>>()?,
        "P5" => {
            // exactly one whitespace byte separates the header from the raster
            let start = r.pos + 1;
            let raster = bytes
                .get(start..start + n)
                .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
            raster.iter().map(|&b| b as f64 * scale).collect()
        }
        other => return Err(Error::Format(format!("unsupported PGM magic {other:?}"))),
    };
    Ok(Image {
        rows,
        cols,
        data: Vector::from_vec(data),
    })
}

/// Writes a binary `P5` PGM; values are rounded and clamped to `[0, 255]`.
pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    check_dim(img.rows * img.cols, img.data.len(), "image raster")?;
    let mut out = Vec::with_capacity(img.data.len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.cols, img.rows)?;
    out.extend(img.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    fs::write(path, out)?;
    Ok(())
}
