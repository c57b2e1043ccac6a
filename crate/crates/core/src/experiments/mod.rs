//! Problem builders and measurement code for total-variation restoration and
//! the Huber + ℓ1 spectral-split study.

pub mod huber;
pub mod imaging;
pub mod tv;

pub use huber::{
    build_huber, huber_p_update, improvement, run_huber, HuberClass, HuberOptions, HuberProblem,
    HuberRun,
};
pub use imaging::{
    add_noise, div2d, gaussian_blur_op, gaussian_kernel, grad2d, parse_pgm, psnr, read_pgm,
    synthetic_image, write_pgm, CircularBlur, Gradient2d, Image,
};
pub use tv::{run_tv, tv_objective, TvProblem, TvRun, TvSteps};

#[cfg(test)]
mod tests;
