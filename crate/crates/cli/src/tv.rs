//! `tv`: total-variation restoration sweeps over seeds and step sizes.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use splitdr::experiments::tv::{BOUNDARY_SLACK, PIXEL_MAX};
use splitdr::experiments::{
    add_noise, gaussian_blur_op, psnr, read_pgm, run_tv, synthetic_image, Gradient2d, TvProblem,
    TvSteps,
};
use splitdr::linops::{power_iteration, ScaledIdentity, SharedOp};
use splitdr::solvers::{Status, StoppingRule};
use splitdr::Vector;

use crate::table::{mean, num, Table};
use crate::{finish, par_map, CliError, CommandOutput, RunConfig};

pub const DEFAULT_SEEDS: usize = 5;
pub const DEFAULT_MAX_ITER: usize = 200_000;
/// Blur kernel size and standard deviation.
pub const BLUR_SIZE: usize = 9;
pub const BLUR_STD: f64 = 4.0;
/// Tolerance of the power iteration estimating `‖∇‖²`.
pub const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITER: usize = 1_000_000;
/// Mixed into the run seed so noise and image draws are independent.
pub const NOISE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub const HEADER: [&str; 11] = [
    "run_id",
    "seed",
    "tau",
    "sigma1",
    "sigma2",
    "iterations",
    "final_residual",
    "objective",
    "psnr",
    "wall_ms",
    "status",
];

/// One degraded observation.
struct Instance {
    seed: u64,
    clean: Vector,
    b: Vector,
}

struct RunResult {
    iterations: usize,
    residual: f64,
    objective: f64,
    psnr: f64,
    wall_ms: f64,
    status: String,
    x: Option<Vector>,
}

/// Step-size grid: the boundary split, explicit steps, or a κ sweep
/// (default `κ = 10`).
fn grid(cfg: &RunConfig, grad_norm_sq: f64) -> Result<Vec<TvSteps>, CliError> {
    let cfg_err = |e: splitdr::Error| CliError::Config(e.to_string());
    if cfg.boundary || cfg.ell.is_some() {
        let (tau, ell) = match (cfg.tau, cfg.ell) {
            (Some(t), Some(l)) => (t, l),
            _ => {
                return Err(CliError::Config(
                    "the boundary split needs tau and ell".into(),
                ))
            }
        };
        return Ok(vec![
            TvSteps::ell_split(tau, ell, grad_norm_sq).map_err(cfg_err)?
        ]);
    }
    match (cfg.tau, cfg.sigma1, cfg.sigma2) {
        (Some(tau), Some(sigma1), Some(sigma2)) => Ok(vec![TvSteps {
            tau,
            sigma1,
            sigma2,
        }]),
        (None, None, None) => {
            let kappas = if cfg.kappa.is_empty() {
                vec![10.0]
            } else {
                cfg.kappa.clone()
            };
            kappas
                .into_iter()
                .map(|k| TvSteps::kappa(k, grad_norm_sq).map_err(cfg_err))
                .collect()
        }
        _ => Err(CliError::Config(
            "explicit steps need tau, sigma1 and sigma2".into(),
        )),
    }
}

/// `‖∇‖²` on an `n1 × n2` grid by power iteration.
pub fn gradient_norm_sq(n1: usize, n2: usize) -> Result<f64, CliError> {
    let grad = Gradient2d::new(n1, n2)?;
    Ok(power_iteration(&grad, POWER_TOL, POWER_MAX_ITER, 0)?.value)
}

fn write_iterate(dir: &Path, run_id: usize, x: &Vector) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut text = String::with_capacity(x.len() * 24);
    for v in x.iter() {
        text.push_str(&num(*v));
        text.push('\n');
    }
    fs::write(dir.join(format!("run_{run_id:04}.txt")), text)?;
    Ok(())
}

/// Runs the sweep and returns the per-run CSV with one mean row per grid
/// point.
pub fn tv_output(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let seeds = cfg.seed_list(DEFAULT_SEEDS);
    let (n1, n2, fixed) = match &cfg.input {
        Some(path) => {
            let img = read_pgm(path)?;
            (img.rows, img.cols, Some(img.data))
        }
        None => (cfg.synthetic, cfg.synthetic, None),
    };
    let grad_norm_sq = gradient_norm_sq(n1, n2)?;
    let steps = grid(cfg, grad_norm_sq)?;
    if !cfg.unchecked {
        for s in &steps {
            let bv = s.boundary_value(grad_norm_sq);
            if bv > 1.0 + BOUNDARY_SLACK {
                return Err(splitdr::Error::ConditionViolated { margin: 1.0 - bv }.into());
            }
        }
    }
    let forward: SharedOp = if cfg.blur {
        Arc::new(gaussian_blur_op(n1, n2, BLUR_SIZE, BLUR_STD)?)
    } else {
        Arc::new(ScaledIdentity::identity(n1 * n2))
    };
    let instances = seeds
        .iter()
        .map(|&seed| {
            let clean = match &fixed {
                Some(img) => img.clone(),
                None => synthetic_image(n1, seed)?,
            };
            let b = add_noise(&forward.apply(&clean), cfg.noise, seed ^ NOISE_SALT)?;
            Ok(Instance { seed, clean, b })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rule = StoppingRule::new(cfg.eps, cfg.max_iter.unwrap_or(DEFAULT_MAX_ITER))?;
    let jobs: Vec<(usize, usize)> = (0..steps.len())
        .flat_map(|g| (0..instances.len()).map(move |i| (g, i)))
        .collect();
    let keep_iterates = cfg.dump_iterates.is_some();
    let results = par_map(cfg, jobs.clone(), |(g, i)| {
        let inst = &instances[i];
        let outcome = TvProblem::new(
            n1,
            n2,
            forward.clone(),
            inst.b.clone(),
            cfg.alpha,
            grad_norm_sq,
            steps[g],
            cfg.unchecked,
        )
        .and_then(|p| run_tv(&p, &rule));
        match outcome {
            Ok(run) => RunResult {
                iterations: run.report.iterations,
                residual: run.report.final_residual(),
                objective: run.objective,
                psnr: psnr(&inst.clean, &run.x, PIXEL_MAX).unwrap_or(f64::NAN),
                wall_ms: run.report.wall_time.as_secs_f64() * 1e3,
                status: match run.report.status {
                    Status::Converged => "converged".into(),
                    Status::MaxIter => "max_iter".into(),
                },
                x: keep_iterates.then_some(run.x),
            },
            Err(e) => RunResult {
                iterations: 0,
                residual: f64::NAN,
                objective: f64::NAN,
                psnr: f64::NAN,
                wall_ms: 0.0,
                status: format!("error: {e}"),
                x: None,
            },
        }
    })?;

    let mut table = Table::new(&HEADER)?;
    let mut ok = true;
    for (run_id, ((g, i), r)) in jobs.iter().zip(&results).enumerate() {
        let s = &steps[*g];
        ok &= r.status == "converged";
        table.row(&[
            run_id.to_string(),
            instances[*i].seed.to_string(),
            num(s.tau),
            num(s.sigma1),
            num(s.sigma2),
            r.iterations.to_string(),
            num(r.residual),
            num(r.objective),
            num(r.psnr),
            num(r.wall_ms),
            r.status.clone(),
        ])?;
        if let (Some(dir), Some(x)) = (&cfg.dump_iterates, &r.x) {
            write_iterate(dir, run_id, x)?;
        }
    }
    for (g, s) in steps.iter().enumerate() {
        let rs: Vec<&RunResult> = jobs
            .iter()
            .zip(&results)
            .filter(|((gi, _), _)| *gi == g)
            .map(|(_, r)| r)
            .collect();
        let m = |f: fn(&RunResult) -> f64| mean(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
        let all = rs.iter().all(|r| r.status == "converged");
        table.row(&[
            "mean".into(),
            String::new(),
            num(s.tau),
            num(s.sigma1),
            num(s.sigma2),
            num(m(|r| r.iterations as f64)),
            num(m(|r| r.residual)),
            num(m(|r| r.objective)),
            num(m(|r| r.psnr)),
            num(m(|r| r.wall_ms)),
            if all {
                "converged".into()
            } else {
                "incomplete".into()
            },
        ])?;
    }
    Ok(CommandOutput {
        text: table.finish()?,
        ok,
    })
}

pub fn cmd_tv(cfg: &RunConfig) -> i32 {
    finish(cfg, tv_output(cfg))
}
