//! `huber`: the Huber + l1 spectral-split sweep over `N × class × η × seed`.

use splitdr::experiments::{
    build_huber, improvement, run_huber, HuberClass, HuberOptions, HuberProblem,
};
use splitdr::oracle::{oracle_solve, OracleConfig, OracleProblem};
use splitdr::solvers::{Status, StoppingRule};

use crate::table::{mean, num, Table};
use crate::{finish, par_map, CliError, CommandOutput, RunConfig};

pub const DEFAULT_SEEDS: usize = 5;
pub const DEFAULT_MAX_ITER: usize = 200_000;

pub const HEADER: [&str; 9] = [
    "N",
    "class",
    "eta",
    "seed",
    "iterations",
    "wall_ms",
    "F_final",
    "improvement_pct",
    "status",
];

struct Instance {
    n: usize,
    class: HuberClass,
    seed: u64,
    problem: HuberProblem,
    /// Certified optimal value, or the oracle's error message.
    reference: Result<f64, String>,
}

struct RunResult {
    iterations: usize,
    wall_ms: f64,
    objective: f64,
    improvement: f64,
    status: String,
}

fn reference_value(p: &HuberProblem) -> Result<f64, String> {
    let problem = OracleProblem::HuberL1 {
        m: p.m.clone(),
        z: p.z.clone(),
        alpha: p.alpha,
        delta: p.delta,
    };
    oracle_solve(&problem, &OracleConfig::default())
        .map(|s| s.value)
        .map_err(|e| e.to_string())
}

/// Runs the sweep and returns the per-run CSV with one mean row per
/// `(N, class, η)`.
pub fn huber_output(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let seeds = cfg.seed_list(DEFAULT_SEEDS);
    let opts = HuberOptions {
        tau: cfg.tau.unwrap_or(splitdr::experiments::huber::DEFAULT_TAU),
        sigma: cfg.sigma,
        record_objective: false,
    };
    if !(opts.tau > 0.0) || opts.sigma.is_some_and(|s| !(s > 0.0)) {
        return Err(CliError::Config("tau and sigma must be positive".into()));
    }
    let rule = StoppingRule::new(cfg.eps, cfg.max_iter.unwrap_or(DEFAULT_MAX_ITER))?;

    let mut keys = Vec::new();
    for &n in &cfg.n {
        for &class in &cfg.classes {
            for &seed in &seeds {
                keys.push((n, class, seed));
            }
        }
    }
    let instances = par_map(cfg, keys, |(n, class, seed)| {
        let problem = build_huber(n, class, seed)?.with_params(cfg.alpha, cfg.delta)?;
        let reference = reference_value(&problem);
        Ok::<_, splitdr::Error>(Instance {
            n,
            class,
            seed,
            problem,
            reference,
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    // Rows are ordered by N, class, η and then seed.
    let mut jobs = Vec::new();
    for &n in &cfg.n {
        for &class in &cfg.classes {
            for &eta in &cfg.etas {
                for (i, inst) in instances.iter().enumerate() {
                    if inst.n == n && inst.class == class {
                        jobs.push((eta, i));
                    }
                }
            }
        }
    }
    let results = par_map(cfg, jobs.clone(), |(eta, i)| {
        let inst = &instances[i];
        match run_huber(&inst.problem, eta, &opts, &rule) {
            Ok(run) => {
                let (improvement_pct, status) = match (&inst.reference, run.report.status) {
                    (Err(e), _) => (f64::NAN, format!("oracle error: {e}")),
                    (Ok(f), Status::Converged) => {
                        (improvement(*f, run.objective), "converged".into())
                    }
                    (Ok(f), Status::MaxIter) => (improvement(*f, run.objective), "max_iter".into()),
                };
                RunResult {
                    iterations: run.report.iterations,
                    wall_ms: run.report.wall_time.as_secs_f64() * 1e3,
                    objective: run.objective,
                    improvement: improvement_pct,
                    status,
                }
            }
            Err(e) => RunResult {
                iterations: 0,
                wall_ms: 0.0,
                objective: f64::NAN,
                improvement: f64::NAN,
                status: format!("error: {e}"),
            },
        }
    })?;

    let mut table = Table::new(&HEADER)?;
    let mut ok = true;
    for ((eta, i), r) in jobs.iter().zip(&results) {
        let inst = &instances[*i];
        ok &= r.status == "converged";
        table.row(&[
            inst.n.to_string(),
            inst.class.to_string(),
            num(*eta),
            inst.seed.to_string(),
            r.iterations.to_string(),
            num(r.wall_ms),
            num(r.objective),
            num(r.improvement),
            r.status.clone(),
        ])?;
    }
    let mut groups: Vec<(usize, HuberClass, f64)> = Vec::new();
    for (eta, i) in &jobs {
        let key = (instances[*i].n, instances[*i].class, *eta);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (n, class, eta) in groups {
        let rs: Vec<&RunResult> = jobs
            .iter()
            .zip(&results)
            .filter(|((e, i), _)| *e == eta && instances[*i].n == n && instances[*i].class == class)
            .map(|(_, r)| r)
            .collect();
        let m = |f: fn(&RunResult) -> f64| mean(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
        let all = rs.iter().all(|r| r.status == "converged");
        table.row(&[
            n.to_string(),
            class.to_string(),
            num(eta),
            "mean".into(),
            num(m(|r| r.iterations as f64)),
            num(m(|r| r.wall_ms)),
            num(m(|r| r.objective)),
            num(m(|r| r.improvement)),
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

pub fn cmd_huber(cfg: &RunConfig) -> i32 {
    finish(cfg, huber_output(cfg))
}
