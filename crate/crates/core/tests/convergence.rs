//! Convergence of every method to independently computed solutions.

mod common;

use std::sync::Arc;

use common::*;
use splitdr::experiments::run_tv;
use splitdr::experiments::{build_huber, run_huber, HuberClass, HuberOptions};
use splitdr::experiments::{tv_objective, Gradient2d, TvProblem, TvSteps};
use splitdr::linops::{LinearOp, Metric, ScaledIdentity, SharedOp};
use splitdr::oracle::{oracle_solve, OracleConfig, OracleMethod, OracleProblem};
use splitdr::prox::ResolventOp;
use splitdr::solvers::{
    solve, Admm2Problem, Admm2Runner, PdsRunner, SadmmProblem, SadmmRunner, SdrProblem, SdrRunner,
    Status, StoppingRule,
};
use splitdr::{Matrix, Vector};

fn v1(x: f64) -> Vector {
    Vector::from_element(1, x)
}

fn scalar_sdr() -> SdrProblem {
    SdrProblem::new(
        &ResolventOp::l1(1.0).unwrap(),
        &ResolventOp::quadratic(dense(Matrix::identity(1, 1)), v1(1.0)).unwrap(),
        dense(Matrix::identity(1, 1)),
        Metric::identity(1),
        Metric::identity(1),
    )
    .unwrap()
}

/// The dual form of the scalar instance: `g = ½(· − 1)²`, `f = ι_[−1,1]`,
/// whose equivalent SDR iterate converges to `(0, −1)`.
fn scalar_sadmm(explicit: bool) -> SadmmProblem {
    let g = ResolventOp::quadratic(dense(Matrix::identity(1, 1)), v1(1.0)).unwrap();
    let f = ResolventOp::box_indicator(-1.0, 1.0).unwrap();
    let k = dense(Matrix::identity(1, 1));
    if explicit {
        SadmmProblem::explicit(g, f, k, Metric::identity(1), Metric::identity(1)).unwrap()
    } else {
        let t = dense(Matrix::identity(1, 1));
        let sigma = Metric::scalar(1, 1.0).unwrap();
        SadmmProblem::new(g, f, t, k, Metric::identity(1), sigma).unwrap()
    }
}

#[test]
fn scalar_instance_all_methods_reach_kkt_point() {
    let rule = StoppingRule::new(1e-14, 100_000).unwrap();
    let sdr = scalar_sdr();

    let mut r = SdrRunner::new(&sdr, v1(1.0), v1(0.0)).unwrap();
    solve(&mut r, &rule, |_| None).unwrap();
    assert!(sdr.kkt_residual(&r.state.x, &r.state.u).unwrap() <= 1e-8);
    assert!(r.state.x[0].abs() <= 1e-6 && (r.state.u[0] + 1.0).abs() <= 1e-6);

    let mut p = PdsRunner::from_sdr_start(&sdr, v1(1.0), &v1(0.0)).unwrap();
    solve(&mut p, &rule, |_| None).unwrap();
    let (px, pv) = &p.state;
    assert!(px[0].abs() <= 1e-6 && (pv[0] + 1.0).abs() <= 1e-6);
    assert!(sdr.kkt_residual(px, pv).unwrap() <= 1e-8);

    for explicit in [false, true] {
        let prob = scalar_sadmm(explicit);
        let dual = prob.dual_sdr_problem().unwrap();
        let state = prob.initial_state(v1(0.0), v1(0.0), v1(1.0)).unwrap();
        let mut run = SadmmRunner::new(&prob, state);
        let rep = solve(&mut run, &rule, |_| None).unwrap();
        let (x, u) = (&run.state.x, &run.state.u);
        assert!(
            dual.kkt_residual(x, u).unwrap() <= 1e-8,
            "explicit {explicit}: {rep:?}"
        );
        assert!(
            x[0].abs() <= 1e-6 && (u[0] + 1.0).abs() <= 1e-6,
            "explicit {explicit}"
        );
        assert!(prob.kkt_residual(&run.state.p, x).unwrap() <= 1e-8);
    }
}

#[test]
fn sdr_lasso_matches_oracle() {
    for seed in 0..5 {
        let inst = LassoInstance::random(seed, 0.9);
        let prob = inst.sdr();
        let mut r = SdrRunner::new(
            &prob,
            Vector::zeros(inst.l.ncols()),
            Vector::zeros(inst.l.nrows()),
        )
        .unwrap();
        let rep = solve(&mut r, &StoppingRule::new(1e-13, 500_000).unwrap(), |_| {
            None
        })
        .unwrap();
        assert_eq!(rep.status, Status::Converged);
        let oracle = oracle_solve(
            &OracleProblem::Lasso {
                r: inst.l.clone(),
                b: inst.c.clone(),
                alpha: inst.alpha,
            },
            &OracleConfig::new(OracleMethod::DenseKkt, 1e-12, 500).unwrap(),
        )
        .unwrap();
        let f = 0.5 * (&inst.l * &r.state.x - &inst.c).norm_squared()
            + inst.alpha * r.state.x.lp_norm(1);
        assert!(
            (f - oracle.value).abs() <= 1e-8 * (1.0 + oracle.value.abs()),
            "seed {seed}"
        );
        assert!(prob.kkt_residual(&r.state.x, &r.state.u).unwrap() <= 1e-6);
    }
}

#[test]
fn explicit_split_huber_lasso_matches_oracle() {
    let mut g = rng(42);
    let n = 8;
    let z = gaussian_vector(&mut g, n);
    let (alpha, delta) = (0.3, 0.5);
    let prob = SadmmProblem::explicit(
        ResolventOp::huber(delta, z.clone()).unwrap(),
        ResolventOp::l1(alpha).unwrap(),
        dense(Matrix::identity(n, n)),
        Metric::identity(n),
        Metric::scalar(n, 0.99).unwrap(),
    )
    .unwrap();
    let state = prob
        .initial_state(Vector::zeros(n), Vector::zeros(n), Vector::zeros(n))
        .unwrap();
    let mut run = SadmmRunner::new(&prob, state);
    solve(
        &mut run,
        &StoppingRule::new(1e-13, 200_000).unwrap(),
        |_| None,
    )
    .unwrap();
    let oracle = oracle_solve(
        &OracleProblem::HuberL1 {
            m: Matrix::identity(n, n),
            z,
            alpha,
            delta,
        },
        &OracleConfig::default(),
    )
    .unwrap();
    assert!((&run.state.p - &oracle.x).amax() <= 1e-8);
}

#[test]
fn sadmm_quadratic_saddle_point() {
    // min ½p² + ½(p − c)² has p* = c/2 and multiplier x* = c/2 − c = −c/2.
    let c = 3.0;
    let id = || -> SharedOp { Arc::new(ScaledIdentity::identity(1)) };
    let prob = SadmmProblem::new(
        ResolventOp::quadratic(id(), v1(0.0)).unwrap(),
        ResolventOp::quadratic(id(), v1(c)).unwrap(),
        id(),
        id(),
        Metric::identity(1),
        Metric::scalar(1, 0.9).unwrap(),
    )
    .unwrap();
    let state = prob.initial_state(v1(0.0), v1(0.0), v1(0.0)).unwrap();
    let mut run = SadmmRunner::new(&prob, state);
    solve(&mut run, &StoppingRule::new(1e-14, 10_000).unwrap(), |_| {
        None
    })
    .unwrap();
    assert!((run.state.p[0] - c / 2.0).abs() <= 1e-9);
    assert!((run.state.x[0] + c / 2.0).abs() <= 1e-9);
}

#[test]
fn admm2_equality_constrained_quadratic_matches_kkt_solve() {
    let mut g = rng(7);
    let (np, nv, m) = (5, 4, 3);
    let r1 = gaussian_matrix(&mut g, np + 1, np);
    let b1 = gaussian_vector(&mut g, np + 1);
    let r2 = gaussian_matrix(&mut g, nv + 1, nv);
    let b2 = gaussian_vector(&mut g, nv + 1);
    let t = gaussian_matrix(&mut g, np, np) + Matrix::identity(np, np) * 3.0;
    let k = gaussian_matrix(&mut g, m, np);
    let j = gaussian_matrix(&mut g, m, nv);
    let tau = 1.0;
    let sigma = 0.9 / (tau * op_norm_sq(&k));
    let prob = Admm2Problem::new(
        ResolventOp::quadratic(dense(r1.clone()), b1.clone()).unwrap(),
        ResolventOp::quadratic(dense(r2.clone()), b2.clone()).unwrap(),
        dense(t.clone()),
        dense(k.clone()),
        dense(j.clone()),
        Metric::scalar(m, tau).unwrap(),
        Metric::scalar(np, sigma).unwrap(),
    )
    .unwrap();
    let state = prob
        .initial_state(Vector::zeros(np), Vector::zeros(nv), Vector::zeros(m))
        .unwrap();
    let mut run = Admm2Runner {
        problem: &prob,
        state,
    };
    let rep = solve(
        &mut run,
        &StoppingRule::new(1e-10, 200_000).unwrap(),
        |_| None,
    )
    .unwrap();
    assert_eq!(
        rep.status,
        Status::Converged,
        "{:?}",
        rep.residual_history.last()
    );

    let n = np + nv;
    let mut q = Matrix::zeros(n, n);
    q.view_mut((0, 0), (np, np))
        .copy_from(&(r1.transpose() * &r1));
    q.view_mut((np, np), (nv, nv))
        .copy_from(&(r2.transpose() * &r2));
    let mut c = Vector::zeros(n);
    c.rows_mut(0, np).copy_from(&(r1.transpose() * &b1));
    c.rows_mut(np, nv).copy_from(&(r2.transpose() * &b2));
    let mut e = Matrix::zeros(m, n);
    e.view_mut((0, 0), (m, np)).copy_from(&(&k * &t));
    e.view_mut((0, np), (m, nv)).copy_from(&j);
    let oracle = oracle_solve(
        &OracleProblem::LinearQuadratic {
            q,
            c,
            e,
            d: Vector::zeros(m),
        },
        &OracleConfig::new(OracleMethod::DenseKkt, 1e-12, 1).unwrap(),
    )
    .unwrap();
    assert!((&run.state.p - oracle.x.rows(0, np)).amax() <= 1e-7);
    assert!((&run.state.v - oracle.x.rows(np, nv)).amax() <= 1e-7);
}

#[test]
fn tv_denoising_matches_oracle() {
    let (n1, n2) = (6, 6);
    let n = n1 * n2;
    let mut g = rng(3);
    let clean = Vector::from_fn(n, |i, _| if (i % n2) < 3 { 60.0 } else { 190.0 });
    let b = &clean + gaussian_vector(&mut g, n) * 20.0;
    let alpha = 8.0;
    let id: Arc<dyn LinearOp> = Arc::new(ScaledIdentity::identity(n));
    let grad = Gradient2d::new(n1, n2).unwrap();
    let gn = grad.norm_sq_exact();
    let prob = TvProblem::new(
        n1,
        n2,
        id.clone(),
        b.clone(),
        alpha,
        gn,
        TvSteps::kappa(10.0, gn).unwrap(),
        false,
    )
    .unwrap();
    let run = run_tv(&prob, &StoppingRule::new(1e-12, 200_000).unwrap()).unwrap();
    let oracle = oracle_solve(
        &OracleProblem::Tv {
            n1,
            n2,
            r: Matrix::identity(n, n),
            b: b.clone(),
            alpha,
            lo: 0.0,
            hi: 255.0,
        },
        &OracleConfig::new(OracleMethod::ProximalGradient, 1e-10, 200_000).unwrap(),
    )
    .unwrap();
    let f = tv_objective(id.as_ref(), &b, alpha, &grad, &run.x);
    assert!(
        (f - oracle.value).abs() <= 1e-6 * oracle.value,
        "{f} vs {}",
        oracle.value
    );
}

#[test]
fn huber_run_matches_oracle_value() {
    for class in HuberClass::ALL {
        let prob = build_huber(10, class, 1).unwrap();
        let oracle = oracle_solve(
            &OracleProblem::HuberL1 {
                m: prob.m.clone(),
                z: prob.z.clone(),
                alpha: prob.alpha,
                delta: prob.delta,
            },
            &OracleConfig::default(),
        )
        .unwrap();
        for eta in [0.0, 1.0] {
            let run = run_huber(
                &prob,
                eta,
                &HuberOptions::default(),
                &StoppingRule::new(1e-12, 400_000).unwrap(),
            )
            .unwrap();
            let gap = (run.objective - oracle.value) / oracle.value.abs().max(1e-12);
            assert!(
                gap >= -1e-9,
                "class {class} eta {eta}: below the optimum by {gap:e}"
            );
            assert!(gap <= 1e-4, "class {class} eta {eta}: gap {gap:e}");
        }
    }
}
