//! Iterate-level equivalences between the SDR family members.

mod common;

use std::sync::Arc;

use common::*;
use rand::Rng;
use splitdr::linops::{Metric, SharedOp, StackedOp};
use splitdr::prox::ResolventOp;
use splitdr::solvers::{
    explicit_split_step, sadmm_step, Block, ComposedResolvent, DrsProblem, MultiblockProblem,
    SadmmProblem, SdrProblem,
};
use splitdr::{Matrix, Vector};

#[test]
fn sdr_and_pds_primal_sequences_coincide() {
    for seed in 0..12 {
        let inst = LassoInstance::random(seed, 0.9);
        let prob = inst.sdr();
        let mut g = rng(1000 + seed);
        let x0 = gaussian_vector(&mut g, inst.l.ncols());
        let u0 = gaussian_vector(&mut g, inst.l.nrows());
        let mut s = prob.initial_state(x0.clone(), u0.clone()).unwrap();
        let mut x = x0.clone();
        let mut v = prob.pds_initial_dual(&x0, &u0).unwrap();
        for n in 0..50 {
            prob.step(&mut s).unwrap();
            (x, v) = prob.pds_step(&x, &v).unwrap();
            let d = max_abs_diff(&s.x, &x);
            assert!(d <= 1e-12, "seed {seed} iteration {n}: {d:e}");
        }
    }
}

#[test]
fn sdr_dual_lag_identity_and_cache() {
    let inst = LassoInstance::random(3, 0.95);
    let prob = inst.sdr();
    let l = dense(inst.l.clone());
    let mut s = prob
        .initial_state(Vector::zeros(inst.l.ncols()), Vector::zeros(inst.l.nrows()))
        .unwrap();
    for _ in 0..100 {
        let x_prev = s.x.clone();
        prob.step(&mut s).unwrap();
        let lag = l.apply(&(&s.x - &x_prev)) * inst.sigma + &s.v;
        assert!(max_abs_diff(&lag, &s.u) <= 1e-12);
        assert!(max_abs_diff(&l.apply(&s.x), &s.lx) <= 1e-12);
    }
}

#[test]
fn sdr_reduces_to_drs_for_surjective_l() {
    for seed in 0..10 {
        let mut g = rng(2000 + seed);
        let n = g.random_range(3..=12);
        let m = g.random_range(2..=n);
        let l = gaussian_matrix(&mut g, m, n);
        let ups = Vector::from_fn(n, |_, _| g.random_range(0.3..2.0));
        let upsilon = Metric::diagonal(ups.clone()).unwrap();
        let lul = &l * Matrix::from_diagonal(&ups) * l.transpose();
        let sigma = Metric::dense(lul.try_inverse().unwrap()).unwrap();
        let beta = g.random_range(0.2..3.0);
        let bmat = Matrix::identity(m, m) * beta;
        let a = ResolventOp::l1(g.random_range(0.1..1.0)).unwrap();
        let b = ResolventOp::linear(bmat.clone()).unwrap();
        let lop = dense(l.clone());
        let sdr = SdrProblem::new(&a, &b, lop.clone(), upsilon.clone(), sigma).unwrap();
        let jbl = ComposedResolvent::linear(lop.as_ref(), &upsilon, &bmat).unwrap();
        let drs = DrsProblem::new(&a, &upsilon, jbl).unwrap();

        let x0 = gaussian_vector(&mut g, n);
        let u0 = gaussian_vector(&mut g, m);
        let mut s = sdr.initial_state(x0, u0).unwrap();
        sdr.step(&mut s).unwrap();
        let mut z = s.z.clone();
        for k in 0..200 {
            sdr.step(&mut s).unwrap();
            z = drs.step(&z).unwrap();
            let d = max_abs_diff(&s.z, &z) / (1.0 + z.amax());
            assert!(d <= 1e-10, "seed {seed} iteration {k}: {d:e}");
        }
    }
}

#[test]
fn classical_drs_for_identity_l() {
    // With L = Id and B = βId the composed resolvent is 1/(1 + τβ).
    let (tau, beta) = (0.7, 2.0);
    let upsilon = Metric::scalar(3, tau).unwrap();
    let id: SharedOp = dense(Matrix::identity(3, 3));
    let jbl =
        ComposedResolvent::linear(id.as_ref(), &upsilon, &(Matrix::identity(3, 3) * beta)).unwrap();
    assert!((jbl.matrix() - Matrix::identity(3, 3) / (1.0 + tau * beta)).amax() < 1e-14);
    // With A = 0 the shadow is z itself and the reflected point is z, so the
    // iteration is z ↦ J(z).
    let drs = DrsProblem::new(&ResolventOp::zero(), &upsilon, jbl).unwrap();
    let z = Vector::from_vec(vec![1.0, -2.0, 0.5]);
    assert!(max_abs_diff(&drs.step(&z).unwrap(), &(&z / (1.0 + tau * beta))) < 1e-14);
}

/// Random split-ADMM instance `min Σφ(p − z) + α‖KTp‖₁` with `T` injective.
fn sadmm_instance(seed: u64) -> (SadmmProblem, usize, usize, usize) {
    let mut g = rng(3000 + seed);
    let np = g.random_range(2..=8);
    let ng = g.random_range(np..=np + 3).min(12);
    let nh = g.random_range(2..=12);
    let t = gaussian_matrix(&mut g, ng, np);
    let k = gaussian_matrix(&mut g, nh, ng);
    let tau = g.random_range(0.3..2.0);
    let sigma = 0.9 / (tau * op_norm_sq(&k));
    let z = gaussian_vector(&mut g, np);
    let prob = SadmmProblem::new(
        ResolventOp::huber(g.random_range(0.2..2.0), z).unwrap(),
        ResolventOp::l1(g.random_range(0.1..1.0)).unwrap(),
        dense(t),
        dense(k),
        Metric::scalar(nh, tau).unwrap(),
        Metric::scalar(ng, sigma).unwrap(),
    )
    .unwrap();
    (prob, np, ng, nh)
}

#[test]
fn sadmm_and_sdr_round_trip() {
    for seed in 0..10 {
        let (prob, np, _, nh) = sadmm_instance(seed);
        assert_eq!(nh, prob.k().out_dim());
        let sdr = prob.dual_sdr_problem().unwrap();
        let mut g = rng(4000 + seed);
        let p0 = gaussian_vector(&mut g, np);
        // With q₀ = KTp₀ the first extrapolation is y₀ = x₀, which is what
        // the SDR start (x₀, −Tp₀) encodes.
        let q0 = prob.k().apply(&prob.t().apply(&p0));
        let x0 = gaussian_vector(&mut g, nh);
        let mut a = prob.initial_state(p0, q0, x0.clone()).unwrap();
        let mut b = sdr.initial_state(x0, a.u.clone()).unwrap();
        for n in 0..100 {
            prob.step(&mut a).unwrap();
            sdr.step(&mut b).unwrap();
            let scale = 1.0 + b.x.amax() + b.u.amax();
            let dx = max_abs_diff(&a.x, &b.x) / scale;
            let du = max_abs_diff(&a.u, &b.u) / scale;
            assert!(
                dx <= 1e-10 && du <= 1e-10,
                "seed {seed} iteration {n}: {dx:e} {du:e}"
            );
        }
    }
}

#[test]
fn sadmm_multiplier_update_invariant() {
    let (prob, np, _, nh) = sadmm_instance(7);
    let tau = prob.upsilon().as_scalar().unwrap();
    let mut s = prob
        .initial_state(Vector::zeros(np), Vector::zeros(nh), Vector::zeros(nh))
        .unwrap();
    for _ in 0..50 {
        let x_prev = s.x.clone();
        s = sadmm_step(&prob, &s).unwrap();
        assert!(max_abs_diff(&(&s.x - &x_prev), &((&s.ktp - &s.q) * tau)) <= 1e-12);
    }
}

#[test]
fn explicit_split_matches_sadmm_with_identity_t() {
    let mut g = rng(5000);
    let (n, m) = (6, 9);
    let k = gaussian_matrix(&mut g, m, n);
    let tau = 0.8;
    let sigma = 0.95 / (tau * op_norm_sq(&k));
    let z = gaussian_vector(&mut g, n);
    let build = |explicit: bool| {
        let gf = ResolventOp::huber(0.5, z.clone()).unwrap();
        let ff = ResolventOp::l1(0.3).unwrap();
        let ups = Metric::scalar(m, tau).unwrap();
        let sig = Metric::scalar(n, sigma).unwrap();
        if explicit {
            SadmmProblem::explicit(gf, ff, dense(k.clone()), ups, sig).unwrap()
        } else {
            SadmmProblem::new(
                gf,
                ff,
                dense(Matrix::identity(n, n)),
                dense(k.clone()),
                ups,
                sig,
            )
            .unwrap()
        }
    };
    let (pe, pg) = (build(true), build(false));
    let p0 = gaussian_vector(&mut g, n);
    let mut se = pe
        .initial_state(p0.clone(), Vector::zeros(m), Vector::zeros(m))
        .unwrap();
    let mut sg = pg
        .initial_state(p0, Vector::zeros(m), Vector::zeros(m))
        .unwrap();
    for _ in 0..50 {
        let x_prev = se.x.clone();
        se = explicit_split_step(&pe, &se).unwrap();
        sg = sadmm_step(&pg, &sg).unwrap();
        assert!(max_abs_diff(&se.p, &sg.p) <= 1e-10);
        assert!(max_abs_diff(&se.x, &sg.x) <= 1e-10);
        // The next extrapolated multiplier equals 2xₙ₊₁ − xₙ.
        let y_next = &se.x + (&se.ktp - &se.q) * tau;
        assert!(max_abs_diff(&y_next, &(&se.x * 2.0 - &x_prev)) <= 1e-12);
    }
}

#[test]
fn multiblock_matches_stacked_pds() {
    let mut g = rng(6000);
    let n = 9;
    let l1 = gaussian_matrix(&mut g, 7, n);
    let l2 = Matrix::identity(n, n);
    let (s1, s2) = (0.05, 0.3);
    let tau = 0.9 / (s1 * op_norm_sq(&l1) + s2);
    let a =
        ResolventOp::quadratic(dense(Matrix::identity(n, n)), gaussian_vector(&mut g, n)).unwrap();
    let b1 = ResolventOp::l1(0.4).unwrap();
    let b2 = ResolventOp::box_indicator(-0.5, 0.5).unwrap();
    let upsilon = Metric::scalar(n, tau).unwrap();
    let blocks = vec![
        Block {
            op: b1.clone(),
            l: dense(l1.clone()),
            sigma: Metric::scalar(7, s1).unwrap(),
        },
        Block {
            op: b2.clone(),
            l: dense(l2.clone()),
            sigma: Metric::scalar(n, s2).unwrap(),
        },
    ];
    let mb = MultiblockProblem::new(&a, blocks, upsilon.clone()).unwrap();
    let stacked: SharedOp = Arc::new(StackedOp::new(vec![dense(l1), dense(l2)]).unwrap());
    let bsum = ResolventOp::separable(vec![b1, b2], vec![7, n]).unwrap();
    let sig = Metric::block_scalars(&[(7, s1), (n, s2)]).unwrap();
    let pds = SdrProblem::new(&a, &bsum, stacked, upsilon, sig).unwrap();

    let x0 = gaussian_vector(&mut g, n);
    let mut s = mb.initial_state(x0.clone(), None).unwrap();
    let mut x = x0;
    let mut v = Vector::zeros(7 + n);
    for _ in 0..100 {
        mb.step(&mut s).unwrap();
        (x, v) = pds.pds_step(&x, &v).unwrap();
        assert!(max_abs_diff(&s.x, &x) <= 1e-12);
    }
}
