use std::sync::Arc;

use super::*;
use crate::linops::{adjoint_check, LinearOp, ScaledIdentity};
use crate::prox::prox_huber;
use crate::solvers::{Status, StoppingRule};
use crate::{Matrix, Vector};

#[test]
fn gradient_examples() {
    let c = Vector::from_element(9, 3.0);
    assert_eq!(grad2d(3, 3, &c).unwrap(), Vector::zeros(18));
    // [[0,1],[0,1]]: horizontal differences are 1 then the Neumann zero.
    let x = Vector::from_vec(vec![0.0, 1.0, 0.0, 1.0]);
    let g = grad2d(2, 2, &x).unwrap();
    assert_eq!(
        g.rows(0, 4).into_owned(),
        Vector::from_vec(vec![1.0, 0.0, 1.0, 0.0])
    );
    assert_eq!(g.rows(4, 4).into_owned(), Vector::zeros(4));
    assert!(grad2d(1, 3, &Vector::zeros(3)).is_err());
    assert!(grad2d(2, 2, &Vector::zeros(3)).is_err());
}

#[test]
fn gradient_adjoint_and_divergence() {
    let g = Gradient2d::new(8, 8).unwrap();
    assert!(adjoint_check(&g, 20, 1).unwrap() <= 1e-12);
    let dense = g.dense();
    let v = Vector::from_fn(128, |i, _| (i as f64 * 0.37).sin());
    let d = div2d(&g, &v).unwrap();
    assert!((d + dense.transpose() * &v).amax() < 1e-12);
}

#[test]
fn gradient_exact_norm_matches_dense() {
    let g = Gradient2d::new(6, 5).unwrap();
    let m = g.dense();
    let top = (m.transpose() * &m).symmetric_eigen().eigenvalues.max();
    assert_close!(top, g.norm_sq_exact(), 1e-10);
}

#[test]
fn blur_properties() {
    let k = gaussian_kernel(9, 4.0).unwrap();
    assert_close!(k.iter().sum::<f64>(), 1.0, 1e-14);
    assert!(gaussian_kernel(8, 4.0).is_err());
    let b = gaussian_blur_op(8, 8, 9, 4.0).unwrap();
    let c = Vector::from_element(64, 7.0);
    assert!((b.apply(&c) - &c).amax() < 1e-12);
    assert!(adjoint_check(&b, 20, 2).unwrap() <= 1e-12);
    let dense = b.dense();
    let mut eig: Vec<f64> = (dense.transpose() * &dense)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    let mut fft: Vec<f64> = b.gram_eigenvalues();
    eig.sort_by(f64::total_cmp);
    fft.sort_by(f64::total_cmp);
    for (a, e) in eig.iter().zip(&fft) {
        assert_close!(*a, *e, 1e-12);
    }
}

#[test]
fn blur_shifted_gram_solve() {
    let b = gaussian_blur_op(6, 10, 9, 4.0).unwrap();
    let rhs = Vector::from_fn(60, |i, _| (i as f64).cos());
    let y = b.shifted_gram_solve(0.7, &rhs).unwrap();
    let back = &y + b.adjoint(&b.apply(&y)) * 0.7;
    assert!((back - rhs).amax() < 1e-10);
}

#[test]
fn psnr_examples() {
    let a = Vector::from_vec(vec![1.0, 2.0, 3.0]);
    let b = Vector::from_vec(vec![1.0, 2.5, 3.0]);
    assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
    assert_eq!(psnr(&a, &b, 255.0).unwrap(), psnr(&b, &a, 255.0).unwrap());
}

#[test]
fn pgm_roundtrip() {
    let dir = std::env::temp_dir().join(format!("splitdr-pgm-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("img.pgm");
    let img = Image {
        rows: 2,
        cols: 3,
        data: Vector::from_vec(vec![0.0, 10.0, 300.0, -4.0, 128.4, 255.0]),
    };
    write_pgm(&path, &img).unwrap();
    let back = read_pgm(&path).unwrap();
    assert_eq!(
        back.data,
        Vector::from_vec(vec![0.0, 10.0, 255.0, 0.0, 128.0, 255.0])
    );
    let ascii = parse_pgm(b"P2\n# comment\n2 1\n15\n0 15\n").unwrap();
    assert_eq!(ascii.data, Vector::from_vec(vec![0.0, 255.0]));
    assert!(parse_pgm(b"P6\n1 1\n255\n\0").is_err());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn tv_steps_boundary() {
    let n2 = 7.9997;
    let s = TvSteps::kappa(10.0, n2).unwrap();
    assert_close!(s.boundary_value(n2), 1.0, 1e-12);
    let s = TvSteps::ell_split(1.77, 0.001, n2).unwrap();
    assert_close!(s.boundary_value(n2), 1.0, 1e-12);
    assert!(TvSteps::ell_split(1.0, 1.5, n2).is_err());
}

#[test]
fn tv_problem_rejects_outside_boundary() {
    let n = 16;
    let id: Arc<dyn LinearOp> = Arc::new(ScaledIdentity::identity(n));
    let g = Gradient2d::new(4, 4).unwrap().norm_sq_exact();
    let steps = TvSteps::kappa(11.0, g).unwrap();
    let b = Vector::zeros(n);
    assert!(TvProblem::new(4, 4, id.clone(), b.clone(), 1.0, g, steps, false).is_err());
    assert!(TvProblem::new(4, 4, id, b, 1.0, g, steps, true).is_ok());
}

#[test]
fn tv_data_term_only_returns_clipped_observation() {
    let n = 25;
    let id: Arc<dyn LinearOp> = Arc::new(ScaledIdentity::identity(n));
    let g = Gradient2d::new(5, 5).unwrap().norm_sq_exact();
    let b = Vector::from_fn(n, |i, _| i as f64 * 15.0 - 30.0);
    let prob = TvProblem::new(
        5,
        5,
        id,
        b.clone(),
        0.0,
        g,
        TvSteps::kappa(10.0, g).unwrap(),
        false,
    )
    .unwrap();
    let run = run_tv(&prob, &StoppingRule::new(1e-10, 20_000).unwrap()).unwrap();
    assert_eq!(run.report.status, Status::Converged);
    let clipped = b.map(|v| v.clamp(0.0, 255.0));
    assert!((run.x - clipped).amax() < 1e-6);
}

#[test]
fn tv_objective_direct_sum() {
    let (n1, n2) = (4, 4);
    let x = Vector::from_fn(16, |i, _| ((i * 7) % 5) as f64);
    let b = Vector::from_fn(16, |i, _| (i % 3) as f64);
    let id = ScaledIdentity::identity(16);
    let g = Gradient2d::new(n1, n2).unwrap();
    let mut tv = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            if j + 1 < n2 {
                tv += (x[i * n2 + j + 1] - x[i * n2 + j]).abs();
            }
            if i + 1 < n1 {
                tv += (x[(i + 1) * n2 + j] - x[i * n2 + j]).abs();
            }
        }
    }
    let data: f64 = (0..16).map(|i| 0.5 * (x[i] - b[i]).powi(2)).sum();
    assert_close!(tv_objective(&id, &b, 0.3, &g, &x), data + 0.3 * tv, 1e-12);
}

#[test]
fn huber_instance_spectrum_and_split() {
    let prob = build_huber(100, HuberClass::B, 3).unwrap();
    assert_close!(prob.d.max(), 400.0, 1e-12);
    assert_close!(prob.d.min(), 8.0, 1e-12);
    for eta in [0.0, 0.8, 0.9, 1.0] {
        let (k, t) = prob.split(eta).unwrap();
        let err = (&k * &t - &prob.m).amax() / prob.m.amax();
        assert!(err < 1e-10, "eta {eta}: {err}");
    }
    let (k0, t0) = prob.split(0.0).unwrap();
    assert!((t0 - Matrix::identity(100, 100)).amax() < 1e-12);
    assert!((k0 - &prob.m).amax() < 1e-9);
    assert!(prob.split(1.5).is_err());
    let again = build_huber(100, HuberClass::B, 3).unwrap();
    assert_eq!(again.m, prob.m);
}

#[test]
fn huber_p_update_identity_matches_prox() {
    let n = 6;
    let t = Matrix::identity(n, n);
    let k = Matrix::from_fn(n, n, |i, j| ((i + 2 * j) as f64).sin());
    let y = Vector::from_fn(n, |i, _| i as f64 - 2.0);
    let p_prev = Vector::from_fn(n, |i, _| 0.3 * i as f64);
    let z = Vector::from_fn(n, |i, _| (i as f64).cos());
    let sigma = 0.4;
    let p = huber_p_update(&t, &k, sigma, &y, &p_prev, &z, 0.5).unwrap();
    let expected = prox_huber(&(&p_prev - k.transpose() * &y * sigma), sigma, 0.5, &z).unwrap();
    assert!((p - expected).amax() < 1e-9);
}

#[test]
fn improvement_metric() {
    assert_eq!(improvement(2.0, 2.0), 0.0);
    assert_close!(improvement(2.0, 1.0), 50.0, 1e-12);
}

#[test]
fn fused_gradient_gram_matches_composition() {
    let g = Gradient2d::new(7, 5).unwrap();
    let x = Vector::from_fn(35, |i, _| ((i * 13) % 11) as f64 - 4.0);
    assert!((g.gram_apply(&x) - g.adjoint(&g.apply(&x))).amax() < 1e-12);
}
