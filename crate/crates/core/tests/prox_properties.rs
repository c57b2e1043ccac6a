//! Randomized properties of the resolvent library checked against closed
//! forms and brute-force minimization.

mod common;

use common::dense;
use proptest::prelude::*;
use splitdr::linops::Metric;
use splitdr::prox::{huber_scalar, ResolventOp};
use splitdr::{Matrix, Vector};

fn vec_and_steps(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(0.05..5.0f64, n),
        )
    })
}

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

fn operators(n: usize, shift: &Vector) -> Vec<(&'static str, ResolventOp)> {
    let r = Matrix::from_fn(n + 1, n, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    vec![
        ("l1", ResolventOp::l1(0.7).unwrap()),
        ("box", ResolventOp::box_indicator(-1.5, 2.0).unwrap()),
        ("huber", ResolventOp::huber(0.4, shift.clone()).unwrap()),
        (
            "quadratic",
            ResolventOp::quadratic(dense(r), Vector::from_element(n + 1, 1.0)).unwrap(),
        ),
    ]
}

proptest! {
    #[test]
    fn moreau_decomposition_l1_and_box((x, _, t) in vec_and_steps(8), alpha in 0.01..3.0f64) {
        let x = Vector::from_vec(x);
        let n = x.len();
        let tau = t[0];
        let p = ResolventOp::l1(alpha).unwrap().resolve(&Metric::scalar(n, tau).unwrap(), &x).unwrap();
        let q = ResolventOp::box_indicator(-alpha, alpha)
            .unwrap()
            .resolve(&Metric::scalar(n, 1.0 / tau).unwrap(), &(&x / tau))
            .unwrap();
        prop_assert!((p + q * tau - &x).amax() <= 1e-12 * (1.0 + x.amax()));
    }

    #[test]
    fn metric_moreau_for_huber_conjugate((x, s, d) in vec_and_steps(8), delta in 0.05..3.0f64) {
        // φ*(y) = δy²/2 + ι_[−1,1](y), and the shift adds ⟨s, y⟩, so the
        // conjugate resolvent is a clamp of a scaled point.
        let (x, s, d) = (Vector::from_vec(x), Vector::from_vec(s), Vector::from_vec(d));
        let metric = Metric::diagonal(d.clone()).unwrap();
        let got = ResolventOp::huber(delta, s.clone())
            .unwrap()
            .conjugate()
            .resolve(&metric, &x)
            .unwrap();
        let want = Vector::from_fn(x.len(), |i, _| {
            ((x[i] - d[i] * s[i]) / (1.0 + d[i] * delta)).clamp(-1.0, 1.0)
        });
        prop_assert!((got - want).amax() <= 1e-10);
    }

    #[test]
    fn resolvents_are_firmly_nonexpansive((x, y, d) in vec_and_steps(6)) {
        let (x, y, d) = (Vector::from_vec(x), Vector::from_vec(y), Vector::from_vec(d));
        let metric = Metric::diagonal(d.clone()).unwrap();
        for (name, op) in operators(x.len(), &(&x * 0.3)) {
            let j = op.prepare(&metric).unwrap();
            let dj = j.apply(&x).unwrap() - j.apply(&y).unwrap();
            // Firm nonexpansiveness holds in the inner product of M⁻¹.
            let lhs = dj.component_div(&d).dot(&dj);
            let rhs = dj.component_div(&d).dot(&(&x - &y));
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()), "{name}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn huber_prox_matches_golden_section(w in -20.0..20.0f64, gamma in 0.01..10.0f64, delta in 0.01..5.0f64) {
        let got = ResolventOp::huber(delta, Vector::zeros(1))
            .unwrap()
            .resolve(&Metric::scalar(1, gamma).unwrap(), &Vector::from_element(1, w))
            .unwrap()[0];
        let obj = |y: f64| huber_scalar(y, delta) + (y - w).powi(2) / (2.0 * gamma);
        // The minimizer lies between 0 and w.
        let want = golden_section(obj, w.min(0.0) - 1e-9, w.max(0.0) + 1e-9);
        prop_assert!((got - want).abs() <= 1e-7 * (1.0 + w.abs()), "{got} vs {want}");
        prop_assert!(obj(got) <= obj(want) + 1e-12 * (1.0 + obj(want)));
    }

    #[test]
    fn quadratic_resolvent_matches_normal_equations((w, b, d) in vec_and_steps(6), seed in 0u64..1000) {
        let n = w.len();
        let mut g = common::rng(seed);
        let r = common::gaussian_matrix(&mut g, n, n);
        let (w, b, d) = (Vector::from_vec(w), Vector::from_vec(b), Vector::from_vec(d));
        let got = ResolventOp::quadratic(dense(r.clone()), b.clone())
            .unwrap()
            .resolve(&Metric::diagonal(d.clone()).unwrap(), &w)
            .unwrap();
        let m = Matrix::from_diagonal(&d);
        let system = Matrix::identity(n, n) + &m * r.transpose() * &r;
        let want = system.lu().solve(&(&w + &m * r.transpose() * &b)).unwrap();
        prop_assert!((&got - &want).amax() <= 1e-8 * (1.0 + want.amax()));
    }
}
