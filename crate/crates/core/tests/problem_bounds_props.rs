//! Plant evaluators and the growth bounds.

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;
use scfo::bounds::*;
use scfo::problem::*;

fn plants() -> Vec<ProblemSpec> {
    vec![make_ex2(DEFAULT_STRICTNESS), make_ex4()]
}

#[test]
fn lipschitz_constants_are_strict_on_a_fine_grid() {
    for p in plants() {
        for i in 0..=1000 {
            for j in 0..=800 {
                let u = dvector![-0.5 + i as f64 * 1e-3, j as f64 * 1e-3];
                for c in 0..p.n_g {
                    let grad = p.constraint_grad(c, &u);
                    for k in 0..2 {
                        assert!(grad[k].abs() < p.lipschitz[(c, k)], "{} g{} at {u:?}", p.id, c + 1);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradients_match_central_differences(x in -0.499f64..0.499, y in 0.001f64..0.799) {
        let h = 1e-6;
        for p in plants() {
            let u = dvector![x, y];
            let mut fs: Vec<(DVector<f64>, Box<dyn Fn(&DVector<f64>) -> f64>)> = Vec::new();
            let pc = p.clone();
            fs.push((p.cost_grad(&u), Box::new(move |v| pc.cost(v))));
            for c in 0..p.n_g {
                let pc = p.clone();
                fs.push((p.constraint_grad(c, &u), Box::new(move |v| pc.constraint(c, v))));
            }
            for (grad, f) in &fs {
                for k in 0..2 {
                    let mut a = u.clone();
                    let mut b = u.clone();
                    a[k] += h;
                    b[k] -= h;
                    let fd = (f(&a) - f(&b)) / (2.0 * h);
                    prop_assert!((fd - grad[k]).abs() <= 1e-6 * grad[k].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn evaluation_is_pure(x in -0.5f64..=0.5, y in 0.0f64..=0.8) {
        for p in plants() {
            let u = dvector![x, y];
            prop_assert_eq!(p.evaluate(&u).unwrap(), p.evaluate(&u).unwrap());
        }
    }
}

/// Quadratic in two variables with coefficients `c = [c1, c2, c11, c12, c22]`
/// on the box `[-1, 1]²`.
fn quad(c: &[f64; 5], u: &DVector<f64>) -> f64 {
    c[0] * u[0] + c[1] * u[1] + c[2] * u[0] * u[0] + c[3] * u[0] * u[1] + c[4] * u[1] * u[1]
}

fn quad_grad(c: &[f64; 5], u: &DVector<f64>) -> DVector<f64> {
    dvector![
        c[0] + 2.0 * c[2] * u[0] + c[3] * u[1],
        c[1] + c[3] * u[0] + 2.0 * c[4] * u[1]
    ]
}

fn coeffs() -> impl Strategy<Value = [f64; 5]> {
    prop::array::uniform5(-3.0f64..3.0)
}

fn point() -> impl Strategy<Value = DVector<f64>> {
    (-1.0f64..=1.0, -1.0f64..=1.0).prop_map(|(a, b)| dvector![a, b])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn linear_bound_is_sound(c in coeffs(), a in point(), b in point()) {
        prop_assume!(a != b);
        // |∂f/∂u_i| over the box, from the coefficients, then made strict.
        let kappa = dvector![
            (c[0].abs() + 2.0 * c[2].abs() + c[3].abs()) * 1.01 + 1e-9,
            (c[1].abs() + c[3].abs() + 2.0 * c[4].abs()) * 1.01 + 1e-9
        ];
        prop_assert!(quad(&c, &b) - quad(&c, &a) < linear_growth_bound(&kappa, &a, &b));
    }

    #[test]
    fn quadratic_bound_is_sound(c in coeffs(), a in point(), b in point()) {
        prop_assume!(a != b);
        let m = dmatrix![2.0 * c[2].abs(), c[3].abs(); c[3].abs(), 2.0 * c[4].abs()].map(|v| v * 1.01 + 1e-3);
        let q = qbound_from_hessian_limits(&m).unwrap();
        let bound = quadratic_growth_bound(&quad_grad(&c, &a), &q, &a, &b);
        prop_assert!(quad(&c, &b) - quad(&c, &a) < bound);
    }

    #[test]
    fn gains_below_descent_bound_decrease(
        q in prop::array::uniform2(0.1f64..5.0),
        frac in prop::array::uniform2(0.0f64..1.0),
        lin in prop::array::uniform2(-1.0f64..1.0),
        u_k in point(),
        target in point(),
    ) {
        // Diagonal Hessian h ⪯ Q̄, possibly indefinite.
        let h = dvector![-5.0 + frac[0] * (q[0] + 5.0), -5.0 + frac[1] * (q[1] + 5.0)];
        let f = |x: &DVector<f64>| lin[0] * x[0] + lin[1] * x[1] + 0.5 * (h[0] * x[0] * x[0] + h[1] * x[1] * x[1]);
        let grad = dvector![lin[0] + h[0] * u_k[0], lin[1] + h[1] * u_k[1]];
        let mut d = &target - &u_k;
        if grad.dot(&d) > 0.0 {
            d = -d;
        }
        prop_assume!(grad.dot(&d) < -1e-6);
        let target = &u_k + &d;
        let qb = QuadBound::new(dvector![q[0], q[1]]).unwrap();
        let kbar = descent_gain_upper(&grad, &qb, &u_k, &target).unwrap();
        let f0 = f(&u_k);
        for i in 1..=100 {
            let k = kbar * i as f64 / 101.0;
            prop_assert!(f(&(&u_k + &d * k)) < f0, "K = {k} of {kbar}");
        }
    }

    #[test]
    fn descent_bound_scales_inversely_with_step_length(
        g in point(),
        u_k in point(),
        target in point(),
        s in 0.01f64..100.0,
    ) {
        let mut d = &target - &u_k;
        if g.dot(&d) > 0.0 {
            d = -d;
        }
        prop_assume!(g.dot(&d) < -1e-9);
        let target = &u_k + &d;
        let qb = QuadBound::new(dvector![1.3, 0.7]).unwrap();
        let k1 = descent_gain_upper(&g, &qb, &u_k, &target).unwrap();
        let ks = descent_gain_upper(&g, &qb, &u_k, &(&u_k + &d * s)).unwrap();
        prop_assert!((ks * s - k1).abs() <= 1e-9 * k1);
    }
}

#[test]
fn quadratic_bound_matches_row_sums() {
    let q = qbound_from_hessian_limits(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0])).unwrap();
    assert_eq!(q.diag(), &dvector![1.5, 2.5]);
}
