//! Small solvers and the KKT tools against brute-force oracles.

mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use scfo::kkt::{kkt_error, negative_spanning};
use scfo::problem::{make_ex4, ProblemSpec};
use scfo::smallsolve::*;

use common::*;

fn unit_rows(n: usize, m: usize) -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>)> {
    (
        prop::collection::vec(-1.0f64..1.0, n * m),
        prop::collection::vec(-0.8f64..0.6, m),
    )
        .prop_map(move |(a, b)| {
            let mut a = DMatrix::from_row_slice(m, n, &a);
            for mut row in a.row_iter_mut() {
                if row.norm() < 1e-3 {
                    row[0] = 1.0;
                }
                let norm = row.norm();
                row /= norm;
            }
            (a, DVector::from_vec(b))
        })
}

fn boxed(a: DMatrix<f64>, b: DVector<f64>) -> HalfspaceSystem {
    let n = a.ncols();
    HalfspaceSystem::new(a, b, DVector::from_element(n, -1.0), DVector::from_element(n, 1.0)).unwrap()
}

fn extended_row(sys: &HalfspaceSystem, i: usize) -> (DVector<f64>, f64) {
    let (m, n) = (sys.n_rows(), sys.dim());
    let mut e = DVector::zeros(n);
    if i < m {
        (sys.a.row(i).transpose(), sys.b[i])
    } else if i < m + n {
        e[i - m] = -1.0;
        (e, -sys.box_lower[i - m])
    } else {
        e[i - m - n] = 1.0;
        (e, sys.box_upper[i - m - n])
    }
}

const ORACLE_TOL: f64 = 1e-2;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn nnls_matches_support_enumeration(
        (rows, cols) in (1usize..=6, 1usize..=6),
        seed in prop::collection::vec(-1.0f64..1.0, 42),
    ) {
        let bm = DMatrix::from_fn(rows, cols, |r, c| seed[r * 6 + c]);
        let b = DVector::from_fn(rows, |r, _| seed[36 + r]);
        let sol = nnls(&bm, &b);
        prop_assert_eq!(sol.status, SolveStatus::Feasible);
        prop_assert!(sol.x.iter().all(|&v| v >= 0.0));
        let best = nnls_enumerate(&bm, &b);
        prop_assert!((sol.residual_sq - best).abs() <= 1e-9 * best.max(1.0), "{} vs {}", sol.residual_sq, best);
    }

    #[test]
    fn lp_feasible_agrees_with_grid_in_2d(sys in (1usize..=5).prop_flat_map(|m| unit_rows(2, m))) {
        let (a, b) = sys;
        let margin = grid_margin_2d(&a, &b, -1.0, 1.0, 1e-2);
        let sys = boxed(a, b);
        let rep = lp_feasible(&sys).unwrap();
        match rep.status {
            SolveStatus::Feasible => {
                prop_assert!(sys.max_violation(rep.point.as_ref().unwrap()) <= FEASIBILITY_TOL);
                prop_assert!(margin <= ORACLE_TOL);
            }
            SolveStatus::Infeasible => {
                prop_assert!(margin > -ORACLE_TOL);
                let nu = rep.certificate.unwrap();
                let (combo, value) = sys.alternative_residual(&nu);
                prop_assert!(nu.iter().all(|&v| v >= 0.0));
                prop_assert!(combo <= 1e-7 && value <= -1e-9, "|nu A| = {combo:e}, nu b = {value:e}");
            }
            SolveStatus::Degenerate => prop_assert!(false, "degenerate"),
        }
    }

    #[test]
    fn lp_feasible_agrees_with_vertices_in_3d(sys in (1usize..=5).prop_flat_map(|m| unit_rows(3, m))) {
        let (a, b) = sys;
        let strict = has_vertex(&a, &b, -1.0, 1.0, -ORACLE_TOL);
        let relaxed = has_vertex(&a, &b, -1.0, 1.0, ORACLE_TOL);
        let sys = boxed(a, b);
        let rep = lp_feasible(&sys).unwrap();
        match rep.status {
            SolveStatus::Feasible => prop_assert!(relaxed),
            SolveStatus::Infeasible => prop_assert!(!strict),
            SolveStatus::Degenerate => prop_assert!(false, "degenerate"),
        }
    }

    #[test]
    fn projection_is_certified_optimal(
        sys in (1usize..=4).prop_flat_map(|m| unit_rows(2, m)),
        target in prop::array::uniform2(-1.5f64..1.5),
        probes in prop::collection::vec(prop::array::uniform2(-1.0f64..1.0), 200),
    ) {
        let sys = boxed(sys.0, sys.1);
        let target = DVector::from_row_slice(&target);
        let rep = qp_project(&target, &sys).unwrap();
        prop_assume!(rep.is_feasible());
        let x = rep.point.unwrap();
        let mu = rep.multipliers.unwrap();
        prop_assert!(sys.max_violation(&x) <= FEASIBILITY_TOL);
        let mut combo = DVector::zeros(2);
        for i in 0..sys.n_extended() {
            prop_assert!(mu[i] >= 0.0);
            let (a, b) = extended_row(&sys, i);
            combo += &a * mu[i];
            if mu[i] > 1e-9 {
                prop_assert!((a.dot(&x) - b).abs() <= 1e-7, "multiplier on an inactive row");
            }
        }
        prop_assert!((&target - &x - combo).amax() <= 1e-8);
        let d = (&target - &x).norm();
        for y in probes {
            let y = DVector::from_row_slice(&y);
            prop_assert!(sys.max_violation(&y) > 0.0 || (&target - &y).norm() >= d - 1e-9);
        }
    }

    #[test]
    fn negative_spanning_matches_integer_search(rows in prop::collection::vec(prop::array::uniform2(-2i32..=2), 1..=4)) {
        let mat = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j] as f64);
        let ns = negative_spanning(&mat).unwrap();
        prop_assert_eq!(ns.spanned, spans_by_search(&rows));
        if let Some(nu) = ns.certificate {
            prop_assert!(nu.iter().all(|&v| v >= 0.0) && nu.amax() > 0.0);
            prop_assert!((mat.transpose() * nu).amax() <= 1e-9);
        }
    }
}

type F = fn(&DVector<f64>) -> f64;
type G = fn(&DVector<f64>) -> DVector<f64>;

fn ex4_with_order(order: [usize; 3]) -> ProblemSpec {
    let fs: [(F, G); 3] = [
        (
            |u| ex4_g([u[0], u[1]])[0],
            |u| DVector::from_vec(vec![-12.0 * u[0] - 3.5, 1.0]),
        ),
        (
            |u| ex4_g([u[0], u[1]])[1],
            |u| DVector::from_vec(vec![4.0 * u[0] + 0.5, 1.0]),
        ),
        (
            |u| ex4_g([u[0], u[1]])[2],
            |u| DVector::from_vec(vec![-2.0 * u[0], -2.0 * (u[1] - 0.15)]),
        ),
    ];
    let base = make_ex4();
    let mut b = ProblemSpec::builder("ex4p", base.u_lower.clone(), base.u_upper.clone())
        .cost(
            |u| ex4_cost([u[0], u[1]]),
            |u| DVector::from_vec(vec![2.0 * (u[0] - 0.5), 2.0 * (u[1] - 0.4)]),
        )
        .q_cost(base.q_cost.clone());
    let mut lip = DMatrix::zeros(3, 2);
    for (r, &j) in order.iter().enumerate() {
        b = b.constraint(fs[j].0, fs[j].1, None);
        lip.set_row(r, &base.lipschitz.row(j));
    }
    b.lipschitz(lip).build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kkt_error_ignores_constraint_order(x in -0.5f64..=0.5, y in 0.0f64..=0.8) {
        let u = DVector::from_vec(vec![x, y]);
        let base = make_ex4();
        prop_assume!(base.is_strictly_feasible(&u));
        let e0 = kkt_error(&base, &u).unwrap().error;
        for order in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
            let e = kkt_error(&ex4_with_order(order), &u).unwrap().error;
            prop_assert!((e - e0).abs() <= 1e-10 * e0.max(1.0), "{order:?}: {e} vs {e0}");
        }
    }
}
