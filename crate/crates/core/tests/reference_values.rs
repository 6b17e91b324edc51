//! Reference constants checked against independent computations and against
//! the numbers stated for the benchmark plants.

mod common;

use nalgebra::{dmatrix, dvector, DVector};
use scfo::kkt::kkt_error;
use scfo::problem::*;
use scfo::scfo::{Mode, ScfoParams};

use common::*;

#[test]
fn ex2_vertex_matches_closed_form() {
    let o = ex2_optimum();
    assert!(dist(&o, &EX2_OPTIMUM) < 1e-14);
    let g = ex2_g(o);
    assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14);
}

#[test]
fn ex4_optimum_matches_bisection() {
    let o = ex4_optimum();
    assert!(dist(&o, &EX4_OPTIMUM) < 1e-12, "{o:?}");
    let g = ex4_g(o);
    assert!(g[0] < -1.0 && g[2] < -0.1 && g[1].abs() < 1e-12);
    // Stated rounding of the stable KKT point.
    assert!(dist(&o, &EX4_OPTIMUM_REPORTED) < 0.005);
}

#[test]
fn ex4_multiplier_matches_gradient_ratio() {
    let p = make_ex4();
    let o = ex4_optimum();
    let rep = kkt_error(&p, &DVector::from_row_slice(&o)).unwrap();
    // -∇φ = μ ∇g2, read off the second component where ∂g2/∂u2 = 1.
    let mu = -2.0 * (o[1] - 0.4);
    assert!((rep.mu(3)[1] - mu).abs() < 1e-6);
    assert!(rep.error < 1e-12);
}

#[test]
fn ex4_unstable_point_is_near_a_kkt_point_on_g3() {
    let p = make_ex4();
    let u = DVector::from_row_slice(&EX4_UNSTABLE_KKT_REPORTED);
    let g = ex4_g(EX4_UNSTABLE_KKT_REPORTED);
    assert!(g[2].abs() < 5e-3, "stated point sits on the small circle: {g:?}");
    // The stated value is rounded to two decimals, so only a loose bound.
    assert!(kkt_error(&p, &u).unwrap().error < 1e-3);
    assert!(kkt_error(&p, &dvector![0.0, 0.4]).unwrap().error > 1e-2);
}

#[test]
fn ex2_closest_feasible_point_to_fixed_target() {
    let grid = ex2_grid_projection([-0.2, 0.7], 1e-3);
    let precise = [-0.13442811553961379, 0.6147150239826613];
    assert!(dist(&grid, &precise) < 2e-3, "{grid:?}");
    assert!(ex2_g(precise)[0].abs() < 1e-12);
}

#[test]
fn stated_plant_data() {
    let p4 = make_ex4();
    let k = dmatrix![9.5, 1.0; 2.5, 1.0; 1.0, 1.3] * 1.1;
    assert!((&p4.lipschitz - k).amax() < 1e-15);
    assert_eq!(p4.scaling, dvector![4.0, 2.0, 1.0, 1.5]);
    assert_eq!(p4.q_cost.diag(), &dvector![2.0, 2.0]);
    assert_eq!(p4.u_lower, dvector![-0.5, 0.0]);
    assert_eq!(p4.u_upper, dvector![0.5, 0.8]);

    let p2 = make_ex2(DEFAULT_STRICTNESS);
    let k2 = dmatrix![1.5, 1.0; 2.5, 1.0] * 1.1;
    assert!((&p2.lipschitz - k2).amax() < 1e-15);
    assert!((p2.gamma_kappa().unwrap() - 1.0 / 1.1).abs() < 1e-15);

    let nominal = ScfoParams::for_problem(&p2, Mode::FeasibilityOnly);
    assert_eq!(nominal.eps, dvector![0.02, 0.02]);
    assert_eq!(nominal.delta_g, dvector![0.1, 0.1]);
    let fixed = ScfoParams::for_problem(&p4, Mode::FeasibilityOnly);
    assert_eq!(fixed.eps, DVector::from_element(3, 0.01));
    assert_eq!(fixed.delta_g, DVector::from_element(3, 0.01));
    let full = ScfoParams::for_problem(&p4, Mode::Full);
    assert_eq!(full.eps_hi, DVector::from_element(3, 1.0));
    assert_eq!(full.eps_lo, DVector::from_element(3, 1e-8));
    assert_eq!(full.delta_phi_lo, 1e-8);
}
