//! The Lipschitz and quadratic growth bounds, and the largest gain that
//! still guarantees descent.

use nalgebra::{dmatrix, dvector};
use scfo::bounds::{descent_gain_upper, linear_growth_bound, qbound_from_hessian_limits, quadratic_growth_bound};

fn main() -> scfo::Result<()> {
    // f(u) = u1² + u1 u2 - u2, Hessian [[2, 1], [1, 0]].
    let f = |u: &nalgebra::DVector<f64>| u[0] * u[0] + u[0] * u[1] - u[1];
    let grad = |u: &nalgebra::DVector<f64>| dvector![2.0 * u[0] + u[1], u[0] - 1.0];
    let kappa = dvector![3.1, 2.1];
    let q = qbound_from_hessian_limits(&dmatrix![2.0, 1.0; 1.0, 0.1])?;

    let a = dvector![0.2, -0.4];
    for b in [dvector![0.5, 0.5], dvector![-1.0, 1.0], dvector![0.21, -0.41]] {
        println!(
            "{:?} -> {:?}: change {:+.4}, linear bound {:.4}, quadratic bound {:+.4}",
            a.as_slice(),
            b.as_slice(),
            f(&b) - f(&a),
            linear_growth_bound(&kappa, &a, &b),
            quadratic_growth_bound(&grad(&a), &q, &a, &b)
        );
    }

    let target = dvector![-0.5, 0.4];
    let kbar = descent_gain_upper(&grad(&a), &q, &a, &target)?;
    println!("\ndescent guaranteed for K in (0, {kbar:.4})");
    for k in [0.25, 0.5, 0.75, 1.0, 1.25].map(|s| s * kbar) {
        let next = &a + (&target - &a) * k;
        println!("  K = {k:.4}: f change {:+.6}", f(&next) - f(&a));
    }
    Ok(())
}
