//! Wrapping a user-supplied plant and driving the filter step by step with a
//! naive optimizer that always aims at the unconstrained minimum.

use nalgebra::{dmatrix, dvector, DVector};
use scfo::bounds::QuadBound;
use scfo::problem::ProblemSpec;
use scfo::scfo::{scfo_step, Mode, ScfoParams};

fn main() -> scfo::Result<()> {
    // Minimize (u1 - 1)² + (u2 - 1)² subject to u1² + u2² ≤ 1 on [-1.5, 1.5]².
    let plant = ProblemSpec::builder("disc", dvector![-1.5, -1.5], dvector![1.5, 1.5])
        .cost(
            |u| (u[0] - 1.0).powi(2) + (u[1] - 1.0).powi(2),
            |u| dvector![2.0 * (u[0] - 1.0), 2.0 * (u[1] - 1.0)],
        )
        .q_cost(QuadBound::new(dvector![2.2, 2.2])?)
        .constraint(
            |u| u[0] * u[0] + u[1] * u[1] - 1.0,
            |u| dvector![2.0 * u[0], 2.0 * u[1]],
            None,
        )
        .lipschitz(dmatrix![3.1, 3.1])
        .build()?;

    let params = ScfoParams::for_problem(&plant, Mode::Full);
    let target: DVector<f64> = dvector![1.0, 1.0];
    let mut current = plant.evaluate(&dvector![-0.5, 0.0])?;
    for k in 0..400 {
        let out = scfo_step(&plant, &current, k, &params, &target)?;
        if out.converged {
            println!("converged at k = {k}");
            break;
        }
        current = out.next;
        if k % 50 == 0 {
            println!(
                "k = {k:>3}: u = ({:.5}, {:.5}), g = {:.2e}",
                current.u[0], current.u[1], current.g[0]
            );
        }
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    println!("final u = {:?}; optimum is ({h:.5}, {h:.5})", current.u.as_slice());
    Ok(())
}
