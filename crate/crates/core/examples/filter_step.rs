//! One filtered step on the two-constraint plant, with and without the
//! constraint-descent projection.

use nalgebra::dvector;
use scfo::problem::{make_ex2, DEFAULT_STRICTNESS};
use scfo::scfo::{scfo_step, Mode, ScfoParams};

fn main() -> scfo::Result<()> {
    let plant = make_ex2(DEFAULT_STRICTNESS);
    // Close to the first constraint, where the unprojected filter stalls.
    let current = plant.evaluate(&dvector![-0.27, 0.48])?;
    let target = dvector![-0.2, 0.7];
    println!("u_k = {:?}, g = {:?}", current.u.as_slice(), current.g.as_slice());

    for mode in [Mode::None, Mode::FeasibilityOnly] {
        let params = ScfoParams::for_problem(&plant, mode);
        let out = scfo_step(&plant, &current, 0, &params, &target)?;
        let r = &out.record;
        println!("\n{mode}:");
        if let Some(p) = &r.projected_target {
            println!("  projected target {:?} (active {:?})", p.as_slice(), r.active);
        }
        println!("  per-constraint gains {:?}", r.gain.per_constraint.as_slice());
        println!("  K = {:.6} limited by {:?}", r.gain.chosen, r.gain.limiting);
        println!("  u_k+1 = {:?}, g = {:?}", out.next.u.as_slice(), out.next.g.as_slice());
    }
    Ok(())
}
