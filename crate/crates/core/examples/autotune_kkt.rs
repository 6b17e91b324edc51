//! Full-mode closed loop on the three-constraint plant: auto-tuned
//! projection parameters per iteration and the KKT error of the end point.

use scfo::algorithms::AlgorithmId;
use scfo::harness::{run, RunConfig};
use scfo::kkt::kkt_error;
use scfo::problem::{make_ex4, EX4_INITIAL_POINTS};
use scfo::scfo::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::new("ex4", AlgorithmId::GradDim, Mode::Full, &EX4_INITIAL_POINTS[0], 1000);
    let traj = run(&cfg)?;
    println!(
        "{:>5} {:>10} {:>10} {:>12} {:>10} {:>10}",
        "k", "u1", "u2", "cost", "K", "eps_min"
    );
    for it in traj.iterates.iter().filter(|it| it.k % 20 == 0 || it.converged) {
        let (gain, eps) = it
            .step
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |s| (s.gain.chosen, s.params.eps_min()));
        println!(
            "{:>5} {:>10.6} {:>10.6} {:>12.8} {:>10.2e} {:>10.2e}",
            it.k, it.eval.u[0], it.eval.u[1], it.eval.cost, gain, eps
        );
    }
    let s = &traj.summary;
    println!("converged at {:?}, monotone cost: {}", s.converged_at, s.monotone_cost);

    let report = kkt_error(&make_ex4(), &s.final_u)?;
    println!("final point {:?}", s.final_u.as_slice());
    println!(
        "kkt error {:e}, multipliers {:?}",
        report.error,
        report.mu(3).as_slice()
    );
    Ok(())
}
