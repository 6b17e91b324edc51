//! Algorithms × modes on one plant, run in parallel, with the per-run
//! trajectories written as CSV.

use scfo::algorithms::AlgorithmId;
use scfo::cli::table::write_trajectory_csv;
use scfo::harness::{run_many, RunConfig};
use scfo::problem::EX4_INITIAL_POINTS;
use scfo::scfo::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("scfo-sweep-example");
    std::fs::create_dir_all(&out)?;
    let mut configs = Vec::new();
    for alg in AlgorithmId::ALL {
        for mode in Mode::ALL {
            configs.push(RunConfig::new("ex4", alg, mode, &EX4_INITIAL_POINTS[1], 300).with_seed(3));
        }
    }
    println!(
        "{:<36} {:>9} {:>10} {:>12} {:>10}",
        "run", "feasible", "converged", "final cost", "kkt"
    );
    for (cfg, res) in configs.iter().zip(run_many(&configs, 4)) {
        let t = res?;
        let s = &t.summary;
        println!(
            "{:<36} {:>9} {:>10} {:>12.6} {:>10.2e}",
            cfg.name,
            s.feasible_all,
            s.converged_at.map_or("-".to_string(), |k| k.to_string()),
            s.final_cost,
            s.final_kkt_error
        );
        write_trajectory_csv(&t, &out.join(format!("{}.csv", cfg.name)))?;
    }
    println!("trajectories in {}", out.display());
    Ok(())
}
