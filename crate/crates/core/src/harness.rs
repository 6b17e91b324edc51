//! Closed-loop runs: plant × algorithm × filter mode × initial point, with the
//! full iterate history and summary metrics.

use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Deserialize;

use crate::algorithms::{make_algorithm, AlgorithmId, History};
use crate::error::{Result, ScfoError};
use crate::kkt::kkt_error;
use crate::problem::ProblemSpec;
use crate::scfo::{scfo_step, Iterate, Mode, ScfoParams};

pub const DEFAULT_STALL_TOLERANCE: f64 = 1e-9;
/// Consecutive sub-tolerance steps that count as a stall.
pub const STALL_WINDOW: usize = 20;

/// Partial overrides of the default [`ScfoParams`].
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub eps: Option<Vec<f64>>,
    pub delta_g: Option<Vec<f64>>,
    pub delta_phi: Option<f64>,
    pub eps_hi: Option<Vec<f64>>,
    pub delta_g_hi: Option<Vec<f64>>,
    pub delta_phi_hi: Option<f64>,
    pub eps_lo: Option<Vec<f64>>,
    pub delta_g_lo: Option<Vec<f64>>,
    pub delta_phi_lo: Option<f64>,
    /// Sets every lower bracket at once; the specific fields win.
    pub lower_bracket: Option<f64>,
    pub cost_gain_factor: Option<f64>,
}

impl ParamOverrides {
    pub fn apply(&self, mut p: ScfoParams) -> ScfoParams {
        let v = |x: &Vec<f64>| DVector::from_column_slice(x);
        if let Some(lo) = self.lower_bracket {
            p = p.with_lower_brackets(lo);
        }
        if let Some(x) = &self.eps {
            p.eps = v(x);
        }
        if let Some(x) = &self.delta_g {
            p.delta_g = v(x);
        }
        if let Some(x) = self.delta_phi {
            p.delta_phi = x;
        }
        if let Some(x) = &self.eps_hi {
            p.eps_hi = v(x);
        }
        if let Some(x) = &self.delta_g_hi {
            p.delta_g_hi = v(x);
        }
        if let Some(x) = self.delta_phi_hi {
            p.delta_phi_hi = x;
        }
        if let Some(x) = &self.eps_lo {
            p.eps_lo = v(x);
        }
        if let Some(x) = &self.delta_g_lo {
            p.delta_g_lo = v(x);
        }
        if let Some(x) = self.delta_phi_lo {
            p.delta_phi_lo = x;
        }
        if let Some(x) = self.cost_gain_factor {
            p.cost_gain_factor = x;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub plant_id: String,
    pub algorithm: AlgorithmId,
    pub mode: Mode,
    pub u0: DVector<f64>,
    pub max_iterations: usize,
    pub seed: u64,
    pub params: ParamOverrides,
    pub stall_tolerance: f64,
}

impl RunConfig {
    pub fn new(plant_id: &str, algorithm: AlgorithmId, mode: Mode, u0: &[f64], max_iterations: usize) -> Self {
        let name = format!(
            "{plant_id}_{algorithm}_{mode}_{}",
            u0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_")
        );
        Self {
            name,
            plant_id: plant_id.to_string(),
            algorithm,
            mode,
            u0: DVector::from_column_slice(u0),
            max_iterations,
            seed: 0,
            params: ParamOverrides::default(),
            stall_tolerance: DEFAULT_STALL_TOLERANCE,
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_params(mut self, params: ParamOverrides) -> Self {
        self.params = params;
        self
    }

    pub fn with_stall_tolerance(mut self, tol: f64) -> Self {
        self.stall_tolerance = tol;
        self
    }

    /// Resolves the plant and parameters and checks that `u0` is strictly
    /// feasible.
    pub fn prepare(&self) -> Result<(ProblemSpec, ScfoParams)> {
        let problem = ProblemSpec::by_id(&self.plant_id)?;
        if self.u0.len() != problem.n_u {
            return Err(ScfoError::config(
                "u0",
                format!(
                    "has {} components, plant `{}` has {} inputs",
                    self.u0.len(),
                    problem.id,
                    problem.n_u
                ),
            ));
        }
        problem
            .check_in_box(&self.u0)
            .map_err(|e| ScfoError::config("u0", e.to_string()))?;
        let g0 = problem.constraint_values(&self.u0);
        if let Some(j) = g0.iter().position(|&v| !(v < 0.0)) {
            return Err(ScfoError::config(
                "u0",
                format!("not strictly feasible: g_{} = {} >= 0", j + 1, g0[j]),
            ));
        }
        if self.max_iterations == 0 {
            return Err(ScfoError::config("max_iterations", "must be at least 1"));
        }
        if !(self.stall_tolerance >= 0.0) {
            return Err(ScfoError::config("stall_tolerance", "must be nonnegative"));
        }
        let params = self.params.apply(ScfoParams::for_problem(&problem, self.mode));
        params
            .validate(problem.n_g)
            .map_err(|e| ScfoError::config("params", e.to_string()))?;
        Ok((problem, params))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub feasible_all: bool,
    /// Cost strictly decreased on every step that was not a declared
    /// convergence.
    pub monotone_cost: bool,
    pub converged_at: Option<usize>,
    /// First `k` starting [`STALL_WINDOW`] consecutive steps shorter than the
    /// stall tolerance.
    pub stalled_at: Option<usize>,
    pub final_u: DVector<f64>,
    pub final_cost: f64,
    pub final_g: DVector<f64>,
    pub final_kkt_error: f64,
    pub min_gain: Option<f64>,
    pub distance_to_reference: Option<f64>,
    pub distance_to_reported: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: RunConfig,
    pub iterates: Vec<Iterate>,
    pub summary: Summary,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.iterates.iter().filter(|it| it.step.is_some()).count()
    }
}

/// A failed run, with whatever was recorded before the failure.
#[derive(Debug)]
pub struct RunError {
    pub error: ScfoError,
    pub partial: Option<Box<Trajectory>>,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.partial {
            Some(t) => write!(f, "{} (after {} recorded iterates)", self.error, t.iterates.len()),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<ScfoError> for RunError {
    fn from(error: ScfoError) -> Self {
        Self { error, partial: None }
    }
}

/// Summary statistics recomputed from the iterates alone.
pub fn metrics(iterates: &[Iterate], problem: &ProblemSpec, stall_tolerance: f64) -> Summary {
    assert!(!iterates.is_empty(), "metrics of an empty trajectory");
    let last = iterates.last().expect("nonempty");
    let feasible_all = iterates.iter().all(|it| it.eval.g.iter().all(|&g| g < 0.0));
    let monotone_cost = iterates
        .windows(2)
        .filter(|w| !w[0].converged)
        .all(|w| w[1].eval.cost < w[0].eval.cost);
    let converged_at = iterates.iter().find(|it| it.converged).map(|it| it.k);
    let short: Vec<bool> = iterates
        .windows(2)
        .map(|w| (&w[1].eval.u - &w[0].eval.u).norm() < stall_tolerance)
        .collect();
    let stalled_at = (0..short.len().saturating_sub(STALL_WINDOW - 1))
        .find(|&k| short[k..k + STALL_WINDOW].iter().all(|&s| s))
        .map(|k| iterates[k].k);
    let min_gain = iterates
        .iter()
        .filter_map(|it| it.gain())
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))));
    let final_u = last.eval.u.clone();
    let final_kkt_error = kkt_error(problem, &final_u).map_or(f64::NAN, |r| r.error);
    let reference = problem.reference.as_ref();
    Summary {
        feasible_all,
        monotone_cost,
        converged_at,
        stalled_at,
        final_cost: last.eval.cost,
        final_g: last.eval.g.clone(),
        final_kkt_error,
        min_gain,
        distance_to_reference: reference.map(|r| (&final_u - &r.precise).norm()),
        distance_to_reported: reference
            .and_then(|r| r.reported.as_ref())
            .map(|r| (&final_u - r).norm()),
        final_u,
    }
}

/// Runs one closed loop until auto-tune declares convergence or
/// `max_iterations` steps have been taken.
pub fn run(config: &RunConfig) -> std::result::Result<Trajectory, RunError> {
    let (problem, params) = config.prepare()?;
    let mut algorithm = make_algorithm(config.algorithm, &problem, &config.u0, config.seed)?;
    let mut current = problem.evaluate(&config.u0)?;
    let mut history = History::new(current.clone());
    let mut iterates = Vec::with_capacity(config.max_iterations + 1);

    let fail = |error: ScfoError, mut iterates: Vec<Iterate>, current| {
        iterates.push(Iterate {
            k: iterates.len(),
            eval: current,
            converged: false,
            step: None,
        });
        let summary = metrics(&iterates, &problem, config.stall_tolerance);
        RunError {
            error,
            partial: Some(Box::new(Trajectory {
                config: config.clone(),
                iterates,
                summary,
            })),
        }
    };

    let mut converged = false;
    for k in 0..config.max_iterations {
        let raw = match algorithm.next_target(&problem, &history) {
            Ok(t) => t,
            Err(e) => return Err(fail(e, iterates, current)),
        };
        if let Err(e) = problem.check_in_box(&raw) {
            let e = ScfoError::Algorithm {
                algorithm: config.algorithm.to_string(),
                detail: format!("target left the input box: {e}"),
            };
            return Err(fail(e, iterates, current));
        }
        let outcome = match scfo_step(&problem, &current, k, &params, &raw) {
            Ok(o) => o,
            Err(e) => return Err(fail(e, iterates, current)),
        };
        iterates.push(Iterate {
            k,
            eval: current.clone(),
            converged: outcome.converged,
            step: Some(outcome.record),
        });
        if outcome.converged {
            converged = true;
            break;
        }
        current = outcome.next;
        history.push(current.clone());
    }
    if !converged {
        iterates.push(Iterate {
            k: config.max_iterations,
            eval: current,
            converged: false,
            step: None,
        });
    }
    let summary = metrics(&iterates, &problem, config.stall_tolerance);
    Ok(Trajectory {
        config: config.clone(),
        iterates,
        summary,
    })
}

/// Runs every config on at most `jobs` worker threads; results come back in
/// input order.
pub fn run_many(configs: &[RunConfig], jobs: usize) -> Vec<std::result::Result<Trajectory, RunError>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| configs.par_iter().map(run).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::EX4_OPTIMUM_REPORTED;

    #[test]
    fn rejects_infeasible_start() {
        let cfg = RunConfig::new("ex2", AlgorithmId::Fixed, Mode::None, &[0.0, 0.75], 10);
        let err = run(&cfg).unwrap_err();
        assert!(matches!(err.error, ScfoError::Config { ref field, .. } if field == "u0"));
        let cfg = RunConfig::new("ex9", AlgorithmId::Fixed, Mode::None, &[0.0, 0.1], 10);
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn trajectory_shape() {
        let cfg = RunConfig::new("ex2", AlgorithmId::Fixed, Mode::None, &[-0.4, 0.1], 5);
        let t = run(&cfg).unwrap();
        assert_eq!(t.iterates.len(), 6);
        assert_eq!(t.n_steps(), 5);
        assert!(t.iterates.last().unwrap().step.is_none());
        assert!(t.summary.feasible_all);
        assert_eq!(t.summary.converged_at, None);
    }

    #[test]
    fn single_iterate_metrics() {
        let p = ProblemSpec::by_id("ex4").unwrap();
        let it = Iterate {
            k: 0,
            eval: p.evaluate(&DVector::from_row_slice(&EX4_OPTIMUM_REPORTED)).unwrap(),
            converged: false,
            step: None,
        };
        let s = metrics(&[it], &p, 1e-9);
        assert_eq!(s.converged_at, None);
        assert_eq!(s.min_gain, None);
        assert!(s.feasible_all && s.monotone_cost);
        assert!(s.distance_to_reported.unwrap() < 1e-15);
    }

    #[test]
    fn full_mode_random_reaches_optimum() {
        let cfg = RunConfig::new("ex4", AlgorithmId::Random, Mode::Full, &[0.0, 0.4], 500).with_seed(3);
        let t = run(&cfg).unwrap();
        assert!(t.summary.feasible_all);
        assert!(t.summary.monotone_cost);
        assert!(t.summary.distance_to_reported.unwrap() < 0.02);
        assert!(t.summary.final_kkt_error < 1e-3);
    }

    #[test]
    fn run_many_preserves_order() {
        let cfgs: Vec<_> = [0u64, 1, 2]
            .iter()
            .map(|&s| RunConfig::new("ex4", AlgorithmId::Random, Mode::None, &[0.0, 0.4], 20).with_seed(s))
            .collect();
        let par = run_many(&cfgs, 3);
        for (cfg, res) in cfgs.iter().zip(par) {
            let t = res.unwrap();
            assert_eq!(t.config.seed, cfg.seed);
            let seq = run(cfg).unwrap();
            assert_eq!(seq.summary.final_u, t.summary.final_u);
        }
    }
}
