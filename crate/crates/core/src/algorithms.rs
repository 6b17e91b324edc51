//! Target generators: each maps the measurement history to the next raw
//! target `u*_{k+1}` inside the input box. The filter decides how far to move
//! towards it.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ScfoError};
use crate::problem::{Evaluation, ProblemSpec};
use crate::smallsolve::{lp_minimize, HalfspaceSystem, SolveStatus};

pub const FIXED_TARGET: [f64; 2] = [-0.2, 0.7];

/// Everything measured so far, oldest first. Never empty.
#[derive(Debug, Clone)]
pub struct History {
    entries: Vec<Evaluation>,
}

impl History {
    pub fn new(first: Evaluation) -> Self {
        Self { entries: vec![first] }
    }

    pub fn push(&mut self, e: Evaluation) {
        self.entries.push(e);
    }

    /// Index of the latest iterate.
    pub fn k(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn last(&self) -> &Evaluation {
        self.entries.last().expect("history is never empty")
    }

    pub fn entries(&self) -> &[Evaluation] {
        &self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmId {
    Fixed,
    GradDim,
    ConAdapt,
    TwoStep,
    Random,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 5] = [
        AlgorithmId::Fixed,
        AlgorithmId::GradDim,
        AlgorithmId::ConAdapt,
        AlgorithmId::TwoStep,
        AlgorithmId::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::Fixed => "fixed",
            AlgorithmId::GradDim => "graddim",
            AlgorithmId::ConAdapt => "conadapt",
            AlgorithmId::TwoStep => "twostep",
            AlgorithmId::Random => "random",
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmId {
    type Err = ScfoError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s.trim()).ok_or_else(|| {
            ScfoError::config(
                "algorithm",
                format!("unknown algorithm `{s}` (known: fixed, graddim, conadapt, twostep, random)"),
            )
        })
    }
}

pub trait TargetGenerator: Send {
    fn id(&self) -> AlgorithmId;
    fn next_target(&mut self, problem: &ProblemSpec, history: &History) -> Result<DVector<f64>>;
}

/// Builds the generator for `id` with its per-run state.
pub fn make_algorithm(
    id: AlgorithmId,
    problem: &ProblemSpec,
    u0: &DVector<f64>,
    seed: u64,
) -> Result<Box<dyn TargetGenerator>> {
    Ok(match id {
        AlgorithmId::Fixed => {
            if problem.n_u != 2 {
                return Err(ScfoError::Algorithm {
                    algorithm: id.to_string(),
                    detail: "the fixed target is two-dimensional".into(),
                });
            }
            let t = DVector::from_row_slice(&FIXED_TARGET);
            let t = t.zip_zip_map(&problem.u_lower, &problem.u_upper, |v, l, u| v.clamp(l, u));
            Box::new(FixedTarget { target: t })
        }
        AlgorithmId::GradDim => Box::new(GradientDiminishing),
        AlgorithmId::ConAdapt => Box::new(ConstraintAdaptation {
            model: AffineModel::for_problem(problem, u0)?,
        }),
        AlgorithmId::TwoStep => Box::new(TwoStep::new(problem)?),
        AlgorithmId::Random => Box::new(RandomStep::new(seed)),
    })
}

pub fn fixed_target(_history: &History, target: &DVector<f64>) -> DVector<f64> {
    target.clone()
}

pub struct FixedTarget {
    pub target: DVector<f64>,
}

impl TargetGenerator for FixedTarget {
    fn id(&self) -> AlgorithmId {
        AlgorithmId::Fixed
    }

    fn next_target(&mut self, _problem: &ProblemSpec, history: &History) -> Result<DVector<f64>> {
        Ok(fixed_target(history, &self.target))
    }
}

/// `u_k − ∇φ(u_k)/k` clipped to the box; the first step (`k = 0`) uses a
/// unit step.
pub fn projected_gradient_diminishing(
    history: &History,
    grad_cost_at_uk: &DVector<f64>,
    u_lower: &DVector<f64>,
    u_upper: &DVector<f64>,
) -> DVector<f64> {
    let step = 1.0 / history.k().max(1) as f64;
    let raw = &history.last().u - grad_cost_at_uk * step;
    raw.zip_zip_map(u_lower, u_upper, |v, l, u| v.clamp(l, u))
}

pub struct GradientDiminishing;

impl TargetGenerator for GradientDiminishing {
    fn id(&self) -> AlgorithmId {
        AlgorithmId::GradDim
    }

    fn next_target(&mut self, problem: &ProblemSpec, history: &History) -> Result<DVector<f64>> {
        Ok(projected_gradient_diminishing(
            history,
            &history.last().grad_cost,
            &problem.u_lower,
            &problem.u_upper,
        ))
    }
}

/// Linear cost `cᵀu` and affine constraint models `A u + b0`, row `r`
/// standing in for plant constraint `plant_index[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineModel {
    pub cost: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b0: DVector<f64>,
    pub plant_index: Vec<usize>,
}

impl AffineModel {
    /// The fixed linear model identified near `(−0.4, 0.1)` for `ex2`:
    /// `g_1 = −1.3u_1 + u_2 − 1.02`, `g_2 = −1.1u_1 + u_2 − 1.39`, maximize `u_2`.
    pub fn ex2() -> Self {
        Self {
            cost: DVector::from_row_slice(&[0.0, -1.0]),
            a: DMatrix::from_row_slice(2, 2, &[-1.3, 1.0, -1.1, 1.0]),
            b0: DVector::from_row_slice(&[-1.02, -1.39]),
            plant_index: vec![0, 1],
        }
    }

    /// `ex2` uses [`AffineModel::ex2`]; any other plant is linearized at
    /// `u0`.
    pub fn for_problem(problem: &ProblemSpec, u0: &DVector<f64>) -> Result<Self> {
        if problem.id == "ex2" {
            return Ok(Self::ex2());
        }
        let e = problem.evaluate(u0)?;
        let b0 = &e.g - &e.grad_g * u0;
        Ok(Self {
            cost: e.grad_cost,
            a: e.grad_g,
            b0,
            plant_index: (0..problem.n_g).collect(),
        })
    }

    pub fn constraint_values(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.a * u + &self.b0
    }
}

/// Bias-corrected model optimum: `ε_k = g_p(u_k) − g(u_k)`, then
/// `min cᵀu s.t. g(u) + ε_k ⪯ 0` over the box.
pub fn constraint_adaptation(history: &History, model: &AffineModel, problem: &ProblemSpec) -> Result<DVector<f64>> {
    let bias = adaptation_bias(history, model);
    let rhs = -(&model.b0 + &bias);
    let sys = HalfspaceSystem::new(model.a.clone(), rhs, problem.u_lower.clone(), problem.u_upper.clone())?;
    let sol = lp_minimize(&model.cost, &sys)?;
    match (sol.status, sol.x) {
        (SolveStatus::Feasible, Some(x)) => Ok(x),
        (status, _) => Err(ScfoError::Algorithm {
            algorithm: AlgorithmId::ConAdapt.to_string(),
            detail: format!("bias-corrected model LP ended {status:?}"),
        }),
    }
}

pub fn adaptation_bias(history: &History, model: &AffineModel) -> DVector<f64> {
    let last = history.last();
    let modelled = model.constraint_values(&last.u);
    DVector::from_iterator(
        model.plant_index.len(),
        model
            .plant_index
            .iter()
            .enumerate()
            .map(|(r, &j)| last.g[j] - modelled[r]),
    )
}

pub struct ConstraintAdaptation {
    pub model: AffineModel,
}

impl TargetGenerator for ConstraintAdaptation {
    fn id(&self) -> AlgorithmId {
        AlgorithmId::ConAdapt
    }

    fn next_target(&mut self, problem: &ProblemSpec, history: &History) -> Result<DVector<f64>> {
        constraint_adaptation(history, &self.model, problem)
    }
}

/// Parametric model for the two-step scheme:
///
/// ```text
/// φ   = θ1 (u1 − 0.3)² + θ2 (u2 − 0.3)²
/// g1  = −θ3 u1² − 3.5 u1 + u2² − 0.6
/// g2  = θ4 u1 + u2 + θ5
/// g3  = −u1² − (u2 − 0.15)² + 0.01
/// ```
///
/// On a plant with fewer constraints only the leading model constraints are
/// used.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepModel {
    pub theta: [f64; 5],
    pub n_constraints: usize,
}

const GRID_STEP: f64 = 1e-2;
const REFINE_START: f64 = 1e-2;
const REFINE_STOP: f64 = 1e-6;
const RANK_TOL: f64 = 1e-10;

impl TwoStepModel {
    pub fn prior(n_constraints: usize) -> Self {
        Self {
            theta: [1.0; 5],
            n_constraints: n_constraints.min(3),
        }
    }

    pub fn cost(&self, u: &DVector<f64>) -> f64 {
        self.theta[0] * (u[0] - 0.3).powi(2) + self.theta[1] * (u[1] - 0.3).powi(2)
    }

    pub fn constraint(&self, j: usize, u: &DVector<f64>) -> f64 {
        let (u1, u2) = (u[0], u[1]);
        match j {
            0 => -self.theta[2] * u1 * u1 - 3.5 * u1 + u2 * u2 - 0.6,
            1 => self.theta[3] * u1 + u2 + self.theta[4],
            2 => -u1 * u1 - (u2 - 0.15).powi(2) + 0.01,
            _ => unreachable!("model has three constraints"),
        }
    }

    fn violation(&self, u: &DVector<f64>) -> f64 {
        (0..self.n_constraints).map(|j| self.constraint(j, u).max(0.0)).sum()
    }

    /// Refits every parameter group by least squares over `history`. Groups
    /// whose design matrix is rank deficient keep their current values.
    pub fn fit(&mut self, history: &History) {
        let data = history.entries();
        let rows = data.len();
        let design = |f: &dyn Fn(&Evaluation) -> Vec<f64>, y: &dyn Fn(&Evaluation) -> f64, p: usize| {
            let x = DMatrix::from_fn(rows, p, |r, c| f(&data[r])[c]);
            let y = DVector::from_fn(rows, |r, _| y(&data[r]));
            least_squares(&x, &y)
        };
        if let Some(t) = design(
            &|e| vec![(e.u[0] - 0.3).powi(2), (e.u[1] - 0.3).powi(2)],
            &|e| e.cost,
            2,
        ) {
            self.theta[0] = t[0];
            self.theta[1] = t[1];
        }
        if self.n_constraints >= 1 {
            if let Some(t) = design(
                &|e| vec![-e.u[0] * e.u[0]],
                &|e| e.g[0] + 3.5 * e.u[0] - e.u[1] * e.u[1] + 0.6,
                1,
            ) {
                self.theta[2] = t[0];
            }
        }
        if self.n_constraints >= 2 {
            if let Some(t) = design(&|e| vec![e.u[0], 1.0], &|e| e.g[1] - e.u[1], 2) {
                self.theta[3] = t[0];
                self.theta[4] = t[1];
            }
        }
    }

    /// Minimizes the model over the box: grid search, then pattern search.
    /// When no grid point satisfies the model constraints the total model
    /// violation is minimized instead.
    pub fn optimize(&self, lower: &DVector<f64>, upper: &DVector<f64>) -> DVector<f64> {
        let nx = ((upper[0] - lower[0]) / GRID_STEP).round() as usize;
        let ny = ((upper[1] - lower[1]) / GRID_STEP).round() as usize;
        let any_feasible =
            (0..=nx).any(|i| (0..=ny).any(|j| self.violation(&grid_point(lower, upper, i, j, nx, ny)) == 0.0));
        let score = |u: &DVector<f64>| -> (f64, f64) {
            if any_feasible {
                if self.violation(u) > 0.0 {
                    (f64::INFINITY, f64::INFINITY)
                } else {
                    (self.cost(u), 0.0)
                }
            } else {
                (self.violation(u), self.cost(u))
            }
        };
        let better = |a: (f64, f64), b: (f64, f64)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);

        let mut best = grid_point(lower, upper, 0, 0, nx, ny);
        let mut best_score = score(&best);
        for i in 0..=nx {
            for j in 0..=ny {
                let p = grid_point(lower, upper, i, j, nx, ny);
                let s = score(&p);
                if better(s, best_score) {
                    best = p;
                    best_score = s;
                }
            }
        }
        let mut h = REFINE_START;
        while h >= REFINE_STOP {
            let mut improved = false;
            for dim in 0..2 {
                for dir in [-1.0, 1.0] {
                    let mut p = best.clone();
                    p[dim] = (p[dim] + dir * h).clamp(lower[dim], upper[dim]);
                    let s = score(&p);
                    if better(s, best_score) {
                        best = p;
                        best_score = s;
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best
    }
}

fn grid_point(lower: &DVector<f64>, upper: &DVector<f64>, i: usize, j: usize, nx: usize, ny: usize) -> DVector<f64> {
    let x = if i == nx {
        upper[0]
    } else {
        lower[0] + i as f64 * GRID_STEP
    };
    let y = if j == ny {
        upper[1]
    } else {
        lower[1] + j as f64 * GRID_STEP
    };
    DVector::from_row_slice(&[x, y])
}

/// Least-squares coefficients, or `None` if `x` lacks full column rank.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    if x.nrows() < x.ncols() {
        return None;
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= RANK_TOL * smax {
        return None;
    }
    svd.solve(y, 0.0).ok()
}

/// One two-step iteration: refit `model` on the whole history, then return
/// the model optimizer.
pub fn two_step(history: &History, model: &mut TwoStepModel, problem: &ProblemSpec) -> DVector<f64> {
    model.fit(history);
    model.optimize(&problem.u_lower, &problem.u_upper)
}

pub struct TwoStep {
    pub model: TwoStepModel,
}

impl TwoStep {
    pub fn new(problem: &ProblemSpec) -> Result<Self> {
        if problem.n_u != 2 {
            return Err(ScfoError::Algorithm {
                algorithm: AlgorithmId::TwoStep.to_string(),
                detail: "the parametric model is two-dimensional".into(),
            });
        }
        Ok(Self {
            model: TwoStepModel::prior(problem.n_g),
        })
    }
}

impl TargetGenerator for TwoStep {
    fn id(&self) -> AlgorithmId {
        AlgorithmId::TwoStep
    }

    fn next_target(&mut self, problem: &ProblemSpec, history: &History) -> Result<DVector<f64>> {
        Ok(two_step(history, &mut self.model, problem))
    }
}

/// Uniform draws on the box from a ChaCha8 stream seeded with
/// `seed_from_u64(seed)`. Each coordinate consumes one `u64`, mapped to
/// `[0, 1)` as `(x >> 11) · 2⁻⁵³` and then affinely onto `[l_i, u_i]`.
pub struct RandomStep {
    rng: ChaCha8Rng,
}

impl RandomStep {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

pub fn random_step(rng: &mut ChaCha8Rng, u_lower: &DVector<f64>, u_upper: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        u_lower.len(),
        u_lower.iter().zip(u_upper.iter()).map(|(&l, &u)| {
            let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            (l + unit * (u - l)).min(u)
        }),
    )
}

impl TargetGenerator for RandomStep {
    fn id(&self) -> AlgorithmId {
        AlgorithmId::Random
    }

    fn next_target(&mut self, problem: &ProblemSpec, _history: &History) -> Result<DVector<f64>> {
        Ok(random_step(&mut self.rng, &problem.u_lower, &problem.u_upper))
    }
}
