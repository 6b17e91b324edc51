//! The filter itself: ε-active sets, the feasibility-preserving gain, the
//! descent-cone projections, the cost-aware gain and the parameter auto-tune.
//!
//! Scaling factors stored on the plant apply to ε-activity tests and to the
//! rows of the projection. Gains always use raw values and raw Lipschitz
//! constants.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::bounds::linear_growth_bound;
use crate::error::{Result, ScfoError};
use crate::problem::{Evaluation, ProblemSpec};
use crate::smallsolve::{lp_feasible, qp_project, HalfspaceSystem, SolveStatus};

/// Replaces 2 in the descent-gain bound so the step stays strictly inside it.
pub const DEFAULT_COST_GAIN_FACTOR: f64 = 1.99;
/// Displacements with every component at or below this are treated as zero.
pub const STATIONARY_TOL: f64 = 1e-12;
/// Constraint headroom withheld from every gain so that rounding in the
/// evaluation of `g` cannot turn a certified `g < 0` into `g >= 0`.
pub const GAIN_HEADROOM: f64 = 1e-14;
const MAX_GAIN_HALVINGS: usize = 60;

pub const DEFAULT_UPPER_BRACKET: f64 = 1.0;
pub const DEFAULT_LOWER_BRACKET: f64 = 1e-8;
/// Fixed parameters in feasibility-only mode are this fraction of the upper
/// brackets unless the plant supplies nominal values.
pub const FIXED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    None,
    FeasibilityOnly,
    Full,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::None, Mode::FeasibilityOnly, Mode::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::FeasibilityOnly => "feasibility_only",
            Mode::Full => "full",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ScfoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Mode::None),
            "feasibility_only" | "feas" | "feasibility" => Ok(Mode::FeasibilityOnly),
            "full" => Ok(Mode::Full),
            other => Err(ScfoError::config(
                "mode",
                format!("unknown mode `{other}` (expected none, feasibility_only or full)"),
            )),
        }
    }
}

/// Projection parameters with their auto-tune brackets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScfoParams {
    pub eps: DVector<f64>,
    pub delta_g: DVector<f64>,
    pub delta_phi: f64,
    pub eps_hi: DVector<f64>,
    pub delta_g_hi: DVector<f64>,
    pub delta_phi_hi: f64,
    pub eps_lo: DVector<f64>,
    pub delta_g_lo: DVector<f64>,
    pub delta_phi_lo: f64,
    pub mode: Mode,
    pub cost_gain_factor: f64,
}

impl ScfoParams {
    /// Defaults for `problem`: brackets `[1e-8, 1]`; full mode starts at the
    /// upper brackets, feasibility-only mode uses the plant's nominal values
    /// or 0.01 of the upper brackets.
    pub fn for_problem(problem: &ProblemSpec, mode: Mode) -> Self {
        let n = problem.n_g;
        let hi = DVector::from_element(n, DEFAULT_UPPER_BRACKET);
        let lo = DVector::from_element(n, DEFAULT_LOWER_BRACKET);
        let (eps, delta_g) = match mode {
            Mode::FeasibilityOnly => problem
                .nominal_projection
                .clone()
                .unwrap_or_else(|| (&hi * FIXED_FRACTION, &hi * FIXED_FRACTION)),
            _ => (hi.clone(), hi.clone()),
        };
        Self {
            eps,
            delta_g,
            delta_phi: DEFAULT_UPPER_BRACKET,
            eps_hi: hi.clone(),
            delta_g_hi: hi,
            delta_phi_hi: DEFAULT_UPPER_BRACKET,
            eps_lo: lo.clone(),
            delta_g_lo: lo,
            delta_phi_lo: DEFAULT_LOWER_BRACKET,
            mode,
            cost_gain_factor: DEFAULT_COST_GAIN_FACTOR,
        }
    }

    /// Sets every lower bracket to `lo`.
    pub fn with_lower_brackets(mut self, lo: f64) -> Self {
        self.eps_lo.fill(lo);
        self.delta_g_lo.fill(lo);
        self.delta_phi_lo = lo;
        self
    }

    pub fn validate(&self, n_g: usize) -> Result<()> {
        let vecs = [
            ("eps", &self.eps),
            ("delta_g", &self.delta_g),
            ("eps_hi", &self.eps_hi),
            ("delta_g_hi", &self.delta_g_hi),
            ("eps_lo", &self.eps_lo),
            ("delta_g_lo", &self.delta_g_lo),
        ];
        for (name, v) in vecs {
            if v.len() != n_g {
                return Err(ScfoError::Parameter(format!(
                    "{name} has length {}, expected {n_g}",
                    v.len()
                )));
            }
            if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(ScfoError::Parameter(format!(
                    "{name} must be finite and strictly positive"
                )));
            }
        }
        for (name, x) in [
            ("delta_phi", self.delta_phi),
            ("delta_phi_hi", self.delta_phi_hi),
            ("delta_phi_lo", self.delta_phi_lo),
        ] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(ScfoError::Parameter(format!(
                    "{name} must be finite and strictly positive"
                )));
            }
        }
        let ordered = self.eps_lo.iter().zip(self.eps_hi.iter()).all(|(l, h)| l <= h)
            && self.delta_g_lo.iter().zip(self.delta_g_hi.iter()).all(|(l, h)| l <= h)
            && self.delta_phi_lo <= self.delta_phi_hi;
        if !ordered {
            return Err(ScfoError::Parameter("a lower bracket exceeds its upper bracket".into()));
        }
        if !(self.cost_gain_factor > 0.0 && self.cost_gain_factor < 2.0) {
            return Err(ScfoError::Parameter("cost gain factor must lie in (0, 2)".into()));
        }
        Ok(())
    }

    pub fn reset_to_upper(&mut self) {
        self.eps.copy_from(&self.eps_hi);
        self.delta_g.copy_from(&self.delta_g_hi);
        self.delta_phi = self.delta_phi_hi;
    }

    pub fn halve(&mut self) {
        self.eps *= 0.5;
        self.delta_g *= 0.5;
        self.delta_phi *= 0.5;
    }

    /// Some family still sits at or above its lower bracket, so the
    /// projection is attempted rather than declaring convergence.
    pub fn any_family_at_or_above_lower(&self) -> bool {
        let eps_ok = self.eps.iter().zip(self.eps_lo.iter()).all(|(v, l)| v >= l);
        let dg_ok = self.delta_g.iter().zip(self.delta_g_lo.iter()).all(|(v, l)| v >= l);
        eps_ok || dg_ok || self.delta_phi >= self.delta_phi_lo
    }

    pub fn eps_min(&self) -> f64 {
        self.eps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn delta_g_min(&self) -> f64 {
        self.delta_g.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitingTag {
    /// Index of the constraint whose term is smallest.
    Constraint(usize),
    Cost,
    ClipOne,
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainBreakdown {
    pub per_constraint: DVector<f64>,
    pub cost_term: Option<f64>,
    /// Gain actually applied.
    pub chosen: f64,
    pub limiting: LimitingTag,
    /// Times the gain was halved because the realized step failed the
    /// post-rounding check.
    pub safety_halvings: usize,
}

impl GainBreakdown {
    fn stationary(n_g: usize, cost: bool) -> Self {
        Self {
            per_constraint: DVector::from_element(n_g, f64::INFINITY),
            cost_term: cost.then_some(f64::INFINITY),
            chosen: 0.0,
            limiting: LimitingTag::Stationary,
            safety_halvings: 0,
        }
    }
}

/// Indices `j` with `g_j ≥ −ε_j`. Nonnegative values are included.
pub fn epsilon_active_set(g_values: &DVector<f64>, eps: &DVector<f64>) -> Vec<usize> {
    assert_eq!(g_values.len(), eps.len());
    (0..g_values.len()).filter(|&j| g_values[j] >= -eps[j]).collect()
}

fn scaled_active_set(problem: &ProblemSpec, g: &DVector<f64>, eps: &DVector<f64>) -> Vec<usize> {
    let scaled = DVector::from_iterator(g.len(), (0..g.len()).map(|j| problem.constraint_scale(j) * g[j]));
    epsilon_active_set(&scaled, eps)
}

fn check_strictly_feasible(g: &DVector<f64>) -> Result<()> {
    match g.iter().position(|&v| !(v < 0.0)) {
        Some(j) => Err(ScfoError::Safety {
            iteration: 0,
            constraint: j,
            value: g[j],
        }),
        None => Ok(()),
    }
}

fn is_stationary(d: &DVector<f64>) -> bool {
    d.iter().all(|x| x.abs() <= STATIONARY_TOL)
}

/// `u_k + K (target − u_k)`, kept inside the box spanned by the two points.
pub fn filtered_point(u_k: &DVector<f64>, target: &DVector<f64>, gain: f64) -> DVector<f64> {
    DVector::from_iterator(
        u_k.len(),
        u_k.iter().zip(target.iter()).map(|(&a, &b)| {
            let v = a + gain * (b - a);
            v.clamp(a.min(b), a.max(b))
        }),
    )
}

/// Halves `gain` until every constraint's Lipschitz growth over the
/// realized step stays within its headroom.
fn secure_gain(
    problem: &ProblemSpec,
    u_k: &DVector<f64>,
    g: &DVector<f64>,
    target: &DVector<f64>,
    mut gain: f64,
) -> (f64, usize) {
    let mut halvings = 0;
    while gain > 0.0 {
        let next = filtered_point(u_k, target, gain);
        let ok = (0..problem.n_g)
            .all(|j| linear_growth_bound(&problem.kappa_row(j), u_k, &next) <= -g[j] - 0.5 * GAIN_HEADROOM);
        if ok {
            return (gain, halvings);
        }
        halvings += 1;
        gain = if halvings >= MAX_GAIN_HALVINGS { 0.0 } else { gain * 0.5 };
    }
    (0.0, halvings)
}

fn constraint_terms(
    problem: &ProblemSpec,
    u_k: &DVector<f64>,
    g: &DVector<f64>,
    target: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_iterator(
        problem.n_g,
        (0..problem.n_g).map(|j| {
            let growth = linear_growth_bound(&problem.kappa_row(j), u_k, target);
            (-g[j] - GAIN_HEADROOM).max(0.0) / growth
        }),
    )
}

fn finish(
    problem: &ProblemSpec,
    u_k: &DVector<f64>,
    g: &DVector<f64>,
    target: &DVector<f64>,
    per_constraint: DVector<f64>,
    cost_term: Option<f64>,
) -> GainBreakdown {
    let mut chosen = 1.0;
    let mut limiting = LimitingTag::ClipOne;
    for (j, &t) in per_constraint.iter().enumerate() {
        if t < chosen {
            chosen = t;
            limiting = LimitingTag::Constraint(j);
        }
    }
    if let Some(c) = cost_term {
        if c < chosen {
            chosen = c;
            limiting = LimitingTag::Cost;
        }
    }
    let (chosen, safety_halvings) = secure_gain(problem, u_k, g, target, chosen);
    GainBreakdown {
        per_constraint,
        cost_term,
        chosen,
        limiting,
        safety_halvings,
    }
}

/// Largest gain allowed by the Lipschitz bounds, clipped to 1.
pub fn feasibility_gain(
    problem: &ProblemSpec,
    u_k: &DVector<f64>,
    g_values: &DVector<f64>,
    target: &DVector<f64>,
) -> Result<GainBreakdown> {
    check_strictly_feasible(g_values)?;
    problem.check_in_box(target)?;
    if is_stationary(&(target - u_k)) {
        return Ok(GainBreakdown::stationary(problem.n_g, false));
    }
    let terms = constraint_terms(problem, u_k, g_values, target);
    Ok(finish(problem, u_k, g_values, target, terms, None))
}

/// As [`feasibility_gain`] plus the descent term
/// `−c ∇φᵀΔ / (ΔᵀQ̄_φΔ)` with `c` = `cost_gain_factor`.
pub fn full_gain(
    problem: &ProblemSpec,
    u_k: &DVector<f64>,
    g_values: &DVector<f64>,
    grad_cost: &DVector<f64>,
    target: &DVector<f64>,
    cost_gain_factor: f64,
) -> Result<GainBreakdown> {
    check_strictly_feasible(g_values)?;
    problem.check_in_box(target)?;
    let d = target - u_k;
    if is_stationary(&d) {
        return Ok(GainBreakdown::stationary(problem.n_g, true));
    }
    let slope = grad_cost.dot(&d);
    if !(slope < 0.0) {
        return Err(ScfoError::Precondition(format!(
            "target is not a cost descent direction (slope {slope:e})"
        )));
    }
    let cost_term = -cost_gain_factor * slope / problem.q_cost.quad_form(&d);
    let terms = constraint_terms(problem, u_k, g_values, target);
    Ok(finish(problem, u_k, g_values, target, terms, Some(cost_term)))
}

/// Descent-cone system around `u_k`: ε-active constraint rows, the cost row
/// in full mode, and the plant box. Returns the system and the active set.
pub fn projection_system(
    problem: &ProblemSpec,
    eval: &Evaluation,
    params: &ScfoParams,
) -> Result<(HalfspaceSystem, Vec<usize>)> {
    let active = scaled_active_set(problem, &eval.g, &params.eps);
    let with_cost = params.mode == Mode::Full;
    let m = active.len() + usize::from(with_cost);
    let n = problem.n_u;
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (r, &j) in active.iter().enumerate() {
        let row = eval.grad_g.row(j) * problem.constraint_scale(j);
        b[r] = row.dot(&eval.u.transpose()) - params.delta_g[j];
        a.set_row(r, &row);
    }
    if with_cost {
        let row = eval.grad_cost.transpose() * problem.cost_scale();
        b[m - 1] = row.dot(&eval.u.transpose()) - params.delta_phi;
        a.set_row(m - 1, &row);
    }
    let sys = HalfspaceSystem::new(a, b, problem.u_lower.clone(), problem.u_upper.clone())?;
    Ok((sys, active))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionOutcome {
    Projected {
        target: DVector<f64>,
        active: Vec<usize>,
    },
    Infeasible {
        active: Vec<usize>,
        /// Multipliers over the system rows then the box rows.
        certificate: DVector<f64>,
    },
}

/// Projects `target` onto the descent-cone system at `eval`.
pub fn build_projection(
    problem: &ProblemSpec,
    eval: &Evaluation,
    params: &ScfoParams,
    target: &DVector<f64>,
) -> Result<ProjectionOutcome> {
    if params.mode == Mode::None {
        return Err(ScfoError::Precondition("projection requested with mode none".into()));
    }
    let (sys, active) = projection_system(problem, eval, params)?;
    let rep = qp_project(target, &sys)?;
    match rep.status {
        SolveStatus::Feasible => Ok(ProjectionOutcome::Projected {
            target: rep.point.expect("feasible report carries a point"),
            active,
        }),
        SolveStatus::Infeasible => Ok(ProjectionOutcome::Infeasible {
            active,
            certificate: rep.certificate.expect("infeasible report carries a certificate"),
        }),
        SolveStatus::Degenerate => Err(ScfoError::Degenerate {
            iterations: rep.iterations,
            detail: "projection solver did not settle".into(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autotune {
    /// Projected target, or `u_k` on declared convergence.
    pub projected: DVector<f64>,
    pub params: ScfoParams,
    pub converged: bool,
    pub halvings: usize,
    pub active: Vec<usize>,
}

/// Resets the parameters to their upper brackets and halves them until the
/// cost-and-constraint descent system becomes feasible. Declares convergence
/// once every parameter family has dropped below its lower bracket.
pub fn autotune_and_project(
    problem: &ProblemSpec,
    eval: &Evaluation,
    params: &ScfoParams,
    target: &DVector<f64>,
) -> Result<Autotune> {
    if params.mode != Mode::Full {
        return Err(ScfoError::Precondition("auto-tune runs in full mode only".into()));
    }
    let mut p = params.clone();
    p.reset_to_upper();
    let mut halvings = 0;
    loop {
        if !p.any_family_at_or_above_lower() {
            return Ok(Autotune {
                projected: eval.u.clone(),
                params: p,
                converged: true,
                halvings,
                active: Vec::new(),
            });
        }
        let (sys, active) = projection_system(problem, eval, &p)?;
        if lp_feasible(&sys)?.is_feasible() {
            let rep = qp_project(target, &sys)?;
            if let (SolveStatus::Feasible, Some(point)) = (rep.status, rep.point) {
                return Ok(Autotune {
                    projected: point,
                    params: p,
                    converged: false,
                    halvings,
                    active,
                });
            }
        }
        p.halve();
        halvings += 1;
    }
}

/// What happened on the way from `u_k` to `u_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub raw_target: DVector<f64>,
    pub projected_target: Option<DVector<f64>>,
    pub gain: GainBreakdown,
    pub params: ScfoParams,
    pub active: Vec<usize>,
}

/// One iteration's measurements and, unless it is the last, the step taken
/// from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub k: usize,
    pub eval: Evaluation,
    /// Auto-tune declared convergence at this iterate; the projected target
    /// equals `u` and the gain is 0.
    pub converged: bool,
    pub step: Option<StepRecord>,
}

impl Iterate {
    pub fn u(&self) -> &DVector<f64> {
        &self.eval.u
    }

    pub fn gain(&self) -> Option<f64> {
        self.step.as_ref().map(|s| s.gain.chosen)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub record: StepRecord,
    pub converged: bool,
    pub next: Evaluation,
}

/// One filtered iteration from `current` towards `raw_target`. `k` only
/// labels errors.
pub fn scfo_step(
    problem: &ProblemSpec,
    current: &Evaluation,
    k: usize,
    params: &ScfoParams,
    raw_target: &DVector<f64>,
) -> Result<StepOutcome> {
    let at = |e: ScfoError| match e {
        ScfoError::Safety { constraint, value, .. } => ScfoError::Safety {
            iteration: k,
            constraint,
            value,
        },
        other => other,
    };
    check_strictly_feasible(&current.g).map_err(at)?;
    problem.check_in_box(raw_target)?;
    let u_k = &current.u;

    let (projected, gain, used, active, converged) = match params.mode {
        Mode::None => {
            let gain = feasibility_gain(problem, u_k, &current.g, raw_target).map_err(at)?;
            (None, gain, params.clone(), Vec::new(), false)
        }
        Mode::FeasibilityOnly => {
            let (target, active) = match build_projection(problem, current, params, raw_target) {
                Ok(ProjectionOutcome::Projected { target, active }) => (target, active),
                // No admissible direction with these fixed parameters: hold.
                Ok(ProjectionOutcome::Infeasible { active, .. }) => (u_k.clone(), active),
                Err(ScfoError::Degenerate { .. }) => (u_k.clone(), Vec::new()),
                Err(e) => return Err(e),
            };
            let gain = feasibility_gain(problem, u_k, &current.g, &target).map_err(at)?;
            (Some(target), gain, params.clone(), active, false)
        }
        Mode::Full => {
            let tuned = autotune_and_project(problem, current, params, raw_target)?;
            let gain = if tuned.converged {
                GainBreakdown::stationary(problem.n_g, true)
            } else {
                full_gain(
                    problem,
                    u_k,
                    &current.g,
                    &current.grad_cost,
                    &tuned.projected,
                    params.cost_gain_factor,
                )
                .map_err(at)?
            };
            (Some(tuned.projected), gain, tuned.params, tuned.active, tuned.converged)
        }
    };

    let step_target = projected.as_ref().unwrap_or(raw_target);
    let next_u = filtered_point(u_k, step_target, gain.chosen);
    let next = problem.evaluate(&next_u)?;
    if let Some(j) = next.g.iter().position(|&v| !(v < 0.0)) {
        return Err(ScfoError::Safety {
            iteration: k + 1,
            constraint: j,
            value: next.g[j],
        });
    }
    Ok(StepOutcome {
        record: StepRecord {
            raw_target: raw_target.clone(),
            projected_target: projected,
            gain,
            params: used,
            active,
        },
        converged,
        next,
    })
}

/// Lower bound on the feasibility-only gain over a whole run at fixed
/// `eps`, `delta_g`, with `gamma` the strictness degree of the Lipschitz
/// constants. Needs a quadratic bound for every constraint.
pub fn gain_floor(
    problem: &ProblemSpec,
    eps: &DVector<f64>,
    delta_g: &DVector<f64>,
    g0: &DVector<f64>,
    gamma: f64,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ScfoError::Parameter(format!(
            "strictness degree {gamma} outside (0, 1)"
        )));
    }
    let width = problem.box_width();
    let mut floor = f64::INFINITY;
    for j in 0..problem.n_g {
        let q = problem.q_constraints[j]
            .as_ref()
            .ok_or_else(|| ScfoError::Parameter(format!("no quadratic bound for constraint {j}")))?;
        let k_eps = 2.0 * delta_g[j] / q.quad_form(&width);
        let numer = ((1.0 - gamma) * eps[j])
            .min((1.0 - gamma) * k_eps * delta_g[j] / gamma)
            .min(-g0[j]);
        floor = floor.min(numer / problem.kappa_row(j).dot(&width));
    }
    Ok(floor)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    use super::*;
    use crate::problem::{make_ex2, make_ex4, EX4_OPTIMUM};

    #[test]
    fn active_set_examples() {
        let eps = dvector![0.02, 0.02];
        assert!(epsilon_active_set(&dvector![-0.24, -0.53], &eps).is_empty());
        assert_eq!(epsilon_active_set(&dvector![-0.01, -0.5], &eps), vec![0]);
        assert_eq!(epsilon_active_set(&dvector![-0.02, -0.02], &eps), vec![0, 1]);
        assert_eq!(epsilon_active_set(&dvector![0.0, 1.0], &eps), vec![0, 1]);
    }

    #[test]
    fn feasibility_gain_ex2() {
        let p = make_ex2(1.1);
        let u0 = dvector![-0.4, 0.1];
        let g = p.constraint_values(&u0);
        let gb = feasibility_gain(&p, &u0, &g, &dvector![-0.2, 0.7]).unwrap();
        assert_abs_diff_eq!(gb.per_constraint[0], 0.24 / 0.99, epsilon = 1e-12);
        assert_abs_diff_eq!(gb.per_constraint[1], 0.53 / 1.21, epsilon = 1e-12);
        assert_abs_diff_eq!(gb.chosen, 0.2424, epsilon = 1e-4);
        assert_eq!(gb.limiting, LimitingTag::Constraint(0));
        assert_eq!(gb.safety_halvings, 0);
    }

    #[test]
    fn feasibility_gain_stationary_and_clip() {
        let p = make_ex2(1.1);
        let u0 = dvector![-0.4, 0.1];
        let g = p.constraint_values(&u0);
        let gb = feasibility_gain(&p, &u0, &g, &u0).unwrap();
        assert_eq!(gb.chosen, 0.0);
        assert_eq!(gb.limiting, LimitingTag::Stationary);

        let gb = feasibility_gain(&p, &u0, &dvector![-100.0, -100.0], &dvector![0.0, 0.1]).unwrap();
        assert_eq!(gb.chosen, 1.0);
        assert_eq!(gb.limiting, LimitingTag::ClipOne);
    }

    #[test]
    fn feasibility_gain_rejects_nonnegative_g() {
        let p = make_ex2(1.1);
        let u0 = dvector![-0.4, 0.1];
        let err = feasibility_gain(&p, &u0, &dvector![0.0, -1.0], &dvector![0.0, 0.1]).unwrap_err();
        assert!(err.is_safety());
    }

    #[test]
    fn full_gain_examples() {
        let p = make_ex4();
        let u = dvector![0.0, 0.2];
        let loose = dvector![-100.0, -100.0, -100.0];
        let gb = full_gain(&p, &u, &loose, &dvector![0.0, -1.0], &dvector![0.0, 0.7], 1.99).unwrap();
        assert_abs_diff_eq!(gb.cost_term.unwrap(), 1.99 * 0.5 / (2.0 * 0.25), epsilon = 1e-12);

        let u = dvector![0.0, 0.0];
        let gb = full_gain(&p, &u, &loose, &dvector![0.0, -1.0], &dvector![0.0, 0.8], 1.99).unwrap();
        assert_abs_diff_eq!(gb.cost_term.unwrap(), 1.99 * 0.8 / (2.0 * 0.64), epsilon = 1e-12);

        // a tight constraint takes over
        let tight = dvector![-0.1 * 1.1 * 0.8, -100.0, -100.0];
        let gb = full_gain(&p, &u, &tight, &dvector![0.0, -1.0], &dvector![0.0, 0.8], 1.99).unwrap();
        assert_abs_diff_eq!(gb.chosen, 0.1, epsilon = 1e-12);
        assert_eq!(gb.limiting, LimitingTag::Constraint(0));

        let gb = full_gain(&p, &u, &loose, &dvector![0.0, -10.0], &dvector![0.0, 0.1], 1.99).unwrap();
        assert_eq!(gb.chosen, 1.0);

        assert!(full_gain(&p, &u, &loose, &dvector![0.0, 1.0], &dvector![0.0, 0.1], 1.99).is_err());
    }

    #[test]
    fn unit_cost_term() {
        // grad (0,−1), Q̄ = diag(2,2), Δ = (0,1): 1.99 / 2.
        let p = make_ex4();
        let loose = dvector![-100.0, -100.0, -100.0];
        let u = dvector![0.0, 0.0];
        let target = dvector![0.0, 0.8];
        let gb = full_gain(&p, &u, &loose, &dvector![0.0, -0.8], &target, 1.99).unwrap();
        assert_abs_diff_eq!(gb.cost_term.unwrap(), 0.995, epsilon = 1e-12);
    }

    #[test]
    fn projection_without_active_rows_keeps_target() {
        let p = make_ex2(1.1);
        let eval = p.evaluate(&dvector![-0.4, 0.1]).unwrap();
        let params = ScfoParams::for_problem(&p, Mode::FeasibilityOnly);
        let out = build_projection(&p, &eval, &params, &dvector![-0.2, 0.7]).unwrap();
        match out {
            ProjectionOutcome::Projected { target, active } => {
                assert!(active.is_empty());
                assert_abs_diff_eq!(target, dvector![-0.2, 0.7], epsilon = 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn opposite_normals_are_infeasible() {
        let p = ProblemSpec::builder("opp", dvector![-1.0, -1.0], dvector![1.0, 1.0])
            .cost(|u| u[1], |_| dvector![0.0, 1.0])
            .q_cost(crate::bounds::QuadBound::new(dvector![1.0, 1.0]).unwrap())
            .constraint(|u| u[0] - 0.01, |_| dvector![1.0, 0.0], None)
            .constraint(|u| -u[0] - 0.01, |_| dvector![-1.0, 0.0], None)
            .lipschitz(nalgebra::dmatrix![1.1, 0.1; 1.1, 0.1])
            .build()
            .unwrap();
        let eval = p.evaluate(&dvector![0.0, 0.0]).unwrap();
        let params = ScfoParams::for_problem(&p, Mode::FeasibilityOnly);
        let out = build_projection(&p, &eval, &params, &dvector![0.5, 0.5]).unwrap();
        assert!(matches!(out, ProjectionOutcome::Infeasible { ref active, .. } if active == &vec![0, 1]));
    }

    #[test]
    fn autotune_far_from_constraints_keeps_upper_brackets() {
        let p = ProblemSpec::builder("far", dvector![-10.0, -10.0], dvector![10.0, 10.0])
            .cost(|u| u[0] + u[1], |_| dvector![1.0, 1.0])
            .q_cost(crate::bounds::QuadBound::new(dvector![1.0, 1.0]).unwrap())
            .constraint(|u| u[0] - 20.0, |_| dvector![1.0, 0.0], None)
            .lipschitz(nalgebra::dmatrix![1.1, 0.1])
            .build()
            .unwrap();
        let eval = p.evaluate(&dvector![0.0, 0.0]).unwrap();
        let params = ScfoParams::for_problem(&p, Mode::Full);
        let t = autotune_and_project(&p, &eval, &params, &dvector![-5.0, -5.0]).unwrap();
        assert!(!t.converged);
        assert_eq!(t.halvings, 0);
        assert_eq!(t.params.eps, params.eps_hi);
        assert_abs_diff_eq!(t.projected, dvector![-5.0, -5.0], epsilon = 1e-12);
    }

    #[test]
    fn autotune_converges_at_optimum() {
        let p = make_ex4();
        let eval = p.evaluate(&DVector::from_row_slice(&EX4_OPTIMUM)).unwrap();
        let params = ScfoParams::for_problem(&p, Mode::Full);
        let t = autotune_and_project(&p, &eval, &params, &dvector![0.5, 0.4]).unwrap();
        assert!(t.converged);
        assert_eq!(t.halvings, 27);
        assert_eq!(t.projected, eval.u);
    }

    #[test]
    fn mode_none_first_step_ex2() {
        let p = make_ex2(1.1);
        let eval = p.evaluate(&dvector![-0.4, 0.1]).unwrap();
        let params = ScfoParams::for_problem(&p, Mode::None);
        let out = scfo_step(&p, &eval, 0, &params, &dvector![-0.2, 0.7]).unwrap();
        assert_abs_diff_eq!(out.next.u, dvector![-0.3515, 0.2455], epsilon = 1e-4);
        assert!(!out.converged);
    }

    #[test]
    fn full_step_decreases_cost() {
        let p = make_ex4();
        let eval = p.evaluate(&dvector![0.0, 0.4]).unwrap();
        let params = ScfoParams::for_problem(&p, Mode::Full);
        let out = scfo_step(&p, &eval, 0, &params, &dvector![0.4, 0.0]).unwrap();
        assert!(out.next.cost < eval.cost);
    }

    #[test]
    fn params_validation() {
        let p = make_ex4();
        let mut params = ScfoParams::for_problem(&p, Mode::Full);
        assert!(params.validate(3).is_ok());
        assert!(params.validate(2).is_err());
        params.eps_lo[0] = 2.0;
        assert!(params.validate(3).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("feas".parse::<Mode>().unwrap(), Mode::FeasibilityOnly);
        assert_eq!("full".parse::<Mode>().unwrap(), Mode::Full);
        assert!("half".parse::<Mode>().is_err());
    }
}
