//! Plant definitions: cost, constraints, their gradients, the input box and
//! the global constants (Lipschitz matrix, quadratic upper bounds) the filter
//! relies on.
//!
//! Two analytic benchmark plants ship with the crate:
//!
//! * `ex2`: maximize `u_2` (stored as minimizing `-u_2`) under one convex and
//!   one concave-free quadratic constraint.
//! * `ex4`: a quadratic cost with one convex and two concave constraints,
//!   a stable KKT point near `(0.35, 0.32)` and an unstable one near
//!   `(-0.09, 0.11)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use crate::bounds::QuadBound;
use crate::error::{BoundSide, Result, ScfoError};

/// Tolerance used when checking that an input lies inside the box.
pub const BOX_TOLERANCE: f64 = 1e-12;

pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Point used to judge where a run ended up.
#[derive(Debug, Clone)]
pub struct ReferencePoint {
    /// Value as reported (rounded) in the literature, if any.
    pub reported: Option<DVector<f64>>,
    /// Value obtained by solving the stationarity conditions to machine precision.
    pub precise: DVector<f64>,
}

/// A plant of the form `min phi(u) s.t. g_j(u) <= 0, u^L <= u <= u^U`.
///
/// Immutable after construction and cheap to clone; all evaluators are
/// reentrant.
#[derive(Clone)]
pub struct ProblemSpec {
    pub id: String,
    pub n_u: usize,
    pub n_g: usize,
    pub u_lower: DVector<f64>,
    pub u_upper: DVector<f64>,
    cost: ScalarFn,
    cost_grad: VectorFn,
    constraints: Vec<ScalarFn>,
    constraint_grads: Vec<VectorFn>,
    /// Strict Lipschitz constants `kappa[(j, i)]`, one row per constraint.
    pub lipschitz: DMatrix<f64>,
    /// Tight (nonstrict) constants, when known. Used only for `gamma_kappa`.
    pub lipschitz_nonstrict: Option<DMatrix<f64>>,
    pub q_cost: QuadBound,
    pub q_constraints: Vec<Option<QuadBound>>,
    /// Typical ranges `(s_1, ..., s_ng, s_phi)`. The filter divides each
    /// function by its range before testing activity and forming descent rows.
    pub scaling: DVector<f64>,
    /// Projection parameters `(eps, delta_g)` to use when the filter runs
    /// without auto-tuning. `None` means `0.01` times the upper brackets.
    pub nominal_projection: Option<(DVector<f64>, DVector<f64>)>,
    pub reference: Option<ReferencePoint>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("id", &self.id)
            .field("n_u", &self.n_u)
            .field("n_g", &self.n_g)
            .field("u_lower", &self.u_lower.as_slice())
            .field("u_upper", &self.u_upper.as_slice())
            .field("scaling", &self.scaling.as_slice())
            .finish_non_exhaustive()
    }
}

/// Full measurement of the plant at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub u: DVector<f64>,
    pub cost: f64,
    pub g: DVector<f64>,
    pub grad_cost: DVector<f64>,
    /// Row `j` is the gradient of `g_j`.
    pub grad_g: DMatrix<f64>,
}

impl ProblemSpec {
    pub fn builder(id: impl Into<String>, u_lower: DVector<f64>, u_upper: DVector<f64>) -> ProblemBuilder {
        ProblemBuilder {
            id: id.into(),
            u_lower,
            u_upper,
            cost: None,
            cost_grad: None,
            constraints: Vec::new(),
            constraint_grads: Vec::new(),
            q_constraints: Vec::new(),
            lipschitz: None,
            lipschitz_nonstrict: None,
            q_cost: None,
            scaling: None,
            nominal_projection: None,
            reference: None,
        }
    }

    /// Rejects inputs outside the box (with [`BOX_TOLERANCE`] slack).
    pub fn check_in_box(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.n_u {
            return Err(ScfoError::Parameter(format!(
                "input has {} components, plant `{}` expects {}",
                u.len(),
                self.id,
                self.n_u
            )));
        }
        for i in 0..self.n_u {
            let v = u[i];
            if !v.is_finite() || v < self.u_lower[i] - BOX_TOLERANCE {
                return Err(ScfoError::Domain {
                    index: i,
                    value: v,
                    bound: BoundSide::Lower,
                    limit: self.u_lower[i],
                });
            }
            if v > self.u_upper[i] + BOX_TOLERANCE {
                return Err(ScfoError::Domain {
                    index: i,
                    value: v,
                    bound: BoundSide::Upper,
                    limit: self.u_upper[i],
                });
            }
        }
        Ok(())
    }

    pub fn cost(&self, u: &DVector<f64>) -> f64 {
        (self.cost)(u)
    }

    pub fn cost_grad(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.cost_grad)(u)
    }

    pub fn constraint(&self, j: usize, u: &DVector<f64>) -> f64 {
        (self.constraints[j])(u)
    }

    pub fn constraint_grad(&self, j: usize, u: &DVector<f64>) -> DVector<f64> {
        (self.constraint_grads[j])(u)
    }

    pub fn constraint_values(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n_g, self.constraints.iter().map(|g| g(u)))
    }

    /// Cost, constraints and all gradients at `u`.
    pub fn evaluate(&self, u: &DVector<f64>) -> Result<Evaluation> {
        self.check_in_box(u)?;
        let mut grad_g = DMatrix::zeros(self.n_g, self.n_u);
        for (j, grad) in self.constraint_grads.iter().enumerate() {
            grad_g.set_row(j, &grad(u).transpose());
        }
        Ok(Evaluation {
            u: u.clone(),
            cost: self.cost(u),
            g: self.constraint_values(u),
            grad_cost: self.cost_grad(u),
            grad_g,
        })
    }

    pub fn is_strictly_feasible(&self, u: &DVector<f64>) -> bool {
        self.check_in_box(u).is_ok() && self.constraint_values(u).iter().all(|&g| g < 0.0)
    }

    pub fn box_width(&self) -> DVector<f64> {
        &self.u_upper - &self.u_lower
    }

    pub fn box_center(&self) -> DVector<f64> {
        (&self.u_upper + &self.u_lower) * 0.5
    }

    /// Multiplier applied to `g_j` in scaled form, `1 / s_j`.
    pub fn constraint_scale(&self, j: usize) -> f64 {
        1.0 / self.scaling[j]
    }

    pub fn cost_scale(&self) -> f64 {
        1.0 / self.scaling[self.n_g]
    }

    pub fn kappa_row(&self, j: usize) -> DVector<f64> {
        self.lipschitz.row(j).transpose()
    }

    /// Degree of strictness: the largest ratio of the tight constants to the
    /// strict ones. `None` when the tight constants are unknown.
    pub fn gamma_kappa(&self) -> Option<f64> {
        let tight = self.lipschitz_nonstrict.as_ref()?;
        Some(
            tight
                .iter()
                .zip(self.lipschitz.iter())
                .map(|(t, s)| t / s)
                .fold(0.0, f64::max),
        )
    }

    /// Looks up a shipped plant by id (`"ex2"` or `"ex4"`).
    pub fn by_id(id: &str) -> Result<ProblemSpec> {
        match id {
            "ex2" => Ok(make_ex2(DEFAULT_STRICTNESS)),
            "ex4" => Ok(make_ex4()),
            other => Err(ScfoError::config(
                "plant",
                format!("unknown plant id `{other}` (known: ex2, ex4)"),
            )),
        }
    }
}

pub struct ProblemBuilder {
    id: String,
    u_lower: DVector<f64>,
    u_upper: DVector<f64>,
    cost: Option<ScalarFn>,
    cost_grad: Option<VectorFn>,
    constraints: Vec<ScalarFn>,
    constraint_grads: Vec<VectorFn>,
    q_constraints: Vec<Option<QuadBound>>,
    lipschitz: Option<DMatrix<f64>>,
    lipschitz_nonstrict: Option<DMatrix<f64>>,
    q_cost: Option<QuadBound>,
    scaling: Option<DVector<f64>>,
    nominal_projection: Option<(DVector<f64>, DVector<f64>)>,
    reference: Option<ReferencePoint>,
}

impl ProblemBuilder {
    pub fn cost(
        mut self,
        f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.cost = Some(Arc::new(f));
        self.cost_grad = Some(Arc::new(grad));
        self
    }

    pub fn constraint(
        mut self,
        f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        q_bound: Option<QuadBound>,
    ) -> Self {
        self.constraints.push(Arc::new(f));
        self.constraint_grads.push(Arc::new(grad));
        self.q_constraints.push(q_bound);
        self
    }

    pub fn lipschitz(mut self, strict: DMatrix<f64>) -> Self {
        self.lipschitz = Some(strict);
        self
    }

    pub fn lipschitz_nonstrict(mut self, tight: DMatrix<f64>) -> Self {
        self.lipschitz_nonstrict = Some(tight);
        self
    }

    pub fn q_cost(mut self, q: QuadBound) -> Self {
        self.q_cost = Some(q);
        self
    }

    pub fn scaling(mut self, s: DVector<f64>) -> Self {
        self.scaling = Some(s);
        self
    }

    pub fn nominal_projection(mut self, eps: DVector<f64>, delta_g: DVector<f64>) -> Self {
        self.nominal_projection = Some((eps, delta_g));
        self
    }

    pub fn reference(mut self, reported: Option<DVector<f64>>, precise: DVector<f64>) -> Self {
        self.reference = Some(ReferencePoint { reported, precise });
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let n_u = self.u_lower.len();
        let n_g = self.constraints.len();
        if n_u == 0 {
            return Err(ScfoError::Parameter("input dimension must be positive".into()));
        }
        if self.u_upper.len() != n_u {
            return Err(ScfoError::Parameter("u_lower and u_upper differ in length".into()));
        }
        if let Some(i) = (0..n_u).find(|&i| !(self.u_lower[i] < self.u_upper[i])) {
            return Err(ScfoError::Parameter(format!(
                "box is empty or degenerate in component {i}"
            )));
        }
        let cost = self
            .cost
            .ok_or_else(|| ScfoError::Parameter("cost function missing".into()))?;
        let cost_grad = self.cost_grad.expect("set together with cost");
        let lipschitz = self
            .lipschitz
            .unwrap_or_else(|| DMatrix::from_element(n_g, n_u, f64::INFINITY));
        if lipschitz.shape() != (n_g, n_u) {
            return Err(ScfoError::Parameter(format!(
                "Lipschitz matrix is {:?}, expected ({n_g}, {n_u})",
                lipschitz.shape()
            )));
        }
        if lipschitz.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
            return Err(ScfoError::Parameter(
                "Lipschitz constants must be finite and strictly positive".into(),
            ));
        }
        if let Some(tight) = &self.lipschitz_nonstrict {
            if tight.shape() != (n_g, n_u) {
                return Err(ScfoError::Parameter(
                    "nonstrict Lipschitz matrix has wrong shape".into(),
                ));
            }
        }
        let q_cost = self
            .q_cost
            .ok_or_else(|| ScfoError::Parameter("quadratic upper bound for the cost missing".into()))?;
        if q_cost.dim() != n_u {
            return Err(ScfoError::Parameter("q_cost has wrong dimension".into()));
        }
        let scaling = self.scaling.unwrap_or_else(|| DVector::from_element(n_g + 1, 1.0));
        if scaling.len() != n_g + 1 || scaling.iter().any(|&s| !(s > 0.0)) {
            return Err(ScfoError::Parameter(format!(
                "scaling must hold {} strictly positive factors",
                n_g + 1
            )));
        }
        if let Some((eps, dg)) = &self.nominal_projection {
            if eps.len() != n_g || dg.len() != n_g {
                return Err(ScfoError::Parameter(
                    "nominal projection parameters have wrong length".into(),
                ));
            }
        }
        Ok(ProblemSpec {
            id: self.id,
            n_u,
            n_g,
            u_lower: self.u_lower,
            u_upper: self.u_upper,
            cost,
            cost_grad,
            constraints: self.constraints,
            constraint_grads: self.constraint_grads,
            lipschitz,
            lipschitz_nonstrict: self.lipschitz_nonstrict,
            q_cost,
            q_constraints: self.q_constraints,
            scaling,
            nominal_projection: self.nominal_projection,
            reference: self.reference,
        })
    }
}

pub const DEFAULT_STRICTNESS: f64 = 1.1;

/// Vertex where both constraints of `ex2` are active; maximizes `u_2`.
pub const EX2_OPTIMUM: [f64; 2] = [0.047722557505166074, 0.7215838362577491];

/// Stable KKT point of `ex4` on the `g_2` boundary.
pub const EX4_OPTIMUM: [f64; 2] = [0.3534486884483755, 0.32342370504405865];
pub const EX4_OPTIMUM_REPORTED: [f64; 2] = [0.35, 0.32];
pub const EX4_UNSTABLE_KKT_REPORTED: [f64; 2] = [-0.09, 0.11];
/// The hard start near the concave constraints and the easy interior start.
pub const EX4_INITIAL_POINTS: [[f64; 2]; 2] = [[-0.5, 0.05], [0.0, 0.4]];
pub const EX2_INITIAL_POINT: [f64; 2] = [-0.4, 0.1];

/// Hessian entry bounds are padded by this much where the Hessian entry is
/// zero, so that every `M_ij` is strictly positive.
const HESSIAN_PAD: f64 = 0.01;

fn hessian_bound(h: DMatrix<f64>, factor: f64) -> QuadBound {
    let m = h.map(|v| if v == 0.0 { HESSIAN_PAD } else { factor * v.abs() });
    QuadBound::from_hessian_limits(&m).expect("padded Hessian bounds are positive")
}

/// The two-input, two-constraint plant: maximize `u_2`, stored as
/// minimizing `-u_2`.
///
/// `strictness_factor` multiplies the tight Lipschitz matrix
/// `[[1.5, 1], [2.5, 1]]` to obtain the strict one.
pub fn make_ex2(strictness_factor: f64) -> ProblemSpec {
    assert!(strictness_factor > 1.0, "strictness factor must exceed 1");
    let tight = dmatrix![1.5, 1.0; 2.5, 1.0];
    ProblemSpec::builder("ex2", dvector![-0.5, 0.0], dvector![0.5, 0.8])
        .cost(|u| -u[1], |_| dvector![0.0, -1.0])
        .constraint(
            |u| u[0] * u[0] - 0.5 * u[0] + u[1] - 0.7,
            |u| dvector![2.0 * u[0] - 0.5, 1.0],
            Some(hessian_bound(dmatrix![2.0, 0.0; 0.0, 0.0], strictness_factor)),
        )
        .constraint(
            |u| 2.0 * u[0] * u[0] + 0.5 * u[0] + u[1] - 0.75,
            |u| dvector![4.0 * u[0] + 0.5, 1.0],
            Some(hessian_bound(dmatrix![4.0, 0.0; 0.0, 0.0], strictness_factor)),
        )
        .lipschitz(&tight * strictness_factor)
        .lipschitz_nonstrict(tight)
        // Linear cost: any positive diagonal is a valid upper bound.
        .q_cost(hessian_bound(DMatrix::zeros(2, 2), strictness_factor))
        .nominal_projection(dvector![0.02, 0.02], dvector![0.1, 0.1])
        .reference(None, DVector::from_row_slice(&EX2_OPTIMUM))
        .build()
        .expect("ex2 plant is well formed")
}

/// The three-constraint plant with a quadratic cost and the `4 : 2 : 1 : 1.5`
/// scaling of `(g_1, g_2, g_3, phi)`.
pub fn make_ex4() -> ProblemSpec {
    let tight = dmatrix![9.5, 1.0; 2.5, 1.0; 1.0, 1.3];
    ProblemSpec::builder("ex4", dvector![-0.5, 0.0], dvector![0.5, 0.8])
        .cost(
            |u| (u[0] - 0.5).powi(2) + (u[1] - 0.4).powi(2),
            |u| dvector![2.0 * (u[0] - 0.5), 2.0 * (u[1] - 0.4)],
        )
        .constraint(
            |u| -6.0 * u[0] * u[0] - 3.5 * u[0] + u[1] - 0.6,
            |u| dvector![-12.0 * u[0] - 3.5, 1.0],
            Some(hessian_bound(dmatrix![-12.0, 0.0; 0.0, 0.0], DEFAULT_STRICTNESS)),
        )
        .constraint(
            |u| 2.0 * u[0] * u[0] + 0.5 * u[0] + u[1] - 0.75,
            |u| dvector![4.0 * u[0] + 0.5, 1.0],
            Some(hessian_bound(dmatrix![4.0, 0.0; 0.0, 0.0], DEFAULT_STRICTNESS)),
        )
        .constraint(
            |u| -u[0] * u[0] - (u[1] - 0.15).powi(2) + 0.01,
            |u| dvector![-2.0 * u[0], -2.0 * (u[1] - 0.15)],
            Some(hessian_bound(dmatrix![-2.0, 0.0; 0.0, -2.0], DEFAULT_STRICTNESS)),
        )
        .lipschitz(&tight * DEFAULT_STRICTNESS)
        .lipschitz_nonstrict(tight)
        .q_cost(QuadBound::new(dvector![2.0, 2.0]).expect("positive"))
        .scaling(dvector![4.0, 2.0, 1.0, 1.5])
        .reference(
            Some(DVector::from_row_slice(&EX4_OPTIMUM_REPORTED)),
            DVector::from_row_slice(&EX4_OPTIMUM),
        )
        .build()
        .expect("ex4 plant is well formed")
}
