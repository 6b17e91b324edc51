//! Lipschitz and quadratic upper bounds on how far a function can move
//! between two inputs, and the step-length interval that guarantees descent.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ScfoError};

/// Diagonal quadratic upper bound `Q̄`, stored by its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadBound {
    diag: DVector<f64>,
}

impl QuadBound {
    pub fn new(diag: DVector<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(ScfoError::Parameter("quadratic bound must be non-empty".into()));
        }
        if let Some(i) = diag.iter().position(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(ScfoError::Parameter(format!(
                "quadratic bound diagonal entry {i} = {} is not strictly positive",
                diag[i]
            )));
        }
        Ok(Self { diag })
    }

    /// Builds `Q̄` from elementwise bounds `M_ij > |∂²f/∂u_i∂u_j|`:
    /// `Q̄_ii = Σ_j M_ij`.
    pub fn from_hessian_limits(m: &DMatrix<f64>) -> Result<Self> {
        qbound_from_hessian_limits(m)
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `dᵀ Q̄ d`.
    pub fn quad_form(&self, d: &DVector<f64>) -> f64 {
        self.diag.iter().zip(d.iter()).map(|(q, x)| q * x * x).sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.diag * factor)
    }
}

pub fn qbound_from_hessian_limits(m: &DMatrix<f64>) -> Result<QuadBound> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(ScfoError::Parameter(format!(
            "Hessian limit matrix must be square and non-empty, got {:?}",
            m.shape()
        )));
    }
    if m.iter().any(|&v| !(v > 0.0)) {
        return Err(ScfoError::Parameter(
            "Hessian limit matrix entries must be strictly positive".into(),
        ));
    }
    QuadBound::new(DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum())))
}

/// `Σ_i κ_i |u_to,i − u_from,i|`. Returns 0 for zero displacement, where the
/// strict inequality it certifies does not apply.
pub fn linear_growth_bound(kappa_row: &DVector<f64>, u_from: &DVector<f64>, u_to: &DVector<f64>) -> f64 {
    debug_assert_eq!(kappa_row.len(), u_from.len());
    debug_assert_eq!(u_from.len(), u_to.len());
    kappa_row
        .iter()
        .zip(u_from.iter().zip(u_to.iter()))
        .map(|(k, (a, b))| k * (b - a).abs())
        .sum()
}

/// `∇f(u_from)ᵀΔ + ½ ΔᵀQ̄Δ` with `Δ = u_to − u_from`.
pub fn quadratic_growth_bound(grad: &DVector<f64>, qb: &QuadBound, u_from: &DVector<f64>, u_to: &DVector<f64>) -> f64 {
    let d = u_to - u_from;
    grad.dot(&d) + 0.5 * qb.quad_form(&d)
}

/// Upper end of the gain interval `(0, K̄)` over which a step from `u_k`
/// towards `u_star` strictly decreases any `f` majorized by `qb`.
pub fn descent_gain_upper(
    grad: &DVector<f64>,
    qb: &QuadBound,
    u_k: &DVector<f64>,
    u_star: &DVector<f64>,
) -> Result<f64> {
    let d = u_star - u_k;
    let slope = grad.dot(&d);
    if d.iter().all(|&x| x == 0.0) {
        return Err(ScfoError::Precondition("zero displacement".into()));
    }
    if !(slope < 0.0) {
        return Err(ScfoError::Precondition(format!(
            "direction is not a descent direction (slope {slope:e})"
        )));
    }
    Ok(-2.0 * slope / qb.quad_form(&d))
}
