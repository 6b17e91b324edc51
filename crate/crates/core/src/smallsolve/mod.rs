//! Dense small-scale solvers: nonnegative least squares, Euclidean projection
//! onto a polyhedron, LP feasibility with infeasibility certificates, and a
//! bounded-variable simplex.
//!
//! Projection and feasibility both go through a least-distance program solved
//! as an NNLS, so an infeasible system always yields a nonnegative certificate
//! `ν` with `νᵀA = 0` and `νᵀb < 0`.

mod ldp;
mod nnls;
mod simplex;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ScfoError};

pub use ldp::{lp_feasible, qp_project};
pub use nnls::{nnls, NnlsSolution};
pub use simplex::{lp_minimize, LpSolution};

/// Rows whose violation stays below this count as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const STATIONARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Feasible,
    Infeasible,
    Degenerate,
}

/// `{x : A x ⪯ b, box_lower ⪯ x ⪯ box_upper}`. Box entries may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub box_lower: DVector<f64>,
    pub box_upper: DVector<f64>,
}

impl HalfspaceSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, box_lower: DVector<f64>, box_upper: DVector<f64>) -> Result<Self> {
        let n = box_lower.len();
        if a.ncols() != n && a.nrows() > 0 {
            return Err(ScfoError::Parameter(format!(
                "row matrix has {} columns, box has dimension {n}",
                a.ncols()
            )));
        }
        if a.nrows() != b.len() {
            return Err(ScfoError::Parameter(format!(
                "{} rows but {} right-hand sides",
                a.nrows(),
                b.len()
            )));
        }
        if box_upper.len() != n {
            return Err(ScfoError::Parameter("box bounds differ in length".into()));
        }
        if (0..n).any(|i| !(box_lower[i] <= box_upper[i])) {
            return Err(ScfoError::Parameter("box lower bound exceeds upper bound".into()));
        }
        let a = if a.nrows() == 0 { DMatrix::zeros(0, n) } else { a };
        Ok(Self {
            a,
            b,
            box_lower,
            box_upper,
        })
    }

    /// System with no box (all bounds infinite).
    pub fn unboxed(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a.ncols();
        Self::new(
            a,
            b,
            DVector::from_element(n, f64::NEG_INFINITY),
            DVector::from_element(n, f64::INFINITY),
        )
    }

    pub fn dim(&self) -> usize {
        self.box_lower.len()
    }

    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    /// Length of a certificate or multiplier vector: general rows, then lower
    /// box rows `−x_i ≤ −l_i`, then upper box rows `x_i ≤ u_i`.
    pub fn n_extended(&self) -> usize {
        self.n_rows() + 2 * self.dim()
    }

    /// Largest violation of any row or finite box bound at `x` (0 if none).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        if self.n_rows() > 0 {
            let r = &self.a * x - &self.b;
            worst = r.iter().fold(worst, |w, &v| w.max(v));
        }
        for i in 0..self.dim() {
            worst = worst.max(self.box_lower[i] - x[i]).max(x[i] - self.box_upper[i]);
        }
        worst
    }

    /// For `ν` over the extended rows returns `(‖νᵀA_ext‖∞, νᵀb_ext)`.
    /// Entries for infinite box bounds must be zero and are skipped.
    pub fn alternative_residual(&self, nu: &DVector<f64>) -> (f64, f64) {
        let (m, n) = (self.n_rows(), self.dim());
        assert_eq!(nu.len(), m + 2 * n);
        let mut combo = DVector::zeros(n);
        let mut value = 0.0;
        for j in 0..m {
            if nu[j] != 0.0 {
                combo += self.a.row(j).transpose() * nu[j];
                value += nu[j] * self.b[j];
            }
        }
        for i in 0..n {
            let lo = nu[m + i];
            if lo != 0.0 {
                combo[i] -= lo;
                value -= lo * self.box_lower[i];
            }
            let hi = nu[m + n + i];
            if hi != 0.0 {
                combo[i] += hi;
                value += hi * self.box_upper[i];
            }
        }
        (combo.amax(), value)
    }
}

/// Outcome of a feasibility probe or projection.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub point: Option<DVector<f64>>,
    /// On infeasibility: `ν ⪰ 0` over the extended rows, scaled so its
    /// largest entry is 1, with `νᵀA_ext = 0` and `νᵀb_ext < 0`.
    pub certificate: Option<DVector<f64>>,
    /// On a feasible projection: `μ ⪰ 0` over the extended rows with
    /// `target − x = A_extᵀ μ`.
    pub multipliers: Option<DVector<f64>>,
    pub iterations: usize,
}

impl SolveReport {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Feasible
    }

    pub(crate) fn degenerate(iterations: usize) -> Self {
        Self {
            status: SolveStatus::Degenerate,
            point: None,
            certificate: None,
            multipliers: None,
            iterations,
        }
    }
}
