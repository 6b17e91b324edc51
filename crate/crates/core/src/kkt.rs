//! KKT error of a point and detection of negatively spanned gradient sets.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ScfoError};
use crate::problem::ProblemSpec;
use crate::smallsolve::{lp_feasible, nnls, HalfspaceSystem, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Minimal squared stationarity plus complementary-slackness residual.
    pub error: f64,
    /// `μ` (one per constraint), then `ζ^L`, then `ζ^U` (one per input each).
    pub multipliers: DVector<f64>,
    pub stationarity_norm_sq: f64,
    pub slackness_sq: f64,
}

impl KktReport {
    pub fn mu(&self, n_g: usize) -> DVector<f64> {
        self.multipliers.rows(0, n_g).into_owned()
    }
}

/// Minimizes over `μ, ζ^L, ζ^U ⪰ 0` the squared norm of
/// `∇φ + Σ μ_j ∇g_j − ζ^L + ζ^U` plus the squared products
/// `μ_j g_j`, `ζ^L_i (u^L_i − u_i)`, `ζ^U_i (u_i − u^U_i)`.
pub fn kkt_error(problem: &ProblemSpec, u: &DVector<f64>) -> Result<KktReport> {
    let e = problem.evaluate(u)?;
    let (n, m) = (problem.n_u, problem.n_g);
    let cols = m + 2 * n;
    let mut bm = DMatrix::zeros(n + cols, cols);
    for j in 0..m {
        for i in 0..n {
            bm[(i, j)] = e.grad_g[(j, i)];
        }
        bm[(n + j, j)] = e.g[j];
    }
    for i in 0..n {
        bm[(i, m + i)] = -1.0;
        bm[(i, m + n + i)] = 1.0;
        bm[(n + m + i, m + i)] = problem.u_lower[i] - u[i];
        bm[(n + m + n + i, m + n + i)] = u[i] - problem.u_upper[i];
    }
    let mut offset = DVector::zeros(n + cols);
    offset.rows_mut(0, n).copy_from(&e.grad_cost);
    let sol = nnls(&bm, &offset);
    if sol.status == SolveStatus::Degenerate {
        return Err(ScfoError::Degenerate {
            iterations: sol.iterations,
            detail: "KKT multiplier fit did not settle".into(),
        });
    }
    let r = &bm * &sol.x + &offset;
    let stationarity_norm_sq = r.rows(0, n).norm_squared();
    let slackness_sq = r.rows(n, cols).norm_squared();
    Ok(KktReport {
        error: stationarity_norm_sq + slackness_sq,
        multipliers: sol.x,
        stationarity_norm_sq,
        slackness_sq,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSpanning {
    pub spanned: bool,
    /// `ν ⪰ 0`, `ν ≠ 0` with `Σ ν_i row_i = 0`, scaled to a largest entry of 1.
    pub certificate: Option<DVector<f64>>,
}

/// Decides whether some nonnegative, nontrivial combination of the rows
/// vanishes, i.e. whether `{d : R d ⪯ −1}` is empty.
pub fn negative_spanning(rows: &DMatrix<f64>) -> Result<NegativeSpanning> {
    if rows.nrows() == 0 {
        return Err(ScfoError::Parameter("negative_spanning needs at least one row".into()));
    }
    let m = rows.nrows();
    let sys = HalfspaceSystem::unboxed(rows.clone(), DVector::from_element(m, -1.0))?;
    let rep = lp_feasible(&sys)?;
    match rep.status {
        SolveStatus::Feasible => Ok(NegativeSpanning {
            spanned: false,
            certificate: None,
        }),
        SolveStatus::Infeasible => {
            let nu = rep.certificate.expect("infeasible report carries a certificate");
            Ok(NegativeSpanning {
                spanned: true,
                certificate: Some(nu.rows(0, m).into_owned()),
            })
        }
        SolveStatus::Degenerate => Err(ScfoError::Degenerate {
            iterations: rep.iterations,
            detail: "negative-spanning probe did not settle".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    use super::*;
    use crate::bounds::QuadBound;
    use crate::problem::{make_ex4, EX4_OPTIMUM};

    #[test]
    fn ex4_optimum_has_small_error() {
        let p = make_ex4();
        let rep = kkt_error(&p, &DVector::from_row_slice(&EX4_OPTIMUM)).unwrap();
        assert!(rep.error <= 1e-6, "error {}", rep.error);
        assert_abs_diff_eq!(rep.mu(3)[1], 0.15315, epsilon = 1e-4);
    }

    #[test]
    fn ex4_interior_point_has_large_error() {
        let p = make_ex4();
        let rep = kkt_error(&p, &dvector![0.0, 0.4]).unwrap();
        assert!(rep.error > 1e-2);
        assert_abs_diff_eq!(rep.error, rep.stationarity_norm_sq + rep.slackness_sq, epsilon = 1e-15);
    }

    #[test]
    fn unconstrained_minimizer_has_zero_error() {
        let p = ProblemSpec::builder("q", dvector![-1.0, -1.0], dvector![1.0, 1.0])
            .cost(
                |u| (u[0] - 0.2).powi(2) + (u[1] + 0.1).powi(2),
                |u| dvector![2.0 * (u[0] - 0.2), 2.0 * (u[1] + 0.1)],
            )
            .q_cost(QuadBound::new(dvector![2.0, 2.0]).unwrap())
            .constraint(|u| u[0] - 0.9, |_| dvector![1.0, 0.0], None)
            .lipschitz(dmatrix![1.1, 0.1])
            .build()
            .unwrap();
        let rep = kkt_error(&p, &dvector![0.2, -0.1]).unwrap();
        assert_eq!(rep.error, 0.0);
        assert!(rep.multipliers.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn kkt_error_rejects_out_of_box() {
        let p = make_ex4();
        assert!(kkt_error(&p, &dvector![0.0, 0.9]).is_err());
    }

    #[test]
    fn negative_spanning_examples() {
        let r = negative_spanning(&dmatrix![1.0, 0.0; -1.0, 0.0]).unwrap();
        assert!(r.spanned);
        assert_abs_diff_eq!(r.certificate.unwrap(), dvector![1.0, 1.0], epsilon = 1e-12);
        assert!(!negative_spanning(&dmatrix![1.0, 0.0; 0.0, 1.0]).unwrap().spanned);
        assert!(
            !negative_spanning(&dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0])
                .unwrap()
                .spanned
        );
        let r = negative_spanning(&dmatrix![1.0, 0.0; 0.0, 1.0; -1.0, -1.0]).unwrap();
        assert!(r.spanned);
        assert!(negative_spanning(&DMatrix::zeros(0, 2)).is_err());
    }
}
