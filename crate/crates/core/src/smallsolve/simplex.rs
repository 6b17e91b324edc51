//! Two-phase dense tableau simplex with Bland's rule for
//! `min cᵀx s.t. A x ⪯ b, l ⪯ x ⪯ u` with a finite box.

use nalgebra::{DMatrix, DVector};

use super::{HalfspaceSystem, SolveStatus, FEASIBILITY_TOL};
use crate::error::{Result, ScfoError};

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LpSolution {
    /// `Feasible` means an optimum was found.
    pub status: SolveStatus,
    pub x: Option<DVector<f64>>,
    pub objective: f64,
    pub iterations: usize,
}

pub fn lp_minimize(c: &DVector<f64>, sys: &HalfspaceSystem) -> Result<LpSolution> {
    let n = sys.dim();
    if c.len() != n {
        return Err(ScfoError::Parameter(format!(
            "cost has dimension {}, system has {n}",
            c.len()
        )));
    }
    if sys.box_lower.iter().chain(sys.box_upper.iter()).any(|v| !v.is_finite()) {
        return Err(ScfoError::Parameter("lp_minimize requires a finite box".into()));
    }
    // y = x − l ⪰ 0; rows: A y ≤ b − A l, y ≤ u − l.
    let m = sys.n_rows() + n;
    let mut rows = DMatrix::zeros(m, n);
    let mut rhs = DVector::zeros(m);
    for j in 0..sys.n_rows() {
        rows.set_row(j, &sys.a.row(j));
        rhs[j] = sys.b[j] - sys.a.row(j).dot(&sys.box_lower.transpose());
    }
    for i in 0..n {
        rows[(sys.n_rows() + i, i)] = 1.0;
        rhs[sys.n_rows() + i] = sys.box_upper[i] - sys.box_lower[i];
    }

    let neg: Vec<usize> = (0..m).filter(|&r| rhs[r] < 0.0).collect();
    let n_art = neg.len();
    // Columns: y (n), slacks (m), artificials (n_art), rhs.
    let n_cols = n + m + n_art;
    let mut t = DMatrix::zeros(m + 1, n_cols + 1);
    let mut basis = vec![0usize; m];
    let mut art = 0;
    for r in 0..m {
        let sign = if rhs[r] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            t[(r, i)] = sign * rows[(r, i)];
        }
        t[(r, n + r)] = sign;
        t[(r, n_cols)] = sign * rhs[r];
        if sign < 0.0 {
            t[(r, n + m + art)] = 1.0;
            basis[r] = n + m + art;
            art += 1;
        } else {
            basis[r] = n + r;
        }
    }
    let max_iter = 50 * (m + n_cols);
    let mut iterations = 0;

    if n_art > 0 {
        // Phase 1 objective row: sum of artificials, expressed in nonbasics.
        for r in 0..m {
            if basis[r] >= n + m {
                for col in 0..=n_cols {
                    t[(m, col)] -= t[(r, col)];
                }
            }
        }
        for col in n + m..n_cols {
            t[(m, col)] = 0.0;
        }
        if !run(&mut t, &mut basis, n_cols, &mut iterations, max_iter) {
            return Ok(degenerate(iterations));
        }
        if -t[(m, n_cols)] > FEASIBILITY_TOL {
            return Ok(LpSolution {
                status: SolveStatus::Infeasible,
                x: None,
                objective: f64::NAN,
                iterations,
            });
        }
        for r in 0..m {
            if basis[r] >= n + m {
                if let Some(col) = (0..n + m).find(|&col| t[(r, col)].abs() > PIVOT_TOL) {
                    pivot(&mut t, &mut basis, r, col);
                }
            }
        }
        // Forbid artificials from re-entering.
        for r in 0..=m {
            for col in n + m..n_cols {
                if basis.get(r).is_none_or(|&b| b != col) {
                    t[(r, col)] = 0.0;
                }
            }
        }
    }

    for col in 0..=n_cols {
        t[(m, col)] = 0.0;
    }
    for i in 0..n {
        t[(m, i)] = c[i];
    }
    for r in 0..m {
        let bcol = basis[r];
        if bcol < n && c[bcol] != 0.0 {
            let factor = t[(m, bcol)];
            for col in 0..=n_cols {
                t[(m, col)] -= factor * t[(r, col)];
            }
        }
    }
    if !run(&mut t, &mut basis, n + m, &mut iterations, max_iter) {
        return Ok(degenerate(iterations));
    }

    let mut y = DVector::zeros(n);
    for r in 0..m {
        if basis[r] < n {
            y[basis[r]] = t[(r, n_cols)];
        }
    }
    let mut x = &y + &sys.box_lower;
    for i in 0..n {
        x[i] = x[i].clamp(sys.box_lower[i], sys.box_upper[i]);
    }
    if sys.max_violation(&x) > FEASIBILITY_TOL {
        return Ok(degenerate(iterations));
    }
    Ok(LpSolution {
        status: SolveStatus::Feasible,
        objective: c.dot(&x),
        x: Some(x),
        iterations,
    })
}

fn degenerate(iterations: usize) -> LpSolution {
    LpSolution {
        status: SolveStatus::Degenerate,
        x: None,
        objective: f64::NAN,
        iterations,
    }
}

/// Pivots until optimal over the first `n_enter` columns. Returns false on
/// iteration exhaustion. The problem is bounded by construction.
fn run(t: &mut DMatrix<f64>, basis: &mut [usize], n_enter: usize, iterations: &mut usize, max_iter: usize) -> bool {
    let m = basis.len();
    let rhs = t.ncols() - 1;
    loop {
        let Some(col) = (0..n_enter).find(|&c| t[(m, c)] < -PIVOT_TOL) else {
            return true;
        };
        *iterations += 1;
        if *iterations > max_iter {
            return false;
        }
        let mut best: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = t[(r, col)];
            if a > PIVOT_TOL {
                let ratio = t[(r, rhs)] / a;
                best = match best {
                    Some((br, bv)) if bv < ratio || (bv == ratio && basis[br] < basis[r]) => Some((br, bv)),
                    _ => Some((r, ratio)),
                };
            }
        }
        let Some((row, _)) = best else {
            return false;
        };
        pivot(t, basis, row, col);
    }
}

fn pivot(t: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
    let p = t[(row, col)];
    let width = t.ncols();
    for c in 0..width {
        t[(row, c)] /= p;
    }
    for r in 0..t.nrows() {
        if r != row {
            let factor = t[(r, col)];
            if factor != 0.0 {
                for c in 0..width {
                    t[(r, c)] -= factor * t[(row, c)];
                }
            }
        }
    }
    basis[row] = col;
}
