use nalgebra::{DMatrix, DVector};

use super::SolveStatus;

/// Result of [`nnls`].
#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    /// `‖B x + b‖²` at the returned `x`.
    pub residual_sq: f64,
    pub iterations: usize,
    /// `Feasible` on normal termination, `Degenerate` if the iteration cap hit.
    pub status: SolveStatus,
}

/// Minimizes `‖B x + b‖²` over `x ⪰ 0` (Lawson–Hanson active set).
///
/// Ties between entering candidates go to the lowest column index. Panics if
/// `B` has no columns or its row count differs from `b`.
pub fn nnls(bm: &DMatrix<f64>, b: &DVector<f64>) -> NnlsSolution {
    assert!(bm.ncols() >= 1, "nnls needs at least one column");
    assert_eq!(bm.nrows(), b.len(), "nnls dimension mismatch");
    let d = -b;
    let (m, n) = bm.shape();
    let max_iter = 10 * (m + n);
    let scale = bm.amax().max(1.0) * d.amax().max(1.0);
    let w_tol = 1e-13 * scale;
    let zero_tol = 1e-15;

    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let mut rejected = vec![false; n];
    let mut iterations = 0;
    let mut status = SolveStatus::Feasible;

    'outer: loop {
        let w = bm.tr_mul(&(&d - bm * &x));
        let candidate =
            (0..n)
                .filter(|&j| !passive[j] && !rejected[j] && w[j] > w_tol)
                .fold(None, |best: Option<usize>, j| match best {
                    Some(k) if w[k] >= w[j] => Some(k),
                    _ => Some(j),
                });
        let Some(t) = candidate else { break };
        passive[t] = true;
        let mut first = true;
        loop {
            iterations += 1;
            if iterations > max_iter {
                status = SolveStatus::Degenerate;
                break 'outer;
            }
            let s = solve_passive(bm, &d, &passive);
            if first {
                first = false;
                // A column that cannot enter with a positive coefficient is
                // numerically dependent on the passive set; skip it until the
                // iterate moves.
                if s[t] <= zero_tol {
                    passive[t] = false;
                    rejected[t] = true;
                    continue 'outer;
                }
            }
            if (0..n).all(|j| !passive[j] || s[j] > zero_tol) {
                x = s;
                rejected.iter_mut().for_each(|r| *r = false);
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in 0..n {
                if passive[j] && s[j] <= zero_tol {
                    let denom = x[j] - s[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            x = &x + (&s - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= zero_tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    let r = bm * &x - &d;
    NnlsSolution {
        residual_sq: r.norm_squared(),
        x,
        iterations,
        status,
    }
}

/// Unconstrained least squares restricted to passive columns; others are 0.
fn solve_passive(bm: &DMatrix<f64>, d: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..bm.ncols()).filter(|&j| passive[j]).collect();
    let mut out = DVector::zeros(bm.ncols());
    if idx.is_empty() {
        return out;
    }
    let sub = bm.select_columns(&idx);
    let svd = sub.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(1e-300);
    let sol = svd.solve(d, tol).expect("U and V were computed");
    for (k, &j) in idx.iter().enumerate() {
        out[j] = sol[k];
    }
    out
}
