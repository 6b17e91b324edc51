//! Least-distance programming: `min ‖z‖ s.t. G z ⪰ h` solved through one NNLS
//! on `[Gᵀ; hᵀ] ν ≈ e_{n+1}`. A zero residual means the system is empty and `ν`
//! is the certificate; otherwise the residual encodes the minimizer.

use nalgebra::{DMatrix, DVector};

use super::{nnls, HalfspaceSystem, SolveReport, SolveStatus, FEASIBILITY_TOL};
use crate::error::{Result, ScfoError};

/// Residuals at or below this (squared) mean the LDP has no solution. The
/// squared residual equals `1 / (1 + ‖z*‖²)`, so this corresponds to a
/// projection distance of `1e9`.
const EMPTY_RESIDUAL: f64 = 1e-18;
/// Nearly empty systems drive the NNLS weights up and leave a rounding
/// residual proportional to them; residuals below this fraction of
/// `1 + ‖ν‖₁` are treated as zero as well. The certificate check decides.
const EMPTY_RESIDUAL_REL: f64 = 1e-12;
const CERT_STATIONARITY_TOL: f64 = 1e-7;
const CERT_VALUE_TOL: f64 = 1e-9;

/// Euclidean projection of `target` onto `sys`.
pub fn qp_project(target: &DVector<f64>, sys: &HalfspaceSystem) -> Result<SolveReport> {
    if target.len() != sys.dim() {
        return Err(ScfoError::Parameter(format!(
            "target has dimension {}, system has {}",
            target.len(),
            sys.dim()
        )));
    }
    Ok(solve_ldp(target, sys))
}

/// Decides whether `sys` is nonempty. Returns a point of the system or a
/// certificate of emptiness.
pub fn lp_feasible(sys: &HalfspaceSystem) -> Result<SolveReport> {
    let anchor = DVector::from_iterator(
        sys.dim(),
        sys.box_lower
            .iter()
            .zip(sys.box_upper.iter())
            .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l,
                (false, true) => u,
                (false, false) => 0.0,
            }),
    );
    qp_project(&anchor, sys)
}

struct Row {
    normal: DVector<f64>,
    rhs: f64,
    ext: usize,
}

fn rows_of(sys: &HalfspaceSystem) -> Vec<Row> {
    let (m, n) = (sys.n_rows(), sys.dim());
    let mut rows = Vec::with_capacity(m + 2 * n);
    for j in 0..m {
        rows.push(Row {
            normal: sys.a.row(j).transpose(),
            rhs: sys.b[j],
            ext: j,
        });
    }
    for i in 0..n {
        if sys.box_lower[i].is_finite() {
            let mut e = DVector::zeros(n);
            e[i] = -1.0;
            rows.push(Row {
                normal: e,
                rhs: -sys.box_lower[i],
                ext: m + i,
            });
        }
    }
    for i in 0..n {
        if sys.box_upper[i].is_finite() {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            rows.push(Row {
                normal: e,
                rhs: sys.box_upper[i],
                ext: m + n + i,
            });
        }
    }
    rows
}

fn infeasible(sys: &HalfspaceSystem, nu: DVector<f64>, iterations: usize) -> SolveReport {
    let peak = nu.max();
    if !(peak > 0.0) {
        return SolveReport::degenerate(iterations);
    }
    let nu = nu / peak;
    let (stat, value) = sys.alternative_residual(&nu);
    if stat > CERT_STATIONARITY_TOL || value > -CERT_VALUE_TOL {
        return SolveReport::degenerate(iterations);
    }
    SolveReport {
        status: SolveStatus::Infeasible,
        point: None,
        certificate: Some(nu),
        multipliers: None,
        iterations,
    }
}

fn solve_ldp(target: &DVector<f64>, sys: &HalfspaceSystem) -> SolveReport {
    let n = sys.dim();
    let n_ext = sys.n_extended();
    let mut kept = Vec::new();
    for row in rows_of(sys) {
        let norm = row.normal.norm();
        let slack = row.rhs - row.normal.dot(target);
        if norm == 0.0 {
            if row.rhs < 0.0 {
                let mut nu = DVector::zeros(n_ext);
                nu[row.ext] = 1.0;
                return infeasible(sys, nu, 0);
            }
            continue;
        }
        kept.push((row, norm, slack));
    }
    if kept.is_empty() {
        return SolveReport {
            status: SolveStatus::Feasible,
            point: Some(target.clone()),
            certificate: None,
            multipliers: Some(DVector::zeros(n_ext)),
            iterations: 0,
        };
    }

    // Normalized rows â z ≤ s with z = x − target become G z ⪰ h, G = −â, h = −s.
    let k = kept.len();
    let mut e = DMatrix::zeros(n + 1, k);
    for (c, (row, norm, slack)) in kept.iter().enumerate() {
        for i in 0..n {
            e[(i, c)] = -row.normal[i] / norm;
        }
        e[(n, c)] = -slack / norm;
    }
    let mut f = DVector::zeros(n + 1);
    f[n] = 1.0;
    let sol = nnls(&e, &(-&f));
    if sol.status == SolveStatus::Degenerate {
        return SolveReport::degenerate(sol.iterations);
    }
    let r = &e * &sol.x - &f;
    let resid = r.norm_squared();

    if resid <= EMPTY_RESIDUAL || resid.sqrt() <= EMPTY_RESIDUAL_REL * (1.0 + sol.x.lp_norm(1)) {
        let mut nu = DVector::zeros(n_ext);
        for (c, (row, norm, _)) in kept.iter().enumerate() {
            nu[row.ext] += sol.x[c] / norm;
        }
        return infeasible(sys, nu, sol.iterations);
    }

    let denom = -r[n];
    if !(denom > 0.0) {
        return SolveReport::degenerate(sol.iterations);
    }
    let z = r.rows(0, n) / denom;
    let mut point = target + z;
    for i in 0..n {
        point[i] = point[i].clamp(sys.box_lower[i], sys.box_upper[i]);
    }
    if sys.max_violation(&point) > FEASIBILITY_TOL {
        return SolveReport::degenerate(sol.iterations);
    }
    let mut mult = DVector::zeros(n_ext);
    for (c, (row, norm, _)) in kept.iter().enumerate() {
        mult[row.ext] += sol.x[c] / (denom * norm);
    }
    SolveReport {
        status: SolveStatus::Feasible,
        point: Some(point),
        certificate: None,
        multipliers: Some(mult),
        iterations: sol.iterations,
    }
}
