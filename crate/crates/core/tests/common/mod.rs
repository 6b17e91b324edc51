//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the library's solvers.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// `ex2` constraints.
pub fn ex2_g(u: [f64; 2]) -> [f64; 2] {
    [
        u[0] * u[0] - 0.5 * u[0] + u[1] - 0.7,
        2.0 * u[0] * u[0] + 0.5 * u[0] + u[1] - 0.75,
    ]
}

/// `ex4` cost and constraints.
pub fn ex4_cost(u: [f64; 2]) -> f64 {
    (u[0] - 0.5).powi(2) + (u[1] - 0.4).powi(2)
}

pub fn ex4_g(u: [f64; 2]) -> [f64; 3] {
    [
        -6.0 * u[0] * u[0] - 3.5 * u[0] + u[1] - 0.6,
        2.0 * u[0] * u[0] + 0.5 * u[0] + u[1] - 0.75,
        -u[0] * u[0] - (u[1] - 0.15).powi(2) + 0.01,
    ]
}

/// Vertex where both `ex2` constraints are active: subtracting them gives
/// `u1² + u1 − 0.05 = 0`.
pub fn ex2_optimum() -> [f64; 2] {
    let u1 = (-1.0 + 1.2f64.sqrt()) / 2.0;
    [u1, 0.7 - u1 * u1 + 0.5 * u1]
}

/// Minimizer of the `ex4` cost along `g_2 = 0`, found by bisection on the
/// derivative of the reduced one-variable cost.
pub fn ex4_optimum() -> [f64; 2] {
    let u2 = |x: f64| 0.75 - 2.0 * x * x - 0.5 * x;
    let d = |x: f64| 2.0 * (x - 0.5) + 2.0 * (u2(x) - 0.4) * (-4.0 * x - 0.5);
    let (mut lo, mut hi) = (0.0, 0.5);
    assert!(d(lo) < 0.0 && d(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    [x, u2(x)]
}

/// Closest feasible `ex2` point to `target` on a `step` grid of the box.
pub fn ex2_grid_projection(target: [f64; 2], step: f64) -> [f64; 2] {
    let nx = (1.0 / step).round() as usize;
    let ny = (0.8 / step).round() as usize;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..=nx {
        for j in 0..=ny {
            let u = [-0.5 + i as f64 * step, j as f64 * step];
            if ex2_g(u).iter().all(|&g| g <= 0.0) {
                let d = (u[0] - target[0]).hypot(u[1] - target[1]);
                if d < best.0 {
                    best = (d, u);
                }
            }
        }
    }
    best.1
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Largest row violation `max_i (a_i·x − b_i)` including box rows.
pub fn violation(a: &DMatrix<f64>, b: &DVector<f64>, lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    let mut v = f64::NEG_INFINITY;
    for i in 0..a.nrows() {
        let s: f64 = (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum();
        v = v.max(s - b[i]);
    }
    for j in 0..x.len() {
        v = v.max(lo[j] - x[j]).max(x[j] - hi[j]);
    }
    v
}

/// Least worst-row violation over a grid of `[lo, hi]²` with spacing `step`.
pub fn grid_margin_2d(a: &DMatrix<f64>, b: &DVector<f64>, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let x = [lo + i as f64 * step, lo + j as f64 * step];
            best = best.min(violation(a, b, &[lo, lo], &[hi, hi], &x));
        }
    }
    best
}

/// Whether the box-bounded polytope relaxed by `slack` has a vertex.
pub fn has_vertex(a: &DMatrix<f64>, b: &DVector<f64>, lo: f64, hi: f64, slack: f64) -> bool {
    let n = a.ncols();
    let mut rows: Vec<(Vec<f64>, f64)> = (0..a.nrows())
        .map(|i| ((0..n).map(|j| a[(i, j)]).collect(), b[i] + slack))
        .collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        rows.push((e.clone(), hi + slack));
        e[i] = -1.0;
        rows.push((e, -lo + slack));
    }
    let m = rows.len();
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let am = DMatrix::from_fn(n, n, |r, c| rows[pick[r]].0[c]);
        if am.determinant().abs() > 1e-12 {
            let bm = DVector::from_fn(n, |r, _| rows[pick[r]].1);
            if let Some(x) = am.lu().solve(&bm) {
                if rows
                    .iter()
                    .all(|(r, s)| r.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= s + 1e-12)
                {
                    return true;
                }
            }
        }
        let mut k = n;
        loop {
            if k == 0 {
                return false;
            }
            k -= 1;
            if pick[k] < m - n + k {
                pick[k] += 1;
                for t in k + 1..n {
                    pick[t] = pick[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `min ‖Bx + b‖²` over `x ⪰ 0` by enumerating every support.
pub fn nnls_enumerate(bm: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let n = bm.ncols();
    let mut best = b.norm_squared();
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub = DMatrix::from_fn(bm.nrows(), cols.len(), |r, c| bm[(r, cols[c])]);
        let Ok(x) = sub.clone().svd(true, true).solve(&(-b), 1e-12) else {
            continue;
        };
        if x.iter().all(|&v| v >= 0.0) {
            best = best.min((&sub * x + b).norm_squared());
        }
    }
    best
}

/// Whether a nonnegative integer combination with coefficients up to 8
/// vanishes nontrivially. Exhaustive for 2-D rows with entries in [-2, 2]:
/// by Carathéodory at most three rows are needed and Cramer's rule bounds
/// their coefficients by 8.
pub fn spans_by_search(rows: &[[i32; 2]]) -> bool {
    let m = rows.len();
    let mut c = vec![0i32; m];
    loop {
        let mut k = 0;
        loop {
            if k == m {
                return false;
            }
            c[k] += 1;
            if c[k] <= 8 {
                break;
            }
            c[k] = 0;
            k += 1;
        }
        let sx: i32 = (0..m).map(|i| c[i] * rows[i][0]).sum();
        let sy: i32 = (0..m).map(|i| c[i] * rows[i][1]).sum();
        if sx == 0 && sy == 0 {
            return true;
        }
    }
}
