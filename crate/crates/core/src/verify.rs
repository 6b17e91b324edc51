//! Runtime invariant suites behind `scfo verify`. Each suite is deterministic
//! (fixed seeds) and compares library results against brute-force oracles or
//! checks the guarantees directly on the shipped plants.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{constraint_adaptation, AffineModel, AlgorithmId, History, TwoStepModel};
use crate::bounds::{descent_gain_upper, linear_growth_bound, quadratic_growth_bound, QuadBound};
use crate::cli::table;
use crate::harness::{run, RunConfig};
use crate::kkt::{kkt_error, negative_spanning};
use crate::problem::{
    make_ex2, make_ex4, ProblemSpec, DEFAULT_STRICTNESS, EX2_INITIAL_POINT, EX4_INITIAL_POINTS, EX4_OPTIMUM,
};
use crate::scfo::{autotune_and_project, gain_floor, projection_system, scfo_step, Mode, ScfoParams};
use crate::smallsolve::{lp_feasible, nnls, qp_project, HalfspaceSystem, SolveStatus};

/// Result of one suite: how many checks ran and which failed.
#[derive(Debug, Default, Clone)]
pub struct SuiteReport {
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }
}

pub struct Suite {
    pub name: &'static str,
    pub run: fn() -> SuiteReport,
}

pub fn suites() -> Vec<Suite> {
    vec![
        Suite {
            name: "problem",
            run: problem_suite,
        },
        Suite {
            name: "bounds",
            run: bounds_suite,
        },
        Suite {
            name: "smallsolve",
            run: smallsolve_suite,
        },
        Suite {
            name: "scfo",
            run: scfo_suite,
        },
        Suite {
            name: "kkt",
            run: kkt_suite,
        },
        Suite {
            name: "algorithms",
            run: algorithms_suite,
        },
        Suite {
            name: "harness",
            run: harness_suite,
        },
        Suite {
            name: "cli",
            run: cli_suite,
        },
    ]
}

pub fn suite_names() -> Vec<&'static str> {
    suites().iter().map(|s| s.name).collect()
}

fn plants() -> [ProblemSpec; 2] {
    [make_ex2(DEFAULT_STRICTNESS), make_ex4()]
}

fn random_in_box(rng: &mut ChaCha8Rng, p: &ProblemSpec) -> DVector<f64> {
    DVector::from_fn(p.n_u, |i, _| rng.gen_range(p.u_lower[i]..=p.u_upper[i]))
}

fn problem_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for p in &plants() {
        // Lipschitz strictness on a 1e-3 grid.
        let (nx, ny) = (1000, 800);
        let mut worst = 0.0f64;
        for i in 0..=nx {
            for j in 0..=ny {
                let u = DVector::from_vec(vec![
                    p.u_lower[0] + (p.u_upper[0] - p.u_lower[0]) * i as f64 / nx as f64,
                    p.u_lower[1] + (p.u_upper[1] - p.u_lower[1]) * j as f64 / ny as f64,
                ]);
                for c in 0..p.n_g {
                    let grad = p.constraint_grad(c, &u);
                    for k in 0..p.n_u {
                        worst = worst.max(grad[k].abs() / p.lipschitz[(c, k)]);
                    }
                }
            }
        }
        r.check(worst < 1.0, || format!("{}: |dg/du| / kappa reaches {worst}", p.id));

        // Central differences at random interior points.
        let h = 1e-6;
        for _ in 0..100 {
            let u = DVector::from_fn(p.n_u, |i, _| {
                rng.gen_range(p.u_lower[i] + 2.0 * h..p.u_upper[i] - 2.0 * h)
            });
            let mut funcs: Vec<(String, Box<dyn Fn(&DVector<f64>) -> f64 + '_>, DVector<f64>)> =
                vec![("cost".into(), Box::new(|x| p.cost(x)), p.cost_grad(&u))];
            for c in 0..p.n_g {
                funcs.push((
                    format!("g_{}", c + 1),
                    Box::new(move |x| p.constraint(c, x)),
                    p.constraint_grad(c, &u),
                ));
            }
            for (name, f, grad) in &funcs {
                for k in 0..p.n_u {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[k] += h;
                    dn[k] -= h;
                    let fd = (f(&up) - f(&dn)) / (2.0 * h);
                    let rel = (fd - grad[k]).abs() / grad[k].abs().max(1.0);
                    r.check(rel <= 1e-6, || {
                        format!("{}: d{name}/du_{} off by {rel:e} at {u:?}", p.id, k + 1)
                    });
                }
            }
            let a = p.evaluate(&u).expect("in box");
            let b = p.evaluate(&u).expect("in box");
            r.check(a == b, || format!("{}: evaluation is not repeatable", p.id));
        }
    }
    r
}

fn bounds_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let trials = 10_000;
    for p in plants() {
        for c in 0..p.n_g {
            let kappa = p.kappa_row(c);
            let q = p.q_constraints[c].as_ref().expect("shipped plants carry Q bounds");
            let (mut lin_bad, mut quad_bad) = (0, 0);
            for _ in 0..trials {
                let a = random_in_box(&mut rng, &p);
                let b = random_in_box(&mut rng, &p);
                if a == b {
                    continue;
                }
                let rise = p.constraint(c, &b) - p.constraint(c, &a);
                if !(rise < linear_growth_bound(&kappa, &a, &b)) {
                    lin_bad += 1;
                }
                if !(rise <= quadratic_growth_bound(&p.constraint_grad(c, &a), q, &a, &b)) {
                    quad_bad += 1;
                }
            }
            r.check(lin_bad == 0, || {
                format!("{} g_{}: {lin_bad} linear-bound violations", p.id, c + 1)
            });
            r.check(quad_bad == 0, || {
                format!("{} g_{}: {quad_bad} quadratic-bound violations", p.id, c + 1)
            });
        }
    }

    // Guaranteed descent along any descent direction for quadratics
    // majorized by Q.
    let mut descent_bad = 0;
    for _ in 0..trials / 10 {
        let qd = DVector::from_fn(2, |_, _| rng.gen_range(0.1..5.0));
        let hd = DVector::from_fn(2, |i, _| rng.gen_range(-5.0..qd[i]));
        let c = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let f = |x: &DVector<f64>| c.dot(x) + 0.5 * x.component_mul(x).dot(&hd);
        let u_k = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let grad = &c + hd.component_mul(&u_k);
        let target = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        if grad.dot(&(&target - &u_k)) >= 0.0 {
            continue;
        }
        let qb = QuadBound::new(qd).expect("positive");
        let kbar = descent_gain_upper(&grad, &qb, &u_k, &target).expect("descent direction");
        let f0 = f(&u_k);
        for i in 1..=100 {
            let k = kbar * i as f64 / 101.0;
            if !(f(&(&u_k + (&target - &u_k) * k)) < f0) {
                descent_bad += 1;
            }
        }
        let half = &u_k + (&target - &u_k) * 0.5;
        let k2 = descent_gain_upper(&grad, &qb, &u_k, &half).expect("same direction");
        r.check((k2 - 2.0 * kbar).abs() <= 1e-9 * k2.abs(), || {
            format!("homogeneity: {k2} vs 2 x {kbar}")
        });
    }
    r.check(descent_bad == 0, || {
        format!("{descent_bad} gains below the descent bound failed to decrease f")
    });
    r
}

/// Random system of `m` unit-normal rows in `[-1, 1]^n`.
fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize) -> HalfspaceSystem {
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for i in 0..m {
        let mut row = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if row.norm() < 1e-3 {
            row[0] = 1.0;
        }
        row /= row.norm();
        a.set_row(i, &row.transpose());
        b[i] = rng.gen_range(-0.8..0.6);
    }
    HalfspaceSystem::new(a, b, DVector::from_element(n, -1.0), DVector::from_element(n, 1.0)).expect("well formed")
}

fn row_violation(sys: &HalfspaceSystem, x: &DVector<f64>) -> f64 {
    (0..sys.n_rows())
        .map(|i| sys.a.row(i).dot(&x.transpose()) - sys.b[i])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Least worst-row violation over a 1e-2 grid of the box.
fn grid_margin(sys: &HalfspaceSystem) -> f64 {
    let steps = 200;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps {
            let x = DVector::from_vec(vec![-1.0 + 0.01 * i as f64, -1.0 + 0.01 * j as f64]);
            best = best.min(row_violation(sys, &x));
        }
    }
    best
}

/// Whether any vertex of the box-bounded polytope (relaxed by `slack`)
/// exists; a nonempty bounded polytope always has one.
fn vertex_feasible(sys: &HalfspaceSystem, slack: f64) -> bool {
    let n = sys.dim();
    let mut rows: Vec<(DVector<f64>, f64)> = (0..sys.n_rows())
        .map(|i| (sys.a.row(i).transpose(), sys.b[i] + slack))
        .collect();
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        rows.push((e.clone(), sys.box_upper[i] + slack));
        rows.push((-e, -sys.box_lower[i] + slack));
    }
    let m = rows.len();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let am = DMatrix::from_fn(n, n, |r, c| rows[idx[r]].0[c]);
        let bm = DVector::from_fn(n, |r, _| rows[idx[r]].1);
        if let Some(x) = am.clone().lu().solve(&bm) {
            if am.determinant().abs() > 1e-12 && rows.iter().all(|(a, b)| a.dot(&x) <= b + 1e-12) {
                return true;
            }
        }
        // Next combination of n indices out of m.
        let mut k = n;
        loop {
            if k == 0 {
                return false;
            }
            k -= 1;
            if idx[k] < m - n + k {
                idx[k] += 1;
                for t in k + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Minimum of `‖Bx + b‖²` over `x ⪰ 0` by enumerating supports.
fn nnls_oracle(bm: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let n = bm.ncols();
    let mut best = b.norm_squared();
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub = DMatrix::from_fn(bm.nrows(), cols.len(), |r, c| bm[(r, cols[c])]);
        let svd = sub.clone().svd(true, true);
        let Ok(x) = svd.solve(&(-b), 1e-12) else { continue };
        if x.iter().all(|&v| v >= 0.0) {
            best = best.min((&sub * x + b).norm_squared());
        }
    }
    best
}

fn smallsolve_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tol = 1e-2;
    for trial in 0..1000 {
        let n = if trial % 2 == 0 { 2 } else { 3 };
        let m = rng.gen_range(1..=5);
        let sys = random_system(&mut rng, n, m);
        let rep = match lp_feasible(&sys) {
            Ok(rep) => rep,
            Err(e) => {
                r.check(false, || format!("lp_feasible errored: {e}"));
                continue;
            }
        };
        let (oracle_strict, oracle_relaxed) = if n == 2 {
            let margin = grid_margin(&sys);
            (margin <= -tol, margin <= tol)
        } else {
            (vertex_feasible(&sys, -tol), vertex_feasible(&sys, tol))
        };
        match rep.status {
            SolveStatus::Feasible => {
                let x = rep.point.as_ref().expect("feasible report has a point");
                r.check(sys.max_violation(x) <= 1e-9, || {
                    format!("trial {trial}: reported point violates the system")
                });
                r.check(oracle_relaxed, || {
                    format!("trial {trial}: feasible but the oracle finds nothing within {tol}")
                });
            }
            SolveStatus::Infeasible => {
                r.check(!oracle_strict, || {
                    format!("trial {trial}: infeasible but the oracle finds a point with margin {tol}")
                });
                let nu = rep.certificate.as_ref().expect("certificate");
                let (combo, value) = sys.alternative_residual(nu);
                r.check(nu.iter().all(|&v| v >= 0.0) && combo <= 1e-7 && value <= -1e-9, || {
                    format!("trial {trial}: bad certificate (|nu A| = {combo:e}, nu b = {value:e})")
                });
            }
            SolveStatus::Degenerate => r.check(false, || format!("trial {trial}: degenerate")),
        }
    }

    // Projection optimality: target − x is a nonnegative combination of the
    // rows active at x, and no sampled feasible point is closer.
    for trial in 0..300 {
        let m = rng.gen_range(1..=4);
        let sys = random_system(&mut rng, 2, m);
        let target = DVector::from_fn(2, |_, _| rng.gen_range(-1.5..1.5));
        let Ok(rep) = qp_project(&target, &sys) else {
            r.check(false, || format!("projection {trial}: solver error"));
            continue;
        };
        if rep.status != SolveStatus::Feasible {
            continue;
        }
        let x = rep.point.expect("point");
        let mu = rep.multipliers.expect("multipliers");
        let n_ext = sys.n_extended();
        let mut combo = DVector::zeros(2);
        let mut slack_ok = true;
        for i in 0..n_ext {
            let (a, b) = extended_row(&sys, i);
            combo += &a * mu[i];
            if mu[i] > 1e-9 && (a.dot(&x) - b).abs() > 1e-7 {
                slack_ok = false;
            }
        }
        r.check(
            mu.iter().all(|&v| v >= 0.0) && (&target - &x - combo).amax() <= 1e-8 && slack_ok,
            || format!("projection {trial}: multipliers do not certify optimality"),
        );
        let d = (&target - &x).norm();
        let closer = (0..200).any(|_| {
            let y = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            sys.max_violation(&y) <= 0.0 && (&target - &y).norm() < d - 1e-9
        });
        r.check(!closer, || {
            format!("projection {trial}: a sampled feasible point is closer")
        });
    }

    for trial in 0..300 {
        let rows = rng.gen_range(1..=6);
        let cols = rng.gen_range(1..=6);
        let bm = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(rows, |_, _| rng.gen_range(-1.0..1.0));
        let sol = nnls(&bm, &b);
        let oracle = nnls_oracle(&bm, &b);
        r.check(
            sol.status == SolveStatus::Feasible && (sol.residual_sq - oracle).abs() <= 1e-8,
            || format!("nnls {trial}: residual {} vs oracle {oracle}", sol.residual_sq),
        );
    }
    r
}

fn extended_row(sys: &HalfspaceSystem, i: usize) -> (DVector<f64>, f64) {
    let (m, n) = (sys.n_rows(), sys.dim());
    if i < m {
        (sys.a.row(i).transpose(), sys.b[i])
    } else if i < m + n {
        let mut e = DVector::zeros(n);
        e[i - m] = -1.0;
        (e, -sys.box_lower[i - m])
    } else {
        let mut e = DVector::zeros(n);
        e[i - m - n] = 1.0;
        (e, sys.box_upper[i - m - n])
    }
}

fn scfo_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    // Recursive feasibility under random targets, unprojected.
    for p in plants() {
        let u0 = DVector::from_row_slice(&EX4_INITIAL_POINTS[0]);
        let params = ScfoParams::for_problem(&p, Mode::None);
        let mut cur = p.evaluate(&u0).expect("in box");
        let mut violations = 0;
        for k in 0..10_000 {
            let target = random_in_box(&mut rng, &p);
            match scfo_step(&p, &cur, k, &params, &target) {
                Ok(o) => cur = o.next,
                Err(_) => {
                    violations += 1;
                    break;
                }
            }
            if cur.g.iter().any(|&g| !(g < 0.0)) {
                violations += 1;
            }
        }
        r.check(violations == 0, || {
            format!("{}: {violations} infeasible iterates", p.id)
        });
    }

    // Projected targets satisfy every assembled row.
    for p in plants() {
        for mode in [Mode::FeasibilityOnly, Mode::Full] {
            let params = ScfoParams::for_problem(&p, mode);
            for u0 in EX4_INITIAL_POINTS {
                let cfg = RunConfig::new(&p.id, AlgorithmId::Random, mode, &u0, 100).with_seed(11);
                let Ok(t) = run(&cfg) else {
                    r.check(false, || format!("{}: run failed", cfg.name));
                    continue;
                };
                for it in &t.iterates {
                    let Some(step) = &it.step else { continue };
                    let (Some(proj), false) = (&step.projected_target, it.converged) else {
                        continue;
                    };
                    let used = if mode == Mode::Full {
                        step.params.clone()
                    } else {
                        params.clone()
                    };
                    let (sys, _) = projection_system(&p, &it.eval, &used).expect("system");
                    let v = sys.max_violation(proj);
                    if proj != &it.eval.u {
                        r.check(v <= 1e-8, || {
                            format!("{} k={}: projected target violates rows by {v:e}", cfg.name, it.k)
                        });
                    }
                }
            }
        }
    }

    // Gain floor at fixed parameters.
    let p = make_ex2(DEFAULT_STRICTNESS);
    let params = ScfoParams::for_problem(&p, Mode::FeasibilityOnly);
    let gamma = p.gamma_kappa().expect("tight constants known");
    let u0 = DVector::from_row_slice(&EX2_INITIAL_POINT);
    let floor = gain_floor(&p, &params.eps, &params.delta_g, &p.constraint_values(&u0), gamma).expect("floor");
    let cfg = RunConfig::new("ex2", AlgorithmId::Fixed, Mode::FeasibilityOnly, u0.as_slice(), 1000);
    match run(&cfg) {
        Ok(t) => {
            let min = t
                .iterates
                .iter()
                .filter_map(|it| it.step.as_ref())
                .filter(|s| s.gain.limiting != crate::scfo::LimitingTag::Stationary)
                .map(|s| s.gain.chosen)
                .fold(f64::INFINITY, f64::min);
            r.check(min >= floor, || format!("gain {min:e} below floor {floor:e}"));
        }
        Err(e) => r.check(false, || format!("gain-floor run failed: {e}")),
    }

    // Auto-tune at the optimum halves to convergence and the lower-bracket
    // system is infeasible there.
    let p = make_ex4();
    let eval = p.evaluate(&DVector::from_row_slice(&EX4_OPTIMUM)).expect("in box");
    let params = ScfoParams::for_problem(&p, Mode::Full);
    let a = autotune_and_project(&p, &eval, &params, &eval.u).expect("autotune");
    let b = autotune_and_project(&p, &eval, &params, &eval.u).expect("autotune");
    r.check(a == b, || "auto-tune is not deterministic".into());
    r.check(a.converged, || "auto-tune did not converge at the optimum".into());
    let mut lo = params.clone();
    lo.eps = lo.eps_lo.clone();
    lo.delta_g = lo.delta_g_lo.clone();
    lo.delta_phi = lo.delta_phi_lo;
    let (sys, _) = projection_system(&p, &eval, &lo).expect("system");
    r.check(
        lp_feasible(&sys)
            .map(|rep| rep.status == SolveStatus::Infeasible)
            .unwrap_or(false),
        || "lower-bracket system is feasible at a declared convergence".into(),
    );
    let mut q = params.clone();
    q.reset_to_upper();
    let mut prev = q.eps_min();
    for _ in 0..a.halvings {
        q.halve();
        r.check(q.eps_min() < prev, || "halving did not decrease eps".into());
        prev = q.eps_min();
    }
    r
}

/// `ex4` with its constraints listed in `order`.
fn ex4_permuted(order: [usize; 3]) -> ProblemSpec {
    type F = fn(&DVector<f64>) -> f64;
    type G = fn(&DVector<f64>) -> DVector<f64>;
    let fs: [(F, G); 3] = [
        (
            |u| -6.0 * u[0] * u[0] - 3.5 * u[0] + u[1] - 0.6,
            |u| DVector::from_vec(vec![-12.0 * u[0] - 3.5, 1.0]),
        ),
        (
            |u| 2.0 * u[0] * u[0] + 0.5 * u[0] + u[1] - 0.75,
            |u| DVector::from_vec(vec![4.0 * u[0] + 0.5, 1.0]),
        ),
        (
            |u| -u[0] * u[0] - (u[1] - 0.15).powi(2) + 0.01,
            |u| DVector::from_vec(vec![-2.0 * u[0], -2.0 * (u[1] - 0.15)]),
        ),
    ];
    let base = make_ex4();
    let mut b = ProblemSpec::builder("ex4p", base.u_lower.clone(), base.u_upper.clone())
        .cost(
            |u| (u[0] - 0.5).powi(2) + (u[1] - 0.4).powi(2),
            |u| DVector::from_vec(vec![2.0 * (u[0] - 0.5), 2.0 * (u[1] - 0.4)]),
        )
        .q_cost(base.q_cost.clone());
    let mut lip = DMatrix::zeros(3, 2);
    for (r, &j) in order.iter().enumerate() {
        let (f, g) = fs[j];
        b = b.constraint(f, g, None);
        lip.set_row(r, &base.lipschitz.row(j));
    }
    b.lipschitz(lip).build().expect("well formed")
}

/// Brute-force KKT error of a one-input, one-constraint problem on a
/// multiplier grid (coarse pass, then 1e-2 around the best coarse point).
fn kkt_grid_oracle(dphi: f64, g: f64, dg: f64, lo_gap: f64, hi_gap: f64) -> f64 {
    let e = |mu: f64, zl: f64, zu: f64| {
        (dphi + mu * dg - zl + zu).powi(2) + (mu * g).powi(2) + (zl * lo_gap).powi(2) + (zu * hi_gap).powi(2)
    };
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for i in 0..=100 {
        for j in 0..=100 {
            for k in 0..=100 {
                let (mu, zl, zu) = (0.1 * i as f64, 0.1 * j as f64, 0.1 * k as f64);
                let v = e(mu, zl, zu);
                if v < best.0 {
                    best = (v, mu, zl, zu);
                }
            }
        }
    }
    let (_, m0, l0, u0) = best;
    let mut fine = best.0;
    for i in -10..=10 {
        for j in -10..=10 {
            for k in -10..=10 {
                let (mu, zl, zu) = (m0 + 0.01 * i as f64, l0 + 0.01 * j as f64, u0 + 0.01 * k as f64);
                if mu >= 0.0 && zl >= 0.0 && zu >= 0.0 && mu <= 10.0 && zl <= 10.0 && zu <= 10.0 {
                    fine = fine.min(e(mu, zl, zu));
                }
            }
        }
    }
    fine
}

/// Whether some nonnegative integer combination (coefficients up to 8) of
/// the rows vanishes without all coefficients being zero.
fn spanning_oracle(rows: &[[i32; 2]]) -> bool {
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

fn kkt_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    for trial in 0..12 {
        let (a, c0, s) = (
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.5..1.5),
        );
        let p = ProblemSpec::builder("kkt1", DVector::from_element(1, -1.0), DVector::from_element(1, 1.0))
            .cost(
                move |u| a * u[0] * u[0] + c0 * u[0],
                move |u| DVector::from_element(1, 2.0 * a * u[0] + c0),
            )
            .q_cost(QuadBound::new(DVector::from_element(1, 2.0 * a.abs() + 0.1)).expect("positive"))
            .constraint(move |u| s * u[0] - 0.5, move |_| DVector::from_element(1, s), None)
            .lipschitz(DMatrix::from_element(1, 1, s.abs() + 0.1))
            .build()
            .expect("well formed");
        let u = DVector::from_element(1, rng.gen_range(-1.0..1.0));
        if !p.is_strictly_feasible(&u) {
            continue;
        }
        let lib = kkt_error(&p, &u).expect("kkt").error;
        let oracle = kkt_grid_oracle(2.0 * a * u[0] + c0, s * u[0] - 0.5, s, -1.0 - u[0], u[0] - 1.0);
        r.check(lib <= oracle + 1e-12 && oracle - lib <= 1e-4, || {
            format!("kkt {trial}: library {lib:e} vs grid {oracle:e}")
        });
    }

    let base = ex4_permuted([0, 1, 2]);
    for order in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
        let p = ex4_permuted(order);
        for _ in 0..20 {
            let u = random_in_box(&mut rng, &p);
            let (e0, e1) = (kkt_error(&base, &u), kkt_error(&p, &u));
            match (e0, e1) {
                (Ok(a), Ok(b)) => r.check((a.error - b.error).abs() <= 1e-10, || {
                    format!("permutation {order:?}: {} vs {}", a.error, b.error)
                }),
                _ => r.check(false, || "kkt_error failed".into()),
            }
        }
    }

    for trial in 0..300 {
        let m = rng.gen_range(1..=4);
        let rows: Vec<[i32; 2]> = (0..m).map(|_| [rng.gen_range(-2..=2), rng.gen_range(-2..=2)]).collect();
        let mat = DMatrix::from_fn(m, 2, |i, j| rows[i][j] as f64);
        let expect = spanning_oracle(&rows);
        match negative_spanning(&mat) {
            Ok(ns) => r.check(ns.spanned == expect, || {
                format!("spanning {trial}: {rows:?} gave {}", ns.spanned)
            }),
            Err(e) => r.check(false, || format!("spanning {trial}: {e}")),
        }
    }
    r
}

fn algorithms_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    for p in plants() {
        for alg in AlgorithmId::ALL {
            let cfg = RunConfig::new(&p.id, alg, Mode::FeasibilityOnly, &EX4_INITIAL_POINTS[1], 40).with_seed(5);
            match run(&cfg) {
                Ok(t) => {
                    let inside = t.iterates.iter().filter_map(|it| it.step.as_ref()).all(|s| {
                        s.raw_target
                            .iter()
                            .enumerate()
                            .all(|(i, &v)| v >= p.u_lower[i] && v <= p.u_upper[i])
                    });
                    r.check(inside, || format!("{}: target outside the box", cfg.name));
                }
                Err(e) => r.check(false, || format!("{}: {e}", cfg.name)),
            }
        }
    }

    // Regression recovers the parameters from data generated by the model.
    let truth = TwoStepModel {
        theta: [1.3, 0.7, 5.0, 0.8, -0.6],
        n_constraints: 3,
    };
    let p = make_ex4();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sample = |u: DVector<f64>| {
        let mut e = p.evaluate(&u).expect("in box");
        e.cost = truth.cost(&u);
        e.g = DVector::from_fn(3, |j, _| truth.constraint(j, &u));
        e
    };
    let mut h = History::new(sample(random_in_box(&mut rng, &p)));
    for _ in 0..4 {
        h.push(sample(random_in_box(&mut rng, &p)));
    }
    let mut model = TwoStepModel::prior(3);
    model.fit(&h);
    let err = model
        .theta
        .iter()
        .zip(truth.theta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    r.check(err <= 1e-9, || format!("two-step fit off by {err:e}"));

    // With a plant equal to its model, adaptation has zero bias and a fixed
    // answer.
    let model = AffineModel::ex2();
    let linear = ProblemSpec::builder("lin", p.u_lower.clone(), p.u_upper.clone())
        .cost(|u| -u[1], |_| DVector::from_vec(vec![0.0, -1.0]))
        .q_cost(QuadBound::new(DVector::from_element(2, 0.01)).expect("positive"))
        .constraint(
            |u| -1.3 * u[0] + u[1] - 1.02,
            |_| DVector::from_vec(vec![-1.3, 1.0]),
            None,
        )
        .constraint(
            |u| -1.1 * u[0] + u[1] - 1.39,
            |_| DVector::from_vec(vec![-1.1, 1.0]),
            None,
        )
        .lipschitz(DMatrix::from_row_slice(2, 2, &[1.5, 1.1, 1.3, 1.1]))
        .build()
        .expect("well formed");
    let mut h = History::new(linear.evaluate(&DVector::from_vec(vec![-0.4, 0.1])).expect("in box"));
    let first = constraint_adaptation(&h, &model, &linear).expect("lp");
    let mut same = true;
    for _ in 0..5 {
        h.push(linear.evaluate(&random_in_box(&mut rng, &linear)).expect("in box"));
        same &= constraint_adaptation(&h, &model, &linear).expect("lp") == first;
    }
    r.check(same, || "zero-bias adaptation moved".into());
    r
}

fn harness_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    for alg in [AlgorithmId::GradDim, AlgorithmId::Random] {
        for u0 in EX4_INITIAL_POINTS {
            let cfg = RunConfig::new("ex4", alg, Mode::Full, &u0, 1000).with_seed(1);
            match (run(&cfg), run(&cfg)) {
                (Ok(a), Ok(b)) => {
                    let s = &a.summary;
                    r.check(s.feasible_all && s.monotone_cost, || {
                        format!("{}: infeasible or not monotone", cfg.name)
                    });
                    r.check(s.converged_at.is_some(), || format!("{}: no convergence", cfg.name));
                    r.check(csv_bytes(&a) == csv_bytes(&b), || format!("{}: runs differ", cfg.name));
                }
                _ => r.check(false, || format!("{}: run failed", cfg.name)),
            }
        }
    }
    let bad = RunConfig::new("ex4", AlgorithmId::Fixed, Mode::Full, &[0.0, 0.75], 10);
    r.check(run(&bad).is_err(), || "infeasible start accepted".into());
    r
}

fn csv_bytes(t: &crate::harness::Trajectory) -> Vec<u8> {
    let mut buf = Vec::new();
    table::write_trajectory(t, &mut buf).expect("in-memory write");
    buf
}

fn cli_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    let cfg = RunConfig::new("ex4", AlgorithmId::Random, Mode::Full, &EX4_INITIAL_POINTS[0], 200).with_seed(9);
    let Ok(t) = run(&cfg) else {
        r.check(false, || "run failed".into());
        return r;
    };
    let bytes = csv_bytes(&t);
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let expected = table::rows(&t);
    let mut n = 0;
    for (rec, want) in reader.records().zip(&expected) {
        let Ok(rec) = rec else {
            r.check(false, || "unreadable record".into());
            continue;
        };
        let exact = rec.iter().zip(want).all(|(got, w)| {
            got == w && (got.is_empty() || got.parse::<f64>().map(|v| v.to_string() == *w).unwrap_or(false))
        });
        r.check(exact, || format!("row {n} does not round-trip"));
        n += 1;
    }
    r.check(n == t.iterates.len(), || {
        format!("{n} rows for {} iterates", t.iterates.len())
    });
    r
}
