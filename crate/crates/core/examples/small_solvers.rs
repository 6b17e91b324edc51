//! The dense solvers behind the projection: feasibility with a certificate,
//! Euclidean projection with multipliers, NNLS and the negative-spanning test.

use nalgebra::{dmatrix, dvector};
use scfo::kkt::negative_spanning;
use scfo::smallsolve::{lp_feasible, nnls, qp_project, HalfspaceSystem};

fn main() -> scfo::Result<()> {
    let unit_box = |a, b| HalfspaceSystem::new(a, b, dvector![-1.0, -1.0], dvector![1.0, 1.0]);

    let wedge = unit_box(dmatrix![1.0, 1.0; -1.0, 0.0], dvector![0.5, 0.2])?;
    let rep = lp_feasible(&wedge)?;
    println!(
        "wedge: {:?}, point {:?}",
        rep.status,
        rep.point.map(|p| p.as_slice().to_vec())
    );

    let empty = unit_box(dmatrix![1.0, 0.0; -1.0, 0.0], dvector![-0.3, -0.3])?;
    let rep = lp_feasible(&empty)?;
    let nu = rep.certificate.expect("infeasible systems carry a certificate");
    let (combo, value) = empty.alternative_residual(&nu);
    println!("slab: {:?}, |nu A| = {combo:e}, nu b = {value}", rep.status);

    let rep = qp_project(&dvector![1.0, 1.0], &wedge)?;
    println!(
        "projection of (1, 1): {:?}, multipliers {:?}",
        rep.point.map(|p| p.as_slice().to_vec()),
        rep.multipliers.map(|m| m.as_slice().to_vec())
    );

    let sol = nnls(&dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0], &dvector![-1.0, 2.0, 0.0]);
    println!("nnls: x = {:?}, residual {}", sol.x.as_slice(), sol.residual_sq);

    for rows in [dmatrix![1.0, 0.0; 0.0, 1.0], dmatrix![1.0, 0.0; 0.0, 1.0; -1.0, -1.0]] {
        let ns = negative_spanning(&rows)?;
        println!(
            "rows {:?}: spanned = {}",
            rows.row_iter().map(|r| (r[0], r[1])).collect::<Vec<_>>(),
            ns.spanned
        );
    }
    Ok(())
}
