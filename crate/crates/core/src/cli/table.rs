//! Trajectory CSV: one row per iterate, reals in shortest round-trip form,
//! absent values as empty fields.

use std::io::Write;
use std::path::Path;

use crate::error::{Result, ScfoError};
use crate::harness::Trajectory;
use crate::scfo::Mode;

pub fn header(n_u: usize, n_g: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    h.extend((1..=n_u).map(|i| format!("u_{i}")));
    h.push("cost".into());
    h.extend((1..=n_g).map(|j| format!("g_{j}")));
    h.extend(
        ["gain", "eps_min", "delta_g_min", "delta_phi", "projected", "converged"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

fn real(v: f64) -> String {
    // `Display` for f64 prints the shortest string that parses back exactly.
    v.to_string()
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Rows of the trajectory table, header excluded. Parameter columns are
/// empty for unfiltered runs and for the final iterate, which takes no step.
pub fn rows(traj: &Trajectory) -> Vec<Vec<String>> {
    traj.iterates
        .iter()
        .map(|it| {
            let e = &it.eval;
            let mut r = vec![it.k.to_string()];
            r.extend(e.u.iter().map(|&v| real(v)));
            r.push(real(e.cost));
            r.extend(e.g.iter().map(|&v| real(v)));
            match &it.step {
                Some(s) => {
                    r.push(real(s.gain.chosen));
                    if traj.config.mode == Mode::None {
                        r.extend(std::iter::repeat_n(String::new(), 3));
                    } else {
                        r.push(real(s.params.eps_min()));
                        r.push(real(s.params.delta_g_min()));
                        r.push(real(s.params.delta_phi));
                    }
                    r.push(flag(s.projected_target.is_some()));
                }
                None => r.extend(std::iter::repeat_n(String::new(), 5)),
            }
            r.push(flag(it.converged));
            r
        })
        .collect()
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> csv::Result<()> {
    let first = &traj.iterates[0].eval;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header(first.u.len(), first.g.len()))?;
    for r in rows(traj) {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| ScfoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_trajectory(traj, std::io::BufWriter::new(file)).map_err(|source| ScfoError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// A parsed trajectory table; empty fields read back as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_trajectory_csv(path: &Path) -> Result<Table> {
    let csv_err = |source| ScfoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>()
                        .map(Some)
                        .map_err(|e| ScfoError::config(path.display().to_string(), format!("bad real `{f}`: {e}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}
