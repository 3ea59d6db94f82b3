//! Artifact writers: RFC-4180-style CSV (header row, LF endings, '.'
//! decimal point) and file naming.  Every artifact name starts with a
//! `problem_s_h_solver` base so parameter sweeps never collide.
//!
//! Floats are written with the shortest round-trip representation, which
//! is deterministic for identical inputs; byte-identical reruns then only
//! require deterministic numerics upstream.

use std::path::{Path, PathBuf};

use crate::CliError;

/// `problem_s{s}_h{h}_{solver}`; sweeps replace a coordinate with a token
/// such as `hsweep`.
pub fn base_name(problem: &str, s: &str, h: &str, solver: &str) -> String {
    format!("{problem}_s{s}_h{h}_{solver}")
}

/// Shortest round-trip decimal; used for file name slots as well, so
/// h = 0.0625 names files `h0.0625`.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub struct Csv {
    out: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        let mut c = Csv { out: String::new(), columns: header.len() };
        c.push_row(header.iter().map(|s| s.to_string()));
        c
    }

    fn quote(field: &str) -> String {
        if field.contains(',') || field.contains('"') || field.contains('\n') {
            format!("\"{}\"", field.replace('"', "\"\""))
        } else {
            field.to_string()
        }
    }

    pub fn push_row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        let mut n = 0;
        for (i, f) in fields.into_iter().enumerate() {
            if i > 0 {
                self.out.push(',');
            }
            self.out.push_str(&Self::quote(&f));
            n += 1;
        }
        debug_assert_eq!(n, self.columns, "csv row width mismatch");
        self.out.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, &self.out)
            .map_err(|e| CliError::other(format!("cannot write {}: {e}", path.display())))
    }
}

/// Creates the output directory if needed and returns `dir/name`.
pub fn artifact_path(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::other(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

/// Label/value table, the shape shared by metrics and energy artifacts.
pub fn label_value_csv(rows: &[(&str, String)]) -> Csv {
    let mut csv = Csv::new(&["label", "value"]);
    for (label, value) in rows {
        csv.push_row([label.to_string(), value.clone()]);
    }
    csv
}

/// One-line human summary printed alongside every artifact batch.
pub fn announce(written: &[PathBuf]) {
    for p in written {
        println!("wrote {}", p.display());
    }
}

/// Solution table: vertex id, coordinates, dof class, nodal value.
pub fn solution_csv(
    mesh: &nlmg_core::mesh::Mesh,
    values: &[f64],
) -> Csv {
    let mut csv = Csv::new(&["vertex", "x", "y", "dof", "u"]);
    for v in 0..mesh.n_vertices() {
        let c = mesh.coord(v);
        let dof = match mesh.interior_index(v) {
            Some(k) => k.to_string(),
            None => String::new(),
        };
        csv.push_row([v.to_string(), num(c[0]), num(c[1]), dof, num(values[v])]);
    }
    csv
}

/// Iteration history table from a solver report.
pub fn report_csv(rep: &nlmg_core::solvers::SolverReport) -> Csv {
    let mut csv = Csv::new(&["iteration", "energy", "residual", "step"]);
    for i in 0..rep.energy_history.len() {
        csv.push_row([
            i.to_string(),
            num(rep.energy_history[i]),
            num(rep.residual_history[i]),
            num(rep.step_history[i]),
        ]);
    }
    csv
}

pub fn status_str(status: nlmg_core::solvers::SolverStatus) -> &'static str {
    use nlmg_core::solvers::SolverStatus::*;
    match status {
        Converged => "converged",
        MaxIters => "max_iters",
        LineSearchFail => "line_search_fail",
    }
}

/// Writes a debug summary of a report as label/value rows.
pub fn metrics_rows(
    rep: &nlmg_core::solvers::SolverReport,
    values: &[f64],
) -> Vec<(&'static str, String)> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    vec![
        ("status", status_str(rep.status).to_string()),
        ("iterations", (rep.energy_history.len() - 1).to_string()),
        ("final_energy", num(*rep.energy_history.last().unwrap())),
        ("final_residual", num(*rep.residual_history.last().unwrap())),
        ("wall_time_s", num(rep.wall_time)),
        ("u_min", num(lo)),
        ("u_max", num(hi)),
        ("bound_violation", num(rep.bound_violation)),
    ]
}

/// Reads a solution CSV written by `solution_csv` back onto `mesh`.
pub fn read_solution(path: &Path, mesh: &std::sync::Arc<nlmg_core::mesh::Mesh>) -> Result<nlmg_core::femspace::DiscreteFunction, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read solution {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "vertex,x,y,dof,u" {
        return Err(CliError::config(format!(
            "{}: not a solution table (unexpected header `{header}`)",
            path.display()
        )));
    }
    let mut values = vec![0.0f64; mesh.n_vertices()];
    let mut seen = 0usize;
    for (idx, line) in lines.enumerate() {
        let row = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::config(format!(
                "{}:{row}: expected 5 fields, got {}",
                path.display(),
                fields.len()
            )));
        }
        let bad = |what: &str| {
            CliError::config(format!("{}:{row}: bad {what} field", path.display()))
        };
        let v: usize = fields[0].parse().map_err(|_| bad("vertex"))?;
        if v >= mesh.n_vertices() {
            return Err(CliError::config(format!(
                "{}:{row}: vertex {v} outside mesh with {} vertices",
                path.display(),
                mesh.n_vertices()
            )));
        }
        let x: f64 = fields[1].parse().map_err(|_| bad("x"))?;
        let y: f64 = fields[2].parse().map_err(|_| bad("y"))?;
        let c = mesh.coord(v);
        if (x - c[0]).abs() > 1e-9 || (y - c[1]).abs() > 1e-9 {
            return Err(CliError::config(format!(
                "{}:{row}: vertex {v} coordinates do not match the configured mesh",
                path.display()
            )));
        }
        values[v] = fields[4].parse().map_err(|_| bad("u"))?;
        seen += 1;
    }
    if seen != mesh.n_vertices() {
        return Err(CliError::config(format!(
            "{}: has {seen} vertex rows, mesh has {}",
            path.display(),
            mesh.n_vertices()
        )));
    }
    nlmg_core::femspace::DiscreteFunction::new(mesh.clone(), values)
        .map_err(|e| CliError::config(e.to_string()))
}

/// Writes `text` to `path` as-is.
pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::other(format!("cannot write {}: {e}", path.display())))
}
