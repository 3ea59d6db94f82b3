//! Subcommand implementations.  Each returns `Ok(())` on success, a
//! `CliError::NonConvergence` to request exit code 2, or a config error
//! for exit code 3; artifacts are written before non-convergence is
//! reported so failed runs can still be inspected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nlmg_core::assembly::Assembler;
use nlmg_core::femspace::{exterior_clement, DatumSpec, DiscreteFunction};
use nlmg_core::kernel::KernelParams;
use nlmg_core::mesh::Mesh;
use nlmg_core::metrics::{
    catenary_reference, geometric_error_es, limit_study, nonlocal_normal, norm_errors,
};
use nlmg_core::oracle::{
    brute_force_energy_1d, brute_force_perimeter_1d, exhaustive_minimize_small, fd_gradient,
    profile_of, OracleReport,
};
use nlmg_core::solvers::{damped_newton, gradient_flow, SolverOptions, SolverReport, SolverStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Problem, RunConfig};
use crate::output::{
    announce, artifact_path, base_name, label_value_csv, metrics_rows, num, read_solution,
    report_csv, solution_csv, status_str, write_text, Csv,
};
use crate::CliError;

fn core_err(e: nlmg_core::Error) -> CliError {
    CliError::other(e.to_string())
}

fn assembler(cfg: &RunConfig, d: usize) -> Result<Assembler, CliError> {
    Assembler::new(d, cfg.s, cfg.quadrature(d), cfg.scaling).map_err(core_err)
}

fn h_token(cfg: &RunConfig, mesh: &Mesh) -> String {
    match cfg.problem.nominal_h() {
        Some(h) => num(h),
        None => num(mesh.h()),
    }
}

fn print_mesh_stats(mesh: &Mesh) {
    println!(
        "mesh: dim {}, {} vertices, {} elements, {} dofs, h = {:.6}, sigma = {:.4}, R = {}",
        mesh.dim(),
        mesh.n_vertices(),
        mesh.n_elements(),
        mesh.n_interior(),
        mesh.h(),
        mesh.sigma(),
        mesh.radius()
    );
}

// ---------------------------------------------------------------------------
// validate / mesh
// ---------------------------------------------------------------------------

pub fn validate(config: Option<&Path>, s: Option<f64>) -> Result<(), CliError> {
    let cfg = crate::config::load(config, s)?;
    print!("{}", cfg.echo());
    let mesh = cfg.mesh()?;
    print_mesh_stats(&mesh);
    Ok(())
}

pub fn mesh_cmd(config: Option<&Path>, s: Option<f64>) -> Result<(), CliError> {
    let cfg = crate::config::load(config, s)?;
    let mesh = cfg.mesh()?;
    print_mesh_stats(&mesh);
    let base = base_name(&cfg.problem.token(), &num(cfg.s), &h_token(&cfg, &mesh), "none");
    let mut written = Vec::new();
    if cfg.formats.csv {
        let path = artifact_path(&cfg.outdir, &format!("{base}_mesh.txt"))?;
        mesh.export_plain(&path).map_err(core_err)?;
        written.push(path);
    }
    if cfg.formats.vtk {
        let path = artifact_path(&cfg.outdir, &format!("{base}_mesh.vtk"))?;
        mesh.export_vtk(&path, None).map_err(core_err)?;
        written.push(path);
    }
    announce(&written);
    Ok(())
}

// ---------------------------------------------------------------------------
// solve / flow
// ---------------------------------------------------------------------------

fn write_solution_artifacts(
    cfg: &RunConfig,
    mesh: &Arc<Mesh>,
    base: &str,
    u: &DiscreteFunction,
    rep: &SolverReport,
) -> Result<(), CliError> {
    let mut written = Vec::new();
    if cfg.formats.csv {
        let path = artifact_path(&cfg.outdir, &format!("{base}_solution.csv"))?;
        solution_csv(mesh, u.values()).write(&path)?;
        written.push(path);
        let path = artifact_path(&cfg.outdir, &format!("{base}_report.csv"))?;
        report_csv(rep).write(&path)?;
        written.push(path);
        let path = artifact_path(&cfg.outdir, &format!("{base}_metrics.csv"))?;
        label_value_csv(&metrics_rows(rep, u.values())).write(&path)?;
        written.push(path);
    }
    if cfg.formats.vtk {
        let path = artifact_path(&cfg.outdir, &format!("{base}_solution.vtk"))?;
        mesh.export_vtk(&path, Some(("u", u.values()))).map_err(core_err)?;
        written.push(path);
    }
    written.push(snapshot_config(cfg, base)?);
    announce(&written);
    Ok(())
}

fn check_converged(rep: &SolverReport) -> Result<(), CliError> {
    if rep.status == SolverStatus::Converged {
        Ok(())
    } else {
        Err(CliError::non_convergence(format!(
            "solver stopped with status {} after {} iterations (residual {:.3e})",
            status_str(rep.status),
            rep.energy_history.len() - 1,
            rep.residual_history.last().unwrap()
        )))
    }
}

pub fn solve(config: Option<&Path>, s: Option<f64>) -> Result<(), CliError> {
    let cfg = crate::config::load(config, s)?;
    let mesh = cfg.mesh()?;
    print_mesh_stats(&mesh);
    let asm = assembler(&cfg, mesh.dim())?;
    let u0 = exterior_clement(&cfg.datum, &mesh).map_err(core_err)?;
    let mut opts = SolverOptions::newton();
    opts.tol = cfg.solver.tol;
    opts.relative = cfg.solver.relative;
    opts.store_iterates = cfg.solver.store_iterates;
    if let Some(m) = cfg.solver.max_iters {
        opts.max_iters = m;
    }
    let (u, rep) = damped_newton(&asm, &u0, &opts).map_err(core_err)?;
    println!(
        "newton: {} in {} iterations, energy {:.10e}, residual {:.3e}",
        status_str(rep.status),
        rep.energy_history.len() - 1,
        rep.energy_history.last().unwrap(),
        rep.residual_history.last().unwrap()
    );
    let base = base_name(&cfg.problem.token(), &num(cfg.s), &h_token(&cfg, &mesh), "newton");
    write_solution_artifacts(&cfg, &mesh, &base, &u, &rep)?;
    check_converged(&rep)
}

pub fn flow(config: Option<&Path>, s: Option<f64>) -> Result<(), CliError> {
    let cfg = crate::config::load(config, s)?;
    let mesh = cfg.mesh()?;
    print_mesh_stats(&mesh);
    let asm = assembler(&cfg, mesh.dim())?;
    let u0 = exterior_clement(&cfg.datum, &mesh).map_err(core_err)?;
    let mut opts = SolverOptions::gradient_flow();
    opts.tol = cfg.solver.tol;
    opts.relative = cfg.solver.relative;
    opts.store_iterates = cfg.solver.store_iterates;
    if let Some(m) = cfg.solver.max_iters {
        opts.max_iters = m;
    }
    let alpha = cfg.solver.alpha.unwrap_or(cfg.s);
    let (u, rep) = gradient_flow(&asm, &u0, cfg.solver.tau, alpha, &opts).map_err(core_err)?;
    println!(
        "flow: {} in {} steps (tau = {}, alpha = {}), energy {:.10e}, residual {:.3e}",
        status_str(rep.status),
        rep.energy_history.len() - 1,
        cfg.solver.tau,
        alpha,
        rep.energy_history.last().unwrap(),
        rep.residual_history.last().unwrap()
    );
    let base = base_name(&cfg.problem.token(), &num(cfg.s), &h_token(&cfg, &mesh), "gf");
    write_solution_artifacts(&cfg, &mesh, &base, &u, &rep)?;
    check_converged(&rep)
}

// ---------------------------------------------------------------------------
// energy / metrics
// ---------------------------------------------------------------------------

pub fn energy(
    config: Option<&Path>,
    s: Option<f64>,
    solution: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = crate::config::load(config, s)?;
    let mesh = cfg.mesh()?;
    let asm = assembler(&cfg, mesh.dim())?;
    let (u, which) = match solution {
        Some(p) => (read_solution(p, &mesh)?, "loaded solution"),
        None => (
            exterior_clement(&cfg.datum, &mesh).map_err(core_err)?,
            "datum extension",
        ),
    };
    let e = asm.energy(&u).map_err(core_err)?;
    println!("energy[{which}] = {e:.12e}");
    if cfg.formats.csv {
        let base = base_name(&cfg.problem.token(), &num(cfg.s), &h_token(&cfg, &mesh), "none");
        let path = artifact_path(&cfg.outdir, &format!("{base}_energy.csv"))?;
        label_value_csv(&[
            ("input", which.to_string()),
            ("energy", num(e)),
            ("s", num(cfg.s)),
            ("dofs", mesh.n_interior().to_string()),
        ])
        .write(&path)?;
        announce(&[path]);
    }
    Ok(())
}

pub fn metrics(
    config: Option<&Path>,
    s: Option<f64>,
    u_path: &Path,
    v_path: &Path,
) -> Result<(), CliError> {
    let cfg = crate::config::load(config, s)?;
    let mesh = cfg.mesh()?;
    let u = read_solution(u_path, &mesh)?;
    let v = read_solution(v_path, &mesh)?;
    let params = KernelParams::new(mesh.dim(), cfg.s).map_err(core_err)?;
    let quad = cfg.quadrature(mesh.dim());
    let b = geometric_error_es(&u, &v, &params, &quad).map_err(core_err)?;
    println!(
        "e_s = {:.8e} (direct {:.8e}, orthogonality {:.8e}, classical {:.8e})",
        b.es(),
        b.es_squared_direct,
        b.es_squared_ortho,
        b.e_classical
    );
    let base = base_name(&cfg.problem.token(), &num(cfg.s), &h_token(&cfg, &mesh), "none");
    let path = artifact_path(&cfg.outdir, &format!("{base}_geometric.csv"))?;
    label_value_csv(&[
        ("es", num(b.es())),
        ("es_squared_direct", num(b.es_squared_direct)),
        ("es_squared_ortho", num(b.es_squared_ortho)),
        ("e_classical", num(b.e_classical)),
        ("pair_part", num(b.pair_part)),
        ("tail_part", num(b.tail_part)),
    ])
    .write(&path)?;
    announce(&[path]);
    Ok(())
}

// ---------------------------------------------------------------------------
// studies
// ---------------------------------------------------------------------------

/// Mesh refinement study against the catenary reference; meaningful for
/// orders close to 1/2 on the annulus, where the classical catenoid is the
/// limit profile.
pub fn study_rate(
    config: Option<&Path>,
    s: Option<f64>,
    levels: &[u32],
) -> Result<(), CliError> {
    let cfg = crate::config::load(config, s)?;
    let (r_in, r_out, big_r) = match cfg.problem {
        Problem::Annulus { r_in, r_out, big_r, .. } => (r_in, r_out, big_r),
        _ => {
            return Err(CliError::config(
                "study rate needs an annulus problem (the reference profile is radial)".into(),
            ));
        }
    };
    if levels.is_empty() {
        return Err(CliError::config("study rate needs at least one refinement level".into()));
    }
    let gamma = match gamma_of(&cfg.datum, r_in) {
        Some(g) => g,
        None => {
            return Err(CliError::config(
                "study rate needs a constant datum on the inner disk".into(),
            ));
        }
    };
    let cat = catenary_reference(gamma, r_in, r_out).map_err(core_err)?;
    let mut csv = Csv::new(&["level", "h", "vertices", "dofs", "iterations", "status", "l1_error"]);
    let mut pts = Vec::new();
    let mut failed = None;
    for &level in levels {
        let h = 0.5f64.powi(level as i32);
        let mesh = Problem::Annulus { r_in, r_out, big_r, h }
            .build_mesh(cfg.datum.support_radius())?;
        let asm = assembler(&cfg, 2)?;
        let mut u0 = exterior_clement(&cfg.datum, &mesh).map_err(core_err)?;
        // start from the classical profile: near s = 1/2 it is already
        // close to the minimizer and saves Newton steps on fine meshes
        let warm: Vec<f64> = mesh
            .interior_nodes()
            .iter()
            .map(|&v| {
                let c = mesh.coord(v);
                cat.eval(c[0].hypot(c[1]))
            })
            .collect();
        u0.set_interior(&warm);
        let mut opts = SolverOptions::newton();
        opts.tol = cfg.solver.tol;
        if let Some(m) = cfg.solver.max_iters {
            opts.max_iters = m;
        }
        let (u, rep) = damped_newton(&asm, &u0, &opts).map_err(core_err)?;
        let err = norm_errors(&u, |x: [f64; 2]| cat.eval(x[0].hypot(x[1]))).l1;
        println!(
            "level {level}: h = {h}, {} dofs, newton {} in {} iterations, L1 error {:.6e}",
            mesh.n_interior(),
            status_str(rep.status),
            rep.energy_history.len() - 1,
            err
        );
        csv.push_row([
            level.to_string(),
            num(h),
            mesh.n_vertices().to_string(),
            mesh.n_interior().to_string(),
            (rep.energy_history.len() - 1).to_string(),
            status_str(rep.status).to_string(),
            num(err),
        ]);
        if rep.status != SolverStatus::Converged && failed.is_none() {
            failed = Some(level);
        }
        pts.push((h.ln(), err.ln()));
    }
    if pts.len() >= 2 {
        let (slope, _) = fit_line(&pts);
        println!("least-squares L1 convergence rate: {slope:.4}");
    }
    let base = base_name(&cfg.problem.token(), &num(cfg.s), "sweep", "newton");
    let path = artifact_path(&cfg.outdir, &format!("{base}_rate.csv"))?;
    csv.write(&path)?;
    announce(&[path]);
    match failed {
        Some(level) => Err(CliError::non_convergence(format!(
            "newton did not converge at level {level}"
        ))),
        None => Ok(()),
    }
}

/// Constant value of the datum on the inner disk, if it is constant.
fn gamma_of(datum: &DatumSpec, r_in: f64) -> Option<f64> {
    let probe = datum.eval([0.5 * r_in, 0.0]);
    for k in 1..8 {
        let r = r_in * k as f64 / 8.0;
        if (datum.eval([r, 0.0]) - probe).abs() > 1e-12 {
            return None;
        }
    }
    Some(probe)
}

/// Fixed smooth profile pair used by the limit and normals studies.  Both
/// are supported strictly inside the default interval domain.
fn study_pair(mesh: &Arc<Mesh>) -> (DiscreteFunction, DiscreteFunction) {
    let bump = |x: f64, width: f64, amp: f64| {
        let t: f64 = 1.0 - (x / width) * (x / width);
        amp * t.max(0.0) * t.max(0.0)
    };
    let build = |f: &dyn Fn(f64) -> f64| {
        let vals = (0..mesh.n_vertices()).map(|k| f(mesh.coord(k)[0])).collect();
        DiscreteFunction::new(mesh.clone(), vals).unwrap()
    };
    (
        build(&|x| bump(x, 0.8, 0.15)),
        build(&|x| bump(x, 0.7, 0.1)),
    )
}

/// Local-limit table: geometric errors and bilinear forms against their
/// classical counterparts along a ladder of orders approaching 1/2.
pub fn study_limit(config: Option<&Path>, s_list: &[f64]) -> Result<(), CliError> {
    if s_list.is_empty() {
        return Err(CliError::config("study limit needs at least one order in --s-list".into()));
    }
    for &s in s_list {
        if !(s > 0.0 && s < 0.5) {
            return Err(CliError::config(format!(
                "s = {s} outside the admissible range (0, 1/2)"
            )));
        }
    }
    // the study needs its own d=1 domain; an annulus config is rejected
    let cfg = crate::config::load(config, Some(s_list[0]))?;
    let mesh = match cfg.problem {
        Problem::Interval { .. } | Problem::Imported { .. } => cfg.mesh()?,
        Problem::Annulus { .. } if config.is_none() => {
            Problem::Interval { a: -1.0, b: 1.0, big_r: 2.0, n: 64 }.build_mesh(0.0)?
        }
        Problem::Annulus { .. } => {
            return Err(CliError::config(
                "study limit is one-dimensional; configure an interval problem".into(),
            ));
        }
    };
    if mesh.dim() != 1 {
        return Err(CliError::config("study limit needs a one-dimensional mesh".into()));
    }
    let (u, v) = study_pair(&mesh);
    let quad = cfg.quadrature(1);
    let study = limit_study(&u, &v, s_list, &quad).map_err(core_err)?;
    let mut csv = Csv::new(&[
        "s", "es", "e_classical", "es_gap", "form", "form_classical", "form_gap",
    ]);
    println!("{:>10} {:>14} {:>14} {:>12}", "s", "e_s", "e", "|e_s - e|");
    for row in &study.rows {
        println!(
            "{:>10} {:>14.6e} {:>14.6e} {:>12.4e}",
            row.s, row.es, row.e_classical, row.es_gap()
        );
        csv.push_row([
            num(row.s),
            num(row.es),
            num(row.e_classical),
            num(row.es_gap()),
            num(row.form),
            num(row.form_classical),
            num(row.form_gap()),
        ]);
    }
    let base = base_name(&cfg.problem.token(), "sweep", &h_token(&cfg, &mesh), "none");
    let path = artifact_path(&cfg.outdir, &format!("{base}_limit.csv"))?;
    csv.write(&path)?;
    announce(&[path]);
    Ok(())
}

/// Nonlocal normal vectors at sample points against the scaled gradient
/// of the profile, along the same ladder of orders.
pub fn study_normals(
    config: Option<&Path>,
    s_list: &[f64],
    points: &[f64],
) -> Result<(), CliError> {
    if s_list.is_empty() {
        return Err(CliError::config("study normals needs at least one order in --s-list".into()));
    }
    let cfg = crate::config::load(config, Some(s_list[0]))?;
    let mesh = match cfg.problem {
        Problem::Interval { .. } | Problem::Imported { .. } => cfg.mesh()?,
        Problem::Annulus { .. } if config.is_none() => {
            Problem::Interval { a: -1.0, b: 1.0, big_r: 2.0, n: 64 }.build_mesh(0.0)?
        }
        Problem::Annulus { .. } => {
            return Err(CliError::config(
                "study normals is one-dimensional; configure an interval problem".into(),
            ));
        }
    };
    if mesh.dim() != 1 {
        return Err(CliError::config("study normals needs a one-dimensional mesh".into()));
    }
    let default_points = [-0.61, -0.29, 0.01, 0.31, 0.63];
    let points: Vec<f64> = if points.is_empty() {
        default_points.to_vec()
    } else {
        points.to_vec()
    };
    let (u, _) = study_pair(&mesh);
    // steepen the profile so the normal has a visible tilt
    let steep = {
        let vals: Vec<f64> = u.values().iter().map(|&v| 2.0 * v).collect();
        DiscreteFunction::new(mesh.clone(), vals).map_err(core_err)?
    };
    let quad = cfg.quadrature(1);
    let mut csv = Csv::new(&["s", "x", "normal_x", "target", "gap"]);
    for &x0 in &points {
        let x = [x0, 0.0];
        let (e, _) = mesh
            .locate(x)
            .ok_or_else(|| CliError::config(format!("sample point {x0} outside the mesh")))?;
        let m = steep.element_gradient(e)[0];
        let target = m / (1.0 + m * m).sqrt();
        for &s in s_list {
            if !(s > 0.0 && s < 0.5) {
                return Err(CliError::config(format!(
                    "s = {s} outside the admissible range (0, 1/2)"
                )));
            }
            let p = KernelParams::new(1, s).map_err(core_err)?;
            let n = nonlocal_normal(&steep, x, &p, &quad).map_err(core_err)?;
            let gap = (n[0] - target).abs();
            println!("s = {s:<8} x = {x0:<6} normal {:>12.6} target {target:>12.6} gap {gap:.4e}", n[0]);
            csv.push_row([num(s), num(x0), num(n[0]), num(target), num(gap)]);
        }
    }
    let base = base_name(&cfg.problem.token(), "sweep", &h_token(&cfg, &mesh), "none");
    let path = artifact_path(&cfg.outdir, &format!("{base}_normals.csv"))?;
    csv.write(&path)?;
    announce(&[path]);
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

/// Cross-checks the assembled numbers against the brute-force integrator
/// on the configured one-dimensional problem and writes the comparison
/// table.  Exits nonzero if any relative gap exceeds the tolerance.
pub fn oracle(config: Option<&Path>, s: Option<f64>, tol: f64) -> Result<(), CliError> {
    let cfg = crate::config::load(config, s)?;
    let mesh = match cfg.problem {
        Problem::Interval { .. } | Problem::Imported { .. } => cfg.mesh()?,
        Problem::Annulus { .. } => {
            return Err(CliError::config(
                "the brute-force oracle is one-dimensional; configure an interval problem".into(),
            ));
        }
    };
    if mesh.dim() != 1 {
        return Err(CliError::config("the brute-force oracle needs a one-dimensional mesh".into()));
    }
    let span = omega_span(&mesh);
    // The assembled side integrates the piecewise linear regularization of
    // the datum on the exterior collar; the brute-force side integrates the
    // datum itself.  They coincide exactly only when the datum is constant
    // across the whole mesh ball (or identically zero), so anything else
    // would report a spurious gap.
    let probe = cfg.datum.eval([0.0, 0.0]);
    let constant_over_ball = (1..=32).all(|k| {
        let r = mesh.radius() * k as f64 / 32.0 * (1.0 - 1e-12);
        (cfg.datum.eval([r, 0.0]) - probe).abs() < 1e-12
    });
    if !constant_over_ball {
        return Err(CliError::config(
            "oracle needs a datum that is constant across the mesh ball; \
             otherwise the discrete exterior glue differs from the continuum datum"
                .into(),
        ));
    }
    let asm = assembler(&cfg, 1)?;
    let mut report = OracleReport::default();
    let u0 = exterior_clement(&cfg.datum, &mesh).map_err(core_err)?;
    let mut profiles = vec![("extension".to_string(), u0.clone())];
    for seed in [cfg.oracle.seed, cfg.oracle.seed + 1] {
        let mut u = u0.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dofs: Vec<f64> = (0..mesh.n_interior())
            .map(|_| rng.random_range(-0.3..0.3))
            .collect();
        u.set_interior(&dofs);
        profiles.push((format!("random_{seed}"), u));
    }
    let mut energies = Vec::new();
    for (label, u) in &profiles {
        let ea = asm.energy(u).map_err(core_err)?;
        let profile = profile_of(u);
        let eb = brute_force_energy_1d(&profile, &cfg.datum, span, cfg.s, &cfg.oracle)
            .map_err(core_err)?;
        report.push(format!("energy_{label}"), ea, eb);
        energies.push((ea, u));
    }
    // perimeter differences against energy differences
    let m = cfg.oracle.truncation_height;
    let p0 = brute_force_perimeter_1d(&profile_of(energies[0].1), &cfg.datum, span, cfg.s, m, &cfg.oracle)
        .map_err(core_err)?;
    let p1 = brute_force_perimeter_1d(&profile_of(energies[1].1), &cfg.datum, span, cfg.s, m, &cfg.oracle)
        .map_err(core_err)?;
    report.push("perimeter_diff_vs_energy_diff", p1 - p0, energies[1].0 - energies[0].0);
    // residual magnitude against energy finite differences
    let u = energies[1].1;
    let res = asm.residual(u).map_err(core_err)?;
    let grad = fd_gradient(&asm, u, 1e-5).map_err(core_err)?;
    let mut sup_r = 0.0f64;
    let mut sup_g = 0.0f64;
    for i in 0..grad.len() {
        sup_r = sup_r.max(res[i].abs());
        sup_g = sup_g.max(grad[i].abs());
    }
    report.push("residual_sup_vs_fd", sup_r, sup_g);
    // tiny problems admit a solver-free minimizer comparison
    if (1..=3).contains(&mesh.n_interior()) {
        let blind = exhaustive_minimize_small(&asm, &cfg.datum, &mesh).map_err(core_err)?;
        let (newton, _) = damped_newton(&asm, &u0, &SolverOptions::newton()).map_err(core_err)?;
        report.push(
            "blind_minimum_energy_vs_newton",
            asm.energy(&blind).map_err(core_err)?,
            asm.energy(&newton).map_err(core_err)?,
        );
    }
    for row in &report.rows {
        println!(
            "{:<34} value {:>16.9e} reference {:>16.9e} rel gap {:.3e}",
            row.label,
            row.value,
            row.reference,
            row.rel_gap()
        );
    }
    let base = base_name(&cfg.problem.token(), &num(cfg.s), &h_token(&cfg, &mesh), "none");
    let path = artifact_path(&cfg.outdir, &format!("{base}_oracle.csv"))?;
    report.export_csv(&path).map_err(core_err)?;
    announce(&[path]);
    let worst = report.max_gap();
    println!("worst relative gap: {worst:.3e} (tolerance {tol:.1e})");
    if worst > tol {
        return Err(CliError::other(format!(
            "oracle disagreement {worst:.3e} exceeds tolerance {tol:.1e}"
        )));
    }
    Ok(())
}

/// The meshed domain interval (a, b) recovered from element regions.
fn omega_span(mesh: &Mesh) -> (f64, f64) {
    let mut a = f64::INFINITY;
    let mut b = f64::NEG_INFINITY;
    for e in 0..mesh.n_elements() {
        if mesh.region(e) == nlmg_core::mesh::Region::Omega {
            for &v in mesh.elem_verts(e) {
                a = a.min(mesh.coord(v)[0]);
                b = b.max(mesh.coord(v)[0]);
            }
        }
    }
    (a, b)
}

// ---------------------------------------------------------------------------
// shared numerics
// ---------------------------------------------------------------------------

fn fit_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let sy: f64 = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - sx) * (p.1 - sy)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - sx) * (p.0 - sx)).sum();
    (num / den, sy - num / den * sx)
}

/// Writes the effective configuration next to the artifacts so a run can
/// be reproduced from its output directory alone.
pub fn snapshot_config(cfg: &RunConfig, base: &str) -> Result<PathBuf, CliError> {
    let path = artifact_path(&cfg.outdir, &format!("{base}_config.cfg"))?;
    write_text(&path, &cfg.echo())?;
    Ok(path)
}
