//! Linear solves, semi-implicit gradient flow, and damped Newton iteration.
//!
//! The gradient flow freezes the nonlinear weight at the current iterate and
//! steps through `(Gram/tau + A_k) u_{k+1} = (Gram/tau) u_k + rhs_k`, a
//! metric-projected descent that decreases the energy in practice for any
//! step size.  Newton solves the second-variation system and backtracks on
//! the energy.  Both record per-iteration telemetry in a [`SolverReport`].

use nalgebra::DVector;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::assembly::{AssembledSystem, Assembler};
use crate::femspace::DiscreteFunction;
use crate::mesh::Region;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIters,
    LineSearchFail,
}

/// Per-iteration telemetry.  Entry 0 describes the initial iterate (step
/// factor 0); all three histories always have equal length.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub energy_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub step_history: Vec<f64>,
    pub status: SolverStatus,
    pub wall_time: f64,
    /// Nodal snapshots per recorded iteration, when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
    /// Amount by which the final iterate leaves the exterior-data bounds
    /// `[min g, max g]` on the domain; zero when the discrete maximum
    /// principle holds.  Reported, not enforced.
    pub bound_violation: f64,
}

impl SolverReport {
    fn new(store: bool) -> SolverReport {
        SolverReport {
            energy_history: Vec::new(),
            residual_history: Vec::new(),
            step_history: Vec::new(),
            status: SolverStatus::MaxIters,
            wall_time: 0.0,
            iterates: store.then(Vec::new),
            bound_violation: 0.0,
        }
    }

    fn push(&mut self, energy: f64, residual: f64, step: f64, u: &DiscreteFunction) {
        self.energy_history.push(energy);
        self.residual_history.push(residual);
        self.step_history.push(step);
        if let Some(snaps) = self.iterates.as_mut() {
            snaps.push(u.values().to_vec());
        }
    }

    pub fn iterations(&self) -> usize {
        self.energy_history.len().saturating_sub(1)
    }

    /// CSV rows `iteration,energy,residual,step`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("iteration,energy,residual,step\n");
        for k in 0..self.energy_history.len() {
            out.push_str(&format!(
                "{k},{},{},{}\n",
                self.energy_history[k], self.residual_history[k], self.step_history[k]
            ));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Stopping tolerance on the Euclidean residual norm.
    pub tol: f64,
    pub max_iters: usize,
    /// Interpret `tol` relative to the initial residual norm; used for
    /// orders `s` near 1/2 where the energy scale collapses.
    pub relative: bool,
    /// Keep nodal snapshots of every iterate in the report.
    pub store_iterates: bool,
}

impl SolverOptions {
    pub fn gradient_flow() -> SolverOptions {
        SolverOptions {
            tol: 1e-8,
            max_iters: 200,
            relative: false,
            store_iterates: false,
        }
    }

    pub fn newton() -> SolverOptions {
        SolverOptions {
            tol: 1e-8,
            max_iters: 50,
            relative: false,
            store_iterates: false,
        }
    }
}

/// Anything Newton can descend on: an energy and its second-order model.
/// The assembled system's `rhs` must be minus the gradient.
pub(crate) trait Objective {
    fn energy_of(&self, u: &DiscreteFunction) -> Result<f64>;
    fn newton_system(&self, u: &DiscreteFunction) -> Result<AssembledSystem>;
}

impl Objective for Assembler {
    fn energy_of(&self, u: &DiscreteFunction) -> Result<f64> {
        self.energy(u)
    }

    fn newton_system(&self, u: &DiscreteFunction) -> Result<AssembledSystem> {
        self.newton_matrix(u)
    }
}

/// Bound violation of the final iterate against the exterior data range
/// (zero outside the ball counts as a datum value).
fn bound_violation(u: &DiscreteFunction) -> f64 {
    let mesh = u.mesh();
    let mut gmin = 0.0f64;
    let mut gmax = 0.0f64;
    for v in 0..mesh.n_vertices() {
        if !mesh.is_interior(v) {
            gmin = gmin.min(u.nodal(v));
            gmax = gmax.max(u.nodal(v));
        }
    }
    let mut viol = 0.0f64;
    for e in 0..mesh.n_elements() {
        if mesh.region(e) != Region::Omega {
            continue;
        }
        for &v in mesh.elem_verts(e) {
            viol = viol.max(u.nodal(v) - gmax).max(gmin - u.nodal(v));
        }
    }
    viol.max(0.0)
}

/// Semi-implicit gradient flow in the `H^alpha` metric (`alpha = 0`: L2).
/// The weight is frozen at the current iterate, so every step is one SPD
/// solve; the system matrix is rebuilt each step.
pub fn gradient_flow(
    asm: &Assembler,
    u0: &DiscreteFunction,
    tau: f64,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<(DiscreteFunction, SolverReport)> {
    if !(tau > 0.0) {
        return Err(Error::domain(format!("step size tau = {tau} must be positive")));
    }
    let start = Instant::now();
    let mesh = u0.mesh();
    let gram = asm.gram_matrix(alpha, mesh)?;
    let mut u = u0.clone();
    let mut report = SolverReport::new(opts.store_iterates);

    let r0 = asm.residual(&u)?;
    report.push(asm.energy(&u)?, r0.norm(), 0.0, &u);
    let tol_eff = if opts.relative {
        opts.tol * r0.norm()
    } else {
        opts.tol
    };
    if r0.norm() <= tol_eff {
        report.status = SolverStatus::Converged;
    } else {
        for _ in 1..=opts.max_iters {
            let frozen = asm.frozen_matrix(&u)?;
            let uint = DVector::from_vec(u.interior_values());
            let inv_tau = 1.0 / tau;
            let system = AssembledSystem {
                matrix: &gram.matrix * inv_tau + &frozen.matrix,
                rhs: &gram.matrix * &uint * inv_tau + &frozen.rhs,
                scaling: frozen.scaling,
            };
            let next = linear_solve(&system)?;
            u.set_interior(next.as_slice());
            let rnorm = asm.residual(&u)?.norm();
            report.push(asm.energy(&u)?, rnorm, tau, &u);
            if rnorm <= tol_eff {
                report.status = SolverStatus::Converged;
                break;
            }
        }
    }
    report.bound_violation = bound_violation(&u);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((u, report))
}

/// Damped Newton with backtracking on the energy: accept the largest step
/// `beta` in {1, 1/2, ..., 2^-20} with
/// `I[u + beta w] <= I[u] - c beta |r| |w|`, `c = 1e-4`.
pub fn damped_newton(
    asm: &Assembler,
    u0: &DiscreteFunction,
    opts: &SolverOptions,
) -> Result<(DiscreteFunction, SolverReport)> {
    damped_newton_impl(asm, u0, opts)
}

pub(crate) fn damped_newton_impl<O: Objective>(
    objective: &O,
    u0: &DiscreteFunction,
    opts: &SolverOptions,
) -> Result<(DiscreteFunction, SolverReport)> {
    const ARMIJO_C: f64 = 1e-4;
    let start = Instant::now();
    let mut u = u0.clone();
    let mut report = SolverReport::new(opts.store_iterates);

    let mut sys = objective.newton_system(&u)?;
    let mut energy = objective.energy_of(&u)?;
    report.push(energy, sys.rhs.norm(), 0.0, &u);
    let tol_eff = if opts.relative {
        opts.tol * sys.rhs.norm()
    } else {
        opts.tol
    };
    if sys.rhs.norm() <= tol_eff {
        report.status = SolverStatus::Converged;
    } else {
        'outer: for _ in 1..=opts.max_iters {
            let w = linear_solve(&sys)?;
            let rnorm = sys.rhs.norm();
            let wnorm = w.norm();
            let dofs = DVector::from_vec(u.interior_values());
            let mut beta = 1.0f64;
            loop {
                let trial = &dofs + &w * beta;
                let mut u_try = u.clone();
                u_try.set_interior(trial.as_slice());
                let e_try = objective.energy_of(&u_try)?;
                if e_try <= energy - ARMIJO_C * beta * rnorm * wnorm {
                    u = u_try;
                    energy = e_try;
                    break;
                }
                beta *= 0.5;
                if beta < 2.0f64.powi(-20) {
                    report.status = SolverStatus::LineSearchFail;
                    break 'outer;
                }
            }
            sys = objective.newton_system(&u)?;
            report.push(energy, sys.rhs.norm(), beta, &u);
            if sys.rhs.norm() <= tol_eff {
                report.status = SolverStatus::Converged;
                break;
            }
        }
    }
    report.bound_violation = bound_violation(&u);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((u, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveRoute {
    Cholesky,
    ConjugateGradient,
}

/// Dense Cholesky up to 5000 unknowns, Jacobi-preconditioned conjugate
/// gradients beyond.
pub fn linear_solve(system: &AssembledSystem) -> Result<DVector<f64>> {
    let route = if system.matrix.nrows() <= 5000 {
        SolveRoute::Cholesky
    } else {
        SolveRoute::ConjugateGradient
    };
    linear_solve_with(system, route)
}

pub fn linear_solve_with(system: &AssembledSystem, route: SolveRoute) -> Result<DVector<f64>> {
    match route {
        SolveRoute::Cholesky => system
            .matrix
            .clone()
            .cholesky()
            .map(|chol| chol.solve(&system.rhs))
            .ok_or_else(|| Error::LinearSolve {
                route: "cholesky".into(),
                msg: "matrix is not positive definite".into(),
            }),
        SolveRoute::ConjugateGradient => cg_jacobi(system, 1e-10),
    }
}

fn cg_jacobi(system: &AssembledSystem, rel_tol: f64) -> Result<DVector<f64>> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = a.nrows();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::LinearSolve {
            route: "cg".into(),
            msg: "nonpositive diagonal entry".into(),
        });
    }
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut z = DVector::from_iterator(n, r.iter().zip(&diag).map(|(ri, di)| ri / di));
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for _ in 0..(20 * n.max(100)) {
        let ap = a * &p;
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(Error::LinearSolve {
                route: "cg".into(),
                msg: format!("indefinite pivot p'Ap = {pap}"),
            });
        }
        let alpha = rz / pap;
        x += &p * alpha;
        r -= &ap * alpha;
        if r.norm() <= rel_tol * bnorm {
            return Ok(x);
        }
        z = DVector::from_iterator(n, r.iter().zip(&diag).map(|(ri, di)| ri / di));
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    Err(Error::LinearSolve {
        route: "cg".into(),
        msg: "iteration limit reached".into(),
    })
}
