//! End-to-end acceptance gate.
//!
//! Ten numbered criteria cover the library from the kernel closed forms to
//! the full annulus experiments.  Each criterion prints exactly one
//! PASS/FAIL line to stderr (bypassing test capture so the lines are
//! visible in a plain `cargo test` run), and the suite fails if any
//! criterion does.  Tolerances are pinned as constants next to the list.
//!
//! The two-dimensional solves run at mesh width 2^-3 with a slightly
//! reduced regular-pair rule where only qualitative behavior is asserted;
//! this keeps the whole gate near half an hour on one core.

use std::io::Write as _;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use nlmg_core::assembly::{Assembler, Scaling};
use nlmg_core::femspace::{exterior_clement, DatumSpec, DiscreteFunction};
use nlmg_core::kernel::{KernelKind, KernelParams};
use nlmg_core::mesh::{Mesh, Region};
use nlmg_core::metrics::{
    catenary_reference, geometric_error_es, limit_study, nonlocal_normal, nonlocal_seminorm,
    norm_errors, SeminormDomain,
};
use nlmg_core::oracle::{
    brute_force_energy_1d, brute_force_perimeter_1d, exhaustive_minimize_small, fd_gradient,
    profile_of, BruteForceConfig,
};
use nlmg_core::quadrature::QuadratureConfig;
use nlmg_core::rules;
use nlmg_core::solvers::{damped_newton, gradient_flow, SolverOptions, SolverStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Closed forms against independent quadrature.
const TOL_KERNEL_CLOSED: f64 = 1e-10;
/// Derivative identities through finite differences.
const TOL_KERNEL_FD: f64 = 1e-6;
/// Assembled residual against energy differences.
const TOL_GRADIENT: f64 = 1e-6;
/// Assembled Newton matrix against residual differences.
const TOL_JACOBIAN: f64 = 1e-5;
/// Brute-force energy against assembly, and blind against Newton minimizer.
const TOL_ORACLE: f64 = 1e-4;
/// Perimeter differences against energy differences, and box independence.
const TOL_PERIMETER: f64 = 1e-3;
/// Damped Newton iteration count on the annulus benchmark.
const NEWTON_ITERS: (usize, usize) = (2, 6);
/// Goodness of the log-linear residual fit for the gradient flow.
const GF_R2_MIN: f64 = 0.95;
/// Slack on the discrete maximum principle bounds.
const BOUND_SLACK: f64 = 1e-8;
/// Window for the observed L1 convergence rate against the catenary.
const RATE_WINDOW: (f64, f64) = (1.7, 2.2);
/// Two geometric-error routes, relative.
const TOL_ES_ROUTES: f64 = 1e-3;
/// Minimal observed interpolation decay rate in the pair-space seminorm.
const INTERP_RATE_MIN: f64 = 1.5;

type Outcome = Result<String, String>;

// ---------------------------------------------------------------------------
// shared scaffolding
// ---------------------------------------------------------------------------

fn det1() -> QuadratureConfig {
    let mut c = QuadratureConfig::for_dim(1);
    c.deterministic = true;
    c
}

/// Tightened production rule for quantitative one-dimensional comparisons.
fn tight1() -> QuadratureConfig {
    let mut c = det1();
    c.n_sing = 6;
    c.n_reg = 5;
    c
}

fn full2() -> QuadratureConfig {
    let mut c = QuadratureConfig::for_dim(2);
    c.deterministic = true;
    c
}

/// Reduced regular-pair rule for the qualitative two-dimensional sweeps.
fn reduced2() -> QuadratureConfig {
    let mut c = full2();
    c.n_sing = 4;
    c.n_reg = 2;
    c
}

fn mesh_1d(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::interval(-1.0, 1.0, 2.0, n).unwrap())
}

fn annulus(h: f64) -> Arc<Mesh> {
    Arc::new(Mesh::annulus(0.5, 1.0, 1.5, h).unwrap())
}

fn annulus_datum() -> DatumSpec {
    DatumSpec::constant(0.4, 0.5).unwrap()
}

/// Datum filling the whole meshed ball, so the discrete glue matches the
/// continuum one exactly.
fn box_datum(c: f64) -> DatumSpec {
    DatumSpec::constant(c, 2.0).unwrap()
}

fn from_fn(mesh: &Arc<Mesh>, f: impl Fn(f64) -> f64) -> DiscreteFunction {
    let vals = (0..mesh.n_vertices()).map(|k| f(mesh.coord(k)[0])).collect();
    DiscreteFunction::new(mesh.clone(), vals).unwrap()
}

fn randomized(mesh: &Arc<Mesh>, g: &DatumSpec, seed: u64, amp: f64) -> DiscreteFunction {
    let mut u = exterior_clement(g, mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dofs: Vec<f64> = (0..mesh.n_interior())
        .map(|_| rng.random_range(-amp..amp))
        .collect();
    u.set_interior(&dofs);
    u
}

/// Least-squares line through the points: (slope, r_squared).
fn ls_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let sy: f64 = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - sx) * (p.1 - sy)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - sx) * (p.0 - sx)).sum();
    let slope = num / den;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in pts {
        let fit = sy + slope * (x - sx);
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - sy) * (y - sy);
    }
    (slope, 1.0 - ss_res / ss_tot)
}

fn err_str(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

/// The kernel bound K against quadrature built from nothing but Gauss
/// rules, and the differential identities tying the weight family together.
fn c01_kernel_identities() -> Outcome {
    let gl = rules::gauss_legendre(16);
    let mut worst_k = 0.0_f64;
    let mut worst_ratio = 0.0_f64;
    let mut worst_fd = 0.0_f64;
    for d in [1usize, 2] {
        for s in [0.1, 0.25, 0.4, 0.49] {
            let p = KernelParams::new(d, s).map_err(err_str)?;
            // K = int_0^(pi/2) cos(theta)^(d-1+2s) dtheta; integrate
            // sin(u)^pow graded toward u = 0 where it is merely Hoelder
            let pow = d as f64 - 1.0 + 2.0 * s;
            let mut acc = 0.0;
            let mut hi = std::f64::consts::FRAC_PI_2;
            for _ in 0..40 {
                let lo = 0.5 * hi;
                for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
                    let u = lo + (hi - lo) * t;
                    acc += w * (hi - lo) * u.sin().powf(pow);
                }
                hi = lo;
            }
            let tm = 0.5 * hi;
            acc += tm.sin().powf(pow) * tm.powf(-pow) * hi.powf(1.0 + pow) / (1.0 + pow);
            worst_k = worst_k.max((acc - p.k_bound()).abs() / p.k_bound());
            for rho in [0.05, 0.3, 1.0, 2.5, 6.0] {
                let g = p.eval(KernelKind::G, rho);
                let gt = p.eval(KernelKind::Gtilde, rho);
                worst_ratio = worst_ratio.max((rho * gt - g).abs() / (1.0 + g.abs()));
                let h = 1e-5;
                let fd = (p.eval(KernelKind::F, rho + h) - p.eval(KernelKind::F, rho - h)) / (2.0 * h);
                worst_fd = worst_fd.max((fd - g).abs() / (1.0 + g.abs()));
            }
        }
    }
    if worst_k > TOL_KERNEL_CLOSED {
        return Err(format!("K quadrature gap {worst_k:.2e} above {TOL_KERNEL_CLOSED:.0e}"));
    }
    if worst_ratio > TOL_KERNEL_CLOSED {
        return Err(format!("rho*Gtilde vs G gap {worst_ratio:.2e}"));
    }
    if worst_fd > TOL_KERNEL_FD {
        return Err(format!("F' vs G gap {worst_fd:.2e}"));
    }
    Ok(format!(
        "K {worst_k:.1e}, rho*Gt-G {worst_ratio:.1e}, F'-G {worst_fd:.1e}"
    ))
}

/// Residual against energy differences, Newton matrix against residual
/// differences, and positive definiteness, on a 10-dof line problem.
fn c02_derivative_consistency() -> Outcome {
    let mesh = mesh_1d(11);
    let g = box_datum(0.3);
    let nd = mesh.n_interior();
    let mut worst_g = 0.0_f64;
    let mut worst_j = 0.0_f64;
    for (k, &s) in [0.1, 0.25, 0.4].iter().enumerate() {
        let asm = Assembler::new(1, s, det1(), Scaling::Unscaled).map_err(err_str)?;
        let u = randomized(&mesh, &g, 40 + k as u64, 0.3);
        let grad = fd_gradient(&asm, &u, 1e-5).map_err(err_str)?;
        let res = asm.residual(&u).map_err(err_str)?;
        let scale = res.amax().max(1e-12);
        for (i, &gi) in grad.iter().enumerate() {
            worst_g = worst_g.max((gi - res[i]).abs() / scale);
        }
        let jm = asm.newton_matrix(&u).map_err(err_str)?.matrix;
        let mut jfd = DMatrix::<f64>::zeros(nd, nd);
        let mut dofs = u.interior_values();
        let mut w = u.clone();
        let h = 1e-5;
        for col in 0..nd {
            let base = dofs[col];
            dofs[col] = base + h;
            w.set_interior(&dofs);
            let rp = asm.residual(&w).map_err(err_str)?;
            dofs[col] = base - h;
            w.set_interior(&dofs);
            let rm = asm.residual(&w).map_err(err_str)?;
            dofs[col] = base;
            for row in 0..nd {
                jfd[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        let jscale = jm.amax();
        worst_j = worst_j.max((&jfd - &jm).amax() / jscale);
        let asym = (&jm - jm.transpose()).amax() / jscale;
        if asym > 1e-12 {
            return Err(format!("s = {s}: newton matrix asymmetry {asym:.2e}"));
        }
        if nalgebra::Cholesky::new(jm).is_none() {
            return Err(format!("s = {s}: newton matrix not positive definite"));
        }
    }
    if worst_g > TOL_GRADIENT {
        return Err(format!("gradient gap {worst_g:.2e} above {TOL_GRADIENT:.0e}"));
    }
    if worst_j > TOL_JACOBIAN {
        return Err(format!("jacobian gap {worst_j:.2e} above {TOL_JACOBIAN:.0e}"));
    }
    Ok(format!("gradient {worst_g:.1e}, jacobian {worst_j:.1e}, SPD"))
}

/// Assembled energy against the brute-force integrator on twenty random
/// profiles, and damped Newton against the blind 3-dof minimizer.
fn c03_oracle_equivalence() -> Outcome {
    let mesh = mesh_1d(8);
    let g = box_datum(0.3);
    let s = 0.25;
    let asm = Assembler::new(1, s, tight1(), Scaling::Unscaled).map_err(err_str)?;
    let bf = BruteForceConfig::default();
    let mut worst = 0.0_f64;
    for seed in 0..20u64 {
        let u = randomized(&mesh, &g, seed, 0.35);
        let ea = asm.energy(&u).map_err(err_str)?;
        let profile = profile_of(&u);
        let eb = brute_force_energy_1d(&profile, &g, (-1.0, 1.0), s, &bf).map_err(err_str)?;
        worst = worst.max((ea - eb).abs() / ea.abs());
    }
    if worst > TOL_ORACLE {
        return Err(format!("energy gap {worst:.2e} above {TOL_ORACLE:.0e}"));
    }
    let mesh3 = mesh_1d(4);
    let asm3 = Assembler::new(1, s, det1(), Scaling::Unscaled).map_err(err_str)?;
    let blind = exhaustive_minimize_small(&asm3, &g, &mesh3).map_err(err_str)?;
    let u0 = exterior_clement(&g, &mesh3).map_err(err_str)?;
    let (newton, _) = damped_newton(&asm3, &u0, &SolverOptions::newton()).map_err(err_str)?;
    let mut nodal = 0.0_f64;
    for (a, b) in blind.values().iter().zip(newton.values()) {
        nodal = nodal.max((a - b).abs());
    }
    if nodal > TOL_ORACLE {
        return Err(format!("blind-vs-newton nodal gap {nodal:.2e}"));
    }
    let eb = asm3.energy(&blind).map_err(err_str)?;
    let en = asm3.energy(&newton).map_err(err_str)?;
    if eb > en + 1e-8 {
        return Err(format!("blind energy {eb} above newton {en}"));
    }
    Ok(format!("20 profiles max {worst:.1e}, blind nodal {nodal:.1e}"))
}

/// Perimeter differences equal energy differences across profiles and
/// orders, and do not depend on the truncation height.
fn c04_perimeter_energy_identity() -> Outcome {
    let mesh = mesh_1d(8);
    let g = box_datum(0.3);
    let profiles = [
        exterior_clement(&g, &mesh).map_err(err_str)?,
        randomized(&mesh, &g, 5, 0.3),
        randomized(&mesh, &g, 9, 0.3),
    ];
    let bf = BruteForceConfig::default();
    let mut worst_id = 0.0_f64;
    for &s in &[0.1, 0.25, 0.4] {
        let asm = Assembler::new(1, s, tight1(), Scaling::Unscaled).map_err(err_str)?;
        let mut perims = Vec::new();
        let mut energies = Vec::new();
        for u in &profiles {
            let profile = profile_of(u);
            perims.push(
                brute_force_perimeter_1d(&profile, &g, (-1.0, 1.0), s, 2.0, &bf).map_err(err_str)?,
            );
            energies.push(asm.energy(u).map_err(err_str)?);
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                let dp = perims[i] - perims[j];
                let de = energies[i] - energies[j];
                worst_id = worst_id.max((dp - de).abs() / de.abs().max(1e-6));
            }
        }
    }
    if worst_id > TOL_PERIMETER {
        return Err(format!("identity gap {worst_id:.2e} above {TOL_PERIMETER:.0e}"));
    }
    // box independence of the differences at one order
    let s = 0.25;
    let mut diffs = [[0.0_f64; 3]; 2];
    for (k, &m) in [2.0, 3.5].iter().enumerate() {
        let mut perims = Vec::new();
        for u in &profiles {
            let profile = profile_of(u);
            perims.push(
                brute_force_perimeter_1d(&profile, &g, (-1.0, 1.0), s, m, &bf).map_err(err_str)?,
            );
        }
        diffs[k] = [
            perims[0] - perims[1],
            perims[0] - perims[2],
            perims[1] - perims[2],
        ];
    }
    let mut worst_m = 0.0_f64;
    for j in 0..3 {
        worst_m = worst_m.max((diffs[0][j] - diffs[1][j]).abs() / diffs[0][j].abs().max(1e-6));
    }
    if worst_m > TOL_PERIMETER {
        return Err(format!("box-height leakage {worst_m:.2e}"));
    }
    Ok(format!("identity {worst_id:.1e}, box independence {worst_m:.1e}"))
}

/// The annulus benchmark at order 1/4: Newton iteration count, geometric
/// flow decay, monotone flow energies, and the maximum-principle bounds.
fn c05_annulus_qualitative() -> Outcome {
    let mesh = annulus(0.125);
    let g = annulus_datum();
    let u0 = exterior_clement(&g, &mesh).map_err(err_str)?;
    let asm = Assembler::new(2, 0.25, full2(), Scaling::CdsScaled).map_err(err_str)?;
    let (uh, rep) = damped_newton(&asm, &u0, &SolverOptions::newton()).map_err(err_str)?;
    let iters = rep.residual_history.len() - 1;
    if rep.status != SolverStatus::Converged {
        return Err(format!("newton did not converge: {:?}", rep.status));
    }
    if !(NEWTON_ITERS.0..=NEWTON_ITERS.1).contains(&iters) {
        return Err(format!("newton took {iters} iterations, expected {NEWTON_ITERS:?}"));
    }
    let (lo, hi) = uh
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo < -BOUND_SLACK || hi > 0.4 + BOUND_SLACK {
        return Err(format!("solution leaves [0, 0.4]: [{lo:.3e}, {hi:.3e}]"));
    }
    // semi-implicit flow: geometric residual decay at unit step
    let asm_r = Assembler::new(2, 0.25, reduced2(), Scaling::CdsScaled).map_err(err_str)?;
    let mut fopts = SolverOptions::gradient_flow();
    fopts.tol = 1e-6;
    fopts.relative = true;
    fopts.max_iters = 80;
    let (_, rgf) = gradient_flow(&asm_r, &u0, 1.0, 0.25, &fopts).map_err(err_str)?;
    if rgf.status != SolverStatus::Converged {
        return Err(format!("flow did not converge: {:?}", rgf.status));
    }
    let pts: Vec<(f64, f64)> = rgf
        .residual_history
        .iter()
        .enumerate()
        .map(|(i, r)| (i as f64, r.ln()))
        .collect();
    let (slope, r2) = ls_fit(&pts);
    if !(slope < 0.0 && r2 >= GF_R2_MIN) {
        return Err(format!("flow decay not geometric: rate exp({slope:.3}), R2 {r2:.3}"));
    }
    // monotone energies across step sizes; unit step reuses the run above
    let mut monotone = rgf.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    for &tau in &[0.1, 10.0] {
        let mut sopts = SolverOptions::gradient_flow();
        sopts.max_iters = 10;
        sopts.tol = 1e-14;
        let (_, rp) = gradient_flow(&asm_r, &u0, tau, 0.25, &sopts).map_err(err_str)?;
        monotone &= rp.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    }
    if !monotone {
        return Err("flow energy history not monotone".into());
    }
    Ok(format!(
        "newton {iters} iters, u in [{lo:.1e}, {:.3}], flow rate {:.2} R2 {r2:.3}",
        hi,
        slope.exp()
    ))
}

/// Vanishing-order benchmark: L1 convergence to the catenary over three
/// mesh levels with the expected near-quadratic rate.
fn c06_catenary_rate() -> Outcome {
    let s = 0.499999;
    let g = annulus_datum();
    let cat = catenary_reference(0.4, 0.5, 1.0).map_err(err_str)?;
    let mut pts = Vec::new();
    let mut iters_all = Vec::new();
    for &h in &[0.25_f64, 0.125, 0.0625] {
        let mesh = annulus(h);
        let asm = Assembler::new(2, s, reduced2(), Scaling::CdsScaled).map_err(err_str)?;
        let mut u0 = exterior_clement(&g, &mesh).map_err(err_str)?;
        // warm start from the classical profile; the minimizer is close
        let vals: Vec<f64> = mesh
            .interior_nodes()
            .iter()
            .map(|&v| {
                let c = mesh.coord(v);
                cat.eval(c[0].hypot(c[1]))
            })
            .collect();
        u0.set_interior(&vals);
        let (uh, rep) = damped_newton(&asm, &u0, &SolverOptions::newton()).map_err(err_str)?;
        if rep.status != SolverStatus::Converged {
            return Err(format!("h = {h}: newton status {:?}", rep.status));
        }
        iters_all.push(rep.residual_history.len() - 1);
        let err = norm_errors(&uh, |x: [f64; 2]| cat.eval(x[0].hypot(x[1]))).l1;
        pts.push((h.ln(), err.ln()));
    }
    let (slope, _) = ls_fit(&pts);
    if !(RATE_WINDOW.0..=RATE_WINDOW.1).contains(&slope) {
        return Err(format!("L1 rate {slope:.3} outside {RATE_WINDOW:?}"));
    }
    Ok(format!("L1 rate {slope:.3}, newton iters {iters_all:?}"))
}

/// The graph steepens near the inner circle as the order decreases.
fn c07_monotone_steepening() -> Outcome {
    let g = annulus_datum();
    let mesh = annulus(0.125);
    let mut u0 = exterior_clement(&g, &mesh).map_err(err_str)?;
    let mut grads = Vec::new();
    for &s in &[0.45, 0.35, 0.25, 0.15] {
        let asm = Assembler::new(2, s, reduced2(), Scaling::CdsScaled).map_err(err_str)?;
        let (uh, rep) = damped_newton(&asm, &u0, &SolverOptions::newton()).map_err(err_str)?;
        if rep.status != SolverStatus::Converged {
            return Err(format!("s = {s}: newton status {:?}", rep.status));
        }
        let mut gmax = 0.0_f64;
        for e in 0..mesh.n_elements() {
            if mesh.region(e) != Region::Omega {
                continue;
            }
            let near_inner = mesh.elem_verts(e).iter().any(|&v| {
                let c = mesh.coord(v);
                (c[0].hypot(c[1]) - 0.5).abs() < 1e-9
            });
            if near_inner {
                let gr = uh.element_gradient(e);
                gmax = gmax.max(gr[0].hypot(gr[1]));
            }
        }
        grads.push(gmax);
        // warm-start the next, flatter order from this solution
        u0 = uh;
    }
    if !grads.windows(2).all(|w| w[1] > w[0]) {
        return Err(format!("inner gradients not increasing: {grads:?}"));
    }
    Ok(format!(
        "inner gradient {:.2} -> {:.2} as s drops",
        grads[0],
        grads[grads.len() - 1]
    ))
}

/// The two geometric-error routes agree, and the squared error is bounded
/// by the pair-seminorm distance to the interpolated reference.
fn c08_geometric_error() -> Outcome {
    let mesh = mesh_1d(16);
    let g = box_datum(0.3);
    let u = randomized(&mesh, &g, 51, 0.3);
    let v = randomized(&mesh, &g, 52, 0.3);
    let cfg = det1();
    let mut worst = 0.0_f64;
    for &s in &[0.2, 0.35, 0.45] {
        let p = KernelParams::new(1, s).map_err(err_str)?;
        let b = geometric_error_es(&u, &v, &p, &cfg).map_err(err_str)?;
        worst = worst.max((b.es_squared_direct - b.es_squared_ortho).abs() / b.es_squared_direct);
    }
    if worst > TOL_ES_ROUTES {
        return Err(format!("route gap {worst:.2e} above {TOL_ES_ROUTES:.0e}"));
    }
    // Galerkin bound on nested meshes: coarse test functions live in the
    // fine space, so the squared error of the coarse minimizer against any
    // interpolated reference is controlled by the seminorm distance
    let mut bounds = Vec::new();
    for &s in &[0.2, 0.35] {
        let p = KernelParams::new(1, s).map_err(err_str)?;
        let fine = mesh_1d(32);
        let coarse = mesh_1d(8);
        let asm = Assembler::new(1, s, det1(), Scaling::Unscaled).map_err(err_str)?;
        let (uref, _) = damped_newton(
            &asm,
            &exterior_clement(&g, &fine).map_err(err_str)?,
            &SolverOptions::newton(),
        )
        .map_err(err_str)?;
        let (uc, _) = damped_newton(
            &asm,
            &exterior_clement(&g, &coarse).map_err(err_str)?,
            &SolverOptions::newton(),
        )
        .map_err(err_str)?;
        let uh = uc.transfer_to(fine.clone());
        let vh = uref.transfer_to(coarse.clone()).transfer_to(fine.clone());
        let wvals: Vec<f64> = uref
            .values()
            .iter()
            .zip(vh.values())
            .map(|(a, b)| a - b)
            .collect();
        let w = DiscreteFunction::new(fine.clone(), wvals).map_err(err_str)?;
        let es2 = geometric_error_es(&uh, &vh, &p, &cfg)
            .map_err(err_str)?
            .es_squared_direct;
        let sem = nonlocal_seminorm(&w, 2.0 * s, 1.0, SeminormDomain::PairSpace, &cfg).map_err(err_str)?;
        let rhs = 2.0 * p.cds() * p.k_bound() * sem;
        if es2 > rhs * (1.0 + 1e-9) {
            return Err(format!("s = {s}: es^2 {es2:.3e} above bound {rhs:.3e}"));
        }
        bounds.push(es2 / rhs);
    }
    Ok(format!(
        "routes {worst:.1e}, bound ratios {:.2} / {:.2}",
        bounds[0], bounds[1]
    ))
}

/// Local-limit asymptotics: both limit gaps shrink strictly along the
/// order ladder, and nonlocal normals approach the scaled gradient.
fn c09_local_limit() -> Outcome {
    let mesh = mesh_1d(64);
    let small_u = |x: f64| {
        let t: f64 = 1.0 - (x / 0.8) * (x / 0.8);
        0.15 * t.max(0.0).powi(2)
    };
    let small_v = |x: f64| {
        let t: f64 = 1.0 - (x / 0.7) * (x / 0.7);
        0.1 * t.max(0.0).powi(2)
    };
    let u = from_fn(&mesh, small_u);
    let v = from_fn(&mesh, small_v);
    let cfg = det1();
    let slist = [0.3, 0.4, 0.45, 0.49];
    let study = limit_study(&u, &v, &slist, &cfg).map_err(err_str)?;
    let eg: Vec<f64> = study.rows.iter().map(|r| r.es_gap()).collect();
    let fg: Vec<f64> = study.rows.iter().map(|r| r.form_gap()).collect();
    if !eg.windows(2).all(|w| w[1] < w[0]) {
        return Err(format!("|es - e| not strictly decreasing: {eg:?}"));
    }
    if !fg.windows(2).all(|w| w[1] < w[0]) {
        return Err(format!("form gap not strictly decreasing: {fg:?}"));
    }
    // normals at five interior points against the scaled gradient
    let steep = from_fn(&mesh, |x| {
        let t: f64 = 1.0 - (x / 0.8) * (x / 0.8);
        0.3 * t.max(0.0).powi(2)
    });
    for x0 in [-0.61, -0.29, 0.01, 0.31, 0.63] {
        let x = [x0, 0.0];
        let (e, _) = mesh.locate(x).ok_or("sample point outside mesh")?;
        let m = steep.element_gradient(e)[0];
        let target = m / (1.0 + m * m).sqrt();
        let mut gaps = Vec::new();
        for &s in &slist {
            let p = KernelParams::new(1, s).map_err(err_str)?;
            let nv = nonlocal_normal(&steep, x, &p, &cfg).map_err(err_str)?;
            gaps.push((nv[0] - target).abs());
        }
        if !gaps.windows(2).all(|w| w[1] < w[0]) {
            return Err(format!("normal gap at x = {x0} not decreasing: {gaps:?}"));
        }
    }
    Ok(format!(
        "es gap {:.1e} -> {:.1e}, form gap {:.1e} -> {:.1e}, 5 normal points shrink",
        eg[0],
        eg[3],
        fg[0],
        fg[3]
    ))
}

/// Pair-space seminorm interpolation error decays with rate at least 3/2
/// at order 1/4, as the squared-regularity theory predicts.
fn c10_interpolation_decay() -> Outcome {
    let s = 0.25;
    let cfg = det1();
    let smooth = |x: f64| {
        let t: f64 = 1.0 - (x / 0.8) * (x / 0.8);
        0.3 * t.max(0.0).powi(2)
    };
    let fine = mesh_1d(1024);
    let vref = from_fn(&fine, smooth);
    let mut pts = Vec::new();
    for &n in &[16usize, 32, 64, 128] {
        let coarse = mesh_1d(n);
        let ih = from_fn(&coarse, smooth).transfer_to(fine.clone());
        let wvals: Vec<f64> = ih
            .values()
            .iter()
            .zip(vref.values())
            .map(|(a, b)| a - b)
            .collect();
        let w = DiscreteFunction::new(fine.clone(), wvals).map_err(err_str)?;
        let err = nonlocal_seminorm(&w, 2.0 * s, 1.0, SeminormDomain::PairSpace, &cfg).map_err(err_str)?;
        pts.push(((2.0 / n as f64).ln(), err.ln()));
    }
    let (slope, _) = ls_fit(&pts);
    if slope < INTERP_RATE_MIN {
        return Err(format!("observed rate {slope:.3} below {INTERP_RATE_MIN}"));
    }
    Ok(format!("observed rate {slope:.3}"))
}

// ---------------------------------------------------------------------------
// driver
// ---------------------------------------------------------------------------

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("kernel identities", c01_kernel_identities),
        ("derivative consistency", c02_derivative_consistency),
        ("oracle equivalence", c03_oracle_equivalence),
        ("perimeter-energy identity", c04_perimeter_energy_identity),
        ("annulus benchmark", c05_annulus_qualitative),
        ("vanishing-order rate", c06_catenary_rate),
        ("monotone steepening", c07_monotone_steepening),
        ("geometric error routes", c08_geometric_error),
        ("local-limit asymptotics", c09_local_limit),
        ("interpolation decay", c10_interpolation_decay),
    ];
    let mut failures = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        let line = match &outcome {
            Ok(detail) => format!(
                "criterion {:2}/10 {name:<26} PASS  [{secs:7.1}s]  {detail}",
                i + 1
            ),
            Err(reason) => {
                failures.push(format!("{} ({name}): {reason}", i + 1));
                format!(
                    "criterion {:2}/10 {name:<26} FAIL  [{secs:7.1}s]  {reason}",
                    i + 1
                )
            }
        };
        let _ = writeln!(std::io::stderr().lock(), "{line}");
    }
    assert!(failures.is_empty(), "acceptance failures: {failures:#?}");
}
