//! Error measures and reference quantities for computed graphs.
//!
//! The headline quantity is a geometric discrepancy between two graphs: the
//! pair-space integral of the kernel-weight difference against the
//! difference quotient of `u - v`, carrying the dimensional constant so that
//! values stay comparable as the order approaches 1/2, where the quantity
//! recovers the classical weighted normal-vector mismatch.  Two computation
//! routes are provided as a cross-check: a fused sweep over the integrand
//! and an expansion into four weighted-form pairings.
//!
//! The module also computes nonlocal normal vectors of graphs at interior
//! points, integral seminorms of fractional order, plain norm errors
//! against a reference, the classical catenoid profile for the annulus
//! benchmark, and a study of the local limit.

use std::io::Write as _;
use std::path::Path;

use crate::assembly::pair_functional;
use crate::femspace::DiscreteFunction;
use crate::kernel::KernelParams;
use crate::mesh::{Mesh, Region};
use crate::quadrature::{segment_rule, triangle_rule, FarField, QuadratureConfig, TailKind};
use crate::{rules, Error, Result};

/// Squared geometric discrepancy between two graphs on the same mesh,
/// through both computation routes, next to its classical counterpart.
#[derive(Debug, Clone, Copy)]
pub struct GeometricErrorBreakdown {
    /// Fused-sweep value: pair part plus far-field part.
    pub es_squared_direct: f64,
    /// The same quantity expanded into four weighted-form pairings
    /// `a_u(u,u) - a_u(u,v) - a_v(v,u) + a_v(v,v)`; agrees with the direct
    /// route up to quadrature error and cancellation.
    pub es_squared_ortho: f64,
    /// Classical weighted normal-vector mismatch `e` (not squared) from
    /// per-element gradients.
    pub e_classical: f64,
    /// Pair-space component of the direct route.
    pub pair_part: f64,
    /// Far-field component of the direct route.
    pub tail_part: f64,
}

impl GeometricErrorBreakdown {
    /// The discrepancy itself: square root of the direct value, clamped at
    /// zero against roundoff.
    pub fn es(&self) -> f64 {
        self.es_squared_direct.max(0.0).sqrt()
    }
}

/// Whether a seminorm integrates over all pairs meeting the domain or over
/// domain-domain pairs only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeminormDomain {
    /// Domain against everything, including the unmeshed far field.
    PairSpace,
    /// Domain against domain.
    DomainOnly,
}

/// L1, L2 and sup distances over the domain.
#[derive(Debug, Clone, Copy)]
pub struct NormErrors {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

fn same_mesh(u: &DiscreteFunction, v: &DiscreteFunction) -> bool {
    let (a, b) = (u.mesh(), v.mesh());
    if std::sync::Arc::ptr_eq(a, b) {
        return true;
    }
    a.dim() == b.dim()
        && a.n_vertices() == b.n_vertices()
        && a.n_elements() == b.n_elements()
        && (0..a.n_vertices()).all(|k| a.coord(k) == b.coord(k))
}

fn check_pair(u: &DiscreteFunction, v: &DiscreteFunction) -> Result<()> {
    if !same_mesh(u, v) {
        return Err(Error::domain(
            "functions live on different meshes; transfer onto a common refinement first".to_string(),
        ));
    }
    Ok(())
}

fn check_exterior_match(u: &DiscreteFunction, v: &DiscreteFunction) -> Result<()> {
    let mesh = u.mesh();
    for k in 0..mesh.n_vertices() {
        if mesh.interior_index(k).is_none() {
            let (a, b) = (u.nodal(k), v.nodal(k));
            if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                return Err(Error::domain(format!(
                    "exterior values differ at node {k}: {a} vs {b}"
                )));
            }
        }
    }
    Ok(())
}

/// Nodal value of `vals` at barycentric position `b` of element `e`.
fn value_at(mesh: &Mesh, vals: &[f64], e: usize, b: &[f64; 3]) -> f64 {
    mesh.elem_verts(e)
        .iter()
        .zip(b)
        .map(|(&v, &bk)| bk * vals[v])
        .sum()
}

/// Gauss sweep over the domain elements; calls `f(e, x, b, w)` per physical
/// point with combined weight `w`.
fn omega_quadrature(mesh: &Mesh, n: usize, f: &mut dyn FnMut(usize, [f64; 2], &[f64; 3], f64)) {
    let d = mesh.dim();
    let rule = if d == 1 {
        segment_rule(n)
    } else {
        triangle_rule(n)
    };
    for e in 0..mesh.n_elements() {
        if mesh.region(e) != Region::Omega {
            continue;
        }
        let c = mesh.elem_coords(e);
        let vol = mesh.elem_volume(e);
        for &(b, w) in &rule {
            let mut x = [0.0; 2];
            for k in 0..=d {
                x[0] += b[k] * c[k][0];
                x[1] += b[k] * c[k][1];
            }
            f(e, x, &b, w * vol);
        }
    }
}

/// Angular directions covering the unit sphere with their common weight,
/// matching the far-field convention.
fn sphere_directions(d: usize, config: &QuadratureConfig) -> (Vec<[f64; 2]>, f64) {
    if d == 1 {
        (vec![[1.0, 0.0], [-1.0, 0.0]], 1.0)
    } else {
        let n = config.n_theta;
        let dirs = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [th.cos(), th.sin()]
            })
            .collect();
        (dirs, 2.0 * std::f64::consts::PI / n as f64)
    }
}

/// Distance along `theta` from `x` to the boundary of the centered ball.
fn ball_exit(radius: f64, x: [f64; 2], theta: [f64; 2]) -> f64 {
    let xt = x[0] * theta[0] + x[1] * theta[1];
    let x2 = x[0] * x[0] + x[1] * x[1];
    -xt + (radius * radius - x2 + xt * xt).sqrt()
}

/// Pair part and far-field part of the squared discrepancy, unscaled.
fn es_parts(
    u: &DiscreteFunction,
    v: &DiscreteFunction,
    p: &KernelParams,
    config: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let mesh = u.mesh();
    let pair = pair_functional(
        mesh,
        config,
        p.form_exponent(),
        u.values(),
        v.values(),
        false,
        &|da, db, r| (p.g_fast(da / r) - p.g_fast(db / r)) * (da - db) / r,
    )?;
    // Beyond the ball both functions vanish, so per outer point x the inner
    // integral reduces to scalar tails with boundary values u(x) and v(x).
    let ff = FarField::new(p, mesh.radius(), config);
    let mut tail = 0.0;
    omega_quadrature(mesh, config.n_reg, &mut |e, x, b, w| {
        let ux = value_at(mesh, u.values(), e, b);
        let vx = value_at(mesh, v.values(), e, b);
        if ux == vx {
            return;
        }
        let tu = if ux != 0.0 {
            ux * ff.scalar(p, x, ux, TailKind::Gtilde)
        } else {
            0.0
        };
        let tv = if vx != 0.0 {
            vx * ff.scalar(p, x, vx, TailKind::Gtilde)
        } else {
            0.0
        };
        tail += 2.0 * w * (ux - vx) * (tu - tv);
    });
    Ok((pair, tail))
}

/// Weighted form pairing with the weight frozen at `w`: the double integral
/// of `G(d_w) d_z` against the form kernel plus its far-field tail,
/// unscaled.
fn form_pairing(
    w: &DiscreteFunction,
    z: &DiscreteFunction,
    p: &KernelParams,
    config: &QuadratureConfig,
) -> Result<f64> {
    let mesh = w.mesh();
    let pair = pair_functional(
        mesh,
        config,
        p.form_exponent(),
        w.values(),
        z.values(),
        false,
        &|dw, dz, r| p.g_fast(dw / r) * dz / r,
    )?;
    let ff = FarField::new(p, mesh.radius(), config);
    let mut tail = 0.0;
    omega_quadrature(mesh, config.n_reg, &mut |e, x, b, wq| {
        let wx = value_at(mesh, w.values(), e, b);
        let zx = value_at(mesh, z.values(), e, b);
        if wx != 0.0 && zx != 0.0 {
            tail += 2.0 * wq * zx * wx * ff.scalar(p, x, wx, TailKind::Gtilde);
        }
    });
    Ok(pair + tail)
}

/// Geometric discrepancy between two graphs on the same mesh with matching
/// exterior values, computed by both routes, with the classical counterpart
/// alongside.  The defining integrand is pointwise nonnegative, so the
/// direct value is nonnegative up to quadrature roundoff.
pub fn geometric_error_es(
    u: &DiscreteFunction,
    v: &DiscreteFunction,
    p: &KernelParams,
    config: &QuadratureConfig,
) -> Result<GeometricErrorBreakdown> {
    check_pair(u, v)?;
    check_exterior_match(u, v)?;
    if u.mesh().dim() != p.dim() {
        return Err(Error::domain(
            "kernel dimension does not match the mesh".to_string(),
        ));
    }
    let (pair_part, tail_part) = es_parts(u, v, p, config)?;
    let cds = p.cds();
    let es_squared_direct = cds * (pair_part + tail_part);
    let puu = form_pairing(u, u, p, config)?;
    let puv = form_pairing(u, v, p, config)?;
    let pvu = form_pairing(v, u, p, config)?;
    let pvv = form_pairing(v, v, p, config)?;
    let es_squared_ortho = cds * (puu - puv - pvu + pvv);
    Ok(GeometricErrorBreakdown {
        es_squared_direct,
        es_squared_ortho,
        e_classical: classical_error_e(u, v)?,
        pair_part: cds * pair_part,
        tail_part: cds * tail_part,
    })
}

#[inline]
fn q_of(a: [f64; 2]) -> f64 {
    (1.0 + a[0] * a[0] + a[1] * a[1]).sqrt()
}

/// Both algebraic forms of the squared classical normal mismatch: the
/// area-weighted norm form and the inner-product form.  They agree
/// pointwise, so the pair is a roundoff-level cross-check.
pub fn classical_error_forms(u: &DiscreteFunction, v: &DiscreteFunction) -> Result<(f64, f64)> {
    check_pair(u, v)?;
    let mesh = u.mesh();
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    for e in 0..mesh.n_elements() {
        if mesh.region(e) != Region::Omega {
            continue;
        }
        let gu = u.element_gradient(e);
        let gv = v.element_gradient(e);
        let (qu, qv) = (q_of(gu), q_of(gv));
        // Unit upward-graph normals (a, -1)/Q(a), third slot implicit.
        let dn = [
            gu[0] / qu - gv[0] / qv,
            gu[1] / qu - gv[1] / qv,
            -1.0 / qu + 1.0 / qv,
        ];
        let vol = mesh.elem_volume(e);
        f1 += vol * (dn[0] * dn[0] + dn[1] * dn[1] + dn[2] * dn[2]) * 0.5 * (qu + qv);
        f2 += vol * (dn[0] * (gu[0] - gv[0]) + dn[1] * (gu[1] - gv[1]));
    }
    Ok((f1, f2))
}

/// Classical weighted normal-vector mismatch `e` between two graphs, from
/// per-element constant gradients over the domain.
pub fn classical_error_e(u: &DiscreteFunction, v: &DiscreteFunction) -> Result<f64> {
    let (f1, _) = classical_error_forms(u, v)?;
    Ok(f1.max(0.0).sqrt())
}

/// Nonlocal graph-normal vector of `u` at an interior point `x`: the
/// kernel-weighted direction integral over the meshed ball plus a radial
/// far-field tail.  As the order approaches 1/2 this tends to the
/// normalized gradient at `x`.
///
/// The element containing `x` is integrated with an apex split in which the
/// radial factor integrates in closed form; nearby elements are refined
/// geometrically toward `x`.  In one dimension the vector lives in the
/// first slot.
pub fn nonlocal_normal(
    u: &DiscreteFunction,
    x: [f64; 2],
    p: &KernelParams,
    config: &QuadratureConfig,
) -> Result<[f64; 2]> {
    let mesh = u.mesh();
    if mesh.dim() != p.dim() {
        return Err(Error::domain(
            "kernel dimension does not match the mesh".to_string(),
        ));
    }
    let (e0, b0) = mesh
        .locate(x)
        .ok_or_else(|| Error::domain(format!("point ({}, {}) is outside the meshed ball", x[0], x[1])))?;
    if mesh.region(e0) != Region::Omega {
        return Err(Error::domain(format!(
            "point ({}, {}) is outside the domain",
            x[0], x[1]
        )));
    }
    let d = mesh.dim();
    let ux = value_at(mesh, u.values(), e0, &b0);
    let two_s = 2.0 * p.s();
    let rule = if d == 1 {
        segment_rule(config.n_reg.max(4))
    } else {
        triangle_rule(config.n_reg.max(4))
    };
    let mut acc = [0.0f64; 2];
    for e in 0..mesh.n_elements() {
        let contrib = if touches(mesh, e, x) {
            apex_element(u, e, x, p, config)
        } else {
            let c = mesh.elem_coords(e);
            let uv = elem_values(mesh, u.values(), e);
            near_element(d, c, uv, x, ux, p, two_s, &rule, 24)
        };
        acc[0] += contrib[0];
        acc[1] += contrib[1];
    }
    // Beyond the ball the function vanishes; per direction the radial
    // integral reduces to a one-dimensional weight integral.
    if ux != 0.0 {
        let radius = mesh.radius();
        let (dirs, dwt) = sphere_directions(d, config);
        let jac = rules::cached_jacobi(config.n_rad, two_s - 1.0);
        for th in &dirs {
            let delta = ball_exit(radius, x, *th);
            let a = ux / delta;
            let radial: f64 = jac
                .nodes
                .iter()
                .zip(&jac.weights)
                .map(|(&t, &w)| w * p.g_fast(a * t) / t)
                .sum();
            let coef = dwt * delta.powf(1.0 - two_s) * radial;
            acc[0] -= coef * th[0];
            acc[1] -= coef * th[1];
        }
    }
    Ok([p.cds() * acc[0], p.cds() * acc[1]])
}

fn touches(mesh: &Mesh, e: usize, x: [f64; 2]) -> bool {
    let b = mesh.barycentric(e, x);
    (0..=mesh.dim()).all(|k| b[k] >= -1e-10)
}

fn elem_values(mesh: &Mesh, vals: &[f64], e: usize) -> [f64; 3] {
    let verts = mesh.elem_verts(e);
    let mut out = [0.0; 3];
    for (k, &v) in verts.iter().enumerate() {
        out[k] = vals[v];
    }
    out
}

/// Contribution of the element containing `x` (or touching it).  The
/// function is linear here, so the difference quotient is constant along
/// each ray from `x` and the radial power integrates exactly.
fn apex_element(
    u: &DiscreteFunction,
    e: usize,
    x: [f64; 2],
    p: &KernelParams,
    config: &QuadratureConfig,
) -> [f64; 2] {
    let mesh = u.mesh();
    let d = mesh.dim();
    let two_s = 2.0 * p.s();
    let c = mesh.elem_coords(e);
    let grad = u.element_gradient(e);
    let mut acc = [0.0f64; 2];
    if d == 1 {
        for end in [c[0][0], c[1][0]] {
            let dxe = end - x[0];
            let len = dxe.abs();
            if len < 1e-300 {
                continue;
            }
            let th = dxe.signum();
            // d_u(x, x + th r) = -th * slope, constant in r.
            acc[0] += -th * p.g_fast(-th * grad[0]) * len.powf(1.0 - two_s) / (1.0 - two_s);
        }
    } else {
        let gl = rules::gauss_legendre(config.n_sing.max(8));
        for k in 0..3 {
            let a = c[k];
            let b = c[(k + 1) % 3];
            let ax = [a[0] - x[0], a[1] - x[1]];
            let bx = [b[0] - x[0], b[1] - x[1]];
            let ss = 0.5 * (ax[0] * bx[1] - ax[1] * bx[0]);
            if ss.abs() < 1e-300 {
                continue;
            }
            let mut edge_vec = [0.0f64; 2];
            for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
                let ew = [(1.0 - t) * ax[0] + t * bx[0], (1.0 - t) * ax[1] + t * bx[1]];
                let en = (ew[0] * ew[0] + ew[1] * ew[1]).sqrt();
                let rho = -(grad[0] * ew[0] + grad[1] * ew[1]) / en;
                let coef = w * p.g_fast(rho) * en.powf(-2.0 - two_s);
                edge_vec[0] += coef * ew[0];
                edge_vec[1] += coef * ew[1];
            }
            let factor = -2.0 * ss / (1.0 - two_s);
            acc[0] += factor * edge_vec[0];
            acc[1] += factor * edge_vec[1];
        }
    }
    acc
}

/// Regular element contribution with geometric refinement toward `x` when
/// the element sits close by.
#[allow(clippy::too_many_arguments)]
fn near_element(
    d: usize,
    c: [[f64; 2]; 3],
    uv: [f64; 3],
    x: [f64; 2],
    ux: f64,
    p: &KernelParams,
    two_s: f64,
    rule: &[([f64; 3], f64)],
    depth: usize,
) -> [f64; 2] {
    let mut cen = [0.0f64; 2];
    for ck in c.iter().take(d + 1) {
        cen[0] += ck[0];
        cen[1] += ck[1];
    }
    let nd = (d + 1) as f64;
    cen[0] /= nd;
    cen[1] /= nd;
    let circ = (0..=d)
        .map(|k| ((c[k][0] - cen[0]).powi(2) + (c[k][1] - cen[1]).powi(2)).sqrt())
        .fold(0.0, f64::max);
    let dist = ((x[0] - cen[0]).powi(2) + (x[1] - cen[1]).powi(2)).sqrt();
    let diam = 2.0 * circ;
    if depth == 0 || dist - circ >= 0.7 * diam {
        let vol = simplex_volume(d, &c);
        let mut acc = [0.0f64; 2];
        for &(b, w) in rule {
            let mut y = [0.0; 2];
            let mut uy = 0.0;
            for k in 0..=d {
                y[0] += b[k] * c[k][0];
                y[1] += b[k] * c[k][1];
                uy += b[k] * uv[k];
            }
            let (dx0, dx1) = (x[0] - y[0], x[1] - y[1]);
            let r = (dx0 * dx0 + dx1 * dx1).sqrt();
            let coef = w * vol * p.g_fast((ux - uy) / r) * r.powf(-(d as f64 + two_s));
            acc[0] += coef * dx0;
            acc[1] += coef * dx1;
        }
        return acc;
    }
    let mut acc = [0.0f64; 2];
    let mut add = |cc: [[f64; 2]; 3], vv: [f64; 3]| {
        let part = near_element(d, cc, vv, x, ux, p, two_s, rule, depth - 1);
        acc[0] += part[0];
        acc[1] += part[1];
    };
    if d == 1 {
        let m = [(c[0][0] + c[1][0]) / 2.0, 0.0];
        let um = (uv[0] + uv[1]) / 2.0;
        add([c[0], m, [0.0; 2]], [uv[0], um, 0.0]);
        add([m, c[1], [0.0; 2]], [um, uv[1], 0.0]);
    } else {
        let m01 = mid(c[0], c[1]);
        let m12 = mid(c[1], c[2]);
        let m20 = mid(c[2], c[0]);
        let (u01, u12, u20) = (
            (uv[0] + uv[1]) / 2.0,
            (uv[1] + uv[2]) / 2.0,
            (uv[2] + uv[0]) / 2.0,
        );
        add([c[0], m01, m20], [uv[0], u01, u20]);
        add([m01, c[1], m12], [u01, uv[1], u12]);
        add([m20, m12, c[2]], [u20, u12, uv[2]]);
        add([m01, m12, m20], [u01, u12, u20]);
    }
    acc
}

fn mid(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
}

fn simplex_volume(d: usize, c: &[[f64; 2]; 3]) -> f64 {
    if d == 1 {
        (c[1][0] - c[0][0]).abs()
    } else {
        0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]))
            .abs()
    }
}

/// Integral seminorm `iint |v(x)-v(y)|^p |x-y|^{-(d + p*order)}` over the
/// pair space or over domain-domain pairs.  Integrability requires
/// `order * p < 1`; the usual instance is `order = 2s`, `p = 1`.
pub fn nonlocal_seminorm(
    v: &DiscreteFunction,
    order: f64,
    pexp: f64,
    domain: SeminormDomain,
    config: &QuadratureConfig,
) -> Result<f64> {
    if !(order > 0.0) || pexp < 1.0 || order * pexp >= 1.0 {
        return Err(Error::domain(format!(
            "seminorm parameters order = {order}, p = {pexp} outside the integrable range"
        )));
    }
    let mesh = v.mesh();
    let d = mesh.dim() as f64;
    // Writing the integrand as (|dv|/r)^p r^{-beta} keeps the singular
    // factor within the template range beta < d.
    let beta = d - pexp + pexp * order;
    let one_p = (pexp - 1.0).abs() < 1e-14;
    let pair = if one_p {
        pair_functional(mesh, config, beta, v.values(), v.values(), domain == SeminormDomain::DomainOnly, &|dv, _, r| {
            dv.abs() / r
        })?
    } else {
        pair_functional(mesh, config, beta, v.values(), v.values(), domain == SeminormDomain::DomainOnly, &|dv, _, r| {
            (dv.abs() / r).powf(pexp)
        })?
    };
    if domain == SeminormDomain::DomainOnly {
        return Ok(pair);
    }
    // Far field: v vanishes beyond the ball, so the inner integral has the
    // closed form delta^{-p*order} / (p*order) per direction.
    let po = pexp * order;
    let radius = mesh.radius();
    let (dirs, dwt) = sphere_directions(mesh.dim(), config);
    let mut tail = 0.0;
    omega_quadrature(mesh, config.n_reg, &mut |e, x, b, w| {
        let vx = value_at(mesh, v.values(), e, b);
        if vx == 0.0 {
            return;
        }
        let vp = if one_p { vx.abs() } else { vx.abs().powf(pexp) };
        let geom: f64 = dirs.iter().map(|th| ball_exit(radius, x, *th).powf(-po)).sum();
        tail += 2.0 * w * vp * dwt * geom / po;
    });
    Ok(pair + tail)
}

/// Double integral of `|x-y|^{1-d-2s}` over domain-domain pairs: the
/// additive constant in the seminorm-energy bound.
pub fn interaction_constant(mesh: &Mesh, s: f64, config: &QuadratureConfig) -> Result<f64> {
    if !(0.0 < s && s < 0.5) {
        return Err(Error::domain(format!("order s = {s} outside (0, 1/2)")));
    }
    let zeros = vec![0.0; mesh.n_vertices()];
    let beta = mesh.dim() as f64 + 2.0 * s - 1.0;
    pair_functional(mesh, config, beta, &zeros, &zeros, true, &|_, _, _| 1.0)
}

/// Classical catenoid profile over the annulus `r_in <= |x| <= r_out`,
/// dropping from `gamma` on the inner rim to zero on the outer rim.
/// Evaluation clamps the radius to the annulus.
#[derive(Debug, Clone, Copy)]
pub struct CatenaryReference {
    lambda: f64,
    r_in: f64,
    r_out: f64,
}

impl CatenaryReference {
    /// Neck parameter of the profile; zero for the flat profile.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval(&self, r: f64) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let r = r.clamp(self.r_in, self.r_out);
        self.lambda * ((self.r_out / self.lambda).acosh() - (r / self.lambda).acosh())
    }

    /// Point-function view for norm errors.
    pub fn radial(&self) -> impl Fn([f64; 2]) -> f64 + '_ {
        move |x| self.eval((x[0] * x[0] + x[1] * x[1]).sqrt())
    }
}

/// Largest inner-rim drop for which the catenoid spans the annulus as a
/// graph; beyond it the surface detaches and sticks to the inner cylinder.
pub fn catenary_gamma_max(r_in: f64, r_out: f64) -> f64 {
    r_in * (r_out / r_in).acosh()
}

/// Solves for the catenoid through the annulus rims by bisection on the
/// neck parameter.  Errors when the drop exceeds the graph regime.
pub fn catenary_reference(gamma: f64, r_in: f64, r_out: f64) -> Result<CatenaryReference> {
    if !(r_in > 0.0 && r_out > r_in) {
        return Err(Error::domain(format!(
            "annulus radii r_in = {r_in}, r_out = {r_out} invalid"
        )));
    }
    if gamma < 0.0 {
        return Err(Error::domain(format!("rim drop gamma = {gamma} negative")));
    }
    if gamma == 0.0 {
        return Ok(CatenaryReference {
            lambda: 0.0,
            r_in,
            r_out,
        });
    }
    let gmax = catenary_gamma_max(r_in, r_out);
    if gamma > gmax {
        return Err(Error::domain(format!(
            "rim drop gamma = {gamma} exceeds the graph regime bound {gmax}"
        )));
    }
    let drop = |lam: f64| lam * ((r_out / lam).acosh() - (r_in / lam).acosh());
    // drop(lam) increases from 0 to the regime bound on (0, r_in].
    let mut lo = r_in * 1e-15;
    let mut hi = r_in;
    for _ in 0..90 {
        let midp = 0.5 * (lo + hi);
        if drop(midp) < gamma {
            lo = midp;
        } else {
            hi = midp;
        }
        if hi - lo <= 1e-13 * r_in {
            break;
        }
    }
    Ok(CatenaryReference {
        lambda: 0.5 * (lo + hi),
        r_in,
        r_out,
    })
}

/// One row of the local-limit study.
#[derive(Debug, Clone, Copy)]
pub struct LimitRow {
    pub s: f64,
    /// Geometric discrepancy at this order.
    pub es: f64,
    /// Its classical limit (order-independent).
    pub e_classical: f64,
    /// Scaled weighted-form pairing at this order.
    pub form: f64,
    /// Its classical limit (order-independent).
    pub form_classical: f64,
}

impl LimitRow {
    pub fn es_gap(&self) -> f64 {
        (self.es - self.e_classical).abs()
    }

    pub fn form_gap(&self) -> f64 {
        (self.form - self.form_classical).abs()
    }
}

/// Local-limit study table; rows follow the requested order list.
#[derive(Debug, Clone)]
pub struct LimitStudy {
    pub rows: Vec<LimitRow>,
}

impl LimitStudy {
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("s,es,e_classical,es_gap,form,form_classical,form_gap\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.s,
                r.es,
                r.e_classical,
                r.es_gap(),
                r.form,
                r.form_classical,
                r.form_gap()
            ));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Evaluates the geometric discrepancy and the scaled form pairing across a
/// list of orders next to their classical limits, for functions vanishing
/// outside the ball.
pub fn limit_study(
    u: &DiscreteFunction,
    v: &DiscreteFunction,
    s_list: &[f64],
    config: &QuadratureConfig,
) -> Result<LimitStudy> {
    check_pair(u, v)?;
    check_exterior_match(u, v)?;
    let mesh = u.mesh();
    let e_classical = classical_error_e(u, v)?;
    let mut form_classical = 0.0;
    for e in 0..mesh.n_elements() {
        if mesh.region(e) != Region::Omega {
            continue;
        }
        let gu = u.element_gradient(e);
        let gv = v.element_gradient(e);
        form_classical += mesh.elem_volume(e) * (gu[0] * gv[0] + gu[1] * gv[1]) / q_of(gu);
    }
    let mut rows = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let p = KernelParams::new(mesh.dim(), s)?;
        let (pair, tail) = es_parts(u, v, &p, config)?;
        let es = (p.cds() * (pair + tail)).max(0.0).sqrt();
        let form = p.cds() * form_pairing(u, v, &p, config)?;
        rows.push(LimitRow {
            s,
            es,
            e_classical,
            form,
            form_classical,
        });
    }
    Ok(LimitStudy { rows })
}

/// L1, L2 and sup distances between a discrete function and a reference
/// over the domain, by element Gauss quadrature; the sup also samples
/// element vertices.
pub fn norm_errors<F: Fn([f64; 2]) -> f64>(u: &DiscreteFunction, reference: F) -> NormErrors {
    let mesh = u.mesh();
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    let mut linf: f64 = 0.0;
    omega_quadrature(mesh, 6, &mut |e, x, b, w| {
        let diff = value_at(mesh, u.values(), e, b) - reference(x);
        l1 += w * diff.abs();
        l2 += w * diff * diff;
        linf = linf.max(diff.abs());
    });
    for e in 0..mesh.n_elements() {
        if mesh.region(e) != Region::Omega {
            continue;
        }
        for &v in mesh.elem_verts(e) {
            let x = mesh.coord(v);
            linf = linf.max((u.nodal(v) - reference(x)).abs());
        }
    }
    NormErrors {
        l1,
        l2: l2.sqrt(),
        linf,
    }
}
