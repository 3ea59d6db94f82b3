//! Brute-force reference computations in one dimension.
//!
//! Everything here trades speed for independence: the nonlocal energy and
//! the truncated-cylinder perimeter of a graph are computed by direct
//! nested quadrature from scratch-built weight primitives, gradients come
//! from finite differences of the assembled energy, and tiny problems are
//! minimized by exhaustive golden-section search.  None of the closed-form
//! kernel expressions or the element-pair assembly loops are reused, so
//! agreement with the production path is a real consistency statement and
//! not a tautology.
//!
//! The perimeter functional measures the fractional perimeter, inside the
//! cylinder over the domain, of the subgraph truncated below at a height
//! `-m`; it differs from the graph energy by a constant depending only on
//! the truncation height, the order and the exterior datum, so energy
//! differences and perimeter differences must agree.
//!
//! The double integrals are only implemented for a one-dimensional domain
//! (planar sets); that is cheap enough for blind grids yet exercises every
//! structural feature of the functional: the diagonal singularity, the
//! boundary layer of the exterior interaction, datum jumps, and the slowly
//! decaying far field.

use std::path::Path;
use std::sync::Arc;

use crate::assembly::Assembler;
use crate::cheb::Chebyshev;
use crate::femspace::{exterior_clement, DatumSpec, DiscreteFunction};
use crate::mesh::Mesh;
use crate::rules::{self, Rule};
use crate::{Error, Result};

/// Tuning knobs for the brute-force integrators.
#[derive(Debug, Clone)]
pub struct BruteForceConfig {
    /// Uniform outer panels over the domain.  The inner direction refines
    /// itself geometrically, so this mainly needs to resolve kinks of the
    /// profile; aligning it with a mesh width makes piecewise linear
    /// profiles exact to panel order.
    pub grid_n: usize,
    /// Number of randomized profiles for spot-check drivers; the
    /// integrators themselves are deterministic.
    pub mc_samples: usize,
    /// Fallback truncation height of the subgraph box when the caller has
    /// no sharper bound on the graph and datum range.
    pub truncation_height: f64,
    /// Seed for randomized spot-check drivers.
    pub seed: u64,
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        BruteForceConfig {
            grid_n: 24,
            mc_samples: 1000,
            truncation_height: 2.0,
            seed: 7,
        }
    }
}

/// Transition point between the direct and asymptotic evaluation of the
/// weight primitives.
const CUT: f64 = 8.0;
/// Points per quadrature panel.
const GL_PANEL: usize = 8;
/// Geometric halvings toward the diagonal of the inner integral.
const DIAG_LEVELS: usize = 30;
/// Geometric halvings of the outer corner panels.
const CORNER_LEVELS: usize = 20;
/// The analytic far-field expansion takes over at this multiple of the
/// problem scales; its first neglected term then sits near 1e-5 relative.
const FAR_FACTOR: f64 = 32.0;

// ---------------------------------------------------------------------------
// weight primitives
// ---------------------------------------------------------------------------

/// Primitives of the planar weight `phi(r) = (1 + r^2)^(-(1+s))`, built from
/// quadrature and Chebyshev tables only.
///
/// `p_low(t) = int_0^t phi` (odd), `k = int_0^infty phi`, and `a_slab(t)` is
/// the second primitive of `phi` shifted so that `a_slab'(t) = k + p_low(t)`
/// and `a_slab(0) = 0`; it is what a vertical slab of unit cross-section
/// contributes to the interaction of two subgraph columns at difference
/// quotient `t`.  The negative branch is evaluated through the upper tail
/// `k - p_low` directly, so large arguments lose no precision to
/// cancellation.
struct SlabTables {
    s: f64,
    /// Half-line mass of the weight.
    k: f64,
    /// `p_low` on [-1, 1].
    near: Chebyshev,
    /// `p_low(1/w)` on [1/CUT, 1].
    mid: Chebyshev,
    /// Jacobi rule with weight `sigma^(2s)` for the remote mass.
    far_rule: Rule,
}

impl SlabTables {
    fn build(s: f64) -> SlabTables {
        let gl = rules::gauss_legendre(48);
        // int_0^t phi = int_0^atan(t) cos(theta)^(2s) dtheta, regular on any
        // [0, atan t] with t <= CUT
        let direct = |t: f64| -> f64 {
            let top = t.atan();
            let mut acc = 0.0;
            for (&n, &w) in gl.nodes.iter().zip(&gl.weights) {
                acc += w * top * (top * n).cos().powf(2.0 * s);
            }
            acc
        };
        // k = int_0^(pi/2) cos^(2s); the integrand is only Hoelder at the
        // endpoint, so integrate sin(u)^(2s) du graded toward u = 0
        let half_pi = std::f64::consts::FRAC_PI_2;
        let k = graded_zero(half_pi, -2.0 * s, 40, &gl, &mut |u| u.sin().powf(2.0 * s));
        let near = Chebyshev::fit(-1.0, 1.0, 48, |t| if t >= 0.0 { direct(t) } else { -direct(-t) });
        let mid = Chebyshev::fit(1.0 / CUT, 1.0, 48, |w| direct(1.0 / w));
        SlabTables {
            s,
            k,
            near,
            mid,
            far_rule: rules::gauss_jacobi(24, 2.0 * s),
        }
    }

    /// Lower primitive `int_0^t phi`, odd in `t`.
    fn p_low(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= 1.0 {
            return self.near.eval(t);
        }
        let v = if a <= CUT {
            self.mid.eval(1.0 / a)
        } else {
            self.k - self.p_up(a)
        };
        v.copysign(t)
    }

    /// Upper tail `int_t^infty phi` for `t >= 0`, exact in the rule order
    /// beyond the cut.
    fn p_up(&self, t: f64) -> f64 {
        if t >= CUT {
            // substitute r = t/sigma; the weight sigma^(2s) is carried by
            // the Jacobi rule
            let z = CUT / t;
            let mut m = 0.0;
            for (&sg, &w) in self.far_rule.nodes.iter().zip(&self.far_rule.weights) {
                m += w * (z * z * sg * sg + CUT * CUT).powf(-1.0 - self.s);
            }
            z.powf(1.0 + 2.0 * self.s) * CUT * m
        } else {
            self.k - self.p_low(t)
        }
    }

    /// `int_0^t r phi(r) dr` in closed form.
    fn r_moment(&self, t: f64) -> f64 {
        (1.0 - (1.0 + t * t).powf(-self.s)) / (2.0 * self.s)
    }

    /// Even second primitive `int_0^t (t - r) phi(r) dr`.
    fn fs(&self, t: f64) -> f64 {
        let a = t.abs();
        a * self.p_low(a) - self.r_moment(a)
    }

    /// Second primitive of the full-line profile: `a_slab(0) = 0` and
    /// `a_slab'(t) = int_{-t}^infty phi`.
    fn a_slab(&self, t: f64) -> f64 {
        if t >= 0.0 {
            self.k * t + self.fs(t)
        } else {
            let l = -t;
            -(l * self.p_up(l) + self.r_moment(l))
        }
    }
}

// ---------------------------------------------------------------------------
// quadrature scaffolding
// ---------------------------------------------------------------------------

fn gl_line(lo: f64, hi: f64, gl: &Rule, f: &mut dyn FnMut(f64) -> f64) -> f64 {
    let len = hi - lo;
    let mut acc = 0.0;
    for (&n, &w) in gl.nodes.iter().zip(&gl.weights) {
        acc += w * len * f(lo + len * n);
    }
    acc
}

/// Integral of `f` over `(0, len]` when `f ~ c t^(-sing)` toward zero:
/// geometric halvings plus a closing power-law sliver.  `sing` may be
/// negative (a vanishing integrand) or zero (a plain bounded one).
fn graded_zero(len: f64, sing: f64, levels: usize, gl: &Rule, f: &mut dyn FnMut(f64) -> f64) -> f64 {
    if !(len > 0.0) {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut hi = len;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        acc += gl_line(lo, hi, gl, f);
        hi = lo;
    }
    let tm = 0.5 * hi;
    acc + f(tm) * tm.powf(sing) * hi.powf(1.0 - sing) / (1.0 - sing)
}

/// Integral of `f` over `[lo, hi]` by octave panels climbing away from a
/// singularity at zero, splitting additionally at the sorted `breaks`.
fn octave_line(lo: f64, hi: f64, breaks: &[f64], gl: &Rule, f: &mut dyn FnMut(f64) -> f64) -> f64 {
    debug_assert!(lo > 0.0);
    let mut acc = 0.0;
    let mut cur = lo;
    while cur < hi {
        let mut next = (2.0 * cur).min(hi);
        for &bk in breaks {
            if bk > cur * (1.0 + 1e-12) {
                next = next.min(bk);
                break;
            }
        }
        acc += gl_line(cur, next, gl, f);
        cur = next;
    }
    acc
}

/// Outer sweep over the domain: uniform panels with the two corner panels
/// refined geometrically toward the boundary, where the inner integral may
/// blow up like `dist^(-corner_sing)`.
fn domain_sweep(
    a: f64,
    b: f64,
    grid_n: usize,
    corner_sing: f64,
    gl: &Rule,
    inner: &mut dyn FnMut(f64) -> f64,
) -> f64 {
    let h = (b - a) / grid_n as f64;
    let mut total = graded_zero(h, corner_sing, CORNER_LEVELS, gl, &mut |t| inner(a + t));
    total += graded_zero(h, corner_sing, CORNER_LEVELS, gl, &mut |t| inner(b - t));
    for i in 1..grid_n - 1 {
        let lo = a + i as f64 * h;
        total += gl_line(lo, lo + h, gl, inner);
    }
    total
}

/// Inner integral over the domain for a fixed base point `x`: the panel
/// containing `x` is split there and graded toward it, every other panel is
/// covered by octaves climbing away from `x`, so panel edges never move
/// across the uniform grid and kinks aligned with it stay resolved.
fn inner_over_domain(
    a: f64,
    grid_n: usize,
    h: f64,
    x: f64,
    sing: f64,
    gl: &Rule,
    w: &mut dyn FnMut(f64, f64) -> f64,
) -> f64 {
    let i = (((x - a) / h) as usize).min(grid_n - 1);
    let mut acc = 0.0;
    for j in 0..grid_n {
        let y0 = a + j as f64 * h;
        let y1 = y0 + h;
        if j == i {
            acc += graded_zero(x - y0, sing, DIAG_LEVELS, gl, &mut |t| w(x - t, t));
            acc += graded_zero(y1 - x, sing, DIAG_LEVELS, gl, &mut |t| w(x + t, t));
        } else if y1 <= x {
            acc += octave_line(x - y1, x - y0, &[], gl, &mut |t| w(x - t, t));
        } else {
            acc += octave_line(y0 - x, y1 - x, &[], gl, &mut |t| w(x + t, t));
        }
    }
    acc
}

/// Inner integral over the exterior for a fixed `x` in the domain, in the
/// distance variable on each side, with octave panels split at the datum
/// break radii and an analytic remainder beyond `far_r` (where the datum
/// has no mass on either side, so the remainder is direction-symmetric).
fn inner_over_exterior(
    x: f64,
    a: f64,
    b: f64,
    datum_radii: &[f64],
    far_r: f64,
    gl: &Rule,
    w: &mut dyn FnMut(f64, f64) -> f64,
    remainder: &mut dyn FnMut(f64) -> f64,
) -> f64 {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &rb in datum_radii {
        for y_star in [-rb, rb] {
            if y_star < a {
                left.push(x - y_star);
            }
            if y_star > b {
                right.push(y_star - x);
            }
        }
    }
    left.sort_by(|p, q| p.partial_cmp(q).unwrap());
    right.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut acc = octave_line(x - a, far_r, &left, gl, &mut |rho| w(x - rho, rho));
    acc += octave_line(b - x, far_r, &right, gl, &mut |rho| w(x + rho, rho));
    acc + remainder(far_r)
}

// ---------------------------------------------------------------------------
// brute-force functionals
// ---------------------------------------------------------------------------

fn validate_inputs(omega: (f64, f64), s: f64, config: &BruteForceConfig) -> Result<()> {
    let (a, b) = omega;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::domain(format!("domain ({a}, {b}) is not a proper interval")));
    }
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::domain(format!("order s = {s} must lie in (0, 1/2)")));
    }
    if config.grid_n < 2 {
        return Err(Error::domain("brute-force grid needs at least two panels"));
    }
    Ok(())
}

fn sampled_sup<F: FnMut(f64) -> f64>(lo: f64, hi: f64, n: usize, mut f: F) -> f64 {
    let mut sup = 0.0_f64;
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        sup = sup.max(f(x).abs());
    }
    sup
}

fn datum_sup_outside(g: &DatumSpec, a: f64, b: f64) -> f64 {
    let reach = g.support_radius().max(a.abs()).max(b.abs()) + 1.0;
    let mut sup = sampled_sup(-reach, a, 2000, |x| g.eval([x, 0.0]))
        .max(sampled_sup(b, reach, 2000, |x| g.eval([x, 0.0])));
    // thin bands can slip between uniform samples; probe just inside and
    // outside every break radius as well
    for rb in g.radial_breakpoints() {
        for y in [-rb - 1e-9, -rb + 1e-9, rb - 1e-9, rb + 1e-9] {
            if y <= a || y >= b {
                sup = sup.max(g.eval([y, 0.0]).abs());
            }
        }
    }
    sup
}

/// Fractional perimeter, inside the cylinder over the domain, of the graph
/// subgraph truncated below at height `-m`, relative to the truncated
/// datum subgraph outside.  Direct nested quadrature; no assembly code.
///
/// The value depends on `m`, but differences between two profiles under the
/// same datum do not (up to truncation-tail crumbs), and they equal the
/// corresponding energy differences.  Errors out if the sampled range of
/// the profile or of the datum sticks out of the box.
pub fn brute_force_perimeter_1d(
    u: &dyn Fn(f64) -> f64,
    g: &DatumSpec,
    omega: (f64, f64),
    s: f64,
    m: f64,
    config: &BruteForceConfig,
) -> Result<f64> {
    validate_inputs(omega, s, config)?;
    let (a, b) = omega;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain("truncation height must be positive"));
    }
    let sup_u = sampled_sup(a, b, 2000, |x| u(x));
    let sup_g = datum_sup_outside(g, a, b);
    if m < sup_u || m < sup_g {
        return Err(Error::domain(format!(
            "truncation height {m} does not contain the graph (sampled sup {sup_u:.6}) \
             and datum (sup {sup_g:.6}); enlarge it"
        )));
    }

    let tab = SlabTables::build(s);
    let two_s = 2.0 * s;
    let n = config.grid_n;
    let h = (b - a) / n as f64;
    let gl = rules::gauss_legendre(GL_PANEL);

    // domain against domain and against the slab below it; the box bottom
    // enters through the column difference -2m/r
    let oo = domain_sweep(a, b, n, 0.0, &gl, &mut |x| {
        let ux = u(x);
        inner_over_domain(a, n, h, x, two_s, &gl, &mut |y, r| {
            r.powf(-two_s) * (tab.a_slab((ux - u(y)) / r) - tab.a_slab(-2.0 * m / r))
        })
    });

    // domain columns against exterior datum columns, both truncated; the
    // four slab terms are the two ordered interactions minus the two box
    // cross terms
    let datum_radii = g.radial_breakpoints();
    let far_min = FAR_FACTOR * (m.max(1.0) + (b - a) + g.support_radius());
    let k = tab.k;
    let ext = domain_sweep(a, b, n, two_s, &gl, &mut |x| {
        let ux = u(x);
        let far_r = far_min.max(x.abs() + g.support_radius() + 1.0);
        inner_over_exterior(
            x,
            a,
            b,
            &datum_radii,
            far_r,
            &gl,
            &mut |y, rho| {
                let gy = g.eval([y, 0.0]);
                rho.powf(-two_s)
                    * (tab.a_slab((ux - gy) / rho) - tab.a_slab((-m - gy) / rho)
                        + tab.a_slab((gy - ux) / rho)
                        - tab.a_slab((-m + gy) / rho))
            },
            &mut |r_far| {
                // beyond the datum support the integrand expands into
                // 2km/rho^(1+2s) + (u^2 - m^2)/rho^(2+2s); both sides of x
                // contribute the same tail
                2.0 * (2.0 * k * m * r_far.powf(-two_s) / two_s
                    - (m * m - ux * ux) * r_far.powf(-1.0 - two_s) / (1.0 + two_s))
            },
        )
    });
    Ok(oo + ext)
}

/// Nonlocal graph energy of a profile glued to the datum, by direct nested
/// quadrature sharing no code with the assembly path.
pub fn brute_force_energy_1d(
    u: &dyn Fn(f64) -> f64,
    g: &DatumSpec,
    omega: (f64, f64),
    s: f64,
    config: &BruteForceConfig,
) -> Result<f64> {
    validate_inputs(omega, s, config)?;
    let (a, b) = omega;
    let tab = SlabTables::build(s);
    let two_s = 2.0 * s;
    let n = config.grid_n;
    let h = (b - a) / n as f64;
    let gl = rules::gauss_legendre(GL_PANEL);

    let oo = domain_sweep(a, b, n, 0.0, &gl, &mut |x| {
        let ux = u(x);
        inner_over_domain(a, n, h, x, two_s, &gl, &mut |y, r| {
            r.powf(-two_s) * tab.fs((ux - u(y)) / r)
        })
    });

    let datum_radii = g.radial_breakpoints();
    let sup_u = sampled_sup(a, b, 2000, |x| u(x));
    let far_min = FAR_FACTOR * (1.0 + sup_u + (b - a) + g.support_radius());
    let ext = domain_sweep(a, b, n, two_s, &gl, &mut |x| {
        let ux = u(x);
        let far_r = far_min.max(x.abs() + g.support_radius() + 1.0);
        inner_over_exterior(
            x,
            a,
            b,
            &datum_radii,
            far_r,
            &gl,
            &mut |y, rho| {
                let gy = g.eval([y, 0.0]);
                2.0 * rho.powf(-two_s) * tab.fs((ux - gy) / rho)
            },
            &mut |r_far| {
                // 2 fs(u/rho) ~ (u/rho)^2 beyond the datum support
                2.0 * ux * ux * r_far.powf(-1.0 - two_s) / (1.0 + two_s)
            },
        )
    });
    Ok(oo + ext)
}

/// One-dimensional view of a discrete graph profile.
pub fn profile_of(u: &DiscreteFunction) -> impl Fn(f64) -> f64 + '_ {
    move |x| u.evaluate([x, 0.0])
}

// ---------------------------------------------------------------------------
// derivative and minimizer checks
// ---------------------------------------------------------------------------

/// Central differences of a scalar functional at `base`, one coordinate at
/// a time.
pub(crate) fn central_diff(
    base: &[f64],
    step: f64,
    eval: &mut dyn FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut w = base.to_vec();
    let mut out = Vec::with_capacity(base.len());
    for k in 0..base.len() {
        w[k] = base[k] + step;
        let ep = eval(&w)?;
        w[k] = base[k] - step;
        let em = eval(&w)?;
        w[k] = base[k];
        out.push((ep - em) / (2.0 * step));
    }
    Ok(out)
}

/// Central finite differences of the assembled energy along each interior
/// nodal direction, in mesh interior order.
pub fn fd_gradient(asm: &Assembler, u: &DiscreteFunction, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    let dofs = u.interior_values();
    let mut w = u.clone();
    central_diff(&dofs, step, &mut |vals| {
        w.set_interior(vals);
        asm.energy(&w)
    })
}

/// Minimizes the assembled energy over at most three interior values by
/// nested golden-section search.  Strict convexity makes every
/// one-dimensional slice unimodal, so the bracket always closes on the
/// global minimizer; the search is blind to gradients by design.
pub fn exhaustive_minimize_small(
    asm: &Assembler,
    g: &DatumSpec,
    mesh: &Arc<Mesh>,
) -> Result<DiscreteFunction> {
    let n = mesh.n_interior();
    if n == 0 || n > 3 {
        return Err(Error::domain(format!(
            "exhaustive search handles 1..=3 interior values, this mesh has {n}"
        )));
    }
    let mut u = exterior_clement(g, mesh)?;
    // the minimizer lies between the datum bounds by comparison, with slack
    let bound = u.values().iter().fold(0.0_f64, |acc, v| acc.max(v.abs())) + 1.0;
    let mut dofs = u.interior_values();
    nested_golden(asm, &mut u, &mut dofs, 0, bound, 1e-6)?;
    u.set_interior(&dofs);
    Ok(u)
}

/// Golden-section over coordinate `idx`, minimizing the exact inner search
/// over the remaining coordinates at every probe.
fn nested_golden(
    asm: &Assembler,
    u: &mut DiscreteFunction,
    dofs: &mut Vec<f64>,
    idx: usize,
    bound: f64,
    tol: f64,
) -> Result<f64> {
    if idx == dofs.len() {
        u.set_interior(dofs);
        return asm.energy(u);
    }
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut lo = -bound;
    let mut hi = bound;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    dofs[idx] = c;
    let mut fc = nested_golden(asm, u, dofs, idx + 1, bound, tol)?;
    dofs[idx] = d;
    let mut fd = nested_golden(asm, u, dofs, idx + 1, bound, tol)?;
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            dofs[idx] = c;
            fc = nested_golden(asm, u, dofs, idx + 1, bound, tol)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            dofs[idx] = d;
            fd = nested_golden(asm, u, dofs, idx + 1, bound, tol)?;
        }
    }
    dofs[idx] = if fc <= fd { c } else { d };
    // solidify the deeper coordinates at the accepted probe
    nested_golden(asm, u, dofs, idx + 1, bound, tol)
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

/// One labelled value-versus-reference comparison.
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub label: String,
    pub value: f64,
    pub reference: f64,
}

impl OracleRow {
    /// Relative gap against the reference, guarded near zero.
    pub fn rel_gap(&self) -> f64 {
        (self.value - self.reference).abs() / self.reference.abs().max(1e-14)
    }
}

/// Comparison rows collected by a cross-check run.
#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
}

impl OracleReport {
    pub fn push(&mut self, label: impl Into<String>, value: f64, reference: f64) {
        self.rows.push(OracleRow {
            label: label.into(),
            value,
            reference,
        });
    }

    pub fn max_gap(&self) -> f64 {
        self.rows.iter().fold(0.0, |acc, r| acc.max(r.rel_gap()))
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        use std::io::Write as _;
        let mut out = String::from("label,value,reference,rel_gap\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.label, r.value, r.reference, r.rel_gap()));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Scaling;
    use crate::kernel::{KernelKind, KernelParams};
    use crate::metrics::{nonlocal_seminorm, SeminormDomain};
    use crate::quadrature::QuadratureConfig;
    use crate::solvers::{damped_newton, SolverOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn det_config() -> QuadratureConfig {
        let mut c = QuadratureConfig::for_dim(1);
        c.deterministic = true;
        c
    }

    /// Tightened production quadrature, used where the oracle is compared
    /// against assembled values at 1e-4.
    fn tight_config() -> QuadratureConfig {
        let mut c = det_config();
        c.n_sing = 6;
        c.n_reg = 5;
        c
    }

    fn interval_mesh(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::interval(-1.0, 1.0, 2.0, n).unwrap())
    }

    /// Datum covering the whole meshed ball, so the discrete glue equals the
    /// continuum one exactly: constant inside radius 2, zero beyond.
    fn box_datum(c: f64) -> DatumSpec {
        DatumSpec::constant(c, 2.0).unwrap()
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

    #[test]
    fn slab_tables_match_kernel_closed_forms() {
        for &s in &[0.1, 0.25, 0.4] {
            let tab = SlabTables::build(s);
            let p = KernelParams::new(1, s).unwrap();
            assert!(
                (tab.k - p.k_bound()).abs() <= 1e-10 * p.k_bound(),
                "s = {s}: k {} vs {}",
                tab.k,
                p.k_bound()
            );
            for &t in &[0.0, 1e-3, 0.3, 0.99, 1.0, 1.7, 7.9, 8.0, 25.0, 4e3] {
                let g = p.eval(KernelKind::G, t);
                let f = p.eval(KernelKind::F, t);
                assert!(
                    (tab.p_low(t) - g).abs() <= 1e-9 * (1.0 + g.abs()),
                    "s = {s}, t = {t}: G {} vs {}",
                    tab.p_low(t),
                    g
                );
                assert!(
                    (tab.fs(t) - f).abs() <= 1e-9 * (1.0 + f.abs()),
                    "s = {s}, t = {t}: F {} vs {}",
                    tab.fs(t),
                    f
                );
                assert!((tab.p_low(-t) + tab.p_low(t)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn slab_second_primitive_has_even_part_fs() {
        let tab = SlabTables::build(0.3);
        for &t in &[1e-4, 0.2, 1.0, 3.0, 9.0, 120.0] {
            let sum = tab.a_slab(t) + tab.a_slab(-t);
            let even = 2.0 * tab.fs(t);
            assert!(
                (sum - even).abs() <= 1e-12 * (1.0 + even.abs()),
                "t = {t}: {sum} vs {even}"
            );
        }
        // the slope at the origin is the half-line mass
        let d0 = (tab.a_slab(1e-6) - tab.a_slab(-1e-6)) / 2e-6;
        assert!((d0 - tab.k).abs() <= 1e-6);
    }

    #[test]
    fn energy_oracle_vanishes_on_flat_zero() {
        let cfg = BruteForceConfig::default();
        let e = brute_force_energy_1d(&|_| 0.0, &DatumSpec::zero(), (-1.0, 1.0), 0.25, &cfg).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn energy_oracle_matches_assembly_on_p1() {
        let mesh = interval_mesh(8);
        let g = box_datum(0.3);
        let uh = randomized(&mesh, &g, 11, 0.35);
        let asm = Assembler::new(1, 0.25, tight_config(), Scaling::Unscaled).unwrap();
        let assembled = asm.energy(&uh).unwrap();
        let cfg = BruteForceConfig::default();
        let profile = profile_of(&uh);
        let brute = brute_force_energy_1d(&profile, &g, (-1.0, 1.0), 0.25, &cfg).unwrap();
        assert!(
            (brute - assembled).abs() <= 1e-4 * assembled.abs(),
            "brute {brute} vs assembled {assembled}"
        );
    }

    #[test]
    fn energy_oracle_below_linear_growth_bound() {
        let mesh = interval_mesh(8);
        let g = box_datum(0.3);
        let uh = randomized(&mesh, &g, 3, 0.35);
        let s = 0.25;
        let cfg = BruteForceConfig::default();
        let profile = profile_of(&uh);
        let brute = brute_force_energy_1d(&profile, &g, (-1.0, 1.0), s, &cfg).unwrap();
        let sem = nonlocal_seminorm(&uh, 2.0 * s, 1.0, SeminormDomain::PairSpace, &det_config()).unwrap();
        let k = KernelParams::new(1, s).unwrap().k_bound();
        assert!(
            brute <= k * sem * (1.0 + 1e-6),
            "energy {brute} above linear bound {}",
            k * sem
        );
        assert!(brute > 0.0);
    }

    #[test]
    fn perimeter_baseline_positive_and_grows_with_box() {
        let cfg = BruteForceConfig::default();
        let g = DatumSpec::zero();
        let p1 = brute_force_perimeter_1d(&|_| 0.0, &g, (-1.0, 1.0), 0.25, 1.0, &cfg).unwrap();
        let p2 = brute_force_perimeter_1d(&|_| 0.0, &g, (-1.0, 1.0), 0.25, 2.0, &cfg).unwrap();
        assert!(p1.is_finite() && p1 > 0.0);
        assert!(p2 > p1, "taller box must add lateral area: {p2} vs {p1}");
    }

    #[test]
    fn perimeter_differences_match_energy_differences() {
        let mesh = interval_mesh(8);
        let g = box_datum(0.3);
        let ua = randomized(&mesh, &g, 5, 0.3);
        let ub = exterior_clement(&g, &mesh).unwrap();
        let s = 0.25;
        let m = 2.0;
        let cfg = BruteForceConfig::default();
        let pa_f = profile_of(&ua);
        let pb_f = profile_of(&ub);
        let dp = brute_force_perimeter_1d(&pa_f, &g, (-1.0, 1.0), s, m, &cfg).unwrap()
            - brute_force_perimeter_1d(&pb_f, &g, (-1.0, 1.0), s, m, &cfg).unwrap();
        let asm = Assembler::new(1, s, tight_config(), Scaling::Unscaled).unwrap();
        let di = asm.energy(&ua).unwrap() - asm.energy(&ub).unwrap();
        assert!(
            (dp - di).abs() <= 1e-3 * di.abs().max(1e-6),
            "perimeter diff {dp} vs energy diff {di}"
        );
    }

    #[test]
    fn perimeter_differences_ignore_truncation_height() {
        let mesh = interval_mesh(8);
        let g = box_datum(0.3);
        let ua = randomized(&mesh, &g, 5, 0.3);
        let ub = exterior_clement(&g, &mesh).unwrap();
        let s = 0.25;
        let cfg = BruteForceConfig::default();
        let pa_f = profile_of(&ua);
        let pb_f = profile_of(&ub);
        let mut diffs = Vec::new();
        for &m in &[2.0, 3.5] {
            let pa = brute_force_perimeter_1d(&pa_f, &g, (-1.0, 1.0), s, m, &cfg).unwrap();
            let pb = brute_force_perimeter_1d(&pb_f, &g, (-1.0, 1.0), s, m, &cfg).unwrap();
            diffs.push(pa - pb);
        }
        assert!(
            (diffs[0] - diffs[1]).abs() <= 1e-3 * diffs[0].abs().max(1e-6),
            "box-height leakage: {} vs {}",
            diffs[0],
            diffs[1]
        );
    }

    #[test]
    fn perimeter_rejects_box_below_data() {
        let cfg = BruteForceConfig::default();
        let tall = DatumSpec::constant(0.6, 2.0).unwrap();
        let err = brute_force_perimeter_1d(&|_| 0.0, &tall, (-1.0, 1.0), 0.25, 0.5, &cfg);
        assert!(err.is_err());
        let g = DatumSpec::zero();
        let err = brute_force_perimeter_1d(&|x| 0.8 * (1.0 - x * x), &g, (-1.0, 1.0), 0.25, 0.5, &cfg);
        assert!(err.is_err());
        assert!(brute_force_perimeter_1d(&|_| 0.0, &g, (-1.0, 1.0), 0.25, -1.0, &cfg).is_err());
    }

    #[test]
    fn fd_gradient_matches_residual() {
        let mesh = interval_mesh(11);
        assert_eq!(mesh.n_interior(), 10);
        let g = box_datum(0.3);
        let u = randomized(&mesh, &g, 17, 0.3);
        let asm = Assembler::new(1, 0.25, det_config(), Scaling::Unscaled).unwrap();
        let grad = fd_gradient(&asm, &u, 1e-5).unwrap();
        let res = asm.residual(&u).unwrap();
        let scale = res.amax().max(1.0);
        for (k, &gk) in grad.iter().enumerate() {
            assert!(
                (gk - res[k]).abs() <= 1e-6 * scale,
                "dof {k}: fd {gk} vs residual {}",
                res[k]
            );
        }
    }

    #[test]
    fn fd_gradient_vanishes_at_newton_point() {
        let mesh = interval_mesh(8);
        let g = box_datum(0.3);
        let u0 = exterior_clement(&g, &mesh).unwrap();
        let asm = Assembler::new(1, 0.25, det_config(), Scaling::Unscaled).unwrap();
        let (u, _) = damped_newton(&asm, &u0, &SolverOptions::newton()).unwrap();
        let grad = fd_gradient(&asm, &u, 1e-5).unwrap();
        let linf = grad.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(linf <= 1e-6, "gradient at the fixed point: {linf}");
    }

    #[test]
    fn central_differences_exact_on_quadratic() {
        // a quadratic surrogate with the frozen-weight matrix: central
        // differences are exact for quadratics, so any gap is roundoff
        let mesh = interval_mesh(8);
        let g = box_datum(0.3);
        let u = randomized(&mesh, &g, 23, 0.3);
        let asm = Assembler::new(1, 0.25, det_config(), Scaling::Unscaled).unwrap();
        let mat = asm.frozen_matrix(&u).unwrap().matrix;
        let n = mat.nrows();
        let v: Vec<f64> = (0..n).map(|k| 0.1 + 0.05 * k as f64).collect();
        let quad = |w: &[f64]| -> Result<f64> {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += 0.5 * w[i] * mat[(i, j)] * w[j];
                }
            }
            Ok(acc)
        };
        let grad = central_diff(&v, 1e-4, &mut |w| quad(w)).unwrap();
        for i in 0..n {
            let exact: f64 = (0..n).map(|j| mat[(i, j)] * v[j]).sum();
            assert!(
                (grad[i] - exact).abs() <= 1e-9 * exact.abs().max(1.0),
                "row {i}: {} vs {exact}",
                grad[i]
            );
        }
    }

    #[test]
    fn exhaustive_search_agrees_with_newton() {
        let mesh = interval_mesh(3);
        assert_eq!(mesh.n_interior(), 2);
        let g = box_datum(0.3);
        let asm = Assembler::new(1, 0.25, det_config(), Scaling::Unscaled).unwrap();
        let blind = exhaustive_minimize_small(&asm, &g, &mesh).unwrap();
        let u0 = exterior_clement(&g, &mesh).unwrap();
        let (newton, _) = damped_newton(&asm, &u0, &SolverOptions::newton()).unwrap();
        for (a, b) in blind.values().iter().zip(newton.values()) {
            assert!((a - b).abs() <= 1e-4, "nodal gap {a} vs {b}");
        }
        let eb = asm.energy(&blind).unwrap();
        let en = asm.energy(&newton).unwrap();
        assert!(eb <= en + 1e-8, "search energy {eb} above newton {en}");
    }

    #[test]
    fn exhaustive_search_finds_zero_under_zero_datum() {
        let mesh = interval_mesh(3);
        let asm = Assembler::new(1, 0.3, det_config(), Scaling::Unscaled).unwrap();
        let blind = exhaustive_minimize_small(&asm, &DatumSpec::zero(), &mesh).unwrap();
        for &v in blind.values() {
            assert!(v.abs() <= 1e-5, "nonzero minimizer entry {v}");
        }
    }

    #[test]
    fn exhaustive_search_rejects_large_problems() {
        let mesh = interval_mesh(8);
        let asm = Assembler::new(1, 0.25, det_config(), Scaling::Unscaled).unwrap();
        assert!(exhaustive_minimize_small(&asm, &DatumSpec::zero(), &mesh).is_err());
    }

    #[test]
    fn energy_oracle_is_midpoint_convex() {
        let mesh = interval_mesh(8);
        let g = box_datum(0.3);
        let ua = randomized(&mesh, &g, 31, 0.35);
        let ub = randomized(&mesh, &g, 37, 0.35);
        let mid_vals: Vec<f64> = ua
            .values()
            .iter()
            .zip(ub.values())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let um = DiscreteFunction::new(mesh.clone(), mid_vals).unwrap();
        let s = 0.3;
        let cfg = BruteForceConfig::default();
        let pa = profile_of(&ua);
        let pb = profile_of(&ub);
        let pm = profile_of(&um);
        let ea = brute_force_energy_1d(&pa, &g, (-1.0, 1.0), s, &cfg).unwrap();
        let eb = brute_force_energy_1d(&pb, &g, (-1.0, 1.0), s, &cfg).unwrap();
        let em = brute_force_energy_1d(&pm, &g, (-1.0, 1.0), s, &cfg).unwrap();
        assert!(
            em <= 0.5 * (ea + eb) + 1e-10,
            "midpoint {em} above chord {}",
            0.5 * (ea + eb)
        );
    }

    #[test]
    fn oracle_report_roundtrip() {
        let mut rep = OracleReport::default();
        rep.push("energy", 1.0001, 1.0);
        rep.push("perimeter", 2.0, 2.0);
        assert!((rep.max_gap() - 1e-4).abs() <= 1e-12);
        let dir = std::env::temp_dir().join("nlmg_oracle_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("report.csv");
        rep.export_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("label,value,reference,rel_gap\n"));
        assert_eq!(text.lines().count(), 3);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
