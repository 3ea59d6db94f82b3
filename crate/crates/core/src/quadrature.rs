//! Singular double integrals over element pairs and the far-field tail.
//!
//! Pair integrals have the shape `I = int_T int_T' f(x,y) |x-y|^{-beta} dy dx`
//! with `beta < d`, where `f` stays bounded on touching elements (difference
//! quotients are extracted before calling in here).  Touching configurations
//! are decomposed into subregions in which the singular scale `t` separates:
//! `|x - y| = t * |D|` with `D` bounded away from zero and smooth.  The power
//! `t^{-beta}`, together with the polynomial Jacobian powers of the
//! decomposition, is absorbed into a Gauss-Jacobi weight, so every node of a
//! template carries plain barycentric coordinates for both elements, the
//! coefficient vector of `D`, the scale `t`, and one weight.  A template
//! evaluates as
//!
//! `I = |T| |T'| sum_k w_k f(x_k, y_k) |D_k|^{-beta}`,
//!
//! with `|x_k - y_k| = t_k |D_k|` available to integrands that need true
//! distances.  Disjoint pairs use tensorized Gauss rules in the same format.
//!
//! The far-field tail integrates over the complement of the meshed ball:
//! per outer point `x` and unit direction, the exact exit distance of the ray
//! from the ball is computed and the radial integral substituted onto (0,1]
//! where a Gauss-Jacobi rule with weight `t^{2s}` applies.

use crate::kernel::{KernelKind, KernelParams};
use crate::rules;
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone)]
pub struct QuadratureConfig {
    /// Gauss points per dimension for touching pairs.
    pub n_sing: usize,
    /// Gauss points per dimension for disjoint pairs.
    pub n_reg: usize,
    /// Angular points for the far-field tail (2 means the two half-lines).
    pub n_theta: usize,
    /// Radial points for the far-field tail.
    pub n_rad: usize,
    /// Force serial, fixed-order accumulation for bit-reproducibility.
    pub deterministic: bool,
}

impl QuadratureConfig {
    pub fn for_dim(d: usize) -> Self {
        QuadratureConfig {
            n_sing: 5,
            n_reg: 3,
            n_theta: if d == 1 { 2 } else { 16 },
            n_rad: 20,
            deterministic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sing < 1 || self.n_reg < 1 || self.n_theta < 1 || self.n_rad < 1 {
            return Err(Error::domain("quadrature point counts must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairClass {
    Identical,
    SharedEdge,
    SharedVertex,
    Disjoint,
}

/// Classifies by the number of shared vertex ids.
pub fn classify_pair(t: &[usize], tp: &[usize]) -> PairClass {
    let shared = t.iter().filter(|v| tp.contains(v)).count();
    match (t.len(), shared) {
        (n, s) if s == n => PairClass::Identical,
        (3, 2) => PairClass::SharedEdge,
        (_, 1) => PairClass::SharedVertex,
        (_, 0) => PairClass::Disjoint,
        _ => unreachable!("invalid shared vertex count"),
    }
}

/// Permutations bringing a pair into the canonical template ordering:
/// shared vertices first, in the same global order in both elements.
/// `perm_t[slot]` is the local index within `t` feeding canonical slot `slot`.
#[derive(Debug, Clone, Copy)]
pub struct PairArrangement {
    pub class: PairClass,
    pub perm_t: [usize; 3],
    pub perm_tp: [usize; 3],
}

pub fn arrange_pair(t: &[usize], tp: &[usize]) -> PairArrangement {
    let class = classify_pair(t, tp);
    let mut shared: Vec<usize> = t.iter().copied().filter(|v| tp.contains(v)).collect();
    shared.sort_unstable();
    let order = |el: &[usize]| -> [usize; 3] {
        let mut perm = [0usize; 3];
        let mut k = 0;
        for &s in &shared {
            perm[k] = el.iter().position(|&v| v == s).unwrap();
            k += 1;
        }
        for (i, v) in el.iter().enumerate() {
            if !shared.contains(v) {
                perm[k] = i;
                k += 1;
            }
        }
        for slot in el.len()..3 {
            perm[slot] = slot;
        }
        perm
    };
    PairArrangement {
        class,
        perm_t: order(t),
        perm_tp: order(tp),
    }
}

/// One quadrature node of a pair template; see the module docs for the
/// evaluation formula.
#[derive(Debug, Clone, Copy)]
pub struct TemplateNode {
    pub bx: [f64; 3],
    pub by: [f64; 3],
    pub dx: [f64; 3],
    pub dy: [f64; 3],
    pub t: f64,
    pub w: f64,
}

#[derive(Debug)]
pub struct PairTemplate {
    pub nodes: Vec<TemplateNode>,
}

type TemplateKey = (u8, PairClass, u64, u32);

fn template_cache() -> &'static Mutex<HashMap<TemplateKey, Arc<PairTemplate>>> {
    static CACHE: OnceLock<Mutex<HashMap<TemplateKey, Arc<PairTemplate>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Returns the cached template for a pair class; `n` is points per dimension
/// (`n_sing` for touching classes, `n_reg` for disjoint).
pub fn pair_template(d: usize, class: PairClass, beta: f64, n: usize) -> Arc<PairTemplate> {
    assert!(beta < d as f64, "kernel exponent must satisfy beta < d");
    assert!(d == 1 || d == 2);
    let key = (d as u8, class, beta.to_bits(), n as u32);
    if let Some(t) = template_cache().lock().unwrap().get(&key) {
        return Arc::clone(t);
    }
    let built = Arc::new(build_template(d, class, beta, n));
    template_cache()
        .lock()
        .unwrap()
        .entry(key)
        .or_insert(built)
        .clone()
}

fn build_template(d: usize, class: PairClass, beta: f64, n: usize) -> PairTemplate {
    let nodes = match (d, class) {
        (1, PairClass::Identical) => identical_1d(beta, n),
        (1, PairClass::SharedVertex) => vertex_1d(beta, n),
        (1, PairClass::Disjoint) => disjoint(1, n),
        (2, PairClass::Identical) => identical_2d(beta, n),
        (2, PairClass::SharedEdge) => edge_2d(beta, n),
        (2, PairClass::SharedVertex) => vertex_2d(beta, n),
        (2, PairClass::Disjoint) => disjoint(2, n),
        _ => panic!("unsupported pair class for d={d}"),
    };
    PairTemplate { nodes }
}

/// Gauss rule on the reference segment with weights summing to one:
/// `int_T g = |T| sum w_k g(x_k)` with barycentric nodes.
pub fn segment_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let gl = rules::gauss_legendre(n);
    gl.nodes
        .iter()
        .zip(&gl.weights)
        .map(|(&t, &w)| ([1.0 - t, t, 0.0], w))
        .collect()
}

/// Collapsed tensor rule on the reference triangle with weights summing to
/// one: `int_T g = |T| sum w_k g(x_k)`.
pub fn triangle_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let gl = rules::gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for (&v1, &w1) in gl.nodes.iter().zip(&gl.weights) {
        for (&v2, &w2) in gl.nodes.iter().zip(&gl.weights) {
            let l1 = v1 * (1.0 - v2);
            let l2 = v1 * v2;
            // Duffy Jacobian v1, times 2 to normalize the reference area 1/2.
            out.push(([1.0 - l1 - l2, l1, l2], 2.0 * v1 * w1 * w2));
        }
    }
    out
}

fn disjoint(d: usize, n: usize) -> Vec<TemplateNode> {
    let half = if d == 1 { segment_rule(n) } else { triangle_rule(n) };
    let mut nodes = Vec::with_capacity(half.len() * half.len());
    for &(bx, wx) in &half {
        for &(by, wy) in &half {
            nodes.push(TemplateNode {
                bx,
                by,
                dx: bx,
                dy: by,
                t: 1.0,
                w: wx * wy,
            });
        }
    }
    nodes
}

/// Same segment twice: substitute u = |xi - eta|, absorb `u^{-beta}` into a
/// Jacobi weight, and keep both orderings.
fn identical_1d(beta: f64, n: usize) -> Vec<TemplateNode> {
    let jac = rules::gauss_jacobi(n, -beta);
    let gl = rules::gauss_legendre(n);
    let mut nodes = Vec::with_capacity(2 * n * n);
    for (&u, &wu) in jac.nodes.iter().zip(&jac.weights) {
        for (&v, &wv) in gl.nodes.iter().zip(&gl.weights) {
            let eta = (1.0 - u) * v;
            let xi = eta + u;
            for (a, b) in [(xi, eta), (eta, xi)] {
                nodes.push(TemplateNode {
                    bx: [1.0 - a, a, 0.0],
                    by: [1.0 - b, b, 0.0],
                    dx: [-1.0, 1.0, 0.0],
                    dy: [0.0; 3],
                    t: u,
                    w: wu * wv * (1.0 - u),
                });
            }
        }
    }
    nodes
}

/// Segments meeting at the canonical first vertex: corner Duffy with the
/// radial power `t^{1-beta}` in the Jacobi weight.
fn vertex_1d(beta: f64, n: usize) -> Vec<TemplateNode> {
    let jac = rules::gauss_jacobi(n, 1.0 - beta);
    let gl = rules::gauss_legendre(n);
    let mut nodes = Vec::with_capacity(2 * n * n);
    for (&t, &wt) in jac.nodes.iter().zip(&jac.weights) {
        for (&w, &ww) in gl.nodes.iter().zip(&gl.weights) {
            for (xi_hat, eta_hat) in [(1.0, w), (w, 1.0)] {
                let (xi, eta) = (t * xi_hat, t * eta_hat);
                nodes.push(TemplateNode {
                    bx: [1.0 - xi, xi, 0.0],
                    by: [1.0 - eta, eta, 0.0],
                    dx: [-xi_hat, xi_hat, 0.0],
                    dy: [-eta_hat, eta_hat, 0.0],
                    t,
                    w: wt * ww,
                });
            }
        }
    }
    nodes
}

/// Same triangle twice.  The difference z = eta - xi of reference coordinates
/// ranges over the hexagon conv{(1,0),(0,1),(-1,1),(-1,0),(0,-1),(1,-1)};
/// each of its six unit-determinant sectors is parameterized as z = t zeta(w),
/// and for fixed z the admissible xi form the shifted shrunk triangle
/// t a(w) + (1-t) T with a = (max(0,-zeta_1), max(0,-zeta_2)).
fn identical_2d(beta: f64, n: usize) -> Vec<TemplateNode> {
    const V: [[f64; 2]; 6] = [
        [1.0, 0.0],
        [0.0, 1.0],
        [-1.0, 1.0],
        [-1.0, 0.0],
        [0.0, -1.0],
        [1.0, -1.0],
    ];
    let jac = rules::gauss_jacobi(n, 1.0 - beta);
    let gl = rules::gauss_legendre(n);
    let mut nodes = Vec::with_capacity(6 * n * n * n * n);
    for s in 0..6 {
        let (va, vb) = (V[s], V[(s + 1) % 6]);
        for (&w, &ww) in gl.nodes.iter().zip(&gl.weights) {
            let zeta = [(1.0 - w) * va[0] + w * vb[0], (1.0 - w) * va[1] + w * vb[1]];
            let a = [(-zeta[0]).max(0.0), (-zeta[1]).max(0.0)];
            for (&t, &wt) in jac.nodes.iter().zip(&jac.weights) {
                for (&v1, &w1) in gl.nodes.iter().zip(&gl.weights) {
                    for (&v2, &w2) in gl.nodes.iter().zip(&gl.weights) {
                        let xih = [v1 * (1.0 - v2), v1 * v2];
                        let xi = [t * a[0] + (1.0 - t) * xih[0], t * a[1] + (1.0 - t) * xih[1]];
                        let eta = [xi[0] + t * zeta[0], xi[1] + t * zeta[1]];
                        nodes.push(TemplateNode {
                            bx: [1.0 - xi[0] - xi[1], xi[0], xi[1]],
                            by: [1.0 - eta[0] - eta[1], eta[0], eta[1]],
                            dx: [-zeta[0] - zeta[1], zeta[0], zeta[1]],
                            dy: [0.0; 3],
                            t,
                            w: 4.0 * wt * ww * (1.0 - t) * (1.0 - t) * v1 * w1 * w2,
                        });
                    }
                }
            }
        }
    }
    nodes
}

/// Triangles sharing exactly the canonical first vertex: double radial
/// collapse with `rho_2 = rho_1 w` and its mirror; measure `t^3 w`.
fn vertex_2d(beta: f64, n: usize) -> Vec<TemplateNode> {
    let jac = rules::gauss_jacobi(n, 3.0 - beta);
    let gl = rules::gauss_legendre(n);
    let mut nodes = Vec::with_capacity(2 * n * n * n * n);
    for (&t, &wt) in jac.nodes.iter().zip(&jac.weights) {
        for (&w, &ww) in gl.nodes.iter().zip(&gl.weights) {
            for (&th1, &w1) in gl.nodes.iter().zip(&gl.weights) {
                for (&th2, &w2) in gl.nodes.iter().zip(&gl.weights) {
                    for mirror in [false, true] {
                        let (r1, r2) = if mirror { (t * w, t) } else { (t, t * w) };
                        let (s1, s2) = if mirror { (w, 1.0) } else { (1.0, w) };
                        nodes.push(TemplateNode {
                            bx: [1.0 - r1, r1 * (1.0 - th1), r1 * th1],
                            by: [1.0 - r2, r2 * (1.0 - th2), r2 * th2],
                            dx: [-s1, s1 * (1.0 - th1), s1 * th1],
                            dy: [-s2, s2 * (1.0 - th2), s2 * th2],
                            t,
                            w: 4.0 * wt * ww * w * w1 * w2,
                        });
                    }
                }
            }
        }
    }
    nodes
}

/// Triangles (A,B,C), (A,B,C') sharing the edge AB.  In the charts
/// x = A + s1 e + t1 c, y = A + s2 e + t2 c' (e = B-A, c = C-A, c' = C'-A)
/// the singular variables are (sigma, t1, t2) = (s1-s2, t1, t2); the domain
/// splits into eight subregions by which of |sigma|, t1, t2 is largest so
/// that the scaled direction D = sigma_h e + tau1 c - tau2 c' stays smooth
/// and nonzero.  Each subregion maps onto [0,1]^4 with the edge coordinate
/// s2 = r m_lo + (1 - r_h) s_h; the radial power r^{2-beta} feeds the Jacobi
/// weight.
fn edge_2d(beta: f64, n: usize) -> Vec<TemplateNode> {
    let jac = rules::gauss_jacobi(n, 2.0 - beta);
    let gl = rules::gauss_legendre(n);
    // (sigma_h, tau1, tau2, m_lo, m_sum, extra Jacobian) from (a, b).
    type Map = fn(f64, f64) -> (f64, f64, f64, f64, f64, f64);
    let regions: [Map; 8] = [
        // |sigma| largest, sigma > 0.
        |a, b| (1.0, a, b, 0.0, 1.0 + a, 1.0),
        // |sigma| largest, sigma < 0.
        |a, b| (-1.0, a, b, 1.0, 1.0 + b, 1.0),
        // t1 largest, sigma_h in [0,1].
        |a, b| (a, 1.0, b, 0.0, 1.0 + a, 1.0),
        // t1 largest, sigma_h in [-1,0], tau2 <= 1 + sigma_h.
        |a, b| (a - 1.0, 1.0, b * a, 1.0 - a, 1.0, a),
        // t1 largest, sigma_h in [-1,0], tau2 >= 1 + sigma_h.
        |a, b| (-a, 1.0, 1.0 - b * a, a, 1.0 + a - b * a, a),
        // t2 largest, sigma_h >= 0, sigma_h + tau1 <= 1; exact mirror of the
        // fourth region so that element swap is node-exact.
        |a, b| (1.0 - a, a * b, 1.0, 0.0, 1.0, a),
        // t2 largest, sigma_h >= 0, sigma_h + tau1 >= 1; mirror of the fifth.
        |a, b| (a, 1.0 - a * b, 1.0, 0.0, 1.0 + a - a * b, a),
        // t2 largest, sigma_h in [-1,0].
        |a, b| (-a, b, 1.0, a, 1.0 + a, 1.0),
    ];

    let mut nodes = Vec::with_capacity(8 * n * n * n * n);
    for region in regions {
        for (&a, &wa) in gl.nodes.iter().zip(&gl.weights) {
            for (&b, &wb) in gl.nodes.iter().zip(&gl.weights) {
                let (sh, tau1, tau2, m_lo, m_sum, extra) = region(a, b);
                for (&rh, &wr) in jac.nodes.iter().zip(&jac.weights) {
                    let r = rh / m_sum;
                    for (&s_h, &ws) in gl.nodes.iter().zip(&gl.weights) {
                        let s2 = r * m_lo + (1.0 - rh) * s_h;
                        let s1 = s2 + r * sh;
                        let (t1, t2) = (r * tau1, r * tau2);
                        nodes.push(TemplateNode {
                            bx: [1.0 - s1 - t1, s1, t1],
                            by: [1.0 - s2 - t2, s2, t2],
                            dx: [-sh - tau1, sh, tau1],
                            dy: [-tau2, 0.0, tau2],
                            t: r,
                            w: 4.0 * wa * wb * wr * ws * (1.0 - rh) * extra
                                * m_sum.powf(beta - 3.0),
                        });
                    }
                }
            }
        }
    }
    nodes
}

fn volume(d: usize, v: &[[f64; 2]; 3]) -> f64 {
    if d == 1 {
        (v[1][0] - v[0][0]).abs()
    } else {
        0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
            - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
            .abs()
    }
}

/// Evaluates `int_T int_T' f(x, y, |x-y|) |x-y|^{-beta}` for elements given
/// in canonical order for `class` (see [`arrange_pair`]).
pub fn pair_integral<F>(
    d: usize,
    class: PairClass,
    t: &[[f64; 2]; 3],
    tp: &[[f64; 2]; 3],
    beta: f64,
    config: &QuadratureConfig,
    mut f: F,
) -> Result<f64>
where
    F: FnMut([f64; 2], [f64; 2], f64) -> f64,
{
    if beta >= d as f64 {
        return Err(Error::domain(format!(
            "kernel exponent {beta} is non-integrable in dimension {d}"
        )));
    }
    let n = if class == PairClass::Disjoint {
        config.n_reg
    } else {
        config.n_sing
    };
    let template = pair_template(d, class, beta, n);
    let scale = volume(d, t) * volume(d, tp);
    let mut sum = 0.0;
    for node in &template.nodes {
        let mut x = [0.0; 2];
        let mut y = [0.0; 2];
        let mut dvec = [0.0; 2];
        for i in 0..=d {
            for c in 0..2 {
                x[c] += node.bx[i] * t[i][c];
                y[c] += node.by[i] * tp[i][c];
                dvec[c] += node.dx[i] * t[i][c] - node.dy[i] * tp[i][c];
            }
        }
        let dn = (dvec[0] * dvec[0] + dvec[1] * dvec[1]).sqrt();
        sum += node.w * f(x, y, node.t * dn) * dn.powf(-beta);
    }
    Ok(scale * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    /// Energy integrand weight; returns `int F_s(c/r) r^{-(d+2s-1)} dy`.
    F,
    /// Bilinear form weight; returns `int Gt_s(c/r) r^{-(d+1+2s)} dy`.
    Gtilde,
    /// Second-variation weight; returns `int F_s''(c/r) r^{-(d+1+2s)} dy`.
    Fpp,
}

/// Reusable far-field integrator over the complement of the ball of radius
/// `radius`.  Directions and the radial Jacobi rule are fixed at build time.
#[derive(Debug, Clone)]
pub struct FarField {
    s: f64,
    radius: f64,
    rad_nodes: Vec<f64>,
    rad_weights: Vec<f64>,
    dirs: Vec<[f64; 2]>,
    dir_weight: f64,
}

impl FarField {
    pub fn new(params: &KernelParams, radius: f64, config: &QuadratureConfig) -> FarField {
        let d = params.dim();
        let jac = rules::gauss_jacobi(config.n_rad, 2.0 * params.s());
        let (dirs, dir_weight) = if d == 1 {
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
        };
        FarField {
            s: params.s(),
            radius,
            rad_nodes: jac.nodes,
            rad_weights: jac.weights,
            dirs,
            dir_weight,
        }
    }

    /// Exit distance of the ray `x + t theta` from the ball.
    fn exit_distance(&self, x: [f64; 2], theta: [f64; 2]) -> f64 {
        let xt = x[0] * theta[0] + x[1] * theta[1];
        let x2 = x[0] * x[0] + x[1] * x[1];
        -xt + (self.radius * self.radius - x2 + xt * xt).sqrt()
    }

    /// One-sided scalar tail at `x` with boundary value `c = u(x)`; callers
    /// supply the same `params` the rule was built with.
    pub fn scalar(&self, params: &KernelParams, x: [f64; 2], c: f64, kind: TailKind) -> f64 {
        let two_s = 2.0 * self.s;
        let mut total = 0.0;
        for dir in &self.dirs {
            let delta = self.exit_distance(x, *dir);
            let a = c / delta;
            let radial: f64 = match kind {
                TailKind::Gtilde => self
                    .rad_nodes
                    .iter()
                    .zip(&self.rad_weights)
                    .map(|(&t, &w)| w * params.gt_fast(a * t))
                    .sum::<f64>()
                    * delta.powf(-1.0 - two_s),
                TailKind::Fpp => self
                    .rad_nodes
                    .iter()
                    .zip(&self.rad_weights)
                    .map(|(&t, &w)| w * params.eval_fast(KernelKind::Fpp, a * t))
                    .sum::<f64>()
                    * delta.powf(-1.0 - two_s),
                TailKind::F => self
                    .rad_nodes
                    .iter()
                    .zip(&self.rad_weights)
                    .map(|(&t, &w)| w * params.f_over_rho2_fast(a * t))
                    .sum::<f64>()
                    * a
                    * a
                    * delta.powf(1.0 - two_s),
            };
            total += radial;
        }
        total * self.dir_weight
    }
}

/// Convenience wrapper building a fresh far-field rule per call.
pub fn farfield_tail(
    params: &KernelParams,
    x: [f64; 2],
    c: f64,
    kind: TailKind,
    radius: f64,
    config: &QuadratureConfig,
) -> Result<f64> {
    let norm = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if norm >= radius {
        return Err(Error::domain(format!(
            "tail point must lie inside the ball: |x| = {norm} >= {radius}"
        )));
    }
    let ff = FarField::new(params, radius, config);
    Ok(ff.scalar(params, x, c, kind))
}
