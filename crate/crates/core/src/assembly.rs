//! Energy, residual, and matrix assembly over element pairs.
//!
//! All quantities are sums over unordered element pairs within the meshed
//! ball (pairs of two exterior-tagged elements carry no interaction and are
//! skipped), plus a far-field tail over the complement of the ball where the
//! function vanishes.  Each sweep is fused: one pass over the pair space
//! accumulates whatever the requested output needs, with difference
//! quotients shared between kernel weight and basis factors.
//!
//! Unknowns are the interior nodal values.  Exterior values are fixed, so
//! matrix couplings against them are folded into the right-hand side.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::io::Write as _;
use std::path::Path;

use crate::femspace::DiscreteFunction;
use crate::kernel::{KernelKind, KernelParams};
use crate::mesh::{Mesh, Region};
use crate::quadrature::{
    arrange_pair, pair_template, segment_rule, triangle_rule, FarField, PairClass, PairTemplate,
    QuadratureConfig, TailKind,
};
use crate::{Error, Result};
use std::sync::Arc;

/// Whether assembled quantities carry the dimensional constant `C_{d,s}`.
/// Solvers work unscaled; limit studies use the scaled form so that values
/// stay comparable as `s` approaches 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    Unscaled,
    CdsScaled,
}

/// Interior-by-interior system: `matrix * u_int = rhs` imposes the exterior
/// data strongly (couplings against fixed exterior values live in `rhs`).
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub scaling: Scaling,
}

impl AssembledSystem {
    /// Dense CSV dump: matrix rows, a separator line, then the rhs row.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for i in 0..self.matrix.nrows() {
            let row: Vec<String> = (0..self.matrix.ncols())
                .map(|j| format!("{}", self.matrix[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out.push_str("rhs\n");
        let row: Vec<String> = self.rhs.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Kernel power `r^{-beta}` with a cheap path when `2 beta` is an integer
/// (every quarter-integer order `s`), which the main experiments hit.
#[derive(Debug, Clone, Copy)]
enum PowSpec {
    Half(i32),
    General(f64),
}

impl PowSpec {
    fn new(beta: f64) -> PowSpec {
        let k2 = (2.0 * beta).round();
        if (2.0 * beta - k2).abs() < 1e-9 {
            PowSpec::Half(k2 as i32)
        } else {
            PowSpec::General(-beta)
        }
    }

    #[inline]
    fn eval(self, r: f64) -> f64 {
        match self {
            PowSpec::Half(k2) => match k2 {
                0 => 1.0,
                1 => 1.0 / r.sqrt(),
                2 => 1.0 / r,
                3 => 1.0 / (r * r.sqrt()),
                4 => 1.0 / (r * r),
                k => r.sqrt().powi(-k),
            },
            PowSpec::General(mb) => r.powf(mb),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Energy,
    Residual,
    Frozen,
    Newton,
}

/// Full nodal accumulators; restriction to interior unknowns happens at the
/// end of a sweep.
struct Acc {
    scalar: f64,
    vec: Vec<f64>,
    mat: Option<DMatrix<f64>>,
}

impl Acc {
    fn new(mode: Mode, nv: usize) -> Acc {
        Acc {
            scalar: 0.0,
            vec: if mode == Mode::Energy {
                Vec::new()
            } else {
                vec![0.0; nv]
            },
            mat: match mode {
                Mode::Frozen | Mode::Newton => Some(DMatrix::zeros(nv, nv)),
                _ => None,
            },
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        self.scalar += other.scalar;
        for (a, b) in self.vec.iter_mut().zip(&other.vec) {
            *a += b;
        }
        if let (Some(m), Some(o)) = (self.mat.as_mut(), other.mat.as_ref()) {
            *m += o;
        }
        self
    }
}

/// Per-sweep immutable context shared across workers.
struct SweepCtx<'a> {
    mesh: &'a Mesh,
    u: &'a [f64],
    pow: PowSpec,
    n_pts: usize,
    /// Barycentric values of the disjoint rule (shared by all elements).
    rule_b: Vec<[f64; 3]>,
    /// Physical quadrature points, one block of `n_pts` per element.
    pts: Vec<[f64; 2]>,
    /// `u` at those points.
    upts: Vec<f64>,
    /// Rule weight times element volume at those points.
    wts: Vec<f64>,
    ident: Arc<PairTemplate>,
    edge: Option<Arc<PairTemplate>>,
    vert: Arc<PairTemplate>,
}

pub struct Assembler {
    params: KernelParams,
    config: QuadratureConfig,
    scaling: Scaling,
}

impl Assembler {
    pub fn new(d: usize, s: f64, config: QuadratureConfig, scaling: Scaling) -> Result<Assembler> {
        config.validate()?;
        Ok(Assembler {
            params: KernelParams::new(d, s)?,
            config,
            scaling,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.config
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    fn scale_factor(&self) -> f64 {
        match self.scaling {
            Scaling::Unscaled => 1.0,
            Scaling::CdsScaled => self.params.cds(),
        }
    }

    fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if mesh.dim() != self.params.dim() {
            return Err(Error::domain(format!(
                "mesh dimension {} does not match kernel dimension {}",
                mesh.dim(),
                self.params.dim()
            )));
        }
        Ok(())
    }

    /// Nonlocal area energy of `u` (with its frozen exterior values),
    /// including the far-field tail.  Nonnegative, zero only for data that
    /// vanish identically.
    pub fn energy(&self, u: &DiscreteFunction) -> Result<f64> {
        self.check_mesh(u.mesh())?;
        let acc = self.sweep(u.mesh(), u.values(), Mode::Energy);
        Ok(self.scale_factor() * acc.scalar)
    }

    /// Gradient of [`energy`](Self::energy) with respect to the interior
    /// nodal values, under the identical quadrature decomposition.
    pub fn residual(&self, u: &DiscreteFunction) -> Result<DVector<f64>> {
        self.check_mesh(u.mesh())?;
        let acc = self.sweep(u.mesh(), u.values(), Mode::Residual);
        let factor = self.scale_factor();
        Ok(DVector::from_iterator(
            u.mesh().n_interior(),
            u.mesh().interior_nodes().iter().map(|&v| factor * acc.vec[v]),
        ))
    }

    /// Stiffness matrix with the weight frozen at `u`: the bilinear form of
    /// the semi-implicit scheme.  Symmetric positive definite; `rhs` carries
    /// the couplings against the fixed exterior values of `u`.
    pub fn frozen_matrix(&self, u: &DiscreteFunction) -> Result<AssembledSystem> {
        self.check_mesh(u.mesh())?;
        let acc = self.sweep(u.mesh(), u.values(), Mode::Frozen);
        Ok(self.finish_system(u.mesh(), u.values(), acc.mat.unwrap(), None))
    }

    /// Second-variation (Newton) matrix at `u`, with `rhs` set to minus the
    /// residual so that `matrix * step = rhs` is the Newton update.  The
    /// sweep is fused: matrix and residual come from one pass.
    pub fn newton_matrix(&self, u: &DiscreteFunction) -> Result<AssembledSystem> {
        self.check_mesh(u.mesh())?;
        let acc = self.sweep(u.mesh(), u.values(), Mode::Newton);
        let factor = self.scale_factor();
        let r = DVector::from_iterator(
            u.mesh().n_interior(),
            u.mesh().interior_nodes().iter().map(|&v| factor * acc.vec[v]),
        );
        // The Newton step has zero exterior values, so no couplings move to
        // the right-hand side; it is minus the residual directly.
        let mut sys = self.finish_system(u.mesh(), u.values(), acc.mat.unwrap(), Some(-r));
        sys.scaling = self.scaling;
        Ok(sys)
    }

    /// Inner-product matrix for the gradient flow metric.  `alpha = 0` is
    /// the mass matrix on the domain elements (the supported path);
    /// `alpha` in (0,1) additionally assembles the constant-weight nonlocal
    /// form of that order over domain-domain pairs (experimental).
    pub fn gram_matrix(&self, alpha: f64, mesh: &Mesh) -> Result<AssembledSystem> {
        self.check_mesh(mesh)?;
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::domain(format!(
                "gram order alpha = {alpha} outside [0, 1)"
            )));
        }
        let mut full = mass_full(mesh);
        if alpha > 0.0 {
            let d = mesh.dim();
            let beta = d as f64 + 2.0 * alpha - 2.0;
            let seminorm = self.constant_weight_form(mesh, beta)?;
            full += seminorm;
        }
        let zeros = vec![0.0; mesh.n_vertices()];
        Ok(self.finish_system(mesh, &zeros, full, None))
    }

    /// Constant-weight nonlocal form over domain-domain pairs with kernel
    /// `|x-y|^{-(beta+2)} (phi_i(x)-phi_i(y))(phi_j(x)-phi_j(y))`.
    fn constant_weight_form(&self, mesh: &Mesh, beta: f64) -> Result<DMatrix<f64>> {
        let d = mesh.dim();
        if beta >= d as f64 {
            return Err(Error::domain(format!(
                "nonlocal form exponent beta = {beta} must be below d = {d}"
            )));
        }
        let nv = mesh.n_vertices();
        let mut mat = DMatrix::zeros(nv, nv);
        let pow = PowSpec::new(beta);
        let tmpl_i = pair_template(d, PairClass::Identical, beta, self.config.n_sing);
        let tmpl_e = (d == 2).then(|| pair_template(d, PairClass::SharedEdge, beta, self.config.n_sing));
        let tmpl_v = pair_template(d, PairClass::SharedVertex, beta, self.config.n_sing);
        let rule = if d == 1 {
            segment_rule(self.config.n_reg)
        } else {
            triangle_rule(self.config.n_reg)
        };
        let omega: Vec<usize> = (0..mesh.n_elements())
            .filter(|&e| mesh.region(e) == Region::Omega)
            .collect();
        for (ai, &a) in omega.iter().enumerate() {
            for &b in &omega[ai..] {
                let (arr_class, nodes): (_, &[_]) = {
                    let ta = mesh.elem_verts(a);
                    let tb = mesh.elem_verts(b);
                    let shared = ta.iter().filter(|v| tb.contains(v)).count();
                    if shared == 0 {
                        (None, &[])
                    } else {
                        let arr = arrange_pair(ta, tb);
                        let t = match arr.class {
                            PairClass::Identical => &tmpl_i,
                            PairClass::SharedEdge => tmpl_e.as_ref().unwrap(),
                            PairClass::SharedVertex => &tmpl_v,
                            PairClass::Disjoint => unreachable!(),
                        };
                        (Some(arr), &t.nodes)
                    }
                };
                let scale = mesh.elem_volume(a) * mesh.elem_volume(b) * if a == b { 1.0 } else { 2.0 };
                if let Some(arr) = arr_class {
                    let (pa, _, gva) = arranged(mesh, &[0.0; 0], a, arr.perm_t);
                    let (pb, _, gvb) = arranged(mesh, &[0.0; 0], b, arr.perm_tp);
                    let union = VertexUnion::build(d, &gva, &gvb);
                    for node in nodes {
                        let mut dphys = [0.0f64; 2];
                        for k in 0..=d {
                            dphys[0] += node.dx[k] * pa[k][0] - node.dy[k] * pb[k][0];
                            dphys[1] += node.dx[k] * pa[k][1] - node.dy[k] * pb[k][1];
                        }
                        let dn = (dphys[0] * dphys[0] + dphys[1] * dphys[1]).sqrt();
                        let r = node.t * dn;
                        let kw = node.w * scale * pow.eval(dn) / (r * r);
                        let phid = union.phi_diff(d, &node.bx, &node.by);
                        union.rank_one(&mut mat, kw, &phid);
                    }
                } else {
                    // Disjoint domain pair: tensorized element rules.
                    let ca = mesh.elem_coords(a);
                    let cb = mesh.elem_coords(b);
                    let union = VertexUnion::build_disjoint(d, mesh.elem_verts(a), mesh.elem_verts(b));
                    for &(bx, wx) in &rule {
                        let xa = bary_point(d, &ca, &bx);
                        for &(by, wy) in &rule {
                            let xb = bary_point(d, &cb, &by);
                            let (dx, dy) = (xa[0] - xb[0], xa[1] - xb[1]);
                            let r = (dx * dx + dy * dy).sqrt();
                            let kw = wx * wy * scale * pow.eval(r) / (r * r);
                            let phid = union.phi_diff(d, &bx, &by);
                            union.rank_one(&mut mat, kw, &phid);
                        }
                    }
                }
            }
        }
        Ok(mat)
    }

    /// Restricts a full nodal matrix to the interior unknowns, folding
    /// columns against exterior values of `u` into the right-hand side.
    /// An explicit `rhs` (Newton) overrides the folding.
    fn finish_system(
        &self,
        mesh: &Mesh,
        u: &[f64],
        full: DMatrix<f64>,
        rhs: Option<DVector<f64>>,
    ) -> AssembledSystem {
        let n = mesh.n_interior();
        let nv = mesh.n_vertices();
        let factor = self.scale_factor();
        let mut matrix = DMatrix::zeros(n, n);
        let interior = mesh.interior_nodes();
        for (k, &vk) in interior.iter().enumerate() {
            for (l, &vl) in interior.iter().enumerate() {
                matrix[(k, l)] = factor * full[(vk, vl)];
            }
        }
        let rhs = rhs.unwrap_or_else(|| {
            let mut r = DVector::zeros(n);
            for (k, &vk) in interior.iter().enumerate() {
                let mut acc = 0.0;
                for w in 0..nv {
                    if mesh.interior_index(w).is_none() {
                        acc -= full[(vk, w)] * u[w];
                    }
                }
                r[k] = factor * acc;
            }
            r
        });
        AssembledSystem {
            matrix,
            rhs,
            scaling: self.scaling,
        }
    }

    /// One fused pass over the pair space plus the far-field tail.
    fn sweep(&self, mesh: &Mesh, u: &[f64], mode: Mode) -> Acc {
        let d = mesh.dim();
        let beta = self.params.form_exponent();
        let rule = if d == 1 {
            segment_rule(self.config.n_reg)
        } else {
            triangle_rule(self.config.n_reg)
        };
        let n_pts = rule.len();
        let ne = mesh.n_elements();
        let mut pts = Vec::with_capacity(ne * n_pts);
        let mut upts = Vec::with_capacity(ne * n_pts);
        let mut wts = Vec::with_capacity(ne * n_pts);
        for e in 0..ne {
            let c = mesh.elem_coords(e);
            let verts = mesh.elem_verts(e);
            let vol = mesh.elem_volume(e);
            for &(b, w) in &rule {
                pts.push(bary_point(d, &c, &b));
                upts.push((0..=d).map(|k| b[k] * u[verts[k]]).sum());
                wts.push(w * vol);
            }
        }
        let ctx = SweepCtx {
            mesh,
            u,
            pow: PowSpec::new(beta),
            n_pts,
            rule_b: rule.iter().map(|&(b, _)| b).collect(),
            pts,
            upts,
            wts,
            ident: pair_template(d, PairClass::Identical, beta, self.config.n_sing),
            edge: (d == 2).then(|| pair_template(d, PairClass::SharedEdge, beta, self.config.n_sing)),
            vert: pair_template(d, PairClass::SharedVertex, beta, self.config.n_sing),
        };
        let nv = mesh.n_vertices();
        let mut acc = if self.config.deterministic {
            let mut acc = Acc::new(mode, nv);
            for a in 0..ne {
                self.pair_row(&ctx, a, mode, &mut acc);
            }
            acc
        } else {
            (0..ne)
                .into_par_iter()
                .fold(
                    || Acc::new(mode, nv),
                    |mut acc, a| {
                        self.pair_row(&ctx, a, mode, &mut acc);
                        acc
                    },
                )
                .reduce(|| Acc::new(mode, nv), Acc::merge)
        };
        self.tail_pass(&ctx, mode, &mut acc);
        acc
    }

    /// All pairs `(a, b)` with `b >= a`, skipping exterior-exterior.
    fn pair_row(&self, ctx: &SweepCtx, a: usize, mode: Mode, acc: &mut Acc) {
        let mesh = ctx.mesh;
        let d = mesh.dim();
        let a_ext = mesh.region(a) == Region::Exterior;
        for b in a..mesh.n_elements() {
            if a_ext && mesh.region(b) == Region::Exterior {
                continue;
            }
            let ta = mesh.elem_verts(a);
            let tb = mesh.elem_verts(b);
            let shared = ta.iter().filter(|v| tb.contains(v)).count();
            if shared == 0 {
                self.disjoint_pair(ctx, a, b, mode, acc);
            } else {
                self.touching_pair(ctx, a, b, mode, acc, d);
            }
        }
    }

    fn touching_pair(&self, ctx: &SweepCtx, a: usize, b: usize, mode: Mode, acc: &mut Acc, d: usize) {
        let mesh = ctx.mesh;
        let arr = arrange_pair(mesh.elem_verts(a), mesh.elem_verts(b));
        let tmpl = match arr.class {
            PairClass::Identical => &ctx.ident,
            PairClass::SharedEdge => ctx.edge.as_ref().unwrap(),
            PairClass::SharedVertex => &ctx.vert,
            PairClass::Disjoint => unreachable!(),
        };
        let (pa, ua, gva) = arranged(mesh, ctx.u, a, arr.perm_t);
        let (pb, ub, gvb) = arranged(mesh, ctx.u, b, arr.perm_tp);
        let scale = mesh.elem_volume(a) * mesh.elem_volume(b) * if a == b { 1.0 } else { 2.0 };
        let union = VertexUnion::build(d, &gva, &gvb);
        for node in &tmpl.nodes {
            let mut dphys = [0.0f64; 2];
            let mut du = 0.0;
            for k in 0..=d {
                dphys[0] += node.dx[k] * pa[k][0] - node.dy[k] * pb[k][0];
                dphys[1] += node.dx[k] * pa[k][1] - node.dy[k] * pb[k][1];
                du += node.bx[k] * ua[k] - node.by[k] * ub[k];
            }
            let dn = (dphys[0] * dphys[0] + dphys[1] * dphys[1]).sqrt();
            let r = node.t * dn;
            let kw = node.w * scale * ctx.pow.eval(dn);
            self.node_accum(ctx, mode, acc, &union, d, &node.bx, &node.by, du, r, kw);
        }
    }

    fn disjoint_pair(&self, ctx: &SweepCtx, a: usize, b: usize, mode: Mode, acc: &mut Acc) {
        let d = ctx.mesh.dim();
        let union = VertexUnion::build_disjoint(d, ctx.mesh.elem_verts(a), ctx.mesh.elem_verts(b));
        let (base_a, base_b) = (a * ctx.n_pts, b * ctx.n_pts);
        for i in 0..ctx.n_pts {
            let xa = ctx.pts[base_a + i];
            let (uxa, wa) = (ctx.upts[base_a + i], ctx.wts[base_a + i]);
            for j in 0..ctx.n_pts {
                let xb = ctx.pts[base_b + j];
                let (dx, dy) = (xa[0] - xb[0], xa[1] - xb[1]);
                let r = (dx * dx + dy * dy).sqrt();
                let du = uxa - ctx.upts[base_b + j];
                let kw = 2.0 * wa * ctx.wts[base_b + j] * ctx.pow.eval(r);
                self.node_accum(
                    ctx,
                    mode,
                    acc,
                    &union,
                    d,
                    &ctx.rule_b[i],
                    &ctx.rule_b[j],
                    du,
                    r,
                    kw,
                );
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn node_accum(
        &self,
        _ctx: &SweepCtx,
        mode: Mode,
        acc: &mut Acc,
        union: &VertexUnion,
        d: usize,
        bx: &[f64; 3],
        by: &[f64; 3],
        du: f64,
        r: f64,
        kw: f64,
    ) {
        let rho = du / r;
        match mode {
            Mode::Energy => {
                acc.scalar += kw * self.params.f_fast(rho);
            }
            Mode::Residual => {
                let c = kw * self.params.g_fast(rho) / r;
                let phid = union.phi_diff(d, bx, by);
                for m in 0..union.n {
                    acc.vec[union.verts[m]] += c * phid[m];
                }
            }
            Mode::Frozen => {
                let c = kw * self.params.gt_fast(rho) / (r * r);
                let phid = union.phi_diff(d, bx, by);
                union.rank_one(acc.mat.as_mut().unwrap(), c, &phid);
            }
            Mode::Newton => {
                let phid = union.phi_diff(d, bx, by);
                let cr = kw * self.params.g_fast(rho) / r;
                for m in 0..union.n {
                    acc.vec[union.verts[m]] += cr * phid[m];
                }
                let cj = kw * self.params.eval_fast(KernelKind::Fpp, rho) / (r * r);
                union.rank_one(acc.mat.as_mut().unwrap(), cj, &phid);
            }
        }
    }

    /// Far-field contributions: the outer integral runs over the domain
    /// elements, the inner over the complement of the meshed ball where the
    /// function vanishes.  The ordered-pair factor 2 applies throughout.
    fn tail_pass(&self, ctx: &SweepCtx, mode: Mode, acc: &mut Acc) {
        let mesh = ctx.mesh;
        let d = mesh.dim();
        let ff = FarField::new(&self.params, mesh.radius(), &self.config);
        for e in 0..mesh.n_elements() {
            if mesh.region(e) != Region::Omega {
                continue;
            }
            let verts = mesh.elem_verts(e);
            let base = e * ctx.n_pts;
            for i in 0..ctx.n_pts {
                let x = ctx.pts[base + i];
                let (c, w) = (ctx.upts[base + i], ctx.wts[base + i]);
                let b = &ctx.rule_b[i];
                match mode {
                    Mode::Energy => {
                        acc.scalar += 2.0 * w * ff.scalar(&self.params, x, c, TailKind::F);
                    }
                    Mode::Residual => {
                        let tg = ff.scalar(&self.params, x, c, TailKind::Gtilde);
                        for k in 0..=d {
                            acc.vec[verts[k]] += 2.0 * w * b[k] * c * tg;
                        }
                    }
                    Mode::Frozen => {
                        let tg = 2.0 * w * ff.scalar(&self.params, x, c, TailKind::Gtilde);
                        let mat = acc.mat.as_mut().unwrap();
                        for k in 0..=d {
                            for l in 0..=d {
                                mat[(verts[k], verts[l])] += tg * b[k] * b[l];
                            }
                        }
                    }
                    Mode::Newton => {
                        let tg = ff.scalar(&self.params, x, c, TailKind::Gtilde);
                        for k in 0..=d {
                            acc.vec[verts[k]] += 2.0 * w * b[k] * c * tg;
                        }
                        let tf = 2.0 * w * ff.scalar(&self.params, x, c, TailKind::Fpp);
                        let mat = acc.mat.as_mut().unwrap();
                        for k in 0..=d {
                            for l in 0..=d {
                                mat[(verts[k], verts[l])] += tf * b[k] * b[l];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Shared context for [`pair_functional`] sweeps.
struct FunCtx<'a> {
    mesh: &'a Mesh,
    fa: &'a [f64],
    fb: &'a [f64],
    pow: PowSpec,
    n_pts: usize,
    pts: Vec<[f64; 2]>,
    apts: Vec<f64>,
    bpts: Vec<f64>,
    wts: Vec<f64>,
    ident: Arc<PairTemplate>,
    edge: Option<Arc<PairTemplate>>,
    vert: Arc<PairTemplate>,
    omega_only: bool,
}

/// Scalar functional over the pair space: sums `w * f(da, db, r) * r^{-beta}`
/// over unordered element pairs (ordered-pair factor 2 off the diagonal),
/// always skipping exterior-exterior pairs and, with `omega_only`, anything
/// but domain-domain pairs.  `fa` and `fb` are full nodal value arrays whose
/// point differences are handed to `f`; pass the same slice twice when only
/// one function matters.  Far-field tails are the caller's business, since
/// their shape depends on the integrand.
pub(crate) fn pair_functional(
    mesh: &Mesh,
    config: &QuadratureConfig,
    beta: f64,
    fa: &[f64],
    fb: &[f64],
    omega_only: bool,
    f: &(dyn Fn(f64, f64, f64) -> f64 + Sync),
) -> Result<f64> {
    let d = mesh.dim();
    if beta >= d as f64 {
        return Err(Error::domain(format!(
            "pair functional exponent beta = {beta} must be below d = {d}"
        )));
    }
    let nv = mesh.n_vertices();
    if fa.len() != nv || fb.len() != nv {
        return Err(Error::domain(
            "nodal array length does not match the mesh".to_string(),
        ));
    }
    let rule = if d == 1 {
        segment_rule(config.n_reg)
    } else {
        triangle_rule(config.n_reg)
    };
    let n_pts = rule.len();
    let ne = mesh.n_elements();
    let mut pts = Vec::with_capacity(ne * n_pts);
    let mut apts = Vec::with_capacity(ne * n_pts);
    let mut bpts = Vec::with_capacity(ne * n_pts);
    let mut wts = Vec::with_capacity(ne * n_pts);
    for e in 0..ne {
        let c = mesh.elem_coords(e);
        let verts = mesh.elem_verts(e);
        let vol = mesh.elem_volume(e);
        for &(b, w) in &rule {
            pts.push(bary_point(d, &c, &b));
            apts.push((0..=d).map(|k| b[k] * fa[verts[k]]).sum());
            bpts.push((0..=d).map(|k| b[k] * fb[verts[k]]).sum());
            wts.push(w * vol);
        }
    }
    let ctx = FunCtx {
        mesh,
        fa,
        fb,
        pow: PowSpec::new(beta),
        n_pts,
        pts,
        apts,
        bpts,
        wts,
        ident: pair_template(d, PairClass::Identical, beta, config.n_sing),
        edge: (d == 2).then(|| pair_template(d, PairClass::SharedEdge, beta, config.n_sing)),
        vert: pair_template(d, PairClass::SharedVertex, beta, config.n_sing),
        omega_only,
    };
    if config.deterministic {
        let mut sum = 0.0;
        for a in 0..ne {
            sum += functional_row(&ctx, a, f);
        }
        Ok(sum)
    } else {
        Ok((0..ne)
            .into_par_iter()
            .map(|a| functional_row(&ctx, a, f))
            .sum())
    }
}

fn functional_row(ctx: &FunCtx, a: usize, f: &(dyn Fn(f64, f64, f64) -> f64 + Sync)) -> f64 {
    let mesh = ctx.mesh;
    let d = mesh.dim();
    let a_omega = mesh.region(a) == Region::Omega;
    if ctx.omega_only && !a_omega {
        return 0.0;
    }
    let mut sum = 0.0;
    for b in a..mesh.n_elements() {
        let b_omega = mesh.region(b) == Region::Omega;
        if ctx.omega_only {
            if !b_omega {
                continue;
            }
        } else if !a_omega && !b_omega {
            continue;
        }
        let ta = mesh.elem_verts(a);
        let tb = mesh.elem_verts(b);
        let shared = ta.iter().filter(|v| tb.contains(v)).count();
        let scale = mesh.elem_volume(a) * mesh.elem_volume(b) * if a == b { 1.0 } else { 2.0 };
        if shared == 0 {
            let (base_a, base_b) = (a * ctx.n_pts, b * ctx.n_pts);
            for i in 0..ctx.n_pts {
                let xa = ctx.pts[base_a + i];
                let (ai, bi, wa) = (
                    ctx.apts[base_a + i],
                    ctx.bpts[base_a + i],
                    ctx.wts[base_a + i],
                );
                for j in 0..ctx.n_pts {
                    let xb = ctx.pts[base_b + j];
                    let (dx, dy) = (xa[0] - xb[0], xa[1] - xb[1]);
                    let r = (dx * dx + dy * dy).sqrt();
                    let da = ai - ctx.apts[base_b + j];
                    let db = bi - ctx.bpts[base_b + j];
                    sum += 2.0 * wa * ctx.wts[base_b + j] * ctx.pow.eval(r) * f(da, db, r);
                }
            }
        } else {
            let arr = arrange_pair(ta, tb);
            let tmpl = match arr.class {
                PairClass::Identical => &ctx.ident,
                PairClass::SharedEdge => ctx.edge.as_ref().unwrap(),
                PairClass::SharedVertex => &ctx.vert,
                PairClass::Disjoint => unreachable!(),
            };
            let (pa, aa, _) = arranged(mesh, ctx.fa, a, arr.perm_t);
            let (_, ba, _) = arranged(mesh, ctx.fb, a, arr.perm_t);
            let (pb, ab, _) = arranged(mesh, ctx.fa, b, arr.perm_tp);
            let (_, bb, _) = arranged(mesh, ctx.fb, b, arr.perm_tp);
            for node in &tmpl.nodes {
                let mut dphys = [0.0f64; 2];
                let mut da = 0.0;
                let mut db = 0.0;
                for k in 0..=d {
                    dphys[0] += node.dx[k] * pa[k][0] - node.dy[k] * pb[k][0];
                    dphys[1] += node.dx[k] * pa[k][1] - node.dy[k] * pb[k][1];
                    da += node.bx[k] * aa[k] - node.by[k] * ab[k];
                    db += node.bx[k] * ba[k] - node.by[k] * bb[k];
                }
                let dn = (dphys[0] * dphys[0] + dphys[1] * dphys[1]).sqrt();
                let r = node.t * dn;
                sum += node.w * scale * ctx.pow.eval(dn) * f(da, db, r);
            }
        }
    }
    sum
}

/// Arranged physical coordinates, nodal values and global ids of an element
/// under a template permutation.
fn arranged(mesh: &Mesh, u: &[f64], e: usize, perm: [usize; 3]) -> ([[f64; 2]; 3], [f64; 3], [usize; 3]) {
    let verts = mesh.elem_verts(e);
    let mut p = [[0.0; 2]; 3];
    let mut vals = [0.0; 3];
    let mut gv = [usize::MAX; 3];
    for k in 0..verts.len() {
        let v = verts[perm[k]];
        p[k] = mesh.coord(v);
        if !u.is_empty() {
            vals[k] = u[v];
        }
        gv[k] = v;
    }
    (p, vals, gv)
}

#[inline]
fn bary_point(d: usize, c: &[[f64; 2]; 3], b: &[f64; 3]) -> [f64; 2] {
    let mut x = [0.0; 2];
    for k in 0..=d {
        x[0] += b[k] * c[k][0];
        x[1] += b[k] * c[k][1];
    }
    x
}

/// Union of the two vertex sets of a pair with local-to-union index maps,
/// so that basis difference values can be accumulated per global vertex
/// (shared vertices combine both sides).
struct VertexUnion {
    verts: [usize; 6],
    n: usize,
    iy: [usize; 3],
}

impl VertexUnion {
    fn build(d: usize, gva: &[usize; 3], gvb: &[usize; 3]) -> VertexUnion {
        let mut verts = [usize::MAX; 6];
        let mut n = d + 1;
        verts[..=d].copy_from_slice(&gva[..=d]);
        let mut iy = [0usize; 3];
        for k in 0..=d {
            match verts[..n].iter().position(|&v| v == gvb[k]) {
                Some(p) => iy[k] = p,
                None => {
                    verts[n] = gvb[k];
                    iy[k] = n;
                    n += 1;
                }
            }
        }
        VertexUnion { verts, n, iy }
    }

    fn build_disjoint(d: usize, va: &[usize], vb: &[usize]) -> VertexUnion {
        let mut verts = [usize::MAX; 6];
        let mut iy = [0usize; 3];
        verts[..=d].copy_from_slice(va);
        for k in 0..=d {
            verts[d + 1 + k] = vb[k];
            iy[k] = d + 1 + k;
        }
        VertexUnion {
            verts,
            n: 2 * (d + 1),
            iy,
        }
    }

    /// `phi_v(x) - phi_v(y)` for each union vertex at one quadrature node.
    #[inline]
    fn phi_diff(&self, d: usize, bx: &[f64; 3], by: &[f64; 3]) -> [f64; 6] {
        let mut phid = [0.0f64; 6];
        phid[..=d].copy_from_slice(&bx[..=d]);
        for k in 0..=d {
            phid[self.iy[k]] -= by[k];
        }
        phid
    }

    /// Symmetric rank-one update `mat[v_m, v_l] += c phid_m phid_l`.
    #[inline]
    fn rank_one(&self, mat: &mut DMatrix<f64>, c: f64, phid: &[f64; 6]) {
        for m in 0..self.n {
            let cm = c * phid[m];
            let vm = self.verts[m];
            for l in 0..self.n {
                mat[(vm, self.verts[l])] += cm * phid[l];
            }
        }
    }
}

/// Full nodal P1 mass matrix over the domain elements, assembled exactly.
fn mass_full(mesh: &Mesh) -> DMatrix<f64> {
    let nv = mesh.n_vertices();
    let d = mesh.dim();
    let mut mat = DMatrix::zeros(nv, nv);
    let denom = if d == 1 { 6.0 } else { 12.0 };
    for e in 0..mesh.n_elements() {
        if mesh.region(e) != Region::Omega {
            continue;
        }
        let verts = mesh.elem_verts(e);
        let vol = mesh.elem_volume(e);
        for (k, &vk) in verts.iter().enumerate() {
            for (l, &vl) in verts.iter().enumerate() {
                let factor = if k == l { 2.0 } else { 1.0 };
                mat[(vk, vl)] += factor * vol / denom;
            }
        }
    }
    mat
}
