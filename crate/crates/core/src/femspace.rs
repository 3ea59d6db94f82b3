//! Continuous piecewise linear functions and Clement-type interpolation.
//!
//! A [`DiscreteFunction`] stores one value per mesh vertex and is implicitly
//! zero outside the meshed ball.  Exterior Dirichlet data enters through the
//! exterior Clement operator: every exterior node receives the local L2
//! projection of the datum onto linears over the exterior part of its vertex
//! patch, evaluated at the node.  The interior operator does the same for a
//! function given on the domain, and the quasi-interpolant is their sum
//! (their nodal supports are disjoint).
//!
//! Local projections are solved per patch from the 3x3 (d=1: 2x2) normal
//! equations in a basis centered and scaled at the node, so the nodal value
//! is just the constant coefficient.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::mesh::{Mesh, NodeClass, Region};
use crate::quadrature::{segment_rule, triangle_rule};
use crate::{Error, Result};

/// Exterior Dirichlet datum: bounded, compactly supported in the mesh ball.
#[derive(Clone)]
pub struct DatumSpec {
    kind: DatumKind,
    support_radius: f64,
}

#[derive(Clone)]
enum DatumKind {
    /// Constant per closed radial band `lo <= |x| <= hi`; zero outside all
    /// bands; first matching band wins.
    Bands(Vec<(f64, f64, f64)>),
    /// Arbitrary bounded expression, clipped to zero outside the support.
    ClosedForm(Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>),
}

impl fmt::Debug for DatumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DatumKind::Bands(b) => write!(f, "DatumSpec::Bands({b:?})"),
            DatumKind::ClosedForm(_) => {
                write!(f, "DatumSpec::ClosedForm(R_g = {})", self.support_radius)
            }
        }
    }
}

impl DatumSpec {
    pub fn zero() -> Self {
        DatumSpec {
            kind: DatumKind::Bands(Vec::new()),
            support_radius: 0.0,
        }
    }

    /// `g = c` on the ball of the given radius (intersected with the
    /// exterior region wherever it is used).
    pub fn constant(c: f64, support_radius: f64) -> Result<Self> {
        Self::bands(vec![(0.0, support_radius, c)])
    }

    /// Radially banded constants `(lo, hi, value)`.
    pub fn bands(bands: Vec<(f64, f64, f64)>) -> Result<Self> {
        let mut support: f64 = 0.0;
        for &(lo, hi, value) in &bands {
            if !(lo >= 0.0 && hi >= lo) || !value.is_finite() {
                return Err(Error::domain(format!(
                    "datum band ({lo}, {hi}, {value}) is malformed"
                )));
            }
            if value != 0.0 {
                support = support.max(hi);
            }
        }
        Ok(DatumSpec {
            kind: DatumKind::Bands(bands),
            support_radius: support,
        })
    }

    pub fn closed_form(
        f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        support_radius: f64,
    ) -> Result<Self> {
        if !(support_radius >= 0.0) {
            return Err(Error::domain("datum support radius must be nonnegative"));
        }
        Ok(DatumSpec {
            kind: DatumKind::ClosedForm(Arc::new(f)),
            support_radius,
        })
    }

    /// Radius beyond which the datum vanishes identically.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Radii where the datum may jump; quadrature code aligns integration
    /// panels here.  For opaque expressions only the support edge is known.
    pub fn radial_breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            DatumKind::Bands(bands) => {
                let mut out: Vec<f64> = bands.iter().flat_map(|&(lo, hi, _)| [lo, hi]).collect();
                out.sort_by(|a, b| a.partial_cmp(b).unwrap());
                out.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
                out
            }
            DatumKind::ClosedForm(_) => vec![self.support_radius],
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let r = x[0].hypot(x[1]);
        if r > self.support_radius {
            return 0.0;
        }
        match &self.kind {
            DatumKind::Bands(bands) => bands
                .iter()
                .find(|&&(lo, hi, _)| lo <= r && r <= hi)
                .map_or(0.0, |&(_, _, v)| v),
            DatumKind::ClosedForm(f) => f(x),
        }
    }
}

/// Nodal values of a continuous piecewise linear function on a mesh,
/// implicitly zero outside the meshed ball.  Exterior node values are set
/// from a datum at construction and never touched by solvers, which write
/// through [`DiscreteFunction::set_interior`] only.
#[derive(Debug, Clone)]
pub struct DiscreteFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::domain(format!(
                "value vector has {} entries for a mesh with {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        Ok(DiscreteFunction { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.n_vertices();
        DiscreteFunction {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodal(&self, v: usize) -> f64 {
        self.values[v]
    }

    /// Interior degrees of freedom in the mesh's interior-node order.
    pub fn interior_values(&self) -> Vec<f64> {
        self.mesh
            .interior_nodes()
            .iter()
            .map(|&v| self.values[v])
            .collect()
    }

    /// Overwrites the interior degrees of freedom; exterior values stay put.
    pub fn set_interior(&mut self, dofs: &[f64]) {
        assert_eq!(dofs.len(), self.mesh.n_interior());
        for (k, &v) in self.mesh.interior_nodes().iter().enumerate() {
            self.values[v] = dofs[k];
        }
    }

    /// Barycentric-linear evaluation; zero outside the meshed ball.
    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        match self.mesh.locate(x) {
            Some((e, bary)) => {
                let verts = self.mesh.elem_verts(e);
                verts
                    .iter()
                    .zip(bary.iter())
                    .map(|(&v, &l)| l * self.values[v])
                    .sum()
            }
            None => 0.0,
        }
    }

    /// Constant gradient on element `e` (d=1: the slope in the first slot).
    pub fn element_gradient(&self, e: usize) -> [f64; 2] {
        let verts = self.mesh.elem_verts(e);
        let c = self.mesh.elem_coords(e);
        if self.mesh.dim() == 1 {
            let du = self.values[verts[1]] - self.values[verts[0]];
            [du / (c[1][0] - c[0][0]), 0.0]
        } else {
            let (e1, e2) = (
                [c[1][0] - c[0][0], c[1][1] - c[0][1]],
                [c[2][0] - c[0][0], c[2][1] - c[0][1]],
            );
            let (d1, d2) = (
                self.values[verts[1]] - self.values[verts[0]],
                self.values[verts[2]] - self.values[verts[0]],
            );
            let det = e1[0] * e2[1] - e1[1] * e2[0];
            [
                (d1 * e2[1] - d2 * e1[1]) / det,
                (d2 * e1[0] - d1 * e2[0]) / det,
            ]
        }
    }

    /// Nodal interpolation onto another mesh of the same ball (coarse to
    /// fine transfer): evaluates this function at the target's vertices.
    pub fn transfer_to(&self, target: Arc<Mesh>) -> DiscreteFunction {
        let values = (0..target.n_vertices())
            .map(|v| self.evaluate(target.coord(v)))
            .collect();
        DiscreteFunction {
            mesh: target,
            values,
        }
    }

    /// CSV rows `index,x[,y],value`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        if self.mesh.dim() == 1 {
            out.push_str("node,x,value\n");
        } else {
            out.push_str("node,x,y,value\n");
        }
        for v in 0..self.mesh.n_vertices() {
            let c = self.mesh.coord(v);
            if self.mesh.dim() == 1 {
                out.push_str(&format!("{v},{},{}\n", c[0], self.values[v]));
            } else {
                out.push_str(&format!("{v},{},{},{}\n", c[0], c[1], self.values[v]));
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Legacy VTK with the nodal values as point data named `u`.
    pub fn export_vtk(&self, path: &Path) -> Result<()> {
        self.mesh.export_vtk(path, Some(("u", &self.values)))
    }
}

/// Exterior Clement operator: projects the datum locally over the exterior
/// part of each exterior node's patch.  Interior nodes get zero.  Patches
/// touching the outer sphere see only vanishing data (the datum's support
/// stays inside the ball), so their values come out exactly zero.
pub fn exterior_clement(g: &DatumSpec, mesh: &Arc<Mesh>) -> Result<DiscreteFunction> {
    let mut values = vec![0.0; mesh.n_vertices()];
    for v in 0..mesh.n_vertices() {
        if mesh.node_class(v) != NodeClass::Exterior {
            continue;
        }
        let patch: Vec<usize> = mesh
            .vertex_star(v)
            .iter()
            .copied()
            .filter(|&e| mesh.region(e) == Region::Exterior)
            .collect();
        // Nonempty by the node classification: an exterior node has at
        // least one exterior element in its star.
        values[v] = patch_projection(mesh, &patch, mesh.coord(v), |x| g.eval(x))?;
    }
    DiscreteFunction::new(Arc::clone(mesh), values)
}

/// Interior Clement operator: projects a function given on the domain over
/// each interior node's patch (which consists of domain elements only).
/// Exterior nodes get zero.
pub fn interior_clement(
    v_fn: impl Fn([f64; 2]) -> f64,
    mesh: &Arc<Mesh>,
) -> Result<DiscreteFunction> {
    let mut values = vec![0.0; mesh.n_vertices()];
    for v in 0..mesh.n_vertices() {
        if mesh.node_class(v) != NodeClass::Interior {
            continue;
        }
        values[v] = patch_projection(mesh, mesh.vertex_star(v), mesh.coord(v), &v_fn)?;
    }
    DiscreteFunction::new(Arc::clone(mesh), values)
}

/// Quasi-interpolant: interior Clement of `v` plus exterior Clement of `g`.
/// The two operators populate disjoint node sets, so the sum is nodal.
pub fn quasi_interpolant(
    v_fn: impl Fn([f64; 2]) -> f64,
    g: &DatumSpec,
    mesh: &Arc<Mesh>,
) -> Result<DiscreteFunction> {
    let inner = interior_clement(v_fn, mesh)?;
    let outer = exterior_clement(g, mesh)?;
    let values = inner
        .values
        .iter()
        .zip(&outer.values)
        .map(|(a, b)| a + b)
        .collect();
    DiscreteFunction::new(Arc::clone(mesh), values)
}

/// L2 projection of `f` onto linears over the given elements, evaluated at
/// `center`.  The basis `{1, (x-center)/scale, (y-center)/scale}` makes the
/// requested value the constant coefficient.
fn patch_projection(
    mesh: &Mesh,
    patch: &[usize],
    center: [f64; 2],
    f: impl Fn([f64; 2]) -> f64,
) -> Result<f64> {
    let d = mesh.dim();
    let rule = if d == 1 {
        segment_rule(4)
    } else {
        triangle_rule(4)
    };

    // Quadrature points with weights (already scaled by element volume) and
    // the data values there.
    let mut pts: Vec<([f64; 2], f64, f64)> = Vec::new();
    let mut scale: f64 = 0.0;
    for &e in patch {
        let c = mesh.elem_coords(e);
        let vol = mesh.elem_volume(e);
        scale = scale.max(mesh.elem_diameter(e));
        for &(bary, w) in &rule {
            let mut x = [0.0; 2];
            for k in 0..=d {
                x[0] += bary[k] * c[k][0];
                x[1] += bary[k] * c[k][1];
            }
            pts.push((x, w * vol, f(x)));
        }
    }

    // Constant data short-circuits: the projection reproduces it exactly.
    if let Some(&(_, _, first)) = pts.first() {
        if pts.iter().all(|&(_, _, val)| val == first) {
            return Ok(first);
        }
    }

    let n = d + 1;
    let basis = |x: [f64; 2], j: usize| match j {
        0 => 1.0,
        1 => (x[0] - center[0]) / scale,
        _ => (x[1] - center[1]) / scale,
    };
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(x, w, val) in &pts {
        for j in 0..n {
            let pj = basis(x, j);
            rhs[j] += w * val * pj;
            for k in 0..n {
                m[j][k] += w * pj * basis(x, k);
            }
        }
    }
    let coeffs = solve_small(&mut m, &mut rhs, n).ok_or_else(|| {
        Error::domain(format!(
            "degenerate patch around ({}, {}): singular local projection",
            center[0], center[1]
        ))
    })?;
    Ok(coeffs[0])
}

/// Gaussian elimination with partial pivoting on an n x n system, n <= 3.
fn solve_small(m: &mut [[f64; 3]; 3], rhs: &mut [f64; 3], n: usize) -> Option<[f64; 3]> {
    let mut perm = [0usize, 1, 2];
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| {
                m[perm[a]][col]
                    .abs()
                    .partial_cmp(&m[perm[b]][col].abs())
                    .unwrap()
            })
            .unwrap();
        perm.swap(col, piv);
        let p = m[perm[col]][col];
        if p.abs() < 1e-300 {
            return None;
        }
        for row in (col + 1)..n {
            let factor = m[perm[row]][col] / p;
            for k in col..n {
                m[perm[row]][k] -= factor * m[perm[col]][k];
            }
            rhs[perm[row]] -= factor * rhs[perm[col]];
        }
    }
    let mut sol = [0.0f64; 3];
    for col in (0..n).rev() {
        let mut acc = rhs[perm[col]];
        for k in (col + 1)..n {
            acc -= m[perm[col]][k] * sol[k];
        }
        sol[col] = acc / m[perm[col]][col];
        if !sol[col].is_finite() {
            return None;
        }
    }
    Some(sol)
}
