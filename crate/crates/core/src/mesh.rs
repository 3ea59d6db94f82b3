//! Conforming simplicial meshes of the computational ball with region tags.
//!
//! The mesh covers a ball-shaped hold-all Lambda: an interval `[-R, R]` for
//! d = 1, an inscribed polygonal disk of radius `R` for d = 2.  Every element
//! carries a region tag saying whether it belongs to the problem domain Omega
//! or to the exterior collar inside Lambda.  Vertices are classified
//! combinatorially: a vertex is interior exactly when every element containing
//! it is an Omega element, so vertices on the Omega boundary are exterior.
//!
//! Curved boundaries (the annulus circles) are replaced by inscribed polygons
//! whose vertices lie on the true circles; Omega is then the region between
//! the two polygons and is meshed exactly.

use crate::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

/// Marker for the unused third vertex slot of 1d elements.
pub const NO_VERT: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Omega,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Exterior,
}

/// Geometric classifier used when importing meshes without trusted tags.
#[derive(Debug, Clone, Copy)]
pub enum RegionRule {
    /// d=2: Omega lies between the two radii (centroid test).
    Annulus { r_in: f64, r_out: f64 },
    /// d=1: Omega is the open interval (a, b).
    Interval { a: f64, b: f64 },
    /// Trust the region column of the plain text format.
    FromFile,
}

impl RegionRule {
    fn classify(&self, c: [f64; 2]) -> Option<Region> {
        match *self {
            RegionRule::Annulus { r_in, r_out } => {
                let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
                Some(if r > r_in && r < r_out {
                    Region::Omega
                } else {
                    Region::Exterior
                })
            }
            RegionRule::Interval { a, b } => Some(if c[0] > a && c[0] < b {
                Region::Omega
            } else {
                Region::Exterior
            }),
            RegionRule::FromFile => None,
        }
    }
}

/// Patch tables: per-vertex stars and per-element first/second rings.
#[derive(Debug, Clone)]
pub struct PatchTables {
    /// Elements incident to each vertex (the support of its basis function).
    pub vertex_star: Vec<Vec<usize>>,
    /// Elements sharing at least one vertex with T, including T.
    pub first_ring: Vec<Vec<usize>>,
    /// Union of first rings over the first ring of T.
    pub second_ring: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    coords: Vec<[f64; 2]>,
    elems: Vec<[usize; 3]>,
    regions: Vec<Region>,
    node_class: Vec<NodeClass>,
    radius: f64,
    h_max: f64,
    sigma: f64,
    interior_nodes: Vec<usize>,
    interior_index: Vec<usize>,
    vertex_stars: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds and validates a mesh from raw arrays.  For d = 1 the third
    /// vertex slot of every element must be `NO_VERT`.  Triangles must be
    /// positively oriented (counterclockwise).
    pub fn from_arrays(
        dim: usize,
        coords: Vec<[f64; 2]>,
        elems: Vec<[usize; 3]>,
        regions: Vec<Region>,
    ) -> Result<Mesh> {
        if dim != 1 && dim != 2 {
            return Err(Error::domain(format!("mesh dimension must be 1 or 2, got {dim}")));
        }
        if elems.len() != regions.len() {
            return Err(Error::domain("element and region counts differ"));
        }
        if coords.is_empty() || elems.is_empty() {
            return Err(Error::domain("mesh must have vertices and elements"));
        }

        let mut issues = Vec::new();
        check_elements(dim, &coords, &elems, &mut issues);
        if issues.is_empty() {
            check_conformity(dim, &coords, &elems, &mut issues);
        }
        if !issues.is_empty() {
            issues.truncate(20);
            return Err(Error::MeshValidation { issues });
        }

        let nv = coords.len();
        let mut vertex_stars: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (e, el) in elems.iter().enumerate() {
            for &v in &el[..=dim] {
                vertex_stars[v].push(e);
            }
        }
        for (v, star) in vertex_stars.iter().enumerate() {
            if star.is_empty() {
                return Err(Error::MeshValidation {
                    issues: vec![format!("vertex {v} belongs to no element")],
                });
            }
        }

        // Interior = strictly inside Omega = every incident element is Omega.
        let node_class: Vec<NodeClass> = vertex_stars
            .iter()
            .map(|star| {
                if star.iter().all(|&e| regions[e] == Region::Omega) {
                    NodeClass::Interior
                } else {
                    NodeClass::Exterior
                }
            })
            .collect();
        let interior_nodes: Vec<usize> = (0..nv)
            .filter(|&v| node_class[v] == NodeClass::Interior)
            .collect();
        let mut interior_index = vec![NO_VERT; nv];
        for (k, &v) in interior_nodes.iter().enumerate() {
            interior_index[v] = k;
        }

        let radius = coords
            .iter()
            .map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt())
            .fold(0.0f64, f64::max);
        let mut h_max = 0.0f64;
        let mut sigma = 0.0f64;
        for e in 0..elems.len() {
            let h_t = elem_diameter(dim, &coords, &elems[e]);
            let rho = inscribed_diameter(dim, &coords, &elems[e]);
            h_max = h_max.max(h_t);
            sigma = sigma.max(h_t / rho);
        }

        Ok(Mesh {
            dim,
            coords,
            elems,
            regions,
            node_class,
            radius,
            h_max,
            sigma,
            interior_nodes,
            interior_index,
            vertex_stars,
        })
    }

    /// Uniform mesh of `[-R, R]` with Omega = (a, b) meshed by `n` cells and
    /// exterior segments meshed with comparable spacing.
    pub fn interval(a: f64, b: f64, big_r: f64, n: usize) -> Result<Mesh> {
        if !(-big_r < a && a < b && b < big_r) {
            return Err(Error::domain(format!(
                "need -R < a < b < R, got a={a} b={b} R={big_r}"
            )));
        }
        if n < 2 {
            return Err(Error::domain("interval mesh needs n >= 2"));
        }
        let h = (b - a) / n as f64;
        let n_l = ((a + big_r) / h).ceil() as usize;
        let n_r = ((big_r - b) / h).ceil() as usize;

        let mut xs = Vec::with_capacity(n_l + n + n_r + 1);
        for k in 0..n_l {
            xs.push(-big_r + (a + big_r) * k as f64 / n_l as f64);
        }
        for k in 0..n {
            xs.push(a + (b - a) * k as f64 / n as f64);
        }
        for k in 0..=n_r {
            xs.push(b + (big_r - b) * k as f64 / n_r as f64);
        }

        let coords: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
        let mut elems = Vec::new();
        let mut regions = Vec::new();
        for i in 0..coords.len() - 1 {
            elems.push([i, i + 1, NO_VERT]);
            regions.push(if i >= n_l && i < n_l + n {
                Region::Omega
            } else {
                Region::Exterior
            });
        }
        Mesh::from_arrays(1, coords, elems, regions)
    }

    /// Structured polar mesh of the disk of radius `R` with polygonal rings
    /// exactly at `r_in` and `r_out`; Omega is the region between them.
    ///
    /// Rings are spaced by at most `h_target/sqrt(2)` radially, angular counts
    /// are powers of two times eight chosen so arcs stay below the same bound,
    /// and count transitions between adjacent rings are conforming one-to-two
    /// splits.  Guarantees `h <= h_target` and shape regularity sigma <= 4.
    pub fn annulus(r_in: f64, r_out: f64, big_r: f64, h_target: f64) -> Result<Mesh> {
        if !(0.0 < r_in && r_in < r_out && r_out < big_r) {
            return Err(Error::domain(format!(
                "need 0 < r_in < r_out < R, got {r_in} {r_out} {big_r}"
            )));
        }
        if !(h_target > 0.0) {
            return Err(Error::domain("h_target must be positive"));
        }
        if h_target > r_in {
            return Err(Error::domain(format!(
                "h_target={h_target} too coarse to resolve the inner radius {r_in}"
            )));
        }
        let delta = h_target / std::f64::consts::SQRT_2;

        // Radial breakpoints; r_in and r_out are breakpoints by construction.
        let mut radii = vec![0.0];
        for (lo, hi) in [(0.0, r_in), (r_in, r_out), (r_out, big_r)] {
            let m = ((hi - lo) / delta).ceil() as usize;
            for j in 1..=m {
                radii.push(lo + (hi - lo) * j as f64 / m as f64);
            }
        }
        let idx_in = radii
            .iter()
            .position(|&r| r == r_in)
            .expect("r_in is a breakpoint");
        let idx_out = radii
            .iter()
            .position(|&r| r == r_out)
            .expect("r_out is a breakpoint");

        // Angular count per ring: smallest 8*2^k whose arc length is <= delta,
        // never decreasing outward.  Counts at most double between adjacent
        // rings because consecutive radii differ by a factor <= 2.
        let nrings = radii.len() - 1;
        let mut counts = vec![0usize; radii.len()];
        let mut prev_k = 0u32;
        for j in 1..radii.len() {
            let ideal = 2.0 * std::f64::consts::PI * radii[j] / delta;
            let k_ideal = if ideal <= 8.0 {
                0
            } else {
                (ideal / 8.0).log2().ceil() as u32
            };
            let k = k_ideal.max(prev_k);
            assert!(
                k <= prev_k + 1 || j == 1,
                "ring counts must at most double between rings"
            );
            counts[j] = 8usize << k;
            prev_k = k;
        }

        // Ring node layout: center first, then rings in order.
        let mut offsets = vec![0usize; radii.len()];
        let mut coords: Vec<[f64; 2]> = vec![[0.0, 0.0]];
        for j in 1..radii.len() {
            offsets[j] = coords.len();
            let c = counts[j];
            for i in 0..c {
                let th = 2.0 * std::f64::consts::PI * i as f64 / c as f64;
                coords.push([radii[j] * th.cos(), radii[j] * th.sin()]);
            }
        }

        let mut elems: Vec<[usize; 3]> = Vec::new();
        let mut regions = Vec::new();
        let push_tri = |coords: &[[f64; 2]], a: usize, b: usize, c: usize, reg: Region,
                            elems: &mut Vec<[usize; 3]>, regions: &mut Vec<Region>| {
            let t = if signed_area(coords[a], coords[b], coords[c]) > 0.0 {
                [a, b, c]
            } else {
                [a, c, b]
            };
            elems.push(t);
            regions.push(reg);
        };

        for j in 0..nrings {
            // Band between ring j and ring j+1 (ring 0 is the center point).
            let reg = if j >= idx_in && j + 1 <= idx_out {
                Region::Omega
            } else {
                Region::Exterior
            };
            let (c_out, off_out) = (counts[j + 1], offsets[j + 1]);
            if j == 0 {
                for i in 0..c_out {
                    let b0 = off_out + i;
                    let b1 = off_out + (i + 1) % c_out;
                    push_tri(&coords, 0, b0, b1, reg, &mut elems, &mut regions);
                }
                continue;
            }
            let (c_in, off_in) = (counts[j], offsets[j]);
            if c_in == c_out {
                for i in 0..c_in {
                    let a0 = off_in + i;
                    let a1 = off_in + (i + 1) % c_in;
                    let b0 = off_out + i;
                    let b1 = off_out + (i + 1) % c_out;
                    push_tri(&coords, a0, b0, b1, reg, &mut elems, &mut regions);
                    push_tri(&coords, a0, b1, a1, reg, &mut elems, &mut regions);
                }
            } else {
                assert_eq!(c_out, 2 * c_in);
                for i in 0..c_in {
                    let a0 = off_in + i;
                    let a1 = off_in + (i + 1) % c_in;
                    let b0 = off_out + 2 * i;
                    let b1 = off_out + 2 * i + 1;
                    let b2 = off_out + (2 * i + 2) % c_out;
                    push_tri(&coords, a0, b0, b1, reg, &mut elems, &mut regions);
                    push_tri(&coords, a0, b1, a1, reg, &mut elems, &mut regions);
                    push_tri(&coords, a1, b1, b2, reg, &mut elems, &mut regions);
                }
            }
        }

        let mesh = Mesh::from_arrays(2, coords, elems, regions)?;
        debug_assert!(mesh.h() <= h_target * (1.0 + 1e-12));
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elems.len()
    }

    pub fn coord(&self, v: usize) -> [f64; 2] {
        self.coords[v]
    }

    /// Vertex indices of element `e` (length dim+1).
    pub fn elem_verts(&self, e: usize) -> &[usize] {
        &self.elems[e][..=self.dim]
    }

    /// Vertex coordinates of element `e`; the unused slot is zero for d = 1.
    pub fn elem_coords(&self, e: usize) -> [[f64; 2]; 3] {
        let el = &self.elems[e];
        let mut out = [[0.0; 2]; 3];
        for i in 0..=self.dim {
            out[i] = self.coords[el[i]];
        }
        out
    }

    pub fn region(&self, e: usize) -> Region {
        self.regions[e]
    }

    pub fn node_class(&self, v: usize) -> NodeClass {
        self.node_class[v]
    }

    pub fn is_interior(&self, v: usize) -> bool {
        self.node_class[v] == NodeClass::Interior
    }

    /// Radius of the meshed ball (largest vertex norm).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h_max
    }

    /// Shape regularity max_T h_T / rho_T (inscribed-ball diameter rho_T).
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Interior vertex ids in ascending order; their positions define the
    /// degree-of-freedom numbering used by assembly.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    /// Dense dof index of a vertex, or None for exterior vertices.
    pub fn interior_index(&self, v: usize) -> Option<usize> {
        let k = self.interior_index[v];
        (k != NO_VERT).then_some(k)
    }

    pub fn n_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Elements incident to vertex `v` (ascending element ids).
    pub fn vertex_star(&self, v: usize) -> &[usize] {
        &self.vertex_stars[v]
    }

    pub fn elem_volume(&self, e: usize) -> f64 {
        elem_volume(self.dim, &self.coords, &self.elems[e])
    }

    pub fn elem_diameter(&self, e: usize) -> f64 {
        elem_diameter(self.dim, &self.coords, &self.elems[e])
    }

    pub fn elem_centroid(&self, e: usize) -> [f64; 2] {
        let el = &self.elems[e];
        let n = (self.dim + 1) as f64;
        let mut c = [0.0; 2];
        for &v in &el[..=self.dim] {
            c[0] += self.coords[v][0] / n;
            c[1] += self.coords[v][1] / n;
        }
        c
    }

    /// Total volume of all elements carrying the given tag.
    pub fn region_volume(&self, region: Region) -> f64 {
        // Compensated sum: the polygon-area identity tests ask for 1e-12.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for e in 0..self.elems.len() {
            if self.regions[e] == region {
                let y = self.elem_volume(e) - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
        }
        sum
    }

    /// Patch tables for Clement-type operators and locality diagnostics.
    pub fn stars(&self) -> PatchTables {
        let ne = self.elems.len();
        let mut first_ring: Vec<Vec<usize>> = Vec::with_capacity(ne);
        for e in 0..ne {
            let mut ring: Vec<usize> = self.elem_verts(e)
                .iter()
                .flat_map(|&v| self.vertex_stars[v].iter().copied())
                .collect();
            ring.sort_unstable();
            ring.dedup();
            first_ring.push(ring);
        }
        let mut second_ring: Vec<Vec<usize>> = Vec::with_capacity(ne);
        for e in 0..ne {
            let mut ring: Vec<usize> = first_ring[e]
                .iter()
                .flat_map(|&t| first_ring[t].iter().copied())
                .collect();
            ring.sort_unstable();
            ring.dedup();
            second_ring.push(ring);
        }
        PatchTables {
            vertex_star: self.vertex_stars.clone(),
            first_ring,
            second_ring,
        }
    }

    /// Finds the element containing `x` and its barycentric coordinates.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = -1e-11 * (1.0 + self.radius);
        for e in 0..self.elems.len() {
            let bary = self.barycentric(e, x);
            if bary[..=self.dim].iter().all(|&l| l >= tol) {
                return Some((e, bary));
            }
        }
        None
    }

    /// Barycentric coordinates of `x` with respect to element `e`.
    pub fn barycentric(&self, e: usize, x: [f64; 2]) -> [f64; 3] {
        let v = self.elem_coords(e);
        if self.dim == 1 {
            let len = v[1][0] - v[0][0];
            let l1 = (x[0] - v[0][0]) / len;
            [1.0 - l1, l1, 0.0]
        } else {
            let det = signed_area(v[0], v[1], v[2]) * 2.0;
            let l0 = ((v[1][0] - x[0]) * (v[2][1] - x[1]) - (v[2][0] - x[0]) * (v[1][1] - x[1])) / det;
            let l1 = ((v[2][0] - x[0]) * (v[0][1] - x[1]) - (v[0][0] - x[0]) * (v[2][1] - x[1])) / det;
            [l0, l1, 1.0 - l0 - l1]
        }
    }

    /// Imports Gmsh MSH 2.2 ASCII or the plain text format, auto-detected.
    pub fn import(path: &Path, rule: RegionRule) -> Result<Mesh> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::parse(path, 0, format!("cannot read file: {e}")))?;
        if text.trim_start().starts_with("$MeshFormat") {
            import_gmsh(path, &text, rule)
        } else {
            import_plain(path, &text, rule)
        }
    }

    /// Plain text format: header `nv ne dim`, then `nv` coordinate lines
    /// (`x` for d=1, `x y` for d=2), then `ne` element lines with 0-based
    /// vertex indices and a region column (`1` Omega, `0` exterior).
    /// Coordinates use shortest round-trip decimals, so export/import
    /// round-trips bit-exactly.
    pub fn export_plain(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.n_vertices(), self.n_elements(), self.dim);
        for c in &self.coords {
            if self.dim == 1 {
                let _ = writeln!(out, "{}", c[0]);
            } else {
                let _ = writeln!(out, "{} {}", c[0], c[1]);
            }
        }
        for e in 0..self.elems.len() {
            let tag = if self.regions[e] == Region::Omega { 1 } else { 0 };
            let el = &self.elems[e];
            if self.dim == 1 {
                let _ = writeln!(out, "{} {} {}", el[0], el[1], tag);
            } else {
                let _ = writeln!(out, "{} {} {} {}", el[0], el[1], el[2], tag);
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Legacy VTK ASCII export; `point_data` attaches one scalar field.
    pub fn export_vtk(&self, path: &Path, point_data: Option<(&str, &[f64])>) -> Result<()> {
        if let Some((_, vals)) = point_data {
            if vals.len() != self.n_vertices() {
                return Err(Error::domain("point data length != vertex count"));
            }
        }
        let mut out = String::new();
        out.push_str("# vtk DataFile Version 3.0\n");
        out.push_str("nlmg mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(out, "POINTS {} double", self.n_vertices());
        for c in &self.coords {
            let _ = writeln!(out, "{} {} 0", c[0], c[1]);
        }
        let npe = self.dim + 1;
        let _ = writeln!(out, "CELLS {} {}", self.n_elements(), self.n_elements() * (npe + 1));
        for el in &self.elems {
            let _ = write!(out, "{}", npe);
            for &v in &el[..npe] {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "CELL_TYPES {}", self.n_elements());
        let vtk_type = if self.dim == 1 { 3 } else { 5 };
        for _ in 0..self.n_elements() {
            let _ = writeln!(out, "{vtk_type}");
        }
        let _ = writeln!(out, "CELL_DATA {}", self.n_elements());
        out.push_str("SCALARS region int 1\nLOOKUP_TABLE default\n");
        for r in &self.regions {
            let _ = writeln!(out, "{}", if *r == Region::Omega { 1 } else { 0 });
        }
        if let Some((name, vals)) = point_data {
            let _ = writeln!(out, "POINT_DATA {}", self.n_vertices());
            let _ = writeln!(out, "SCALARS {name} double 1");
            out.push_str("LOOKUP_TABLE default\n");
            for v in vals {
                let _ = writeln!(out, "{v}");
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn elem_volume(dim: usize, coords: &[[f64; 2]], el: &[usize; 3]) -> f64 {
    if dim == 1 {
        (coords[el[1]][0] - coords[el[0]][0]).abs()
    } else {
        signed_area(coords[el[0]], coords[el[1]], coords[el[2]])
    }
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn elem_diameter(dim: usize, coords: &[[f64; 2]], el: &[usize; 3]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..=dim {
        for j in (i + 1)..=dim {
            let (a, b) = (coords[el[i]], coords[el[j]]);
            d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
    }
    d
}

/// Diameter of the inscribed ball: the segment itself for d=1, 4A/P for d=2.
fn inscribed_diameter(dim: usize, coords: &[[f64; 2]], el: &[usize; 3]) -> f64 {
    if dim == 1 {
        elem_volume(dim, coords, el)
    } else {
        let mut per = 0.0;
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let (a, b) = (coords[el[i]], coords[el[j]]);
            per += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        }
        4.0 * elem_volume(dim, coords, el) / per
    }
}

fn check_elements(dim: usize, coords: &[[f64; 2]], elems: &[[usize; 3]], issues: &mut Vec<String>) {
    let nv = coords.len();
    let scale = coords
        .iter()
        .map(|c| c[0].abs().max(c[1].abs()))
        .fold(0.0f64, f64::max)
        .max(1e-30);
    let vol_tol = 1e-14 * scale.powi(dim as i32);
    for (e, el) in elems.iter().enumerate() {
        let verts = &el[..=dim];
        if verts.iter().any(|&v| v >= nv) {
            issues.push(format!("element {e} references a vertex out of range"));
            continue;
        }
        if dim == 1 && el[2] != NO_VERT {
            issues.push(format!("element {e}: 1d element must leave the third slot empty"));
            continue;
        }
        if (0..=dim).any(|i| (i + 1..=dim).any(|j| el[i] == el[j])) {
            issues.push(format!("element {e} has repeated vertices"));
            continue;
        }
        let vol = if dim == 1 {
            coords[el[1]][0] - coords[el[0]][0]
        } else {
            signed_area(coords[el[0]], coords[el[1]], coords[el[2]])
        };
        if vol.abs() <= vol_tol {
            issues.push(format!("element {e} is degenerate (volume {vol:.3e})"));
        } else if vol < 0.0 && dim == 2 {
            issues.push(format!("element {e} is inverted (clockwise orientation)"));
        }
    }
}

/// Combinatorial conformity: shared faces used at most twice, a single closed
/// boundary loop, Euler characteristic of a disk, and covered area equal to
/// the boundary polygon area.  Together these reject hanging nodes, overlaps,
/// duplicated elements, and gaps.
fn check_conformity(dim: usize, coords: &[[f64; 2]], elems: &[[usize; 3]], issues: &mut Vec<String>) {
    if dim == 1 {
        let mut degree = vec![0usize; coords.len()];
        for el in elems {
            degree[el[0]] += 1;
            degree[el[1]] += 1;
        }
        let ends: Vec<usize> = (0..coords.len()).filter(|&v| degree[v] == 1).collect();
        for v in 0..coords.len() {
            if degree[v] > 2 {
                issues.push(format!("vertex {v} belongs to {} segments", degree[v]));
            }
        }
        if ends.len() != 2 {
            issues.push(format!("expected 2 endpoint vertices, found {}", ends.len()));
            return;
        }
        let span = coords.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max)
            - coords.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
        let total: f64 = elems
            .iter()
            .map(|el| (coords[el[1]][0] - coords[el[0]][0]).abs())
            .sum();
        if (total - span).abs() > 1e-12 * span {
            issues.push(format!(
                "segments cover length {total} but the span is {span} (overlap or gap)"
            ));
        }
        return;
    }

    let mut edge_count: HashMap<(usize, usize), u32> = HashMap::new();
    for el in elems {
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let key = (el[i].min(el[j]), el[i].max(el[j]));
            *edge_count.entry(key).or_insert(0) += 1;
        }
    }
    let mut overused: Vec<(usize, usize)> = edge_count
        .iter()
        .filter(|(_, &c)| c > 2)
        .map(|(&e, _)| e)
        .collect();
    overused.sort_unstable();
    for (a, b) in overused {
        issues.push(format!("edge ({a},{b}) is shared by more than two triangles"));
    }
    if !issues.is_empty() {
        return;
    }

    // Boundary edges must form one closed loop with vertex degree two.
    let mut bnd_adj: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut n_bnd = 0usize;
    for (&(a, b), &c) in &edge_count {
        if c == 1 {
            n_bnd += 1;
            bnd_adj.entry(a).or_default().push(b);
            bnd_adj.entry(b).or_default().push(a);
        }
    }
    let mut bad: Vec<usize> = bnd_adj
        .iter()
        .filter(|(_, n)| n.len() != 2)
        .map(|(&v, _)| v)
        .collect();
    bad.sort_unstable();
    for v in bad {
        issues.push(format!(
            "vertex {v} lies on {} boundary edges (hanging node or pinch)",
            bnd_adj[&v].len()
        ));
    }
    if !issues.is_empty() || n_bnd == 0 {
        return;
    }

    let start = *bnd_adj.keys().min().unwrap();
    let mut loop_verts = vec![start];
    let mut prev = start;
    let mut cur = bnd_adj[&start][0];
    while cur != start {
        loop_verts.push(cur);
        let next = if bnd_adj[&cur][0] == prev {
            bnd_adj[&cur][1]
        } else {
            bnd_adj[&cur][0]
        };
        prev = cur;
        cur = next;
        if loop_verts.len() > n_bnd {
            break;
        }
    }
    if loop_verts.len() != n_bnd {
        issues.push("boundary edges form more than one loop".into());
        return;
    }

    if coords.len() + elems.len() != edge_count.len() + 1 {
        issues.push(format!(
            "Euler check failed: V={} E={} F={}",
            coords.len(),
            edge_count.len(),
            elems.len()
        ));
        return;
    }

    let mut loop_area = 0.0f64;
    for k in 0..loop_verts.len() {
        let a = coords[loop_verts[k]];
        let b = coords[loop_verts[(k + 1) % loop_verts.len()]];
        loop_area += 0.5 * (a[0] * b[1] - b[0] * a[1]);
    }
    let covered: f64 = {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for el in elems {
            let y = signed_area(coords[el[0]], coords[el[1]], coords[el[2]]) - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    };
    if (covered - loop_area.abs()).abs() > 1e-9 * loop_area.abs() {
        issues.push(format!(
            "covered area {covered} differs from boundary polygon area {} (overlap or gap)",
            loop_area.abs()
        ));
    }
}

fn import_plain(path: &Path, text: &str, rule: RegionRule) -> Result<Mesh> {
    let mut lines = text.lines().enumerate();
    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::parse(path, ln + 1, format!("bad header token '{t}'"))))
        .collect::<Result<_>>()?;
    if head.len() != 3 {
        return Err(Error::parse(path, ln + 1, "header must be 'nv ne dim'"));
    }
    let (nv, ne, dim) = (head[0], head[1], head[2]);
    if dim != 1 && dim != 2 {
        return Err(Error::parse(path, ln + 1, format!("dimension must be 1 or 2, got {dim}")));
    }

    let mut coords = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, "unexpected end of file in vertices"))?;
        let toks: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(path, ln + 1, format!("bad coordinate '{t}'"))))
            .collect::<Result<_>>()?;
        if toks.len() != dim {
            return Err(Error::parse(path, ln + 1, format!("expected {dim} coordinates")));
        }
        coords.push(if dim == 1 { [toks[0], 0.0] } else { [toks[0], toks[1]] });
    }

    let mut elems = Vec::with_capacity(ne);
    let mut regions = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, "unexpected end of file in elements"))?;
        let toks: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(path, ln + 1, format!("bad element token '{t}'"))))
            .collect::<Result<_>>()?;
        if toks.len() != dim + 2 {
            return Err(Error::parse(path, ln + 1, format!("expected {} fields", dim + 2)));
        }
        let el = if dim == 1 {
            [toks[0], toks[1], NO_VERT]
        } else {
            [toks[0], toks[1], toks[2]]
        };
        let file_region = match toks[dim + 1] {
            1 => Region::Omega,
            0 => Region::Exterior,
            t => return Err(Error::parse(path, ln + 1, format!("region tag must be 0 or 1, got {t}"))),
        };
        let centroid = {
            let n = (dim + 1) as f64;
            let mut c = [0.0; 2];
            for &v in &el[..=dim] {
                if v >= coords.len() {
                    return Err(Error::parse(path, ln + 1, format!("vertex index {v} out of range")));
                }
                c[0] += coords[v][0] / n;
                c[1] += coords[v][1] / n;
            }
            c
        };
        elems.push(el);
        regions.push(rule.classify(centroid).unwrap_or(file_region));
    }
    Mesh::from_arrays(dim, coords, elems, regions)
}

fn import_gmsh(path: &Path, text: &str, rule: RegionRule) -> Result<Mesh> {
    if matches!(rule, RegionRule::FromFile) {
        return Err(Error::domain(
            "Gmsh files carry no region column; a geometric region rule is required",
        ));
    }
    let lines: Vec<(usize, &str)> = text.lines().enumerate().collect();
    let mut i = 0usize;
    let mut id_map: HashMap<usize, usize> = HashMap::new();
    let mut coords: Vec<[f64; 2]> = Vec::new();
    let mut raw_elems: Vec<(usize, Vec<usize>)> = Vec::new();

    while i < lines.len() {
        let (ln, line) = lines[i];
        match line.trim() {
            "$Nodes" => {
                let (hln, hline) = lines[i + 1];
                let n: usize = hline
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, hln + 1, "bad node count"))?;
                for k in 0..n {
                    let (nln, nline) = lines[i + 2 + k];
                    let toks: Vec<&str> = nline.split_whitespace().collect();
                    if toks.len() < 4 {
                        return Err(Error::parse(path, nln + 1, "node line needs 'id x y z'"));
                    }
                    let id: usize = toks[0]
                        .parse()
                        .map_err(|_| Error::parse(path, nln + 1, "bad node id"))?;
                    let x: f64 = toks[1]
                        .parse()
                        .map_err(|_| Error::parse(path, nln + 1, "bad x coordinate"))?;
                    let y: f64 = toks[2]
                        .parse()
                        .map_err(|_| Error::parse(path, nln + 1, "bad y coordinate"))?;
                    id_map.insert(id, coords.len());
                    coords.push([x, y]);
                }
                i += n + 2;
            }
            "$Elements" => {
                let (hln, hline) = lines[i + 1];
                let n: usize = hline
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, hln + 1, "bad element count"))?;
                for k in 0..n {
                    let (eln, eline) = lines[i + 2 + k];
                    let toks: Vec<usize> = eline
                        .split_whitespace()
                        .map(|t| {
                            t.parse()
                                .map_err(|_| Error::parse(path, eln + 1, format!("bad element token '{t}'")))
                        })
                        .collect::<Result<_>>()?;
                    if toks.len() < 3 {
                        return Err(Error::parse(path, eln + 1, "short element line"));
                    }
                    let (etype, ntags) = (toks[1], toks[2]);
                    let verts = &toks[3 + ntags..];
                    raw_elems.push((etype, verts.to_vec()));
                }
                i += n + 2;
            }
            _ => {
                let _ = ln;
                i += 1;
            }
        }
    }

    let dim = if raw_elems.iter().any(|(t, _)| *t == 2) { 2 } else { 1 };
    let want_type = if dim == 2 { 2 } else { 1 };
    let mut elems = Vec::new();
    let mut regions = Vec::new();
    for (etype, verts) in raw_elems {
        if etype != want_type {
            continue;
        }
        if verts.len() != dim + 1 {
            return Err(Error::parse(path, 0, "element vertex count does not match type"));
        }
        let mut el = [NO_VERT; 3];
        for (slot, &id) in el.iter_mut().zip(verts.iter()) {
            *slot = *id_map
                .get(&id)
                .ok_or_else(|| Error::parse(path, 0, format!("element references unknown node {id}")))?;
        }
        let n = (dim + 1) as f64;
        let mut c = [0.0; 2];
        for &v in &el[..=dim] {
            c[0] += coords[v][0] / n;
            c[1] += coords[v][1] / n;
        }
        elems.push(el);
        regions.push(rule.classify(c).expect("geometric rule"));
    }
    if elems.is_empty() {
        return Err(Error::parse(path, 0, "no usable elements found"));
    }
    // Drop vertices that belong only to skipped lower-dimensional elements.
    let mut used = vec![false; coords.len()];
    for el in &elems {
        for &v in &el[..=dim] {
            used[v] = true;
        }
    }
    let mut remap = vec![NO_VERT; coords.len()];
    let mut packed = Vec::new();
    for (v, &u) in used.iter().enumerate() {
        if u {
            remap[v] = packed.len();
            packed.push(coords[v]);
        }
    }
    for el in &mut elems {
        for v in &mut el[..=dim] {
            *v = remap[*v];
        }
    }
    Mesh::from_arrays(dim, packed, elems, regions)
}
