//! Two-dimensional triangulations with tagged boundary edges.
//!
//! Meshes are immutable after construction and can be shared read-only
//! between threads (`Arc<Mesh>`).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Boundary segment tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Marker {
    Wall,
    Lid,
    Inlet,
    Outlet,
    Left,
    Right,
    Bottom,
    Top,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub marker: Marker,
}

/// How the sides of a rectangle are tagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideMarkers {
    /// Every boundary edge gets [`Marker::All`].
    All,
    /// `Left`, `Right`, `Bottom`, `Top`.
    PerSide,
    /// Top side is the `Lid`, the rest `Wall`.
    Cavity,
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    h: f64,
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh and checks its invariants. Boundary edges are detected
    /// from the topology and tagged with `tag(midpoint)`.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        h: f64,
        tag: impl Fn([f64; 2]) -> Marker,
    ) -> Result<Self> {
        let mut counts: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                counts.entry(edge_key(a, b)).or_insert((0, [a, b])).0 += 1;
            }
        }
        let mut boundary_edges: Vec<BoundaryEdge> = counts
            .into_values()
            .filter(|(c, _)| *c == 1)
            .map(|(_, e)| {
                let (p, q) = (vertices[e[0]], vertices[e[1]]);
                let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                BoundaryEdge { vertices: e, marker: tag(mid) }
            })
            .collect();
        boundary_edges.sort_by_key(|e| edge_key(e.vertices[0], e.vertices[1]));
        let mesh = Self { vertices, triangles, boundary_edges, h };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Mesh size of the (parent) triangulation.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Largest triangle diameter.
    pub fn max_diameter(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let p = self.triangle_coords(t);
                (0..3)
                    .map(|k| {
                        let (a, b) = (p[k], p[(k + 1) % 3]);
                        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Unique undirected edges in first-seen order (triangle-major, local edge
    /// `k` joins local vertices `k` and `k + 1`).
    pub fn edges(&self) -> (Vec<[usize; 2]>, HashMap<(usize, usize), usize>) {
        let mut list = Vec::new();
        let mut index = HashMap::with_capacity(self.triangles.len() * 2);
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                index.entry(edge_key(a, b)).or_insert_with(|| {
                    list.push([a.min(b), a.max(b)]);
                    list.len() - 1
                });
            }
        }
        (list, index)
    }

    /// Positive orientation, boundary edges owned by exactly one triangle, and
    /// conformity (every interior edge shared by exactly two triangles).
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(invalid(format!("triangle {t} references a missing vertex")));
            }
            if self.area(t) <= 0.0 {
                return Err(invalid(format!("triangle {t} has non-positive signed area")));
            }
        }
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *counts.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        if let Some((e, c)) = counts.iter().find(|(_, &c)| c > 2) {
            return Err(invalid(format!("edge {e:?} shared by {c} triangles")));
        }
        let boundary: usize = counts.values().filter(|&&c| c == 1).count();
        if boundary != self.boundary_edges.len() {
            return Err(invalid("boundary edge list does not match the topology"));
        }
        for e in &self.boundary_edges {
            if counts.get(&edge_key(e.vertices[0], e.vertices[1])) != Some(&1) {
                return Err(invalid(format!("boundary edge {:?} is not owned by exactly one triangle", e.vertices)));
            }
        }
        Ok(())
    }

    /// Legacy VTK ASCII unstructured grid with POINTS and CELLS only.
    pub fn write_vtk(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        self.write_vtk_geometry(&mut out);
        std::fs::File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }

    pub(crate) fn write_vtk_geometry(&self, out: &mut String) {
        let _ = writeln!(out, "# vtk DataFile Version 3.0");
        let _ = writeln!(out, "mhd-ensemble");
        let _ = writeln!(out, "ASCII");
        let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
        let _ = writeln!(out, "POINTS {} double", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(out, "{:.17e} {:.17e} 0", p[0], p[1]);
        }
        let nt = self.triangles.len();
        let _ = writeln!(out, "CELLS {} {}", nt, 4 * nt);
        for t in &self.triangles {
            let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "CELL_TYPES {nt}");
        for _ in 0..nt {
            let _ = writeln!(out, "5");
        }
    }
}

fn side_tagger(rect: Rect, markers: SideMarkers) -> impl Fn([f64; 2]) -> Marker {
    move |m: [f64; 2]| {
        let tol = 1e-12 * (rect.x1 - rect.x0).max(rect.y1 - rect.y0);
        let side = if (m[1] - rect.y1).abs() < tol {
            Marker::Top
        } else if (m[1] - rect.y0).abs() < tol {
            Marker::Bottom
        } else if (m[0] - rect.x0).abs() < tol {
            Marker::Left
        } else {
            Marker::Right
        };
        match markers {
            SideMarkers::All => Marker::All,
            SideMarkers::PerSide => side,
            SideMarkers::Cavity if side == Marker::Top => Marker::Lid,
            SideMarkers::Cavity => Marker::Wall,
        }
    }
}

/// Uniform `n x n` grid of the rectangle, each cell split along its
/// lower-left to upper-right diagonal. `h = max side length / n`.
pub fn build_structured_square(n: usize, rect: Rect, markers: SideMarkers) -> Result<Mesh> {
    if n == 0 {
        return Err(invalid("subdivisions per side must be at least 1"));
    }
    if !(rect.x1 > rect.x0 && rect.y1 > rect.y0) {
        return Err(invalid("empty rectangle"));
    }
    let (dx, dy) = ((rect.x1 - rect.x0) / n as f64, (rect.y1 - rect.y0) / n as f64);
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // Pin the far sides exactly to the rectangle.
            let x = if i == n { rect.x1 } else { rect.x0 + i as f64 * dx };
            let y = if j == n { rect.y1 } else { rect.y0 + j as f64 * dy };
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let h = (rect.x1 - rect.x0).max(rect.y1 - rect.y0) / n as f64;
    Mesh::from_parts(vertices, triangles, h, side_tagger(rect, markers))
}

/// Lid-driven cavity mesh on `(-1, 1)^2` with `n` cells per side, lid on `y = 1`.
pub fn build_cavity(n: usize) -> Result<Mesh> {
    build_structured_square(n, Rect::new(-1.0, 1.0, -1.0, 1.0), SideMarkers::Cavity)
}

/// Splits every triangle into three around its barycenter. Child `k` of
/// parent `t` is `[v_k, v_{k+1}, c_t]`; barycenters are appended after the
/// parent vertices in triangle order.
pub fn barycentric_refine(mesh: &Mesh) -> Result<Mesh> {
    mesh.validate()?;
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.reserve(mesh.num_triangles());
    let mut triangles = Vec::with_capacity(3 * mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.triangle_coords(t);
        vertices.push([(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]);
        let c = nv + t;
        for k in 0..3 {
            triangles.push([tri[k], tri[(k + 1) % 3], c]);
        }
    }
    let refined = Mesh {
        vertices,
        triangles,
        boundary_edges: mesh.boundary_edges.clone(),
        h: mesh.h,
    };
    refined.validate()?;
    Ok(refined)
}

/// Channel `[0, 40] x [0, 10]` minus the unit step `[5, 6] x [0, 1]`.
///
/// The polygon is meshed with a uniform grid of `ceil(1 / h_target)` cells per
/// unit length (cells inside the step removed), so the step corners are mesh
/// vertices and every triangle diameter is at most `sqrt(2) * h_target`.
/// Markers: `Inlet` on `x = 0`, `Outlet` on `x = 40`, `Wall` elsewhere.
pub fn build_step_channel(h_target: f64) -> Result<Mesh> {
    if !(h_target > 0.0) {
        return Err(invalid("h_target must be positive"));
    }
    if h_target > 1.0 {
        return Err(invalid("h_target above 1 cannot resolve the unit step"));
    }
    const LENGTH: usize = 40;
    const HEIGHT: usize = 10;
    const STEP_X0: usize = 5;
    let per_unit = (1.0 / h_target).ceil() as usize;
    let (nx, ny) = (LENGTH * per_unit, HEIGHT * per_unit);
    let in_step = |i: usize, j: usize| i >= STEP_X0 * per_unit && i < (STEP_X0 + 1) * per_unit && j < per_unit;

    let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    let mut vid = |i: usize, j: usize, vertices: &mut Vec<[f64; 2]>| {
        let k = j * (nx + 1) + i;
        if index[k] == usize::MAX {
            index[k] = vertices.len();
            vertices.push([i as f64 / per_unit as f64, j as f64 / per_unit as f64]);
        }
        index[k]
    };
    for j in 0..ny {
        for i in 0..nx {
            if in_step(i, j) {
                continue;
            }
            let a = vid(i, j, &mut vertices);
            let b = vid(i + 1, j, &mut vertices);
            let c = vid(i + 1, j + 1, &mut vertices);
            let d = vid(i, j + 1, &mut vertices);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let tag = |m: [f64; 2]| {
        if m[0].abs() < 1e-12 {
            Marker::Inlet
        } else if (m[0] - LENGTH as f64).abs() < 1e-12 {
            Marker::Outlet
        } else {
            Marker::Wall
        }
    };
    Mesh::from_parts(vertices, triangles, 1.0 / per_unit as f64, tag)
}
