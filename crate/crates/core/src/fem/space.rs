use std::sync::Arc;

use crate::mesh::{Marker, Mesh};

use super::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Continuous piecewise quadratics, two components.
    VectorP2,
    /// Discontinuous piecewise linears, one component.
    ScalarP1Disc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryNode {
    pub node: usize,
    pub marker: Marker,
}

/// A finite-element space on a shared mesh.
///
/// `VectorP2`: scalar nodes are the mesh vertices followed by one midpoint
/// node per edge; the local node order on a cell is `v0, v1, v2, m01, m12,
/// m20`. Global dofs are component-blocked: `dof = component * num_nodes +
/// node`, so the local dof list of a cell is the six x-dofs followed by the
/// six y-dofs.
///
/// `ScalarP1Disc`: three dofs per triangle, `dof = 3 * t + k` for the
/// barycentric function of local vertex `k`.
#[derive(Debug, Clone)]
pub struct FeSpace {
    kind: SpaceKind,
    mesh: Arc<Mesh>,
    num_nodes: usize,
    cell_nodes: Vec<usize>,
    node_coords: Vec<[f64; 2]>,
    boundary_nodes: Vec<BoundaryNode>,
}

impl FeSpace {
    pub fn vector_p2(mesh: Arc<Mesh>) -> Self {
        let (edges, edge_index) = mesh.edges();
        let nv = mesh.num_vertices();
        let mut node_coords = mesh.vertices().to_vec();
        node_coords.extend(edges.iter().map(|&[a, b]| {
            let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
            [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
        }));
        let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
        let mut cell_nodes = Vec::with_capacity(6 * mesh.num_triangles());
        for &[a, b, c] in mesh.triangles() {
            cell_nodes.extend_from_slice(&[
                a,
                b,
                c,
                nv + edge_index[&key(a, b)],
                nv + edge_index[&key(b, c)],
                nv + edge_index[&key(c, a)],
            ]);
        }

        // Walls win at corners shared by differently tagged edges.
        let mut tag: Vec<Option<Marker>> = vec![None; node_coords.len()];
        let mut set = |node: usize, m: Marker| {
            tag[node] = match tag[node] {
                Some(old) if old <= m => Some(old),
                _ => Some(m),
            };
        };
        for e in mesh.boundary_edges() {
            let [a, b] = e.vertices;
            set(a, e.marker);
            set(b, e.marker);
            set(nv + edge_index[&key(a, b)], e.marker);
        }
        let boundary_nodes = tag
            .iter()
            .enumerate()
            .filter_map(|(node, m)| m.map(|marker| BoundaryNode { node, marker }))
            .collect();

        Self {
            kind: SpaceKind::VectorP2,
            num_nodes: node_coords.len(),
            mesh,
            cell_nodes,
            node_coords,
            boundary_nodes,
        }
    }

    pub fn scalar_p1_disc(mesh: Arc<Mesh>) -> Self {
        let nt = mesh.num_triangles();
        let node_coords = mesh.triangles().iter().flat_map(|tri| tri.map(|v| mesh.vertices()[v])).collect();
        Self {
            kind: SpaceKind::ScalarP1Disc,
            num_nodes: 3 * nt,
            cell_nodes: (0..3 * nt).collect(),
            node_coords,
            boundary_nodes: Vec::new(),
            mesh,
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn components(&self) -> usize {
        match self.kind {
            SpaceKind::VectorP2 => 2,
            SpaceKind::ScalarP1Disc => 1,
        }
    }

    /// Local basis functions per component on one cell.
    pub fn local_size(&self) -> usize {
        match self.kind {
            SpaceKind::VectorP2 => 6,
            SpaceKind::ScalarP1Disc => 3,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn dof_count(&self) -> usize {
        self.components() * self.num_nodes
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_triangles()
    }

    pub fn cell_nodes(&self, t: usize) -> &[usize] {
        let n = self.local_size();
        &self.cell_nodes[n * t..n * (t + 1)]
    }

    pub fn dof(&self, node: usize, component: usize) -> usize {
        component * self.num_nodes + node
    }

    /// Local dofs in the documented order (component-major).
    pub fn cell_dofs(&self, t: usize) -> Vec<usize> {
        (0..self.components())
            .flat_map(|c| self.cell_nodes(t).iter().map(move |&n| c * self.num_nodes + n))
            .collect()
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.node_coords
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary_nodes
    }

    /// Both component dofs of every boundary node, x-dofs first.
    pub fn boundary_dofs(&self) -> Vec<usize> {
        (0..self.components())
            .flat_map(|c| self.boundary_nodes.iter().map(move |b| self.dof(b.node, c)))
            .collect()
    }
}

/// Affine cell data: area, constant barycentric gradients and vertices.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
    pub vertices: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let grad_lambda = [
            [(p[1][1] - p[2][1]) / two_area, (p[2][0] - p[1][0]) / two_area],
            [(p[2][1] - p[0][1]) / two_area, (p[0][0] - p[2][0]) / two_area],
            [(p[0][1] - p[1][1]) / two_area, (p[1][0] - p[0][0]) / two_area],
        ];
        Self { area: 0.5 * two_area, grad_lambda, vertices: p }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        Self::new(mesh.triangle_coords(t))
    }

    pub fn point(&self, lambda: &[f64; 3]) -> [f64; 2] {
        let p = &self.vertices;
        [
            lambda[0] * p[0][0] + lambda[1] * p[1][0] + lambda[2] * p[2][0],
            lambda[0] * p[0][1] + lambda[1] * p[1][1] + lambda[2] * p[2][1],
        ]
    }

    /// P2 basis gradients at barycentric point `l`.
    pub fn p2_gradients(&self, l: &[f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_lambda;
        let mut out = [[0.0; 2]; 6];
        for i in 0..3 {
            let s = 4.0 * l[i] - 1.0;
            out[i] = [s * g[i][0], s * g[i][1]];
        }
        for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
            out[3 + k] = [4.0 * (l[b] * g[a][0] + l[a] * g[b][0]), 4.0 * (l[b] * g[a][1] + l[a] * g[b][1])];
        }
        out
    }
}

pub fn p2_values(l: &[f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Per-cell quadrature data shared by the assembly loops.
#[derive(Debug, Clone)]
pub(crate) struct CellQuadrature {
    pub geometry: CellGeometry,
    /// `area * w_q`
    pub jxw: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub grads: Vec<[[f64; 2]; 6]>,
}

impl CellQuadrature {
    pub fn new(mesh: &Mesh, t: usize, rule: &QuadratureRule) -> Self {
        let geometry = CellGeometry::of(mesh, t);
        Self {
            jxw: rule.weights.iter().map(|w| w * geometry.area).collect(),
            points: rule.points.iter().map(|l| geometry.point(l)).collect(),
            grads: rule.points.iter().map(|l| geometry.p2_gradients(l)).collect(),
            geometry,
        }
    }
}
