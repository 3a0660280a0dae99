//! Operator assembly for the vector P2 velocity space and its coupling to the
//! discontinuous P1 pressure space.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::sparse::SparseMatrix;

use super::quadrature::QuadratureRule;
use super::space::{p2_values, CellGeometry, CellQuadrature, FeSpace, SpaceKind};

/// Form of the convection term `b(beta, u, chi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvectionForm {
    /// `(beta . grad u, chi)`
    #[default]
    Standard,
    /// `((beta . grad u, chi) - (beta . grad chi, u)) / 2`
    SkewSymmetric,
}

type Local = [[f64; 6]; 6];

/// Cached quadrature data and sparsity pattern for a vector P2 space.
///
/// Every velocity-block operator shares one block-diagonal pattern (the two
/// components never couple), so matrices from one assembler can be combined
/// entrywise.
#[derive(Debug, Clone)]
pub struct Assembler {
    space: Arc<FeSpace>,
    rule: QuadratureRule,
    cells: Vec<CellQuadrature>,
    basis: Vec<[f64; 6]>,
    pattern: SparseMatrix,
    /// `positions[t * 36 + 6 * a + b]` is the CSR slot of `(node_a, node_b)` in the
    /// x-block; the y-block slot is `y_positions` at the same index.
    positions: Vec<usize>,
    y_positions: Vec<usize>,
}

impl Assembler {
    pub fn new(space: Arc<FeSpace>, rule: QuadratureRule) -> Result<Self> {
        if space.kind() != SpaceKind::VectorP2 {
            return Err(invalid("assembler requires a vector P2 space"));
        }
        let mesh = space.mesh().clone();
        let cells: Vec<CellQuadrature> = (0..space.num_cells()).into_par_iter().map(|t| CellQuadrature::new(&mesh, t, &rule)).collect();
        let basis = rule.points.iter().map(p2_values).collect();

        let n = space.dof_count();
        let mut triplets = Vec::with_capacity(space.num_cells() * 72);
        for t in 0..space.num_cells() {
            let nodes = space.cell_nodes(t);
            for c in 0..2 {
                for &a in nodes {
                    for &b in nodes {
                        triplets.push((space.dof(a, c), space.dof(b, c), 0.0));
                    }
                }
            }
        }
        let pattern = SparseMatrix::from_triplets(n, n, triplets)?;
        let slot = |i: usize, j: usize| {
            let (cols, _) = pattern.row(i);
            pattern.row_offsets()[i] + cols.binary_search(&j).expect("entry in pattern")
        };
        let mut positions = Vec::with_capacity(space.num_cells() * 36);
        let mut y_positions = Vec::with_capacity(space.num_cells() * 36);
        for t in 0..space.num_cells() {
            let nodes = space.cell_nodes(t);
            for &a in nodes {
                for &b in nodes {
                    positions.push(slot(space.dof(a, 0), space.dof(b, 0)));
                    y_positions.push(slot(space.dof(a, 1), space.dof(b, 1)));
                }
            }
        }
        Ok(Self { space, rule, cells, basis, pattern, positions, y_positions })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn num_quadrature_points(&self) -> usize {
        self.rule.len()
    }

    /// Physical quadrature points, cell-major.
    pub fn quadrature_points(&self) -> Vec<[f64; 2]> {
        self.cells.iter().flat_map(|c| c.points.iter().copied()).collect()
    }

    pub fn cell_geometry(&self, t: usize) -> &CellGeometry {
        &self.cells[t].geometry
    }

    /// Identical scalar kernel on both components.
    fn assemble_blocks(&self, kernel: impl Fn(usize, &CellQuadrature) -> Local + Sync) -> SparseMatrix {
        let locals: Vec<Local> = self.cells.par_iter().enumerate().map(|(t, c)| kernel(t, c)).collect();
        let mut out = self.pattern.clone();
        let values = out.values_mut();
        for (t, local) in locals.iter().enumerate() {
            let base = t * 36;
            for a in 0..6 {
                for b in 0..6 {
                    let k = base + 6 * a + b;
                    values[self.positions[k]] += local[a][b];
                    values[self.y_positions[k]] += local[a][b];
                }
            }
        }
        out
    }

    pub fn mass(&self) -> SparseMatrix {
        self.assemble_blocks(|_, c| self.local_mass(c))
    }

    fn local_mass(&self, c: &CellQuadrature) -> Local {
        let mut m = [[0.0; 6]; 6];
        for (q, phi) in self.basis.iter().enumerate() {
            for a in 0..6 {
                for b in 0..6 {
                    m[a][b] += c.jxw[q] * phi[a] * phi[b];
                }
            }
        }
        m
    }

    fn check_coefficient(&self, coeff: &[f64]) -> Result<()> {
        let expected = self.cells.len() * self.rule.len();
        if coeff.len() != expected {
            return Err(invalid(format!("coefficient has {} values, expected {expected}", coeff.len())));
        }
        if let Some((k, v)) = coeff.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(invalid(format!("negative or non-finite diffusion coefficient {v} at quadrature point {k}")));
        }
        Ok(())
    }

    /// `K_ab = int coeff grad phi_a : grad phi_b`, `coeff` sampled at the
    /// quadrature points (cell-major).
    pub fn stiffness(&self, coeff: &[f64]) -> Result<SparseMatrix> {
        self.check_coefficient(coeff)?;
        let nq = self.rule.len();
        Ok(self.assemble_blocks(|t, c| self.local_stiffness(c, |q| coeff[t * nq + q])))
    }

    pub fn stiffness_const(&self, coeff: f64) -> Result<SparseMatrix> {
        if !(coeff >= 0.0) {
            return Err(invalid(format!("negative diffusion coefficient {coeff}")));
        }
        Ok(self.assemble_blocks(|_, c| self.local_stiffness(c, |_| coeff)))
    }

    fn local_stiffness(&self, c: &CellQuadrature, coeff: impl Fn(usize) -> f64) -> Local {
        let mut k = [[0.0; 6]; 6];
        for (q, g) in c.grads.iter().enumerate() {
            let s = c.jxw[q] * coeff(q);
            if s == 0.0 {
                continue;
            }
            for a in 0..6 {
                for b in 0..6 {
                    k[a][b] += s * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
        k
    }

    fn check_field(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.space.dof_count() {
            return Err(invalid(format!(
                "field has {} coefficients, space has {}",
                field.len(),
                self.space.dof_count()
            )));
        }
        Ok(())
    }

    /// Field values at the quadrature points of cell `t`.
    fn cell_values(&self, t: usize, field: &[f64]) -> Vec<[f64; 2]> {
        let nodes = self.space.cell_nodes(t);
        let n = self.space.num_nodes();
        self.basis
            .iter()
            .map(|phi| {
                let mut v = [0.0; 2];
                for (a, &node) in nodes.iter().enumerate() {
                    v[0] += phi[a] * field[node];
                    v[1] += phi[a] * field[n + node];
                }
                v
            })
            .collect()
    }

    /// Values of a P2 field at every quadrature point, cell-major.
    pub fn values_at_quadrature(&self, field: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.check_field(field)?;
        Ok((0..self.cells.len()).into_par_iter().flat_map_iter(|t| self.cell_values(t, field)).collect())
    }

    /// `N_ab = int (beta . grad phi_b) . phi_a`.
    pub fn convection(&self, beta: &[f64], form: ConvectionForm) -> Result<SparseMatrix> {
        self.check_field(beta)?;
        Ok(self.assemble_blocks(|t, c| self.local_convection(c, &self.cell_values(t, beta), form)))
    }

    fn local_convection(&self, c: &CellQuadrature, beta: &[[f64; 2]], form: ConvectionForm) -> Local {
        let mut n = [[0.0; 6]; 6];
        for (q, (phi, g)) in self.basis.iter().zip(&c.grads).enumerate() {
            let w = c.jxw[q];
            let adv: [f64; 6] = std::array::from_fn(|b| beta[q][0] * g[b][0] + beta[q][1] * g[b][1]);
            for a in 0..6 {
                for b in 0..6 {
                    n[a][b] += w * phi[a] * adv[b];
                }
            }
        }
        if form == ConvectionForm::SkewSymmetric {
            let mut s = [[0.0; 6]; 6];
            for a in 0..6 {
                for b in 0..6 {
                    s[a][b] = 0.5 * (n[a][b] - n[b][a]);
                }
            }
            return s;
        }
        n
    }

    /// Single-pass `mass_coef * M + N(beta) + K(coeff)`. Agrees with the sum of
    /// the separately assembled operators up to rounding.
    pub fn velocity_block(&self, mass_coef: f64, beta: &[f64], form: ConvectionForm, coeff: &[f64]) -> Result<SparseMatrix> {
        self.check_field(beta)?;
        self.check_coefficient(coeff)?;
        let nq = self.rule.len();
        Ok(self.assemble_blocks(|t, c| {
            let m = self.local_mass(c);
            let n = self.local_convection(c, &self.cell_values(t, beta), form);
            let k = self.local_stiffness(c, |q| coeff[t * nq + q]);
            let mut out = [[0.0; 6]; 6];
            for a in 0..6 {
                for b in 0..6 {
                    out[a][b] = mass_coef * m[a][b] + n[a][b] + k[a][b];
                }
            }
            out
        }))
    }

    /// `(N(beta) u)_a = int (beta . grad u) . phi_a` without forming the matrix.
    pub fn convection_action(&self, beta: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_field(beta)?;
        self.check_field(u)?;
        let n = self.space.num_nodes();
        let locals: Vec<[[f64; 6]; 2]> = self
            .cells
            .par_iter()
            .enumerate()
            .map(|(t, c)| {
                let nodes = self.space.cell_nodes(t);
                let b = self.cell_values(t, beta);
                let mut out = [[0.0; 6]; 2];
                for (q, (phi, g)) in self.basis.iter().zip(&c.grads).enumerate() {
                    let mut grad_u = [[0.0; 2]; 2];
                    for (a, &node) in nodes.iter().enumerate() {
                        for comp in 0..2 {
                            let coef = u[comp * n + node];
                            grad_u[comp][0] += coef * g[a][0];
                            grad_u[comp][1] += coef * g[a][1];
                        }
                    }
                    for comp in 0..2 {
                        let adv = b[q][0] * grad_u[comp][0] + b[q][1] * grad_u[comp][1];
                        for a in 0..6 {
                            out[comp][a] += c.jxw[q] * adv * phi[a];
                        }
                    }
                }
                out
            })
            .collect();
        let mut result = vec![0.0; 2 * n];
        for (t, local) in locals.iter().enumerate() {
            for (a, &node) in self.space.cell_nodes(t).iter().enumerate() {
                result[node] += local[0][a];
                result[n + node] += local[1][a];
            }
        }
        Ok(result)
    }

    /// `F_a = int f . phi_a`.
    pub fn load(&self, f: impl Fn([f64; 2]) -> [f64; 2] + Sync) -> Vec<f64> {
        let n = self.space.num_nodes();
        let locals: Vec<[[f64; 6]; 2]> = self
            .cells
            .par_iter()
            .map(|c| {
                let mut out = [[0.0; 6]; 2];
                for (q, phi) in self.basis.iter().enumerate() {
                    let fq = f(c.points[q]);
                    for a in 0..6 {
                        out[0][a] += c.jxw[q] * fq[0] * phi[a];
                        out[1][a] += c.jxw[q] * fq[1] * phi[a];
                    }
                }
                out
            })
            .collect();
        let mut result = vec![0.0; 2 * n];
        for (t, local) in locals.iter().enumerate() {
            for (a, &node) in self.space.cell_nodes(t).iter().enumerate() {
                result[node] += local[0][a];
                result[n + node] += local[1][a];
            }
        }
        result
    }

    /// `B_pa = int rho_p div phi_a` (pressure rows, velocity columns).
    pub fn divergence(&self, pressure: &FeSpace) -> Result<SparseMatrix> {
        if pressure.kind() != SpaceKind::ScalarP1Disc || !Arc::ptr_eq(pressure.mesh(), self.space.mesh()) {
            return Err(invalid("divergence needs a discontinuous P1 space on the same mesh"));
        }
        let mut triplets = Vec::with_capacity(self.cells.len() * 36);
        for (t, c) in self.cells.iter().enumerate() {
            let nodes = self.space.cell_nodes(t);
            let pdofs = pressure.cell_nodes(t);
            let mut local = [[[0.0; 6]; 2]; 3];
            for (q, l) in self.rule.points.iter().enumerate() {
                let g = &c.grads[q];
                for k in 0..3 {
                    for a in 0..6 {
                        local[k][0][a] += c.jxw[q] * l[k] * g[a][0];
                        local[k][1][a] += c.jxw[q] * l[k] * g[a][1];
                    }
                }
            }
            for k in 0..3 {
                for comp in 0..2 {
                    for a in 0..6 {
                        triplets.push((pdofs[k], self.space.dof(nodes[a], comp), local[k][comp][a]));
                    }
                }
            }
        }
        SparseMatrix::from_triplets(pressure.dof_count(), self.space.dof_count(), triplets)
    }
}

/// Mass matrix of either space with the default quadrature.
pub fn assemble_mass(space: &Arc<FeSpace>) -> Result<SparseMatrix> {
    match space.kind() {
        SpaceKind::VectorP2 => Ok(Assembler::new(space.clone(), QuadratureRule::default())?.mass()),
        SpaceKind::ScalarP1Disc => {
            let mesh = space.mesh();
            let mut triplets = Vec::with_capacity(9 * space.num_cells());
            for t in 0..space.num_cells() {
                let area = mesh.area(t);
                let dofs = space.cell_nodes(t);
                for a in 0..3 {
                    for b in 0..3 {
                        let m = if a == b { area / 6.0 } else { area / 12.0 };
                        triplets.push((dofs[a], dofs[b], m));
                    }
                }
            }
            SparseMatrix::from_triplets(space.dof_count(), space.dof_count(), triplets)
        }
    }
}

pub fn assemble_stiffness(space: &Arc<FeSpace>, coeff: &[f64]) -> Result<SparseMatrix> {
    Assembler::new(space.clone(), QuadratureRule::default())?.stiffness(coeff)
}

pub fn assemble_convection(space: &Arc<FeSpace>, beta: &[f64], form: ConvectionForm) -> Result<SparseMatrix> {
    Assembler::new(space.clone(), QuadratureRule::default())?.convection(beta, form)
}

pub fn assemble_divergence(velocity: &Arc<FeSpace>, pressure: &FeSpace) -> Result<SparseMatrix> {
    Assembler::new(velocity.clone(), QuadratureRule::default())?.divergence(pressure)
}

/// Scalar P1 element matrices on one triangle (used by tests and the
/// discontinuous pressure space).
pub fn p1_local_matrices(p: [[f64; 2]; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let g = CellGeometry::new(p);
    let mut mass = [[0.0; 3]; 3];
    let mut stiff = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            mass[a][b] = g.area * if a == b { 1.0 / 6.0 } else { 1.0 / 12.0 };
            stiff[a][b] = g.area * (g.grad_lambda[a][0] * g.grad_lambda[b][0] + g.grad_lambda[a][1] * g.grad_lambda[b][1]);
        }
    }
    (mass, stiff)
}
