//! Independent oracles shared by the integration tests. The oracles never
//! call the library's assembly, quadrature or solvers; they take only mesh
//! geometry and the dof numbering convention from it. `step_check` runs the
//! library against them.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use mhd_ensemble::ensemble::{EnsembleConfig, MemberParams};
use mhd_ensemble::mesh::{barycentric_refine, build_structured_square, Marker, Mesh, Rect, SideMarkers};
use mhd_ensemble::stepper::{Discretization, EnsembleSolver, Problem, StepKind};
use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

/// Gauss-Legendre nodes and weights on `[0, 1]`, 4 points.
fn gauss4() -> ([f64; 4], [f64; 4]) {
    let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let wa = (18.0 + 30f64.sqrt()) / 36.0;
    let wb = (18.0 - 30f64.sqrt()) / 36.0;
    let x = [-b, -a, a, b].map(|t| 0.5 * (t + 1.0));
    let w = [wb, wa, wa, wb].map(|t| 0.5 * t);
    (x, w)
}

/// Collapsed tensor rule on the reference triangle, exact through degree 7:
/// points `(xi, eta)` and weights summing to 1/2.
fn duffy_rule() -> Vec<([f64; 2], f64)> {
    let (x, w) = gauss4();
    let mut out = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            let u = x[i];
            out.push(([u, x[j] * (1.0 - u)], w[i] * w[j] * (1.0 - u)));
        }
    }
    out
}

fn key(p: [f64; 2]) -> (i64, i64) {
    ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64)
}

/// Monomials `1, x, y, x^2, xy, y^2` about `c` and their gradients.
fn monomials(p: [f64; 2], c: [f64; 2]) -> (Vector6<f64>, [Vector6<f64>; 2]) {
    let (x, y) = (p[0] - c[0], p[1] - c[1]);
    (
        Vector6::new(1.0, x, y, x * x, x * y, y * y),
        [Vector6::new(0.0, 1.0, 0.0, 2.0 * x, y, 0.0), Vector6::new(0.0, 0.0, 1.0, 0.0, x, 2.0 * y)],
    )
}

/// Quadratic Lagrange basis on one physical triangle from an inverted
/// Vandermonde matrix.
struct LocalP2 {
    center: [f64; 2],
    /// Column `i` holds the monomial coefficients of basis `i`.
    coeffs: Matrix6<f64>,
}

impl LocalP2 {
    fn new(nodes: &[[f64; 2]; 6]) -> Self {
        let center = [(nodes[0][0] + nodes[1][0] + nodes[2][0]) / 3.0, (nodes[0][1] + nodes[1][1] + nodes[2][1]) / 3.0];
        let mut v = Matrix6::zeros();
        for (i, p) in nodes.iter().enumerate() {
            let (m, _) = monomials(*p, center);
            for k in 0..6 {
                v[(i, k)] = m[k];
            }
        }
        let coeffs = v.try_inverse().expect("unisolvent nodes");
        Self { center, coeffs }
    }

    fn eval(&self, p: [f64; 2]) -> ([f64; 6], [[f64; 2]; 6]) {
        let (m, g) = monomials(p, self.center);
        let mut val = [0.0; 6];
        let mut grad = [[0.0; 2]; 6];
        for i in 0..6 {
            let col = self.coeffs.column(i);
            val[i] = col.dot(&m);
            grad[i] = [col.dot(&g[0]), col.dot(&g[1])];
        }
        (val, grad)
    }
}

pub struct OracleInput<'a> {
    pub mesh: &'a Mesh,
    /// Velocity node coordinates in the library's numbering.
    pub nodes: &'a [[f64; 2]],
    pub nu: f64,
    pub nu_m: f64,
    pub dt: f64,
    /// Initial data, also used as (time-independent) Dirichlet data.
    pub v0: &'a dyn Fn([f64; 2]) -> [f64; 2],
    pub w0: &'a dyn Fn([f64; 2]) -> [f64; 2],
}

pub struct OracleStep {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
}

fn on_unit_square_boundary(p: [f64; 2]) -> bool {
    p.iter().any(|&c| c.abs() < 1e-12 || (c - 1.0).abs() < 1e-12)
}

/// One step of the decoupled scheme for a single member (`J = 1`, so the
/// eddy viscosity and every fluctuation vanish) on the unit square, built
/// from dense matrices. The pressure is fixed by a zero-mean constraint
/// through a Lagrange multiplier rather than by pinning a dof.
pub fn dense_one_step(inp: &OracleInput) -> OracleStep {
    let n = inp.nodes.len();
    let lookup: HashMap<(i64, i64), usize> = inp.nodes.iter().enumerate().map(|(i, p)| (key(*p), i)).collect();
    let nt = inp.mesh.num_triangles();
    let np = 3 * nt;
    let interp = |f: &dyn Fn([f64; 2]) -> [f64; 2]| {
        let mut out = vec![0.0; 2 * n];
        for (i, p) in inp.nodes.iter().enumerate() {
            let v = f(*p);
            out[i] = v[0];
            out[n + i] = v[1];
        }
        out
    };
    let v0 = interp(inp.v0);
    let w0 = interp(inp.w0);

    let rule = duffy_rule();
    let mut mass = DMatrix::<f64>::zeros(n, n);
    let mut stiff = DMatrix::<f64>::zeros(n, n);
    // convection operators advected by <w>^0 (for v) and <v>^0 (for w)
    let mut conv_by_w = DMatrix::<f64>::zeros(n, n);
    let mut conv_by_v = DMatrix::<f64>::zeros(n, n);
    let mut div = DMatrix::<f64>::zeros(np, 2 * n);
    let mut pmass = DVector::<f64>::zeros(np);

    for t in 0..nt {
        let tri = inp.mesh.triangles()[t];
        let p: Vec<[f64; 2]> = tri.iter().map(|&v| inp.mesh.vertices()[v]).collect();
        let mid = |a: usize, b: usize| [(p[a][0] + p[b][0]) / 2.0, (p[a][1] + p[b][1]) / 2.0];
        let local_nodes = [p[0], p[1], p[2], mid(0, 1), mid(1, 2), mid(2, 0)];
        let idx: Vec<usize> = local_nodes.iter().map(|q| lookup[&key(*q)]).collect();
        let basis = LocalP2::new(&local_nodes);
        let e1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
        let e2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
        let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
        for &([xi, eta], wq) in &rule {
            let x = [p[0][0] + xi * e1[0] + eta * e2[0], p[0][1] + xi * e1[1] + eta * e2[1]];
            let wt = wq * jac;
            let (phi, grad) = basis.eval(x);
            let field = |c: &[f64]| {
                let mut out = [0.0; 2];
                for a in 0..6 {
                    out[0] += c[idx[a]] * phi[a];
                    out[1] += c[n + idx[a]] * phi[a];
                }
                out
            };
            let (bw, bv) = (field(&w0), field(&v0));
            // linear pressure basis: barycentric coordinates
            let psi = [1.0 - xi - eta, xi, eta];
            for a in 0..6 {
                for b in 0..6 {
                    let (i, j) = (idx[a], idx[b]);
                    mass[(i, j)] += wt * phi[a] * phi[b];
                    stiff[(i, j)] += wt * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
                    conv_by_w[(i, j)] += wt * (bw[0] * grad[b][0] + bw[1] * grad[b][1]) * phi[a];
                    conv_by_v[(i, j)] += wt * (bv[0] * grad[b][0] + bv[1] * grad[b][1]) * phi[a];
                }
            }
            for k in 0..3 {
                pmass[3 * t + k] += wt * psi[k];
                for b in 0..6 {
                    for c in 0..2 {
                        div[(3 * t + k, c * n + idx[b])] += wt * psi[k] * grad[b][c];
                    }
                }
            }
        }
    }

    let vec_op = |m: &DMatrix<f64>| {
        let mut out = DMatrix::<f64>::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(m);
        out.view_mut((n, n), (n, n)).copy_from(m);
        out
    };
    let (mv, kv) = (vec_op(&mass), vec_op(&stiff));
    let diffusion = 0.5 * (inp.nu + inp.nu_m);
    let cross = 0.5 * (inp.nu - inp.nu_m);
    let boundary: Vec<usize> = (0..n).filter(|&i| on_unit_square_boundary(inp.nodes[i])).collect();

    let solve = |conv: &DMatrix<f64>, own: &[f64], other: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let a = &mv / inp.dt + vec_op(conv) + &kv * diffusion;
        let own = DVector::from_column_slice(own);
        let other = DVector::from_column_slice(other);
        let rhs_u = &mv * &own / inp.dt - &kv * &other * cross;
        let dim = 2 * n + np + 1;
        let mut s = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        s.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&a);
        s.view_mut((0, 2 * n), (2 * n, np)).copy_from(&(-div.transpose()));
        s.view_mut((2 * n, 0), (np, 2 * n)).copy_from(&(-&div));
        for k in 0..np {
            s[(2 * n + k, dim - 1)] = pmass[k];
            s[(dim - 1, 2 * n + k)] = pmass[k];
        }
        rhs.rows_mut(0, 2 * n).copy_from(&rhs_u);
        for &i in &boundary {
            for c in 0..2 {
                let row = c * n + i;
                s.row_mut(row).fill(0.0);
                s[(row, row)] = 1.0;
                rhs[row] = own[row];
            }
        }
        let x = s.lu().solve(&rhs).expect("nonsingular oracle system");
        (x.rows(0, 2 * n).iter().copied().collect(), x.rows(2 * n, np).iter().copied().collect())
    };
    let (v, q) = solve(&conv_by_w, &v0, &w0);
    let (w, r) = solve(&conv_by_v, &w0, &v0);
    OracleStep { v, w, q, r }
}

/// `f'(0)` by Richardson extrapolation of central differences over the
/// steps `h, h/2, h/4, h/8` (eighth order).
pub fn richardson_first(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    richardson(|k| (f(k) - f(-k)) / (2.0 * k), h)
}

/// `f''(0)`, same extrapolation.
pub fn richardson_second(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    let f0 = f(0.0);
    richardson(|k| (f(k) - 2.0 * f0 + f(-k)) / (k * k), h)
}

fn richardson(d: impl Fn(f64) -> f64, h: f64) -> f64 {
    let mut table: Vec<f64> = (0..4).map(|i| d(h / f64::powi(2.0, i))).collect();
    for level in 1..4 {
        let factor = f64::powi(4.0, level);
        for i in (level as usize..4).rev() {
            table[i] = (factor * table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    table[3]
}

/// The manufactured fields written out independently of the library.
pub mod manufactured {
    pub fn v(x: [f64; 2], t: f64) -> [f64; 2] {
        let a = 1.0 + t.exp();
        [x[1].cos() + a * x[1].sin(), x[0].sin() + a * x[0].cos()]
    }

    pub fn w(x: [f64; 2], t: f64) -> [f64; 2] {
        let a = 1.0 + t.exp();
        [x[1].cos() - a * x[1].sin(), x[0].sin() - a * x[0].cos()]
    }

    pub fn q(x: [f64; 2], t: f64) -> f64 {
        (1.0 + t.exp()) * (x[0] + x[1]).sin()
    }

    /// `1 + (-1)^(j+1) ceil(j/2) eps / 5`, one-based `j`.
    pub fn scale(j: usize, eps: f64) -> f64 {
        let s = if j % 2 == 1 { 1.0 } else { -1.0 };
        1.0 + s * ((j + 1) / 2) as f64 * eps / 5.0
    }
}

/// One library step against the dense oracle on the refined 2x2 square.
pub mod step_check {
    use super::*;

    /// Divergence-free quadratics, so their interpolants carry zero boundary flux.
    fn v0(x: [f64; 2]) -> [f64; 2] {
        [2.0 * x[0] * x[1] + 0.5 * x[0] * x[0] + 1.0, -(x[1] * x[1] + x[0] * x[1])]
    }

    fn w0(x: [f64; 2]) -> [f64; 2] {
        [x[1] - x[0], x[1] - x[0] * x[0]]
    }

    struct Quadratic;

    impl Problem for Quadratic {
        fn initial(&self, kind: StepKind, _member: usize, x: [f64; 2]) -> [f64; 2] {
            match kind {
                StepKind::V => v0(x),
                StepKind::W => w0(x),
            }
        }

        fn boundary(&self, kind: StepKind, member: usize, _t: f64, x: [f64; 2], _marker: Marker) -> [f64; 2] {
            self.initial(kind, member, x)
        }
    }

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    /// Largest relative coefficient difference between one library step and the
    /// dense oracle, over `v`, `w`, `q`, `r`.
    pub fn oracle_discrepancy() -> f64 {
        let mesh = Arc::new(barycentric_refine(&build_structured_square(2, Rect::UNIT, SideMarkers::All).unwrap()).unwrap());
        let disc = Arc::new(Discretization::new(mesh.clone()).unwrap());
        let (nu, nu_m, dt) = (0.01, 0.1, 0.1);
        let config = EnsembleConfig {
            s: 1.0,
            mu: 1.0,
            dt,
            end_time: dt,
            eps: 0.0,
            members: vec![MemberParams::new(nu, nu_m).unwrap()],
            seed: 0,
        };
        let mut solver = EnsembleSolver::new(disc.clone(), config, &Quadratic).unwrap();
        let (_, state) = solver.run(|_, _, _| Ok(())).unwrap();
        let oracle = dense_one_step(&OracleInput {
            mesh: &mesh,
            nodes: disc.velocity().node_coords(),
            nu,
            nu_m,
            dt,
            v0: &v0,
            w0: &w0,
        });
        [
            rel_diff(&state.v[0], &oracle.v),
            rel_diff(&state.w[0], &oracle.w),
            rel_diff(&state.q[0], &oracle.q),
            rel_diff(&state.r[0], &oracle.r),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}
