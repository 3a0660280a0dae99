//! Norms of discrete fields and of their errors against analytic fields,
//! evaluated with cell quadrature.

use rayon::prelude::*;

use crate::error::{invalid, Result};

use super::quadrature::QuadratureRule;
use super::space::{p2_values, CellGeometry, FeSpace, SpaceKind};

fn check(space: &FeSpace, coeffs: &[f64]) -> Result<()> {
    if coeffs.len() != space.dof_count() {
        return Err(invalid(format!("{} coefficients for a space with {} dofs", coeffs.len(), space.dof_count())));
    }
    Ok(())
}

/// Value and gradient (`grad[c] = [d/dx, d/dy]` of component `c`) of a P2
/// field at one barycentric point of cell `t`.
fn p2_eval(space: &FeSpace, geo: &CellGeometry, t: usize, coeffs: &[f64], l: &[f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
    let phi = p2_values(l);
    let g = geo.p2_gradients(l);
    let n = space.num_nodes();
    let mut v = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for (a, &node) in space.cell_nodes(t).iter().enumerate() {
        for c in 0..2 {
            let x = coeffs[c * n + node];
            v[c] += x * phi[a];
            grad[c][0] += x * g[a][0];
            grad[c][1] += x * g[a][1];
        }
    }
    (v, grad)
}

/// Sums `integrand(value, gradient, point) * weight` over all cells.
fn integrate_p2(
    space: &FeSpace,
    coeffs: &[f64],
    integrand: impl Fn([f64; 2], [[f64; 2]; 2], [f64; 2]) -> f64 + Sync,
) -> f64 {
    let rule = QuadratureRule::default();
    let mesh = space.mesh();
    (0..space.num_cells())
        .into_par_iter()
        .map(|t| {
            let geo = CellGeometry::of(mesh, t);
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(l, w)| {
                    let (v, g) = p2_eval(space, &geo, t, coeffs, l);
                    w * geo.area * integrand(v, g, geo.point(l))
                })
                .sum::<f64>()
        })
        // fixed-order reduction
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

pub fn norm_l2(space: &FeSpace, coeffs: &[f64]) -> Result<f64> {
    check(space, coeffs)?;
    match space.kind() {
        SpaceKind::VectorP2 => Ok(integrate_p2(space, coeffs, |v, _, _| v[0] * v[0] + v[1] * v[1]).sqrt()),
        SpaceKind::ScalarP1Disc => {
            let mesh = space.mesh();
            let s: f64 = (0..space.num_cells())
                .map(|t| {
                    let d = space.cell_nodes(t);
                    let (a, b, c) = (coeffs[d[0]], coeffs[d[1]], coeffs[d[2]]);
                    mesh.area(t) / 6.0 * (a * a + b * b + c * c + a * b + b * c + c * a)
                })
                .sum();
            Ok(s.sqrt())
        }
    }
}

fn require_p2(space: &FeSpace) -> Result<()> {
    if space.kind() != SpaceKind::VectorP2 {
        return Err(invalid("operation defined for the vector P2 space"));
    }
    Ok(())
}

/// `||grad u||`
pub fn seminorm_h1(space: &FeSpace, coeffs: &[f64]) -> Result<f64> {
    require_p2(space)?;
    check(space, coeffs)?;
    Ok(integrate_p2(space, coeffs, |_, g, _| g.iter().flatten().map(|x| x * x).sum()).sqrt())
}

/// `sqrt(||u||^2 + ||grad u||^2)`
pub fn norm_h1(space: &FeSpace, coeffs: &[f64]) -> Result<f64> {
    require_p2(space)?;
    check(space, coeffs)?;
    Ok(integrate_p2(space, coeffs, |v, g, _| v[0] * v[0] + v[1] * v[1] + g.iter().flatten().map(|x| x * x).sum::<f64>()).sqrt())
}

/// `||div u||`
pub fn divergence_l2(space: &FeSpace, coeffs: &[f64]) -> Result<f64> {
    require_p2(space)?;
    check(space, coeffs)?;
    Ok(integrate_p2(space, coeffs, |_, g, _| (g[0][0] + g[1][1]).powi(2)).sqrt())
}

/// Errors of a P2 field against an analytic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

impl ErrorNorms {
    pub fn h1(&self) -> f64 {
        (self.l2 * self.l2 + self.h1_semi * self.h1_semi).sqrt()
    }
}

/// `exact(x)` returns the value and the gradient `[[du/dx, du/dy], [dv/dx, dv/dy]]`.
pub fn error_against(
    space: &FeSpace,
    coeffs: &[f64],
    exact: impl Fn([f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) + Sync,
) -> Result<ErrorNorms> {
    require_p2(space)?;
    check(space, coeffs)?;
    let l2 = integrate_p2(space, coeffs, |v, _, x| {
        let (e, _) = exact(x);
        (v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2)
    });
    let semi = integrate_p2(space, coeffs, |_, g, x| {
        let (_, eg) = exact(x);
        (0..2).flat_map(|c| (0..2).map(move |d| (c, d))).map(|(c, d)| (g[c][d] - eg[c][d]).powi(2)).sum()
    });
    Ok(ErrorNorms { l2: l2.sqrt(), h1_semi: semi.sqrt() })
}

/// Nodal interpolant of a vector field at time `t`.
pub fn interpolate(space: &FeSpace, f: impl Fn(f64, f64, f64) -> [f64; 2], t: f64) -> Result<Vec<f64>> {
    require_p2(space)?;
    let n = space.num_nodes();
    let mut out = vec![0.0; 2 * n];
    for (node, p) in space.node_coords().iter().enumerate() {
        let v = f(p[0], p[1], t);
        out[node] = v[0];
        out[n + node] = v[1];
    }
    Ok(out)
}

/// Nodal interpolant of a scalar field into the discontinuous P1 space.
pub fn interpolate_scalar(space: &FeSpace, f: impl Fn(f64, f64, f64) -> f64, t: f64) -> Result<Vec<f64>> {
    if space.kind() != SpaceKind::ScalarP1Disc {
        return Err(invalid("scalar interpolation targets the discontinuous P1 space"));
    }
    Ok(space.node_coords().iter().map(|p| f(p[0], p[1], t)).collect())
}

/// Integral of a discontinuous P1 field.
pub fn integral_p1_disc(space: &FeSpace, coeffs: &[f64]) -> Result<f64> {
    if space.kind() != SpaceKind::ScalarP1Disc {
        return Err(invalid("expected the discontinuous P1 space"));
    }
    check(space, coeffs)?;
    let mesh = space.mesh();
    Ok((0..space.num_cells())
        .map(|t| {
            let d = space.cell_nodes(t);
            mesh.area(t) * (coeffs[d[0]] + coeffs[d[1]] + coeffs[d[2]]) / 3.0
        })
        .sum())
}
