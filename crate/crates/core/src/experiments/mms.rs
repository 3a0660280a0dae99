//! Manufactured solution on the unit square.
//!
//! With `a(t) = 1 + e^t` the base fields are
//!
//! ```text
//! v = (cos y + a sin y, sin x + a cos x)
//! w = (cos y - a sin y, sin x - a cos x)
//! q = r = a sin(x + y)
//! ```
//!
//! Member `j` (zero-based here) uses `c_j v` and `c_j w` with the
//! perturbation factor of the one-based index, while the pressures stay
//! unscaled. Both base fields are divergence free and satisfy
//! `Laplace(v) = -v`, `Laplace(w) = -w`, which keeps the forcing closed-form.

use crate::ensemble::{perturbation_factor, MemberParams};
use crate::error::{invalid, Result};
use crate::mesh::Marker;
use crate::stepper::{Problem, StepKind};

/// `+1` for the `v` family, `-1` for `w`.
fn sign(kind: StepKind) -> f64 {
    match kind {
        StepKind::V => 1.0,
        StepKind::W => -1.0,
    }
}

fn amplitude(t: f64) -> f64 {
    1.0 + t.exp()
}

/// Unscaled base field of one family.
pub fn base_field(kind: StepKind, x: [f64; 2], t: f64) -> [f64; 2] {
    let (s, a) = (sign(kind), amplitude(t));
    [x[1].cos() + s * a * x[1].sin(), x[0].sin() + s * a * x[0].cos()]
}

/// Gradient `[[d/dx, d/dy] of component 0, [d/dx, d/dy] of component 1]`.
pub fn base_gradient(kind: StepKind, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
    let (s, a) = (sign(kind), amplitude(t));
    [
        [0.0, -x[1].sin() + s * a * x[1].cos()],
        [x[0].cos() - s * a * x[0].sin(), 0.0],
    ]
}

fn base_time_derivative(kind: StepKind, x: [f64; 2], t: f64) -> [f64; 2] {
    let s = sign(kind);
    [s * t.exp() * x[1].sin(), s * t.exp() * x[0].cos()]
}

/// Pressure of either family.
pub fn pressure(x: [f64; 2], t: f64) -> f64 {
    amplitude(t) * (x[0] + x[1]).sin()
}

fn pressure_gradient(x: [f64; 2], t: f64) -> [f64; 2] {
    let g = amplitude(t) * (x[0] + x[1]).cos();
    [g, g]
}

fn other(kind: StepKind) -> StepKind {
    match kind {
        StepKind::V => StepKind::W,
        StepKind::W => StepKind::V,
    }
}

/// The manufactured ensemble: member viscosities and the perturbation size.
#[derive(Debug, Clone, PartialEq)]
pub struct Mms {
    pub eps: f64,
    pub members: Vec<MemberParams>,
}

impl Mms {
    pub fn new(eps: f64, members: Vec<MemberParams>) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("at least one member is required"));
        }
        if !eps.is_finite() {
            return Err(invalid("eps must be finite"));
        }
        for m in &members {
            m.validate()?;
        }
        Ok(Self { eps, members })
    }

    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    /// Scale factor of zero-based member `j`.
    pub fn scale(&self, j: usize) -> f64 {
        perturbation_factor(j + 1, self.eps)
    }

    /// Mean of the member scale factors; the ensemble mean of the exact
    /// fields is this times the base field.
    pub fn mean_scale(&self) -> f64 {
        (0..self.num_members()).map(|j| self.scale(j)).sum::<f64>() / self.num_members() as f64
    }

    pub fn exact(&self, kind: StepKind, j: usize, x: [f64; 2], t: f64) -> [f64; 2] {
        let c = self.scale(j);
        base_field(kind, x, t).map(|z| c * z)
    }

    pub fn exact_gradient(&self, kind: StepKind, j: usize, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let c = self.scale(j);
        base_gradient(kind, x, t).map(|row| row.map(|z| c * z))
    }

    /// Forcing of member `j` in the equation of `kind`:
    ///
    /// ```text
    /// f1 = v_t + (w . grad) v - (nu + nu_m)/2 Lap v - (nu - nu_m)/2 Lap w + grad q
    /// ```
    ///
    /// and the mirror image for `f2`.
    pub fn forcing(&self, kind: StepKind, j: usize, x: [f64; 2], t: f64) -> [f64; 2] {
        let m = self.members[j];
        let c = self.scale(j);
        let own = base_field(kind, x, t);
        let adv = base_field(other(kind), x, t);
        let g = base_gradient(kind, x, t);
        let dt = base_time_derivative(kind, x, t);
        let dq = pressure_gradient(x, t);
        let sum = 0.5 * (m.nu + m.nu_m);
        let diff = 0.5 * (m.nu - m.nu_m);
        let mut f = [0.0; 2];
        for k in 0..2 {
            let convection = adv[0] * g[k][0] + adv[1] * g[k][1];
            f[k] = c * dt[k] + c * c * convection + sum * c * own[k] + diff * c * adv[k] + dq[k];
        }
        f
    }

    /// Pointwise residual of the momentum equation of `kind` with the exact
    /// fields substituted, every derivative taken by eighth-order central
    /// differences of step `h`. Used to validate [`Self::forcing`].
    pub fn fd_residual(&self, kind: StepKind, j: usize, x: [f64; 2], t: f64, h: f64) -> [f64; 2] {
        let m = self.members[j];
        let own = |p: [f64; 2], s: f64| self.exact(kind, j, p, s);
        let adv = |p: [f64; 2], s: f64| self.exact(other(kind), j, p, s);
        let shift = |p: [f64; 2], d: usize, offset: f64| {
            let mut q = p;
            q[d] += offset;
            q
        };
        let d1 = |f: &dyn Fn(f64) -> f64| fd_first(f, h);
        let d2 = |f: &dyn Fn(f64) -> f64| fd_second(f, h);
        let a = adv(x, t);
        let mut res = [0.0; 2];
        for k in 0..2 {
            let time = d1(&|s| own(x, t + s)[k]);
            let conv: f64 = (0..2).map(|d| a[d] * d1(&|s| own(shift(x, d, s), t)[k])).sum();
            let lap_own: f64 = (0..2).map(|d| d2(&|s| own(shift(x, d, s), t)[k])).sum();
            let lap_adv: f64 = (0..2).map(|d| d2(&|s| adv(shift(x, d, s), t)[k])).sum();
            let grad_q = d1(&|s| pressure(shift(x, k, s), t));
            let lhs = time + conv - 0.5 * (m.nu + m.nu_m) * lap_own - 0.5 * (m.nu - m.nu_m) * lap_adv + grad_q;
            res[k] = lhs - self.forcing(kind, j, x, t)[k];
        }
        res
    }

    /// Largest FD residual over the given space-time points, members and both
    /// equations.
    pub fn max_fd_residual(&self, points: &[([f64; 2], f64)], members: &[usize], h: f64) -> f64 {
        let mut worst = 0.0f64;
        for &j in members {
            for &(x, t) in points {
                for kind in StepKind::BOTH {
                    let r = self.fd_residual(kind, j, x, t, h);
                    worst = worst.max(r[0].abs()).max(r[1].abs());
                }
            }
        }
        worst
    }
}

const FIRST: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const SECOND: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

/// `f'(0)` from `f(k h)`, `|k| <= 4`; the closure receives the offset `k h`.
fn fd_first(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    FIRST
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k = (i + 1) as f64 * h;
            c * (f(k) - f(-k))
        })
        .sum::<f64>()
        / h
}

fn fd_second(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    let mut s = SECOND[0] * f(0.0);
    for (i, c) in SECOND.iter().enumerate().skip(1) {
        let k = i as f64 * h;
        s += c * (f(k) + f(-k));
    }
    s / (h * h)
}

/// The manufactured problem as seen by the solver.
#[derive(Debug, Clone)]
pub struct MmsProblem {
    pub mms: Mms,
    /// Zero forcing and zero Dirichlet data, with the initial interpolant
    /// zeroed on the boundary so that it lies in the discrete space.
    pub homogeneous: bool,
}

impl MmsProblem {
    pub fn forced(mms: Mms) -> Self {
        Self { mms, homogeneous: false }
    }

    pub fn unforced(mms: Mms) -> Self {
        Self { mms, homogeneous: true }
    }
}

fn on_unit_square_boundary(x: [f64; 2]) -> bool {
    x.iter().any(|&c| c.abs() < 1e-12 || (c - 1.0).abs() < 1e-12)
}

impl Problem for MmsProblem {
    fn initial(&self, kind: StepKind, member: usize, x: [f64; 2]) -> [f64; 2] {
        if self.homogeneous && on_unit_square_boundary(x) {
            return [0.0; 2];
        }
        self.mms.exact(kind, member, x, 0.0)
    }

    fn boundary(&self, kind: StepKind, member: usize, t: f64, x: [f64; 2], _marker: Marker) -> [f64; 2] {
        if self.homogeneous {
            [0.0; 2]
        } else {
            self.mms.exact(kind, member, x, t)
        }
    }

    fn forcing(&self, kind: StepKind, member: usize, t: f64, x: [f64; 2]) -> [f64; 2] {
        if self.homogeneous {
            [0.0; 2]
        } else {
            self.mms.forcing(kind, member, x, t)
        }
    }

    fn has_forcing(&self) -> bool {
        !self.homogeneous
    }
}
