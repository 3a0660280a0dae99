//! Regularized lid-driven cavity on `(-1, 1)^2`.

use std::sync::Arc;

use crate::ensemble::{elsasser_point, perturbation_factor, sample_viscosities, EnsembleConfig, MemberParams, Sampling, ViscosityRanges};
use crate::error::{invalid, Result};
use crate::mesh::{barycentric_refine, build_cavity, Marker};
use crate::stepper::{Discretization, EnsembleSolver, Problem, RunReport, StepKind};

use super::output::primitive_fields;

/// Lid `u = c_j ((1 - x^2)^2, 0)`, no slip elsewhere, `B = c_j (0, 1)` on
/// the whole boundary; the flow starts from rest without a magnetic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityProblem {
    pub s: f64,
    pub eps: f64,
}

impl CavityProblem {
    fn pick(kind: StepKind, (v, w): ([f64; 2], [f64; 2])) -> [f64; 2] {
        match kind {
            StepKind::V => v,
            StepKind::W => w,
        }
    }
}

impl Problem for CavityProblem {
    fn initial(&self, _kind: StepKind, _member: usize, _x: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }

    fn boundary(&self, kind: StepKind, member: usize, _t: f64, x: [f64; 2], marker: Marker) -> [f64; 2] {
        let c = perturbation_factor(member + 1, self.eps);
        let u = match marker {
            Marker::Lid => [c * (1.0 - x[0] * x[0]).powi(2), 0.0],
            _ => [0.0; 2],
        };
        Self::pick(kind, elsasser_point(u, [0.0, c], self.s))
    }
}

/// Viscosities from Reynolds numbers, `nu = 2 / Re` (lid speed 1, cavity width 2).
pub fn members_from_reynolds(re: &[f64], nu_m: &[f64]) -> Result<Vec<MemberParams>> {
    if re.len() != nu_m.len() {
        return Err(invalid("one magnetic diffusivity per Reynolds number is required"));
    }
    re.iter().zip(nu_m).map(|(&r, &m)| MemberParams::new(2.0 / r, m)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavitySetup {
    /// Cells per side of `(-1, 1)^2` before refinement (`h = 2/n`).
    pub n: usize,
    pub dt: f64,
    pub end_time: f64,
    pub s: f64,
    pub eps: f64,
    pub mu: f64,
    pub reynolds: [f64; 2],
    pub nu_m: [f64; 2],
    pub members: usize,
    pub sampling: Sampling,
}

impl CavitySetup {
    /// Reynolds numbers and diffusivities drawn from the configured ranges.
    pub fn sample_members(&self) -> Result<Vec<MemberParams>> {
        let draws = sample_viscosities(ViscosityRanges { nu: self.reynolds, nu_m: self.nu_m }, self.members, self.sampling)?;
        let re: Vec<f64> = draws.iter().map(|d| d.nu).collect();
        let nu_m: Vec<f64> = draws.iter().map(|d| d.nu_m).collect();
        members_from_reynolds(&re, &nu_m)
    }
}

pub struct CavityOutcome {
    pub report: RunReport,
    pub disc: Arc<Discretization>,
    /// Ensemble mean velocity and magnetic field at the end time.
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

/// Runs the cavity; `observer(step, t, u_mean, b_mean)` sees every level.
pub fn run_cavity(
    setup: &CavitySetup,
    mut observer: impl FnMut(usize, f64, &Arc<Discretization>, &[f64], &[f64]) -> Result<()>,
) -> Result<CavityOutcome> {
    let members = setup.sample_members()?;
    let problem = CavityProblem { s: setup.s, eps: setup.eps };
    let config = EnsembleConfig {
        s: setup.s,
        mu: setup.mu,
        dt: setup.dt,
        end_time: setup.end_time,
        eps: setup.eps,
        members,
        seed: 0,
    };
    let mesh = Arc::new(barycentric_refine(&build_cavity(setup.n)?)?);
    let disc = Arc::new(Discretization::new(mesh)?);
    let mut solver = EnsembleSolver::new(disc.clone(), config, &problem)?;
    let (report, state) = solver.run(|step, t, st| {
        let (u, b) = primitive_fields(st.mean_v(), st.mean_w(), setup.s)?;
        observer(step, t, &disc, &u, &b)
    })?;
    let (u, b) = primitive_fields(state.mean_v(), state.mean_w(), setup.s)?;
    Ok(CavityOutcome { report, disc, u, b })
}
