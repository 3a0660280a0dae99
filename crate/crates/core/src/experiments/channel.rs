//! MHD channel flow over a step.

use std::sync::Arc;

use crate::ensemble::{elsasser_point, perturbation_factor, viscosity_stats, EnsembleConfig, MemberParams};
use crate::error::{invalid, Result};
use crate::fem::norm_l2;
use crate::mesh::{barycentric_refine, build_step_channel, Marker};
use crate::stepper::{Discretization, EnsembleSolver, Problem, RunReport, StepKind};

use super::output::primitive_fields;

/// Parabolic profile `y (10 - y) / 25`, equal to 1 at mid-height.
pub fn inflow_profile(y: f64) -> f64 {
    y * (10.0 - y) / 25.0
}

/// Parabolic initial and inflow/outflow velocity, no slip on the walls,
/// `B = c_j (0, 1)` on the whole boundary and no initial magnetic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelProblem {
    pub s: f64,
    pub eps: f64,
}

impl ChannelProblem {
    fn scale(&self, member: usize) -> f64 {
        perturbation_factor(member + 1, self.eps)
    }

    fn elsasser(&self, kind: StepKind, u: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let (v, w) = elsasser_point(u, b, self.s);
        match kind {
            StepKind::V => v,
            StepKind::W => w,
        }
    }
}

impl Problem for ChannelProblem {
    fn initial(&self, kind: StepKind, member: usize, x: [f64; 2]) -> [f64; 2] {
        let c = self.scale(member);
        self.elsasser(kind, [c * inflow_profile(x[1]), 0.0], [0.0; 2])
    }

    fn boundary(&self, kind: StepKind, member: usize, _t: f64, x: [f64; 2], marker: Marker) -> [f64; 2] {
        let c = self.scale(member);
        let u = match marker {
            Marker::Inlet | Marker::Outlet => [c * inflow_profile(x[1]), 0.0],
            _ => [0.0; 2],
        };
        self.elsasser(kind, u, [0.0, c])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSetup {
    /// Mesh width before barycentric refinement, at most 1.
    pub h_target: f64,
    pub dt: f64,
    pub end_time: f64,
    pub s: f64,
    pub mu: f64,
}

pub struct ChannelCase {
    pub label: String,
    pub eps: f64,
    pub report: RunReport,
    /// Ensemble mean velocity and magnetic field at the end time.
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

pub fn channel_discretization(h_target: f64) -> Result<Arc<Discretization>> {
    let mesh = barycentric_refine(&build_step_channel(h_target)?)?;
    Ok(Arc::new(Discretization::new(Arc::new(mesh))?))
}

/// One ensemble run with the given members and perturbation size.
pub fn run_channel_case(
    disc: &Arc<Discretization>,
    setup: &ChannelSetup,
    label: &str,
    eps: f64,
    members: Vec<MemberParams>,
) -> Result<ChannelCase> {
    let problem = ChannelProblem { s: setup.s, eps };
    let config = EnsembleConfig { s: setup.s, mu: setup.mu, dt: setup.dt, end_time: setup.end_time, eps, members, seed: 0 };
    let mut solver = EnsembleSolver::new(disc.clone(), config, &problem)?;
    let (report, state) = solver.run(|step, t, st| {
        if st.v.iter().chain(&st.w).flatten().any(|x| !x.is_finite()) {
            return Err(invalid(format!("non-finite field at step {step} (t = {t})")));
        }
        Ok(())
    })?;
    let (u, b) = primitive_fields(state.mean_v(), state.mean_w(), setup.s)?;
    Ok(ChannelCase { label: label.to_string(), eps, report, u, b })
}

/// Single run at the sample-mean viscosities without perturbation.
pub fn usual_mhd_members(members: &[MemberParams]) -> Result<Vec<MemberParams>> {
    if members.is_empty() {
        return Err(invalid("at least one member is required"));
    }
    let st = viscosity_stats(members);
    Ok(vec![MemberParams::new(st.nu_bar, st.nu_m_bar)?])
}

pub struct ChannelOutcome {
    pub disc: Arc<Discretization>,
    /// One case per requested perturbation size, then the usual MHD run.
    pub cases: Vec<ChannelCase>,
    /// `||u_eps - u_usual||` for each ensemble case, in order.
    pub distances: Vec<f64>,
}

/// Ensemble runs for every `eps` plus the single usual-MHD run.
pub fn run_step_channel(setup: &ChannelSetup, eps_list: &[f64], members: &[MemberParams]) -> Result<ChannelOutcome> {
    let disc = channel_discretization(setup.h_target)?;
    let mut cases = Vec::with_capacity(eps_list.len() + 1);
    for &eps in eps_list {
        log::info!("channel ensemble run, eps = {eps}");
        cases.push(run_channel_case(&disc, setup, &format!("eps_{eps}"), eps, members.to_vec())?);
    }
    log::info!("channel usual MHD run");
    let usual = run_channel_case(&disc, setup, "usual_mhd", 0.0, usual_mhd_members(members)?)?;
    let space = disc.velocity();
    let distances = cases
        .iter()
        .map(|c| {
            let d: Vec<f64> = c.u.iter().zip(&usual.u).map(|(a, b)| a - b).collect();
            norm_l2(space, &d)
        })
        .collect::<Result<Vec<_>>>()?;
    cases.push(usual);
    Ok(ChannelOutcome { disc, cases, distances })
}
