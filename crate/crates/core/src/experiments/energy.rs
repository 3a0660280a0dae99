//! Energy test: manufactured initial data, no forcing and homogeneous
//! Dirichlet data, so the discrete energy may only decay.

use crate::ensemble::{EnsembleConfig, MemberParams};
use crate::error::Result;
use crate::stepper::{verify_stability_bound, EnsembleSolver, RunReport, StabilityCheck};

use super::convergence::unit_square_discretization;
use super::mms::{Mms, MmsProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTest {
    pub n: usize,
    pub dt: f64,
    pub end_time: f64,
    pub eps: f64,
    pub mu: f64,
    pub members: Vec<MemberParams>,
}

#[derive(Debug, Clone)]
pub struct EnergyOutcome {
    pub report: RunReport,
    pub stability: Vec<StabilityCheck>,
}

impl EnergyOutcome {
    /// Largest increase `E^{n+1} - E^n` relative to `E^0` (negative when
    /// the energy decreases at every step).
    pub fn max_relative_increase(&self) -> f64 {
        let e = &self.report.energy;
        let e0 = e.first().copied().unwrap_or(0.0);
        e.windows(2).map(|w| (w[1] - w[0]) / e0).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_dissipative(&self, tol: f64) -> bool {
        self.max_relative_increase() <= tol
    }
}

pub fn run_energy_test(test: &EnergyTest) -> Result<EnergyOutcome> {
    let problem = MmsProblem::unforced(Mms::new(test.eps, test.members.clone())?);
    let config = EnsembleConfig {
        s: 1.0,
        mu: test.mu,
        dt: test.dt,
        end_time: test.end_time,
        eps: test.eps,
        members: test.members.clone(),
        seed: 0,
    };
    let disc = unit_square_discretization(test.n)?;
    let mut solver = EnsembleSolver::new(disc, config, &problem)?;
    let (report, _) = solver.run(|_, _, _| Ok(()))?;
    let stability = verify_stability_bound(&report)?;
    Ok(EnergyOutcome { report, stability })
}
