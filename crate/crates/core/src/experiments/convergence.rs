//! Convergence studies against the manufactured solution.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleConfig, MemberParams};
use crate::error::{invalid, Result};
use crate::fem::error_against;
use crate::mesh::{barycentric_refine, build_structured_square, Rect, SideMarkers};
use crate::sparse::SparseMatrix;
use crate::stepper::{Discretization, EnsembleSolver, RunReport, StepKind};

use super::mms::{base_field, base_gradient, Mms, MmsProblem};

/// `log(e1 / e2) / log(s1 / s2)`.
pub fn compute_rate(e1: f64, e2: f64, s1: f64, s2: f64) -> Result<f64> {
    if !(e1 > 0.0 && e2 > 0.0 && s1 > 0.0 && s2 > 0.0) {
        return Err(invalid(format!("rates need positive inputs, got ({e1}, {e2}, {s1}, {s2})")));
    }
    if s1 == s2 {
        return Err(invalid("rates need two distinct step sizes"));
    }
    Ok((e1 / e2).ln() / (s1 / s2).ln())
}

/// `sqrt(dt * sum_n e_n^2)` over the per-level H1 errors `e_1..e_M`.
pub fn error_norm_21(dt: f64, level_errors_h1: &[f64]) -> f64 {
    (dt * level_errors_h1.iter().map(|e| e * e).sum::<f64>()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    /// Mesh size or time step of this row.
    pub step: f64,
    pub err_v: f64,
    pub rate_v: Option<f64>,
    pub err_w: f64,
    pub rate_w: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    /// Builds the table from `(step, err_v, err_w)` in refinement order.
    pub fn from_errors(entries: &[(f64, f64, f64)]) -> Result<Self> {
        let mut rows: Vec<RateRow> = Vec::with_capacity(entries.len());
        for &(step, err_v, err_w) in entries {
            let (rate_v, rate_w) = match rows.last() {
                None => (None, None),
                Some(p) => (Some(compute_rate(p.err_v, err_v, p.step, step)?), Some(compute_rate(p.err_w, err_w, p.step, step)?)),
            };
            rows.push(RateRow { step, err_v, rate_v, err_w, rate_w });
        }
        Ok(Self { rows })
    }

    /// Rates of the last row, i.e. between the two finest entries.
    pub fn finest_rates(&self) -> Option<(f64, f64)> {
        let r = self.rows.last()?;
        Some((r.rate_v?, r.rate_w?))
    }

    pub fn to_csv(&self) -> String {
        let fmt = |r: Option<f64>| r.map(|x| format!("{x:.4}")).unwrap_or_default();
        let mut out = String::from("h_or_dt,err_v,rate_v,err_w,rate_w\n");
        for r in &self.rows {
            let _ = writeln!(out, "{:.6e},{:.6e},{},{:.6e},{}", r.step, r.err_v, fmt(r.rate_v), r.err_w, fmt(r.rate_w));
        }
        out
    }
}

/// How the discrete mean is compared with the exact one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// Against the P2 nodal interpolant of the exact mean.
    #[default]
    Interpolant,
    /// Against the exact field, by quadrature.
    Exact,
}

/// One manufactured-solution run on the barycentric-refined unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsRun {
    /// Cells per side before refinement (`h = 1/n`).
    pub n: usize,
    pub dt: f64,
    pub end_time: f64,
    pub eps: f64,
    pub mu: f64,
    pub members: Vec<MemberParams>,
    pub comparison: Comparison,
}

#[derive(Debug, Clone)]
pub struct MmsErrors {
    pub err_v: f64,
    pub err_w: f64,
    pub report: RunReport,
}

/// Barycentric refinement of the structured unit-square mesh with `n` cells per side.
pub fn unit_square_discretization(n: usize) -> Result<Arc<Discretization>> {
    let mesh = barycentric_refine(&build_structured_square(n, Rect::UNIT, SideMarkers::All)?)?;
    Ok(Arc::new(Discretization::new(Arc::new(mesh))?))
}

pub fn run_mms(run: &MmsRun) -> Result<MmsErrors> {
    run_mms_on(&unit_square_discretization(run.n)?, run)
}

/// Runs the scheme on `disc` and measures `||<e_v>||_{2,1}`, `||<e_w>||_{2,1}`.
pub fn run_mms_on(disc: &Arc<Discretization>, run: &MmsRun) -> Result<MmsErrors> {
    let mms = Mms::new(run.eps, run.members.clone())?;
    let c = mms.mean_scale();
    let problem = MmsProblem::forced(mms);
    let config = EnsembleConfig {
        s: 1.0,
        mu: run.mu,
        dt: run.dt,
        end_time: run.end_time,
        eps: run.eps,
        members: run.members.clone(),
        seed: 0,
    };
    let mut solver = EnsembleSolver::new(disc.clone(), config, &problem)?;
    let space = disc.velocity().clone();
    let norm_matrix = SparseMatrix::linear_combination(&[(1.0, disc.mass()), (1.0, disc.stiffness())])?;
    let mut levels_v = Vec::new();
    let mut levels_w = Vec::new();
    let (report, _) = solver.run(|step, t, state| {
        if step == 0 {
            return Ok(());
        }
        for (kind, mean, out) in [(StepKind::V, state.mean_v(), &mut levels_v), (StepKind::W, state.mean_w(), &mut levels_w)] {
            let err = match run.comparison {
                Comparison::Interpolant => {
                    let exact = crate::fem::interpolate(&space, |x, y, s| base_field(kind, [x, y], s).map(|z| c * z), t)?;
                    let e: Vec<f64> = mean.iter().zip(&exact).map(|(a, b)| a - b).collect();
                    norm_matrix.quadratic_form(&e).max(0.0).sqrt()
                }
                Comparison::Exact => error_against(&space, mean, |x| {
                    (base_field(kind, x, t).map(|z| c * z), base_gradient(kind, x, t).map(|r| r.map(|z| c * z)))
                })?
                .h1(),
            };
            out.push(err);
        }
        Ok(())
    })?;
    Ok(MmsErrors { err_v: error_norm_21(run.dt, &levels_v), err_w: error_norm_21(run.dt, &levels_w), report })
}

/// Spatial study: one run per mesh in `ns`, rows ordered as given.
pub fn run_spatial_convergence(template: &MmsRun, ns: &[usize]) -> Result<RateTable> {
    let mut entries = Vec::with_capacity(ns.len());
    for &n in ns {
        let run = MmsRun { n, ..template.clone() };
        let e = run_mms(&run)?;
        log::info!("h = 1/{n}: err_v = {:.4e}, err_w = {:.4e}", e.err_v, e.err_w);
        entries.push((1.0 / n as f64, e.err_v, e.err_w));
    }
    RateTable::from_errors(&entries)
}

/// Temporal study on the template's mesh: `dt = T / d` for each divisor `d`.
pub fn run_temporal_convergence(template: &MmsRun, divisors: &[usize]) -> Result<RateTable> {
    let disc = unit_square_discretization(template.n)?;
    let mut entries = Vec::with_capacity(divisors.len());
    for &d in divisors {
        let run = MmsRun { dt: template.end_time / d as f64, ..template.clone() };
        let e = run_mms_on(&disc, &run)?;
        log::info!("dt = T/{d}: err_v = {:.4e}, err_w = {:.4e}", e.err_v, e.err_w);
        entries.push((run.dt, e.err_v, e.err_w));
    }
    RateTable::from_errors(&entries)
}
