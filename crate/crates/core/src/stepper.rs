//! The decoupled ensemble time stepper.
//!
//! One step advances every member from level `n` to `n + 1` in two
//! independent sub-steps. The `v` sub-step solves, for each member `j`,
//!
//! ```text
//! (v^{n+1} - v^n)/dt + <w>^n . grad v^{n+1} - (nu_bar + nu_m_bar)/2 lap v^{n+1}
//!     - div(2 nu_T(w') grad v^{n+1}) + grad q^{n+1}
//!   = f1_j - w'_j . grad v^n + (nu'_j + nu'_m_j)/2 lap v^n + (nu_j - nu_m_j)/2 lap w^n,
//! div v^{n+1} = 0,
//! ```
//!
//! and the `w` sub-step is the mirror image with `v` and `w` exchanged. The
//! left-hand sides do not depend on `j`, so each sub-step factorizes a single
//! saddle-point matrix and solves it against `J` right-hand sides. Both
//! sub-steps read only level-`n` data and run concurrently.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{eddy_viscosity_at_quadrature, viscosity_stats, EnsembleConfig, EnsembleState, ViscosityStats};
use crate::error::{invalid, Error, Result};
use crate::fem::dirichlet::constrain_rows;
use crate::fem::norms::integral_p1_disc;
use crate::fem::{divergence_l2, Assembler, BoundaryNode, ConvectionForm, FeSpace, QuadratureRule};
use crate::mesh::{Marker, Mesh};
use crate::sparse::{relative_residual, Factorization, LuPlan, SparseMatrix};

/// Which Elsässer family a sub-step updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    V,
    W,
}

impl StepKind {
    pub const BOTH: [StepKind; 2] = [StepKind::V, StepKind::W];
}

/// Data of an ensemble problem in Elsässer variables. Members are 0-based.
pub trait Problem: Sync {
    /// Initial value of `v_j` (`StepKind::V`) or `w_j` at `x`.
    fn initial(&self, kind: StepKind, member: usize, x: [f64; 2]) -> [f64; 2];

    /// Dirichlet value at boundary point `x` with the given marker.
    fn boundary(&self, kind: StepKind, member: usize, t: f64, x: [f64; 2], marker: Marker) -> [f64; 2];

    /// Body force `f1_j` (`V`) or `f2_j` (`W`).
    fn forcing(&self, _kind: StepKind, _member: usize, _t: f64, _x: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }

    /// `false` lets the solver skip load assembly entirely.
    fn has_forcing(&self) -> bool {
        false
    }
}

/// Mesh, spaces and every operator that stays fixed during a run.
#[derive(Debug)]
pub struct Discretization {
    velocity: Arc<FeSpace>,
    pressure: Arc<FeSpace>,
    assembler: Assembler,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    divergence: SparseMatrix,
    boundary: Vec<BoundaryNode>,
    bdofs: Vec<usize>,
    /// Saddle matrix with the velocity block zeroed and the constraint blocks filled.
    template: SparseMatrix,
    /// Saddle-matrix slot of each velocity-block entry.
    block_slots: Vec<usize>,
    constrained_rows: Vec<usize>,
    plan: LuPlan,
    pinned: usize,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>) -> Result<Self> {
        let velocity = Arc::new(FeSpace::vector_p2(mesh.clone()));
        let pressure = Arc::new(FeSpace::scalar_p1_disc(mesh));
        let assembler = Assembler::new(velocity.clone(), QuadratureRule::default())?;
        let mass = assembler.mass();
        let stiffness = assembler.stiffness_const(1.0)?;
        let divergence = assembler.divergence(&pressure)?;
        let boundary = velocity.boundary_nodes().to_vec();
        let bdofs = velocity.boundary_dofs();

        let nu = velocity.dof_count();
        let np = pressure.dof_count();
        let pinned = 0;
        let mut triplets = Vec::with_capacity(mass.nnz() + 2 * divergence.nnz() + 1);
        for i in 0..nu {
            let (cols, _) = mass.row(i);
            triplets.extend(cols.iter().map(|&j| (i, j, 0.0)));
        }
        for p in 0..np {
            let (cols, vals) = divergence.row(p);
            for (&a, &b) in cols.iter().zip(vals) {
                triplets.push((nu + p, a, -b));
                triplets.push((a, nu + p, -b));
            }
        }
        triplets.push((nu + pinned, nu + pinned, 0.0));
        let template = SparseMatrix::from_triplets(nu + np, nu + np, triplets)?;
        let block_slots = (0..nu)
            .flat_map(|i| {
                let (cols, _) = mass.row(i);
                let (tcols, _) = template.row(i);
                let base = template.row_offsets()[i];
                cols.iter().map(move |&j| base + tcols.binary_search(&j).expect("velocity entry in saddle pattern")).collect::<Vec<_>>()
            })
            .collect();
        let mut constrained_rows = bdofs.clone();
        constrained_rows.push(nu + pinned);

        let mut probe = template.clone();
        constrain_rows(&mut probe, &constrained_rows);
        let plan = LuPlan::new(&probe)?;
        Ok(Self {
            velocity,
            pressure,
            assembler,
            mass,
            stiffness,
            divergence,
            boundary,
            bdofs,
            template,
            block_slots,
            constrained_rows,
            plan,
            pinned,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.velocity.mesh()
    }

    pub fn velocity(&self) -> &Arc<FeSpace> {
        &self.velocity
    }

    pub fn pressure(&self) -> &Arc<FeSpace> {
        &self.pressure
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    /// `K(1)`, the unit-coefficient vector Laplacian.
    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn divergence(&self) -> &SparseMatrix {
        &self.divergence
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.bdofs
    }

    pub fn velocity_dofs(&self) -> usize {
        self.velocity.dof_count()
    }

    pub fn pressure_dofs(&self) -> usize {
        self.pressure.dof_count()
    }

    /// Index of the pressure dof fixed to zero during solves (offset within
    /// the pressure block).
    pub fn pinned_pressure_dof(&self) -> usize {
        self.pinned
    }

    /// `[A, -B^T; -B, 0]` with identity rows for the Dirichlet dofs and the
    /// pinned pressure dof. The pattern never changes.
    pub fn saddle_matrix(&self, block: &SparseMatrix) -> Result<SparseMatrix> {
        if !block.same_pattern(&self.mass) {
            return Err(invalid("velocity block does not have the assembler's pattern"));
        }
        let mut out = self.template.clone();
        let values = out.values_mut();
        for (&slot, &v) in self.block_slots.iter().zip(block.values()) {
            values[slot] = v;
        }
        constrain_rows(&mut out, &self.constrained_rows);
        Ok(out)
    }

    pub fn factorize(&self, saddle: &SparseMatrix) -> Result<Factorization> {
        self.plan.factorize(saddle)
    }

    /// Nodal values of the Dirichlet data for one member, x-components first
    /// (the order of [`Self::boundary_dofs`]).
    pub fn boundary_values(&self, data: impl Fn([f64; 2], Marker) -> [f64; 2]) -> Vec<f64> {
        let vals: Vec<[f64; 2]> = self.boundary.iter().map(|b| data(self.velocity.node_coords()[b.node], b.marker)).collect();
        vals.iter().map(|v| v[0]).chain(vals.iter().map(|v| v[1])).collect()
    }

    /// Subtracts the mean of a discontinuous P1 pressure.
    pub fn remove_pressure_mean(&self, p: &mut [f64]) -> Result<()> {
        let area = self.mesh().total_area();
        let m = integral_p1_disc(&self.pressure, p)? / area;
        p.iter_mut().for_each(|x| *x -= m);
        Ok(())
    }

    /// Factorization of `K(1)` with homogeneous Dirichlet rows, used for
    /// discrete dual norms.
    fn dual_norm_solver(&self) -> Result<Factorization> {
        let mut k = self.stiffness.clone();
        constrain_rows(&mut k, &self.bdofs);
        crate::sparse::factorize(&k)
    }
}

/// Outcome of the precondition check of the stability analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionReport {
    /// `(member, alpha_j)` for every `alpha_j <= 0`.
    pub nonpositive_alpha: Vec<(usize, f64)>,
    pub mu: f64,
}

impl PreconditionReport {
    pub fn mu_ok(&self) -> bool {
        self.mu > 0.5
    }

    pub fn passed(&self) -> bool {
        self.nonpositive_alpha.is_empty() && self.mu_ok()
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .nonpositive_alpha
            .iter()
            .map(|(j, a)| format!("member {j}: alpha = {a:e} is not positive; the stability bound does not apply"))
            .collect();
        if !self.mu_ok() {
            out.push(format!("mu = {} does not exceed 1/2; the stability bound does not apply", self.mu));
        }
        out
    }
}

pub fn check_preconditions(config: &EnsembleConfig) -> PreconditionReport {
    let stats = viscosity_stats(&config.members);
    PreconditionReport {
        nonpositive_alpha: stats.flagged.iter().map(|&j| (j, stats.alpha[j])).collect(),
        mu: config.mu,
    }
}

/// Squared norms of one member at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MemberNorms {
    pub v_l2_sq: f64,
    pub w_l2_sq: f64,
    pub v_grad_sq: f64,
    pub w_grad_sq: f64,
}

/// Diagnostics of a run. Per-level series have `steps + 1` entries (level 0
/// first); per-step series have `steps` entries.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub dt: f64,
    pub mu: f64,
    pub alpha: Vec<f64>,
    pub nu_bar: f64,
    pub nu_m_bar: f64,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// Largest `||div v_j||`, `||div w_j||` over members, per level.
    pub divergence: Vec<f64>,
    /// `member_norms[level][member]`
    pub member_norms: Vec<Vec<MemberNorms>>,
    /// `forcing_dual_sq[step][member] = ||f1_j||_{-1}^2 + ||f2_j||_{-1}^2` at `t^{step+1}`.
    pub forcing_dual_sq: Vec<Vec<f64>>,
    pub step_seconds: Vec<f64>,
    /// Largest relative residual of any member solve, per step.
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn steps(&self) -> usize {
        self.step_seconds.len()
    }
}

/// Both sides of the stability inequality for one member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub member: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates, per member,
///
/// ```text
/// |v^M|^2 + |w^M|^2 + (nu_bar + nu_m_bar)/2 dt (|grad v^M|^2 + |grad w^M|^2)
///   + alpha_j dt / 2 sum_{n<M} (|grad v^n|^2 + |grad w^n|^2)
/// <= |v^0|^2 + |w^0|^2 + (nu_bar + nu_m_bar)/2 dt (|grad v^0|^2 + |grad w^0|^2)
///   + 2 dt / alpha_j sum_{n<M} (|f1(t^{n+1})|_{-1}^2 + |f2(t^{n+1})|_{-1}^2)
/// ```
///
/// with a relative slack of `1e-8`. Members with `alpha_j <= 0` are reported
/// as failing.
pub fn verify_stability_bound(report: &RunReport) -> Result<Vec<StabilityCheck>> {
    let levels = report.member_norms.len();
    if levels < 2 || report.forcing_dual_sq.len() != levels - 1 {
        return Err(invalid("report lacks a complete trajectory of member norms"));
    }
    let dt = report.dt;
    let c = 0.5 * (report.nu_bar + report.nu_m_bar) * dt;
    let first = &report.member_norms[0];
    let last = &report.member_norms[levels - 1];
    Ok(report
        .alpha
        .iter()
        .enumerate()
        .map(|(j, &alpha)| {
            let grad_sum: f64 = report.member_norms[..levels - 1].iter().map(|l| l[j].v_grad_sq + l[j].w_grad_sq).sum();
            let force_sum: f64 = report.forcing_dual_sq.iter().map(|f| f[j]).sum();
            let lhs = last[j].v_l2_sq + last[j].w_l2_sq + c * (last[j].v_grad_sq + last[j].w_grad_sq) + 0.5 * alpha * dt * grad_sum;
            let rhs = first[j].v_l2_sq + first[j].w_l2_sq + c * (first[j].v_grad_sq + first[j].w_grad_sq) + 2.0 * dt / alpha * force_sum;
            let holds = alpha > 0.0 && lhs <= rhs * (1.0 + 1e-8);
            StabilityCheck { member: j, lhs, rhs: if alpha > 0.0 { rhs } else { f64::INFINITY }, holds }
        })
        .collect())
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub report: RunReport,
    pub error: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted after {} steps: {}", self.report.steps(), self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

impl From<Box<RunFailure>> for Error {
    fn from(f: Box<RunFailure>) -> Self {
        f.error
    }
}

/// Per-member products reused by both right-hand sides.
struct MemberProducts {
    mv: Vec<f64>,
    mw: Vec<f64>,
    kv: Vec<f64>,
    kw: Vec<f64>,
}

/// Ensemble solver for one problem on one discretization.
pub struct EnsembleSolver<'p, P: Problem> {
    disc: Arc<Discretization>,
    config: EnsembleConfig,
    problem: &'p P,
    stats: ViscosityStats,
    form: ConvectionForm,
    time: f64,
}

impl<'p, P: Problem> EnsembleSolver<'p, P> {
    pub fn new(disc: Arc<Discretization>, config: EnsembleConfig, problem: &'p P) -> Result<Self> {
        config.validate()?;
        let stats = viscosity_stats(&config.members);
        Ok(Self { disc, config, problem, stats, form: ConvectionForm::Standard, time: 0.0 })
    }

    /// Uses `form` for both the implicit and the lagged convection terms.
    pub fn with_convection_form(mut self, form: ConvectionForm) -> Self {
        self.form = form;
        self
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn viscosity_stats(&self) -> &ViscosityStats {
        &self.stats
    }

    /// Time of the current state.
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn check_preconditions(&self) -> PreconditionReport {
        check_preconditions(&self.config)
    }

    /// Nodal interpolants of the initial data; pressures start at zero.
    pub fn initial_state(&self) -> Result<EnsembleState> {
        let space = self.disc.velocity();
        let n = space.num_nodes();
        let field = |kind: StepKind, j: usize| {
            let mut out = vec![0.0; 2 * n];
            for (node, &x) in space.node_coords().iter().enumerate() {
                let val = self.problem.initial(kind, j, x);
                out[node] = val[0];
                out[n + node] = val[1];
            }
            out
        };
        let members = self.config.num_members();
        let np = self.disc.pressure_dofs();
        EnsembleState::new(
            (0..members).map(|j| field(StepKind::V, j)).collect(),
            (0..members).map(|j| field(StepKind::W, j)).collect(),
            vec![vec![0.0; np]; members],
            vec![vec![0.0; np]; members],
        )
    }

    fn check_state(&self, state: &EnsembleState) -> Result<()> {
        if state.num_members() != self.config.num_members() {
            return Err(invalid(format!(
                "state has {} members, configuration {}",
                state.num_members(),
                self.config.num_members()
            )));
        }
        Ok(())
    }

    /// Velocity block shared by all members for one sub-step, assembled
    /// from the given mean of the advecting family and its fluctuations.
    pub fn shared_velocity_block(&self, advecting_mean: &[f64], advecting_fluct: &[Vec<f64>]) -> Result<SparseMatrix> {
        let asm = self.disc.assembler();
        let nu_t = eddy_viscosity_at_quadrature(asm, advecting_fluct, self.config.mu, self.config.dt)?;
        let base = 0.5 * self.stats.total_mean();
        let coeff: Vec<f64> = nu_t.iter().map(|t| base + 2.0 * t).collect();
        asm.velocity_block(1.0 / self.config.dt, advecting_mean, self.form, &coeff)
    }

    /// The constrained saddle-point matrix of one sub-step at the state's level.
    pub fn assemble_shared_lhs(&self, kind: StepKind, state: &EnsembleState) -> Result<SparseMatrix> {
        self.check_state(state)?;
        let block = match kind {
            StepKind::V => self.shared_velocity_block(state.mean_w(), state.fluct_w())?,
            StepKind::W => self.shared_velocity_block(state.mean_v(), state.fluct_v())?,
        };
        self.disc.saddle_matrix(&block)
    }

    /// Rebuilds the shared matrix the way member `j` alone would: ensemble
    /// statistics recomputed from the raw member fields. Equal bitwise to
    /// [`Self::assemble_shared_lhs`] whenever the scheme is consistent.
    pub fn assemble_lhs_for_member(&self, kind: StepKind, state: &EnsembleState, member: usize) -> Result<SparseMatrix> {
        self.check_state(state)?;
        if member >= state.num_members() {
            return Err(invalid(format!("member {member} out of range")));
        }
        let family = match kind {
            StepKind::V => &state.w,
            StepKind::W => &state.v,
        };
        let stats = crate::ensemble::ensemble_stats(family)?;
        let block = self.shared_velocity_block(&stats.mean, &stats.fluctuations)?;
        self.disc.saddle_matrix(&block)
    }

    fn products(&self, state: &EnsembleState, j: usize) -> MemberProducts {
        let d = &self.disc;
        MemberProducts {
            mv: d.mass().mul_vec(&state.v[j]),
            mw: d.mass().mul_vec(&state.w[j]),
            kv: d.stiffness().mul_vec(&state.v[j]),
            kw: d.stiffness().mul_vec(&state.w[j]),
        }
    }

    fn load(&self, kind: StepKind, j: usize, t: f64) -> Option<Vec<f64>> {
        self.problem
            .has_forcing()
            .then(|| self.disc.assembler().load(|x| self.problem.forcing(kind, j, t, x)))
    }

    fn member_rhs_with(
        &self,
        kind: StepKind,
        j: usize,
        state: &EnsembleState,
        t_next: f64,
        prod: &MemberProducts,
    ) -> Result<Vec<f64>> {
        let d = &self.disc;
        let m = &self.config.members[j];
        let a = 0.5 * (m.nu - m.nu_m);
        let b = 0.5 * (self.stats.nu_prime[j] + self.stats.nu_m_prime[j]);
        let (own, lag, m_own, k_own, k_other) = match kind {
            StepKind::V => (&state.v[j], &state.fluct_w()[j], &prod.mv, &prod.kv, &prod.kw),
            StepKind::W => (&state.w[j], &state.fluct_v()[j], &prod.mw, &prod.kw, &prod.kv),
        };
        let lagged = match self.form {
            ConvectionForm::Standard => d.assembler().convection_action(lag, own)?,
            form => d.assembler().convection(lag, form)?.mul_vec(own),
        };
        let inv_dt = 1.0 / self.config.dt;
        let nu = d.velocity_dofs();
        let mut rhs = vec![0.0; nu + d.pressure_dofs()];
        for i in 0..nu {
            rhs[i] = inv_dt * m_own[i] - lagged[i] - a * k_other[i] - b * k_own[i];
        }
        if let Some(f) = self.load(kind, j, t_next) {
            rhs[..nu].iter_mut().zip(&f).for_each(|(r, f)| *r += f);
        }
        let g = d.boundary_values(|x, marker| self.problem.boundary(kind, j, t_next, x, marker));
        for (&dof, &val) in d.boundary_dofs().iter().zip(&g) {
            rhs[dof] = val;
        }
        rhs[nu + d.pinned_pressure_dof()] = 0.0;
        Ok(rhs)
    }

    /// Right-hand side of member `j` for the sub-step reaching `t_next`.
    pub fn assemble_member_rhs(&self, kind: StepKind, j: usize, state: &EnsembleState, t_next: f64) -> Result<Vec<f64>> {
        self.check_state(state)?;
        if j >= state.num_members() {
            return Err(invalid(format!("member {j} out of range")));
        }
        self.member_rhs_with(kind, j, state, t_next, &self.products(state, j))
    }

    fn sub_step(
        &self,
        kind: StepKind,
        state: &EnsembleState,
        t_next: f64,
        products: &[MemberProducts],
    ) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> {
        let lhs = self.assemble_shared_lhs(kind, state)?;
        let lu = self.disc.factorize(&lhs)?;
        let rhs: Vec<Vec<f64>> = (0..state.num_members())
            .into_par_iter()
            .map(|j| self.member_rhs_with(kind, j, state, t_next, &products[j]))
            .collect::<Result<_>>()?;
        let sol = lu.solve_block_refined(&lhs, &rhs)?;
        let residual = sol
            .par_iter()
            .zip(&rhs)
            .map(|(x, b)| relative_residual(&lhs, x, b))
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, f64::max);
        let nu = self.disc.velocity_dofs();
        let mut vel = Vec::with_capacity(sol.len());
        let mut pre = Vec::with_capacity(sol.len());
        for mut x in sol {
            let mut p = x.split_off(nu);
            self.disc.remove_pressure_mean(&mut p)?;
            vel.push(x);
            pre.push(p);
        }
        Ok((vel, pre, residual))
    }

    /// Advances `state` by one step and returns the largest relative residual.
    pub fn advance(&mut self, state: &mut EnsembleState) -> Result<f64> {
        self.check_state(state)?;
        let step = state.step();
        let t_next = (step + 1) as f64 * self.config.dt;
        let products: Vec<MemberProducts> = (0..state.num_members()).into_par_iter().map(|j| self.products(state, j)).collect();
        let wrap = |kind: StepKind| move |e: Error| Error::Step { step, kind, source: Box::new(e) };
        let (v_res, w_res) = rayon::join(
            || self.sub_step(StepKind::V, state, t_next, &products).map_err(wrap(StepKind::V)),
            || self.sub_step(StepKind::W, state, t_next, &products).map_err(wrap(StepKind::W)),
        );
        let (v, q, rv) = v_res?;
        let (w, r, rw) = w_res?;
        state.advance_to(v, w, q, r)?;
        self.time = t_next;
        Ok(rv.max(rw))
    }

    /// `E = (||<v>||^2 + ||<w>||^2) / 2`.
    pub fn energy(&self, state: &EnsembleState) -> f64 {
        let m = self.disc.mass();
        0.5 * (m.quadratic_form(state.mean_v()) + m.quadratic_form(state.mean_w()))
    }

    pub fn member_norms(&self, state: &EnsembleState) -> Vec<MemberNorms> {
        let (m, k) = (self.disc.mass(), self.disc.stiffness());
        (0..state.num_members())
            .into_par_iter()
            .map(|j| MemberNorms {
                v_l2_sq: m.quadratic_form(&state.v[j]),
                w_l2_sq: m.quadratic_form(&state.w[j]),
                v_grad_sq: k.quadratic_form(&state.v[j]),
                w_grad_sq: k.quadratic_form(&state.w[j]),
            })
            .collect()
    }

    /// Largest L2 norm of the divergence over all member fields.
    pub fn max_divergence(&self, state: &EnsembleState) -> Result<f64> {
        let space = self.disc.velocity();
        let norms = state.v.par_iter().chain(state.w.par_iter()).map(|f| divergence_l2(space, f)).collect::<Result<Vec<_>>>()?;
        Ok(norms.into_iter().fold(0.0, f64::max))
    }

    fn forcing_dual(&self, dual: &Option<Factorization>, t: f64) -> Result<Vec<f64>> {
        let Some(lu) = dual else { return Ok(vec![0.0; self.config.num_members()]) };
        let bdofs = self.disc.boundary_dofs();
        (0..self.config.num_members())
            .into_par_iter()
            .map(|j| {
                let mut total = 0.0;
                for kind in StepKind::BOTH {
                    let mut f = self.load(kind, j, t).unwrap_or_default();
                    for &d in bdofs {
                        f[d] = 0.0;
                    }
                    let y = lu.solve(&f)?;
                    total += f.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
                }
                Ok(total)
            })
            .collect()
    }

    /// Runs the scheme from the initial data to the configured end time.
    ///
    /// `observer` sees every level (including level 0) and may stop the run
    /// by returning an error.
    pub fn run(
        &mut self,
        mut observer: impl FnMut(usize, f64, &EnsembleState) -> Result<()>,
    ) -> std::result::Result<(RunReport, EnsembleState), Box<RunFailure>> {
        let mut report = RunReport {
            dt: self.config.dt,
            mu: self.config.mu,
            alpha: self.stats.alpha.clone(),
            nu_bar: self.stats.nu_bar,
            nu_m_bar: self.stats.nu_m_bar,
            ..Default::default()
        };
        let pre = self.check_preconditions();
        for w in pre.warnings() {
            log::warn!("{w}");
            report.warnings.push(w);
        }
        match self.run_inner(&mut report, &mut observer) {
            Ok(state) => Ok((report, state)),
            Err(error) => Err(Box::new(RunFailure { report, error })),
        }
    }

    fn record(&self, report: &mut RunReport, state: &EnsembleState) -> Result<()> {
        report.times.push(self.time);
        report.energy.push(self.energy(state));
        report.divergence.push(self.max_divergence(state)?);
        report.member_norms.push(self.member_norms(state));
        Ok(())
    }

    fn run_inner(
        &mut self,
        report: &mut RunReport,
        observer: &mut impl FnMut(usize, f64, &EnsembleState) -> Result<()>,
    ) -> Result<EnsembleState> {
        self.time = 0.0;
        let mut state = self.initial_state()?;
        let dual = if self.problem.has_forcing() { Some(self.disc.dual_norm_solver()?) } else { None };
        self.record(report, &state)?;
        observer(0, 0.0, &state)?;
        let steps = self.config.num_steps();
        for n in 0..steps {
            let clock = Instant::now();
            let residual = self.advance(&mut state)?;
            report.step_seconds.push(clock.elapsed().as_secs_f64());
            report.residuals.push(residual);
            report.forcing_dual_sq.push(self.forcing_dual(&dual, self.time)?);
            self.record(report, &state)?;
            log::debug!("step {}/{steps}: t = {:.6}, E = {:.6e}, residual {:.2e}", n + 1, self.time, report.energy[n + 1], residual);
            observer(n + 1, self.time, &state)?;
        }
        Ok(state)
    }
}
