//! Time integration of the semi-discrete p-Laplacian reaction system
//!
//! ```text
//! M u' + K(u) u = M f(u),   u = 0 on boundary nodes,
//! ```
//!
//! with `M` the lumped mass matrix and `K(u)` the stiffness matrix weighted by
//! `|∇u|_ε^{p−2}` per element. A step freezes that coefficient at the old
//! state (lagged diffusivity), treats the reaction explicitly and solves
//!
//! ```text
//! (M + dt K(uⁿ)) uⁿ⁺¹ = M (uⁿ + dt f(uⁿ))
//! ```
//!
//! for the free nodes. The step size is controlled by the defect of the
//! energy identity `‖δu‖²_M / dt + E_p(uⁿ⁺¹) − E_p(uⁿ) = 0`.

pub mod audit;
mod linalg;

use std::sync::Arc;

pub use audit::{
    detect_tmax, energy_audit, gradient_bound_audit, growth_audit, l2_audit, residual_audit,
    well_invariance_audit, EnergyAudit, GradientBoundAudit, GrowthAudit, L2Audit, ResidualAudit,
    WellInvarianceAudit, WellViolation,
};
pub use linalg::{solve_checked, BandCholesky, BandMatrix};

use crate::error::{Error, Result};
use crate::mesh::{Field, Mesh};
use crate::model::{check_p, gradient_sums, reaction_integrals, Nonlinearity};

/// Relative residual required of every linear solve.
pub const LINEAR_SOLVE_TOL: f64 = 1e-10;
/// Factor applied to `dt` after a step whose residual used at most a quarter
/// of its allowance.
const DT_GROWTH: f64 = 1.25;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub p: f64,
    /// Gradient regularization `ε` in `|∇u|_ε = sqrt(|∇u|² + ε²)`.
    pub eps: f64,
    pub dt0: f64,
    pub dt_min: f64,
    pub t_end: f64,
    /// Blow-up threshold on the sup norm.
    pub u_max: f64,
    /// Extinction threshold on the sup norm.
    pub tol_ext: f64,
    /// Per-step bound on `|residual| / (1 + |E_p|)`.
    pub energy_residual_tol: f64,
    pub adapt: bool,
    /// Every `store_stride`-th accepted state is kept in the trajectory.
    pub store_stride: usize,
    /// Times at which the step size is clipped so that the state, and the
    /// rate `δu/dt` of the step reaching it, are recorded exactly.
    pub checkpoints: Vec<f64>,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            p: 2.0,
            eps: 1e-4,
            dt0: 1e-3,
            dt_min: 1e-12,
            t_end: 1.0,
            u_max: 1e6,
            tol_ext: 1e-8,
            energy_residual_tol: 1e-6,
            adapt: true,
            store_stride: 1,
            checkpoints: Vec::new(),
            max_steps: 1_000_000,
        }
    }
}

impl SolverConfig {
    /// Defaults for exponent `p` on a domain of the given diameter, with
    /// `ε = 1e−4 / diameter`.
    pub fn new(p: f64, diameter: f64) -> Self {
        SolverConfig { p, eps: 1e-4 / diameter, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSolverConfig(m));
        check_p(self.p)?;
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("eps = {} must be finite and ≥ 0", self.eps));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt0 && self.dt0 <= self.t_end && self.t_end.is_finite()) {
            return bad(format!(
                "need 0 < dt_min < dt0 ≤ T_end, got dt_min = {}, dt0 = {}, T_end = {}",
                self.dt_min, self.dt0, self.t_end
            ));
        }
        if !(self.u_max > 0.0) || !(self.tol_ext >= 0.0) || !(self.energy_residual_tol > 0.0) {
            return bad("U_max, energy_residual_tol must be positive and tol_ext ≥ 0".into());
        }
        if self.store_stride == 0 || self.max_steps == 0 {
            return bad("store_stride and max_steps must be positive".into());
        }
        if self.checkpoints.iter().any(|&c| !(c > 0.0 && c <= self.t_end)) {
            return bad("checkpoints must lie in (0, T_end]".into());
        }
        Ok(())
    }
}

/// Diagnostics of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySnapshot {
    pub time: f64,
    /// `E_p(u)` (unregularized).
    pub energy: f64,
    /// `I_p(u)`.
    pub nehari: f64,
    /// `∫|∇u|`.
    pub tv: f64,
    /// `∫|∇u|^p`.
    pub grad_p: f64,
    pub l2: f64,
    pub sup: f64,
    /// `Σ ‖δu‖²_M / dt`, the discrete `∫₀ᵗ ‖u_s‖² ds`.
    pub dissipation_cum: f64,
    /// Step that produced this state; 0 for the initial state.
    pub dt: f64,
}

pub fn snapshot(field: &Field, p: f64, nl: &Nonlinearity, time: f64, dissipation_cum: f64, dt: f64) -> EnergySnapshot {
    let g = gradient_sums(field, p);
    let (big_f, fu) = reaction_integrals(field, nl);
    EnergySnapshot {
        time,
        energy: g.p_energy / p - big_f,
        nehari: g.p_energy - fu,
        tv: g.tv,
        grad_p: g.p_energy,
        l2: field.l2_norm(),
        sup: field.sup_norm(),
        dissipation_cum,
        dt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed(f64),
    Extinct(f64),
    BlowUp(f64),
    StepFailure(f64),
}

impl RunStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RunStatus::Completed(_) => "completed",
            RunStatus::Extinct(_) => "extinct",
            RunStatus::BlowUp(_) => "blow_up",
            RunStatus::StepFailure(_) => "step_failure",
        }
    }

    pub fn time(&self) -> f64 {
        match *self {
            RunStatus::Completed(t) | RunStatus::Extinct(t) | RunStatus::BlowUp(t) | RunStatus::StepFailure(t) => t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StoredState {
    pub time: f64,
    pub field: Field,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub time: f64,
    pub field: Field,
    /// `δu / dt` of the step that reached this time.
    pub rate: Field,
}

/// Energy-identity defect of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Time at the end of the step.
    pub time: f64,
    pub dt: f64,
    pub residual: f64,
    /// `1 + |E_p|` at the start of the step.
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub p: f64,
    pub eps: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<EnergySnapshot>,
    pub states: Vec<StoredState>,
    pub checkpoints: Vec<Checkpoint>,
    pub steps: Vec<StepRecord>,
    pub rejected_steps: usize,
    pub status: RunStatus,
    /// Message of the error that ended the run, if any.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn initial(&self) -> &EnergySnapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &EnergySnapshot {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }

    pub fn final_state(&self) -> &Field {
        &self.states.last().expect("trajectory holds the initial state").field
    }

    pub fn dt_max(&self) -> f64 {
        self.steps.iter().map(|s| s.dt).fold(0.0, f64::max)
    }
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: Field,
    pub dt: f64,
    /// `‖δu‖²_M / dt + E_p(new) − E_p(old)`.
    pub residual: f64,
    pub energy_old: f64,
    pub energy_new: f64,
    /// `‖δu‖²_M / dt`.
    pub dissipation: f64,
    /// Attempts rejected before this one was accepted.
    pub rejected: usize,
}

/// Per-mesh data reused across steps.
pub struct Stepper<'a> {
    mesh: Arc<Mesh>,
    cfg: &'a SolverConfig,
    nl: &'a Nonlinearity,
    /// Compact index of each free node.
    slot: Vec<Option<usize>>,
    free: Vec<usize>,
    bw: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(mesh: Arc<Mesh>, cfg: &'a SolverConfig, nl: &'a Nonlinearity) -> Result<Self> {
        cfg.validate()?;
        nl.validate()?;
        let mut slot = vec![None; mesh.node_count()];
        let mut free = Vec::new();
        for i in 0..mesh.node_count() {
            if !mesh.is_boundary(i) {
                slot[i] = Some(free.len());
                free.push(i);
            }
        }
        let mut bw = 0;
        for e in mesh.elements() {
            let idx: Vec<usize> = e.nodes().iter().filter_map(|&n| slot[n]).collect();
            if let (Some(lo), Some(hi)) = (idx.iter().min(), idx.iter().max()) {
                bw = bw.max(hi - lo);
            }
        }
        Ok(Stepper { mesh, cfg, nl, slot, free, bw })
    }

    fn energy(&self, field: &Field) -> f64 {
        let p = self.cfg.p;
        gradient_sums(field, p).p_energy / p - reaction_integrals(field, self.nl).0
    }

    /// Lagged coefficients `|∇u|_ε^{p−2}` per element. Where the gradient and
    /// `ε` both vanish and `p < 2` the coefficient is unbounded; the largest
    /// finite coefficient (or 1) stands in for it.
    fn coefficients(&self, u: &Field) -> Vec<f64> {
        let p = self.cfg.p;
        let eps2 = self.cfg.eps * self.cfg.eps;
        let mut a: Vec<f64> = u
            .gradient()
            .iter()
            .map(|g| (g[0] * g[0] + g[1] * g[1] + eps2).powf(0.5 * (p - 2.0)))
            .collect();
        if a.iter().any(|v| !v.is_finite()) {
            let cap = a.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
            let cap = if cap > 0.0 { cap } else { 1.0 };
            for v in a.iter_mut().filter(|v| !v.is_finite()) {
                *v = cap;
            }
        }
        a
    }

    /// One solve at fixed `dt`, without any acceptance test.
    pub fn attempt(&self, u: &Field, dt: f64, coeff: &[f64]) -> Result<Field> {
        let mesh = &self.mesh;
        let w = mesh.quad_weights();
        let n = self.free.len();
        let mut a = BandMatrix::zeros(n, self.bw);
        let mut b = vec![0.0; n];
        for (k, &i) in self.free.iter().enumerate() {
            a.add(k, k, w[i]);
            b[k] = w[i] * (u.values()[i] + dt * self.nl.f(u.values()[i]));
        }
        for (e, &c) in mesh.elements().iter().zip(coeff) {
            let s = dt * c * e.measure();
            let nodes = e.nodes();
            let grads = e.basis_gradients();
            for (x, &ni) in nodes.iter().enumerate() {
                let Some(ki) = self.slot[ni] else { continue };
                for (y, &nj) in nodes.iter().enumerate().take(x + 1) {
                    let Some(kj) = self.slot[nj] else { continue };
                    let v = s * (grads[x][0] * grads[y][0] + grads[x][1] * grads[y][1]);
                    a.add(ki, kj, v);
                }
            }
        }
        let mut values = vec![0.0; mesh.node_count()];
        if b.iter().any(|v| *v != 0.0) {
            let x = solve_checked(&a, &b, LINEAR_SOLVE_TOL)?;
            for (k, &i) in self.free.iter().enumerate() {
                values[i] = x[k];
            }
        }
        Field::new(Arc::clone(mesh), values)
    }

    /// A step starting from `dt`, halved until the new state is finite and,
    /// with adaptation on, the energy-identity defect is within tolerance.
    pub fn step(&self, u: &Field, dt: f64) -> Result<StepOutcome> {
        self.step_from(u, dt, self.energy(u))
    }

    fn step_from(&self, u: &Field, mut dt: f64, energy_old: f64) -> Result<StepOutcome> {
        let coeff = self.coefficients(u);
        let w = self.mesh.quad_weights();
        let allowance = self.cfg.energy_residual_tol * (1.0 + energy_old.abs());
        let mut rejected = 0;
        loop {
            if dt < self.cfg.dt_min {
                return Err(Error::DtUnderflow(self.cfg.dt_min));
            }
            let next = self.attempt(u, dt, &coeff)?;
            let finite = next.values().iter().all(|v| v.is_finite());
            if finite {
                let energy_new = self.energy(&next);
                let dissipation: f64 = next
                    .values()
                    .iter()
                    .zip(u.values())
                    .zip(w)
                    .map(|((a, b), w)| w * (a - b) * (a - b))
                    .sum::<f64>()
                    / dt;
                let residual = dissipation + energy_new - energy_old;
                if energy_new.is_finite() && (!self.cfg.adapt || residual.abs() <= allowance) {
                    return Ok(StepOutcome { field: next, dt, residual, energy_old, energy_new, dissipation, rejected });
                }
            }
            rejected += 1;
            dt *= 0.5;
        }
    }
}

/// One step of the scheme from `state`, trying `dt` first.
pub fn step(state: &Field, dt: f64, cfg: &SolverConfig, nl: &Nonlinearity) -> Result<StepOutcome> {
    Stepper::new(Arc::clone(state.mesh()), cfg, nl)?.step(state, dt)
}

/// Integrates from `u0` until `T_end`, extinction, blow-up or failure.
pub fn run(mesh: &Arc<Mesh>, u0: &Field, cfg: &SolverConfig, nl: &Nonlinearity) -> Result<Trajectory> {
    if !crate::mesh::same_mesh(mesh, u0.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let stepper = Stepper::new(Arc::clone(mesh), cfg, nl)?;
    let p = cfg.p;
    let mut u = u0.clone();
    u.apply_dirichlet();
    let mut checkpoints: Vec<f64> = cfg.checkpoints.clone();
    checkpoints.sort_by(f64::total_cmp);
    checkpoints.dedup();
    let mut next_cp = 0;

    let first = snapshot(&u, p, nl, 0.0, 0.0, 0.0);
    let mut traj = Trajectory {
        p,
        eps: cfg.eps,
        times: vec![0.0],
        snapshots: vec![first],
        states: vec![StoredState { time: 0.0, field: u.clone() }],
        checkpoints: Vec::new(),
        steps: Vec::new(),
        rejected_steps: 0,
        status: RunStatus::Completed(cfg.t_end),
        failure: None,
    };
    if first.sup <= cfg.tol_ext {
        traj.status = RunStatus::Extinct(0.0);
        return Ok(traj);
    }
    if first.sup > cfg.u_max {
        traj.status = RunStatus::BlowUp(0.0);
        return Ok(traj);
    }

    let mut t = 0.0;
    let mut dt = cfg.dt0;
    let mut energy = first.energy;
    let mut dissipation_cum = 0.0;
    let mut stored_last = true;
    for count in 1.. {
        if count > cfg.max_steps {
            traj.status = RunStatus::StepFailure(t);
            traj.failure = Some(format!("step limit {} reached", cfg.max_steps));
            break;
        }
        let target = checkpoints.get(next_cp).copied().filter(|&c| c < cfg.t_end).unwrap_or(cfg.t_end);
        let clipped = dt >= target - t;
        let dt_try = if clipped { target - t } else { dt };
        let out = match stepper.step_from(&u, dt_try, energy) {
            Ok(out) => out,
            Err(e) => {
                traj.status = match e {
                    Error::DtUnderflow(_) => RunStatus::BlowUp(t),
                    _ => RunStatus::StepFailure(t),
                };
                traj.failure = Some(e.to_string());
                break;
            }
        };
        let landed = clipped && out.rejected == 0;
        let t_new = if landed { target } else { t + out.dt };
        dissipation_cum += out.dissipation;
        traj.rejected_steps += out.rejected;
        traj.steps.push(StepRecord { time: t_new, dt: out.dt, residual: out.residual, scale: 1.0 + energy.abs() });
        let snap = snapshot(&out.field, p, nl, t_new, dissipation_cum, out.dt);
        traj.times.push(t_new);
        traj.snapshots.push(snap);
        if landed && next_cp < checkpoints.len() && target == checkpoints[next_cp] {
            let rate: Vec<f64> =
                out.field.values().iter().zip(u.values()).map(|(a, b)| (a - b) / out.dt).collect();
            traj.checkpoints.push(Checkpoint {
                time: t_new,
                field: out.field.clone(),
                rate: Field::new(Arc::clone(mesh), rate)?,
            });
            next_cp += 1;
        }
        stored_last = count % cfg.store_stride == 0;
        if stored_last {
            traj.states.push(StoredState { time: t_new, field: out.field.clone() });
        }

        if out.rejected > 0 {
            dt = out.dt;
        } else if !clipped {
            dt = out.dt;
        }
        if cfg.adapt && out.residual.abs() <= 0.25 * cfg.energy_residual_tol * (1.0 + energy.abs()) {
            dt = (dt * DT_GROWTH).min(cfg.dt0);
        }
        t = t_new;
        energy = out.energy_new;
        u = out.field;

        if snap.sup > cfg.u_max {
            traj.status = RunStatus::BlowUp(t);
            break;
        }
        if snap.sup <= cfg.tol_ext {
            traj.status = RunStatus::Extinct(t);
            break;
        }
        if landed && target >= cfg.t_end {
            traj.status = RunStatus::Completed(cfg.t_end);
            break;
        }
    }
    if !stored_last {
        traj.states.push(StoredState { time: t, field: u });
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, profiles, Domain, Resolution};

    fn interval(n: usize) -> Arc<Mesh> {
        build_mesh(Domain::Interval { length: 1.0 }, Resolution::Uniform(n)).unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let m = interval(20);
        let cfg = SolverConfig { p: 1.5, ..Default::default() };
        let zero = Field::zeros(m.clone());
        let out = step(&zero, 1e-2, &cfg, &Nonlinearity::Power { q: 3.0 }).unwrap();
        assert!(out.field.values().iter().all(|v| v.to_bits() == 0));
        let traj = run(&m, &zero, &cfg, &Nonlinearity::Zero).unwrap();
        assert_eq!(traj.status, RunStatus::Extinct(0.0));
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.last().energy, 0.0);
    }

    #[test]
    fn rectangle_band_solve() {
        let m = build_mesh(Domain::Rectangle { width: 1.0, height: 1.0 }, Resolution::Uniform(8)).unwrap();
        let cfg = SolverConfig { p: 2.0, adapt: false, ..Default::default() };
        let u = profiles::hat(&m);
        let out = step(&u, 1e-3, &cfg, &Nonlinearity::Zero).unwrap();
        assert!(out.field.is_dirichlet());
        assert!(out.field.sup_norm() < u.sup_norm());
        assert!(out.residual <= 1e-12);
    }

    #[test]
    fn checkpoints_are_hit_exactly() {
        let m = interval(40);
        let cfg = SolverConfig {
            p: 1.5,
            dt0: 0.03,
            t_end: 0.2,
            checkpoints: vec![0.05, 0.1],
            ..Default::default()
        };
        let traj = run(&m, &profiles::hat(&m), &cfg, &Nonlinearity::Zero).unwrap();
        assert_eq!(traj.status, RunStatus::Completed(0.2));
        let times: Vec<f64> = traj.checkpoints.iter().map(|c| c.time).collect();
        assert_eq!(times, vec![0.05, 0.1]);
        assert_eq!(*traj.times.last().unwrap(), 0.2);
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
        assert!(traj.snapshots.windows(2).all(|w| w[0].dissipation_cum <= w[1].dissipation_cum));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig { p: 1.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { dt0: 2.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { eps: -1.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig::new(1.5, 2.0).validate().is_ok());
        assert_eq!(SolverConfig::new(1.5, 2.0).eps, 5e-5);
    }
}
