//! Post-run checks of a trajectory against the energy identity, well
//! invariance, L² monotonicity and the uniform gradient bound. Audits only
//! report; they never abort a run.

use super::{RunStatus, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::model::{reaction_l2_bound, reaction_l2_squared, well_status, Nonlinearity, WellStatus};

/// First time the sup norm exceeded `U_max` or the step size underflowed;
/// `+∞` for a global run. A step failure also ends the solution, so its
/// time is returned as well.
pub fn detect_tmax(traj: &Trajectory, cfg: &SolverConfig) -> f64 {
    if let Some(s) = traj.snapshots.iter().find(|s| s.sup > cfg.u_max) {
        return s.time;
    }
    match traj.status {
        RunStatus::BlowUp(t) | RunStatus::StepFailure(t) => t,
        RunStatus::Completed(_) | RunStatus::Extinct(_) => f64::INFINITY,
    }
}

/// The ledger `∫₀ᵗ‖u_s‖² + E_p(u(t)) ≤ E_p(u₀)` along a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAudit {
    /// `max_t (dissipation_cum + E_p(u(t)) − E_p(u₀))`.
    pub worst_slack: f64,
    /// `worst_slack / (1 + |E_p(u₀)|)`.
    pub worst_relative: f64,
    /// Smallest `K` with `slack(t) ≤ K · dt_max · t` at every recorded time.
    pub k_constant: f64,
    pub dt_max: f64,
    pub final_slack: f64,
}

pub fn energy_audit(traj: &Trajectory) -> EnergyAudit {
    let e0 = traj.initial().energy;
    let dt_max = traj.dt_max();
    let mut worst = 0.0f64;
    let mut k = 0.0f64;
    for s in &traj.snapshots {
        let slack = s.dissipation_cum + s.energy - e0;
        worst = worst.max(slack);
        if s.time > 0.0 && dt_max > 0.0 && slack > 0.0 {
            k = k.max(slack / (dt_max * s.time));
        }
    }
    let last = traj.last();
    EnergyAudit {
        worst_slack: worst,
        worst_relative: worst / (1.0 + e0.abs()),
        k_constant: k,
        dt_max,
        final_slack: last.dissipation_cum + last.energy - e0,
    }
}

/// Per-step defects of the energy identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualAudit {
    pub steps: usize,
    /// `max |residual| / (1 + |E_p|)`.
    pub worst_ratio: f64,
    pub violations: usize,
}

pub fn residual_audit(traj: &Trajectory, tol: f64) -> ResidualAudit {
    let mut worst = 0.0f64;
    let mut violations = 0;
    for s in &traj.steps {
        let r = s.residual.abs() / s.scale;
        worst = worst.max(r);
        if r > tol {
            violations += 1;
        }
    }
    ResidualAudit { steps: traj.steps.len(), worst_ratio: worst, violations }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellViolation {
    pub time: f64,
    pub status: WellStatus,
    pub margin_e: f64,
    pub margin_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellInvarianceAudit {
    pub checked: usize,
    pub first_violation: Option<WellViolation>,
    /// Smallest `d_hat − E_p` over nonzero stored states.
    pub min_margin_e: f64,
    /// Smallest `I_p` over nonzero stored states.
    pub min_margin_i: f64,
}

impl WellInvarianceAudit {
    pub fn all_inside(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Classifies every stored state against the well of depth `d_hat`.
pub fn well_invariance_audit(traj: &Trajectory, p: f64, nl: &Nonlinearity, d_hat: f64) -> Result<WellInvarianceAudit> {
    let mut audit = WellInvarianceAudit {
        checked: 0,
        first_violation: None,
        min_margin_e: f64::INFINITY,
        min_margin_i: f64::INFINITY,
    };
    for s in &traj.states {
        let r = well_status(&s.field, p, nl, d_hat)?;
        audit.checked += 1;
        if !s.field.is_zero() {
            audit.min_margin_e = audit.min_margin_e.min(r.margin_e);
            audit.min_margin_i = audit.min_margin_i.min(r.margin_i);
        }
        if r.status != WellStatus::Inside && audit.first_violation.is_none() {
            audit.first_violation =
                Some(WellViolation { time: s.time, status: r.status, margin_e: r.margin_e, margin_i: r.margin_i });
        }
    }
    Ok(audit)
}

/// L² behavior: `‖u(t)‖₂ ≤ ‖u₀‖₂` while `I_p > 0`, and the discrete
/// identity `½ (‖uᵏ⁺¹‖² − ‖uᵏ‖²) / dt ≈ −I_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Audit {
    /// `max_k (‖uᵏ⁺¹‖₂ − ‖uᵏ‖₂)`, positive when the norm grows somewhere.
    pub max_increase: f64,
    /// `max_k ‖uᵏ‖₂ − ‖u⁰‖₂`.
    pub max_excess: f64,
    pub nehari_positive: bool,
    pub strictly_decreasing: bool,
    /// `max_k |½ (‖uᵏ⁺¹‖² − ‖uᵏ‖²)/dt + I_p(uᵏ⁺¹)| / (1 + |I_p(uᵏ⁺¹)|)`.
    pub identity_worst: f64,
}

pub fn l2_audit(traj: &Trajectory) -> L2Audit {
    let s = &traj.snapshots;
    let l0 = s[0].l2;
    let mut audit = L2Audit {
        max_increase: 0.0,
        max_excess: 0.0,
        nehari_positive: s.iter().all(|x| x.nehari > 0.0 || x.sup == 0.0),
        strictly_decreasing: s.len() > 1,
        identity_worst: 0.0,
    };
    let mut first = true;
    for w in s.windows(2) {
        let inc = w[1].l2 - w[0].l2;
        audit.max_increase = if first { inc } else { audit.max_increase.max(inc) };
        first = false;
        if !(inc < 0.0) && w[0].l2 > 0.0 {
            audit.strictly_decreasing = false;
        }
        audit.max_excess = audit.max_excess.max(w[1].l2 - l0);
        let rate = 0.5 * (w[1].l2 * w[1].l2 - w[0].l2 * w[0].l2) / w[1].dt;
        let defect = (rate + w[1].nehari).abs() / (1.0 + w[1].nehari.abs());
        audit.identity_worst = audit.identity_worst.max(defect);
    }
    audit
}

/// `∫|∇u|^p < θ p d_hat / (θ − p)` and `∫₀ᵗ‖u_s‖² < d_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientBoundAudit {
    pub bound: f64,
    /// `min_t (bound − ∫|∇u(t)|^p)`.
    pub worst_margin: f64,
    pub dissipation_total: f64,
    /// `d_hat − dissipation_total`.
    pub dissipation_margin: f64,
}

impl GradientBoundAudit {
    pub fn holds(&self) -> bool {
        self.worst_margin > 0.0 && self.dissipation_margin > 0.0
    }
}

pub fn gradient_bound_audit(traj: &Trajectory, p: f64, theta: f64, d_hat: f64) -> Result<GradientBoundAudit> {
    if !(theta > p) {
        return Err(Error::ThetaNotAboveP { theta, p });
    }
    let bound = theta * p * d_hat / (theta - p);
    let worst_margin = traj.snapshots.iter().map(|s| bound - s.grad_p).fold(f64::INFINITY, f64::min);
    let dissipation_total = traj.last().dissipation_cum;
    Ok(GradientBoundAudit { bound, worst_margin, dissipation_total, dissipation_margin: d_hat - dissipation_total })
}

/// `∫ f(u)² ≤ 2C²(|Ω| + |Ω|^{2−q} ‖u₀‖₂^{2q−2})` on stored states, using the
/// L² bound `‖u(t)‖₂ ≤ ‖u₀‖₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthAudit {
    pub bound: f64,
    /// `max_t ∫ f(u(t))² / bound`.
    pub worst_ratio: f64,
}

/// `None` when the reaction has no growth bound with exponent below 2.
pub fn growth_audit(traj: &Trajectory, nl: &Nonlinearity) -> Option<GrowthAudit> {
    let u0 = &traj.states.first()?.field;
    let bound = reaction_l2_bound(nl, u0.mesh().volume(), u0.l2_norm())?;
    let worst = traj.states.iter().map(|s| reaction_l2_squared(&s.field, nl)).fold(0.0, f64::max);
    Some(GrowthAudit { bound, worst_ratio: if bound > 0.0 { worst / bound } else { 0.0 } })
}
