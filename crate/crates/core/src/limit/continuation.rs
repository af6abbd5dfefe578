//! The continuation `p_m ↓ 1`: one solver run per exponent, flux extraction
//! at common checkpoint times and the conditions a limit pair `(u, z)` has to
//! satisfy, evaluated on every member.

use std::sync::Arc;

use rayon::prelude::*;

use super::flux::{boundary_sign_check, extract_flux, flux_alignment, FluxField};
use crate::error::{Error, Result};
use crate::mesh::{Field, Mesh};
use crate::model::{
    bv_norm, default_dictionary, estimate_dp, one_laplacian_energy, well_status, young_gap, Nonlinearity,
    WellStatus,
};
use crate::solver::{run, RunStatus, SolverConfig, Trajectory};

/// Tolerances of the limit conditions. The same values are echoed in the
/// report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictTolerances {
    /// `max |z| ≤ 1 + z_bound`.
    pub z_bound: f64,
    /// Alignment ratio `≥ 1 − pairing`.
    pub pairing: f64,
    /// `|[z,ν] − sign(−u)| ≤ boundary_sign`.
    pub boundary_sign: f64,
    /// `|u|` below which the boundary value counts as zero.
    pub boundary_zero: f64,
    /// Relative L² residual of `u_t − div z − f(u)` at interior nodes.
    pub equation: f64,
    /// Energy inequality slack relative to `1 + |E(u₀)|`.
    pub energy: f64,
}

impl Default for VerdictTolerances {
    fn default() -> Self {
        VerdictTolerances {
            z_bound: 0.05,
            pairing: 0.05,
            boundary_sign: 0.05,
            boundary_zero: 1e-12,
            equation: 0.05,
            energy: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationPlan {
    /// Strictly decreasing exponents, all above 1.
    pub p_sequence: Vec<f64>,
    /// Regularization per exponent.
    pub eps_schedule: Vec<f64>,
    pub mesh: Arc<Mesh>,
    pub u0: Field,
    pub nl: Nonlinearity,
    /// Solver settings shared by all members; `p`, `eps` and `checkpoints`
    /// are overridden per member.
    pub cfg: SolverConfig,
    pub checkpoints: Vec<f64>,
    /// Directions for the well-depth estimate; `u₀` is appended when nonzero.
    pub dictionary: Vec<Field>,
    /// Upper limit `p₀` for the exponents, when the reaction declares one.
    pub p0: Option<f64>,
    pub tolerances: VerdictTolerances,
}

/// `p_m = 1 + 2^{−m}` for `m = 1..=members`.
pub fn default_p_sequence(members: usize) -> Vec<f64> {
    (1..=members).map(|m| 1.0 + 0.5f64.powi(m as i32)).collect()
}

/// `ε_m = (p_m − 1)²`.
pub fn default_eps_schedule(p: &[f64]) -> Vec<f64> {
    p.iter().map(|p| (p - 1.0) * (p - 1.0)).collect()
}

impl ContinuationPlan {
    /// Plan with the default exponents and regularization, checkpoints at
    /// `t ∈ {0.1, 0.25, 0.4}` and an 8-bump dictionary.
    pub fn new(u0: Field, nl: Nonlinearity, members: usize) -> Self {
        let mesh = Arc::clone(u0.mesh());
        let p_sequence = default_p_sequence(members);
        let eps_schedule = default_eps_schedule(&p_sequence);
        let dictionary = default_dictionary(&mesh, 8);
        ContinuationPlan {
            p_sequence,
            eps_schedule,
            mesh,
            u0,
            nl,
            cfg: SolverConfig::default(),
            checkpoints: vec![0.1, 0.25, 0.4],
            dictionary,
            p0: None,
            tolerances: VerdictTolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, m: String| Err(Error::config(key, m));
        if self.p_sequence.is_empty() {
            return bad("p_sequence", "empty".into());
        }
        if self.eps_schedule.len() != self.p_sequence.len() {
            return bad("eps_schedule", "needs one entry per exponent".into());
        }
        if self.p_sequence.iter().any(|&p| !(p > 1.0 && p.is_finite())) {
            return bad("p_sequence", "every exponent must exceed 1".into());
        }
        if self.p_sequence.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("p_sequence", "must be strictly decreasing".into());
        }
        if self.eps_schedule.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
            return bad("eps_schedule", "entries must be finite and ≥ 0".into());
        }
        if let Some(p0) = self.p0 {
            if self.p_sequence[0] >= p0 {
                return bad("p_sequence", format!("exponents must stay below p0 = {p0}"));
            }
        }
        if let Some(theta) = self.nl.theta() {
            if self.p_sequence[0] >= theta {
                return Err(Error::ThetaNotAboveP { theta, p: self.p_sequence[0] });
            }
        }
        if !crate::mesh::same_mesh(&self.mesh, self.u0.mesh()) {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }
}

/// Flux diagnostics at one checkpoint of one member.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRecord {
    pub time: f64,
    pub max_abs_z: f64,
    pub alignment: f64,
    /// Largest `|[z,ν] − sign(−u)|` (or excess of `|[z,ν]|` over 1 at zero
    /// boundary values), before subtracting the tolerance.
    pub boundary_sign: f64,
    pub div_z_l2: f64,
    pub equation_residual: f64,
    /// `∫₀ᵗ‖u_s‖² + E(u(t)) − E(u₀)` with the 1-Laplacian energy.
    pub energy_residual: f64,
    /// The same with `E_p`.
    pub energy_p_residual: f64,
    /// `(1/p)∫|∇u|^p + ((p−1)/p)|Ω| − ∫|∇u|`.
    pub young_gap: f64,
    /// `∫|∇u| + ∫_{∂Ω}|u|`.
    pub bv_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationRecord {
    pub p: f64,
    pub eps: f64,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub u0_well: WellStatus,
    pub d_hat: f64,
    /// Sup over checkpoints.
    pub max_abs_z: f64,
    /// Min over checkpoints.
    pub alignment_min: f64,
    pub boundary_sign_worst: f64,
    /// `max_t ∫|∇u(t)|^p`.
    pub grad_bound_worst: f64,
    /// `θ p d_hat / (θ − p)`, when `θ` exists.
    pub grad_bound_ceiling: Option<f64>,
    pub dissipation_total: f64,
    /// Max over checkpoints of the 1-Laplacian energy ledger.
    pub energy_inequality_worst_residual: f64,
    /// Max over all accepted steps of the `E_p` ledger.
    pub energy_p_worst_residual: f64,
    pub young_min_gap: f64,
    pub equation_residual_worst: f64,
    pub div_z_l2_max: f64,
    pub tv_max: f64,
    pub checkpoints: Vec<CheckpointRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub holds: bool,
    pub value: f64,
    pub tolerance: f64,
}

/// One entry per condition on the limit pair, evaluated on the last member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdicts {
    /// `|z|_∞ ≤ 1`.
    pub z_bound: Verdict,
    /// `(z, Du) = |Du|`.
    pub pairing: Verdict,
    /// `[z, ν] ∈ sign(−u)`.
    pub boundary_sign: Verdict,
    /// `u_t − div z = f(u)`.
    pub equation: Verdict,
    /// `∫₀ᵗ‖u_s‖² + E(u(t)) ≤ E(u₀)`.
    pub energy_inequality: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationReport {
    pub records: Vec<ContinuationRecord>,
    /// `max_t ‖z_m(t) − z_{m+1}(t)‖₂` over common checkpoints, per consecutive pair.
    pub z_cauchy: Vec<Option<f64>>,
    /// `max_m max_t ∫|∇u_m|^{p_m}`.
    pub uniform_grad_bound: f64,
    /// `max_m ∫₀^T ‖u_{m,s}‖²`.
    pub uniform_dissipation: f64,
    /// `1 + 10 (p − 1)` check of `max|z|` per member.
    pub z_growth_ok: Vec<bool>,
    pub tolerances: VerdictTolerances,
    pub verdicts: Option<Verdicts>,
    /// `E(u₀)` with the 1-Laplacian energy.
    pub energy_u0: f64,
}

struct Member {
    record: ContinuationRecord,
    fluxes: Vec<(f64, FluxField)>,
}

fn equation_residual(flux: &FluxField, u: &Field, rate: &Field, nl: &Nonlinearity) -> f64 {
    let mesh = u.mesh();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..mesh.node_count() {
        if mesh.is_boundary(i) {
            continue;
        }
        let m = mesh.quad_weights()[i];
        let (ut, div, f) = (rate.values()[i], flux.div_z()[i], nl.f(u.values()[i]));
        num += m * (ut - div - f).powi(2);
        den += m * (ut * ut + div * div + f * f);
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

fn run_member(plan: &ContinuationPlan, k: usize, energy_u0: f64) -> Result<Member> {
    let p = plan.p_sequence[k];
    let eps = plan.eps_schedule[k];
    let nl = &plan.nl;
    let mut cfg = plan.cfg.clone();
    cfg.p = p;
    cfg.eps = eps;
    cfg.checkpoints = plan.checkpoints.iter().copied().filter(|&t| t <= cfg.t_end).collect();

    let mut dictionary = plan.dictionary.clone();
    if !plan.u0.is_zero() {
        dictionary.push(plan.u0.clone());
    }
    let d_hat = if dictionary.is_empty() {
        f64::INFINITY
    } else {
        estimate_dp(&plan.mesh, p, nl, &dictionary)?.d_hat
    };
    let u0_well = well_status(&plan.u0, p, nl, d_hat)?.status;
    let traj: Trajectory = run(&plan.mesh, &plan.u0, &cfg, nl)?;
    let e0p = traj.initial().energy;

    let mut record = ContinuationRecord {
        p,
        eps,
        status: traj.status,
        failure: traj.failure.clone(),
        u0_well,
        d_hat,
        max_abs_z: 0.0,
        alignment_min: 1.0,
        boundary_sign_worst: 0.0,
        grad_bound_worst: traj.snapshots.iter().map(|s| s.grad_p).fold(0.0, f64::max),
        grad_bound_ceiling: nl.theta().filter(|&t| t > p).map(|t| t * p * d_hat / (t - p)),
        dissipation_total: traj.last().dissipation_cum,
        energy_inequality_worst_residual: 0.0,
        energy_p_worst_residual: traj
            .snapshots
            .iter()
            .map(|s| s.dissipation_cum + s.energy - e0p)
            .fold(0.0, f64::max),
        young_min_gap: f64::INFINITY,
        equation_residual_worst: 0.0,
        div_z_l2_max: 0.0,
        tv_max: traj.snapshots.iter().map(|s| s.tv).fold(0.0, f64::max),
        checkpoints: Vec::new(),
    };
    let mut fluxes = Vec::new();
    for cp in &traj.checkpoints {
        let snap = traj.snapshots.iter().find(|s| s.time == cp.time).expect("checkpoint has a snapshot");
        let flux = extract_flux(&cp.field, p, eps);
        let sign = boundary_sign_check(&flux, &cp.field, plan.tolerances.boundary_zero, 0.0)?;
        let c = CheckpointRecord {
            time: cp.time,
            max_abs_z: flux.max_abs(),
            alignment: flux_alignment(&flux, &cp.field, None)?,
            boundary_sign: sign.worst,
            div_z_l2: flux.div_l2(),
            equation_residual: equation_residual(&flux, &cp.field, &cp.rate, nl),
            energy_residual: snap.dissipation_cum + one_laplacian_energy(&cp.field, nl) - energy_u0,
            energy_p_residual: snap.dissipation_cum + snap.energy - e0p,
            young_gap: young_gap(&cp.field, p)?,
            bv_norm: bv_norm(&cp.field),
        };
        record.max_abs_z = record.max_abs_z.max(c.max_abs_z);
        record.alignment_min = record.alignment_min.min(c.alignment);
        record.boundary_sign_worst = record.boundary_sign_worst.max(c.boundary_sign);
        record.energy_inequality_worst_residual = record.energy_inequality_worst_residual.max(c.energy_residual);
        record.young_min_gap = record.young_min_gap.min(c.young_gap);
        record.equation_residual_worst = record.equation_residual_worst.max(c.equation_residual);
        record.div_z_l2_max = record.div_z_l2_max.max(c.div_z_l2);
        record.checkpoints.push(c);
        fluxes.push((cp.time, flux));
    }
    if record.checkpoints.is_empty() {
        record.young_min_gap = young_gap(&plan.u0, p)?;
    }
    Ok(Member { record, fluxes })
}

/// Runs every member (in parallel) and assembles the report in plan order.
pub fn run_continuation(plan: &ContinuationPlan) -> Result<ContinuationReport> {
    plan.validate()?;
    let energy_u0 = one_laplacian_energy(&plan.u0, &plan.nl);
    let members = (0..plan.p_sequence.len())
        .into_par_iter()
        .map(|k| run_member(plan, k, energy_u0))
        .collect::<Result<Vec<Member>>>()?;

    let z_cauchy = members
        .windows(2)
        .map(|w| {
            let mut worst: Option<f64> = None;
            for (t, a) in &w[0].fluxes {
                if let Some((_, b)) = w[1].fluxes.iter().find(|(s, _)| s == t) {
                    let d = a.l2_distance(b).expect("members share the mesh");
                    worst = Some(worst.map_or(d, |x| x.max(d)));
                }
            }
            worst
        })
        .collect();
    let records: Vec<ContinuationRecord> = members.into_iter().map(|m| m.record).collect();
    let uniform_grad_bound = records.iter().map(|r| r.grad_bound_worst).fold(0.0, f64::max);
    let uniform_dissipation = records.iter().map(|r| r.dissipation_total).fold(0.0, f64::max);
    let z_growth_ok = records.iter().map(|r| r.max_abs_z <= 1.0 + 10.0 * (r.p - 1.0)).collect();
    let tol = plan.tolerances;
    let verdicts = records.last().map(|r| {
        let le = |value: f64, tolerance: f64| Verdict { holds: value <= tolerance, value, tolerance };
        Verdicts {
            z_bound: le(r.max_abs_z, 1.0 + tol.z_bound),
            pairing: Verdict {
                holds: r.alignment_min >= 1.0 - tol.pairing,
                value: r.alignment_min,
                tolerance: 1.0 - tol.pairing,
            },
            boundary_sign: le(r.boundary_sign_worst, tol.boundary_sign),
            equation: le(r.equation_residual_worst, tol.equation),
            energy_inequality: le(r.energy_inequality_worst_residual, tol.energy * (1.0 + energy_u0.abs())),
        }
    });
    Ok(ContinuationReport {
        records,
        z_cauchy,
        uniform_grad_bound,
        uniform_dissipation,
        z_growth_ok,
        tolerances: tol,
        verdicts,
        energy_u0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, profiles, Domain, Resolution};

    #[test]
    fn zero_initial_state_is_trivial() {
        let m = build_mesh(Domain::Interval { length: 1.0 }, Resolution::Uniform(20)).unwrap();
        let plan = ContinuationPlan::new(Field::zeros(m), Nonlinearity::Zero, 3);
        let report = run_continuation(&plan).unwrap();
        assert_eq!(report.records.len(), 3);
        for r in &report.records {
            assert_eq!(r.status, RunStatus::Extinct(0.0));
            assert_eq!(r.max_abs_z, 0.0);
            assert_eq!(r.dissipation_total, 0.0);
            assert_eq!(r.grad_bound_worst, 0.0);
        }
        assert_eq!(report.uniform_grad_bound, 0.0);
        assert!(report.verdicts.unwrap().z_bound.holds);
    }

    #[test]
    fn plan_validation() {
        let m = build_mesh(Domain::Interval { length: 1.0 }, Resolution::Uniform(20)).unwrap();
        let mut plan = ContinuationPlan::new(profiles::hat(&m), Nonlinearity::Power { q: 1.4 }, 3);
        assert!(matches!(plan.validate(), Err(Error::ThetaNotAboveP { .. })));
        plan.nl = Nonlinearity::Power { q: 3.0 };
        assert!(plan.validate().is_ok());
        plan.p0 = Some(1.2);
        assert!(plan.validate().is_err());
        plan.p0 = None;
        plan.p_sequence = vec![1.1, 1.2, 1.05];
        assert!(plan.validate().is_err());
    }

    #[test]
    fn defaults() {
        let p = default_p_sequence(3);
        assert_eq!(p, vec![1.5, 1.25, 1.125]);
        assert_eq!(default_eps_schedule(&p), vec![0.25, 0.0625, 0.015625]);
    }
}
