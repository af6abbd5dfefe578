use super::functionals::{check_p, gradient_sums, reaction_integrals};
use super::Nonlinearity;
use crate::error::Result;
use crate::mesh::Field;

/// Relative slack for the strict inequality `I_p > 0`.
pub const NEHARI_STRICT_TOL: f64 = 1e-10;
/// Relative slack for the strict inequality `E_p < d_hat`.
pub const ENERGY_STRICT_TOL: f64 = 1e-10;
/// Relative band around `I_p = 0` classified as lying on the Nehari set.
pub const ON_NEHARI_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WellStatus {
    Inside,
    OnNehari,
    Outside,
}

impl WellStatus {
    pub fn name(self) -> &'static str {
        match self {
            WellStatus::Inside => "inside",
            WellStatus::OnNehari => "on_nehari",
            WellStatus::Outside => "outside",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellReport {
    pub d_hat: f64,
    pub status: WellStatus,
    /// `d_hat − E_p(u)`.
    pub margin_e: f64,
    /// `I_p(u)`.
    pub margin_i: f64,
    /// `E_p(u)`.
    pub energy: f64,
    /// `∫|∇u|^p`.
    pub grad_p: f64,
}

/// Classifies `u` against the discrete well `{E_p < d_hat, I_p > 0} ∪ {0}`.
pub fn well_status(field: &Field, p: f64, nl: &Nonlinearity, d_hat: f64) -> Result<WellReport> {
    check_p(p)?;
    let grad_p = gradient_sums(field, p).p_energy;
    let (big_f, fu) = reaction_integrals(field, nl);
    let energy = grad_p / p - big_f;
    let margin_i = grad_p - fu;
    let margin_e = d_hat - energy;
    // Both terms of I_p vanish with u, so the slack scales with them.
    let scale = grad_p + fu.abs();
    let status = if field.is_zero() {
        WellStatus::Inside
    } else if margin_i > NEHARI_STRICT_TOL * scale
        && (d_hat == f64::INFINITY || margin_e > ENERGY_STRICT_TOL * (1.0 + d_hat.abs()))
    {
        WellStatus::Inside
    } else if margin_i.abs() <= ON_NEHARI_TOL * scale {
        WellStatus::OnNehari
    } else {
        WellStatus::Outside
    };
    Ok(WellReport { d_hat, status, margin_e, margin_i, energy, grad_p })
}
