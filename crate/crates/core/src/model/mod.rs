//! Reaction terms, the energy and Nehari functionals, Nehari scaling, the
//! dictionary estimate of the well depth and well classification.

mod conditions;
mod functionals;
mod nehari;
mod nonlinearity;
mod well;

pub use conditions::{check_f_conditions, default_grid, log_grid, FConditionReport, F2_REL_TOL};
pub use functionals::{
    bv_norm, diffusion_monotonicity, energy, energy_derivative, gradient_sums, nehari_functional,
    one_laplacian_energy, reaction_integrals, reaction_l2_bound, reaction_l2_squared, regularized_flux,
    regularized_norm, young_gap, GradientSums,
};
pub(crate) use functionals::check_p;
pub use nehari::{default_dictionary, estimate_dp, nehari_scale, DpEstimate};
pub use nonlinearity::{evaluate_nonlinearity, GrowthBound, Nonlinearity};
pub use well::{well_status, WellReport, WellStatus, ENERGY_STRICT_TOL, NEHARI_STRICT_TOL, ON_NEHARI_TOL};
