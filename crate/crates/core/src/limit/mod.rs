//! Passage to the limit `p → 1⁺`: flux fields, the continuation driver and
//! the radial sup bound.

mod continuation;
mod flux;
mod radial;

pub use continuation::{
    default_eps_schedule, default_p_sequence, run_continuation, CheckpointRecord, ContinuationPlan,
    ContinuationRecord, ContinuationReport, Verdict, VerdictTolerances, Verdicts,
};
pub use flux::{
    boundary_sign_check, extract_flux, flux_alignment, green_residual, green_terms, inner_trace, BoundarySignReport,
    FluxField,
};
pub use radial::{radial_sup_bound_check, RadialSupReport};
