//! Numerical laboratory for the reaction 1-Laplacian heat flow
//! `u_t − Δ₁u = f(u)` with homogeneous Dirichlet data, approached through the
//! p-Laplacian flow and a continuation `p → 1⁺`.

pub mod cli;
pub mod error;
pub mod mesh;
pub mod model;
pub mod limit;
pub mod solver;

pub use error::{Error, Result};
