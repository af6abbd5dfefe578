//! Element-wise flux fields `z`, their discrete divergence and normal trace.
//!
//! The divergence is the adjoint of the element gradient under the lumped
//! quadrature, completed by the facet fluxes at boundary nodes:
//!
//! ```text
//! mᵢ (div z)ᵢ = −Σ_e |e| z_e·∇φᵢ + Σ_{F ∋ i} (|F| / #F) z_{e(F)}·ν_F
//! ```
//!
//! and the trace at a boundary node is the facet sum divided by the node's
//! boundary weight. With these definitions the Green formula
//! `∫ z·∇w + ∫ w div z = ∫_{∂Ω} w [z, ν]` holds exactly for every nodal `w`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{same_mesh, Field, Mesh, Vec2};
use crate::model::regularized_flux;

#[derive(Debug, Clone)]
pub struct FluxField {
    mesh: Arc<Mesh>,
    z: Vec<Vec2>,
    boundary_trace: Vec<f64>,
    div_z: Vec<f64>,
}

/// `z = |∇u|_ε^{p−2} ∇u` per element.
pub fn extract_flux(field: &Field, p: f64, eps: f64) -> FluxField {
    let z = field.gradient().into_iter().map(|g| regularized_flux(g, p, eps)).collect();
    FluxField::from_vectors(Arc::clone(field.mesh()), z).expect("one vector per element")
}

impl FluxField {
    /// A flux field from arbitrary element vectors.
    pub fn from_vectors(mesh: Arc<Mesh>, z: Vec<Vec2>) -> Result<Self> {
        if z.len() != mesh.element_count() {
            return Err(Error::SizeMismatch { expected: mesh.element_count(), found: z.len() });
        }
        let mut flux = vec![0.0; mesh.node_count()];
        for (e, ze) in mesh.elements().iter().zip(&z) {
            for (&n, dphi) in e.nodes().iter().zip(e.basis_gradients()) {
                flux[n] -= e.measure() * (ze[0] * dphi[0] + ze[1] * dphi[1]);
            }
        }
        let mut facet_sum = vec![0.0; mesh.boundary_nodes().len()];
        for f in mesh.boundary_facets() {
            let ze = z[f.element];
            let zn = ze[0] * f.normal[0] + ze[1] * f.normal[1];
            let share = f.measure / f.nodes().len() as f64;
            for &n in f.nodes() {
                let s = mesh.boundary_slot(n).expect("facet nodes lie on the boundary");
                facet_sum[s] += share * zn;
                flux[n] += share * zn;
            }
        }
        let div_z = flux.iter().zip(mesh.quad_weights()).map(|(f, m)| f / m).collect();
        let boundary_trace = facet_sum.iter().zip(mesh.boundary_weights()).map(|(s, b)| s / b).collect();
        Ok(FluxField { mesh, z, boundary_trace, div_z })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn z(&self) -> &[Vec2] {
        &self.z
    }

    /// `[z, ν]` per boundary node, in [`Mesh::boundary_nodes`] order.
    pub fn boundary_trace(&self) -> &[f64] {
        &self.boundary_trace
    }

    /// Nodal divergence.
    pub fn div_z(&self) -> &[f64] {
        &self.div_z
    }

    pub fn max_abs(&self) -> f64 {
        self.z.iter().map(|z| z[0].hypot(z[1])).fold(0.0, f64::max)
    }

    /// `‖div z‖₂` under the lumped quadrature.
    pub fn div_l2(&self) -> f64 {
        self.div_z.iter().zip(self.mesh.quad_weights()).map(|(d, m)| m * d * d).sum::<f64>().sqrt()
    }

    /// `(Σ_e |e| |z_e − y_e|²)^{1/2}`.
    pub fn l2_distance(&self, other: &FluxField) -> Result<f64> {
        if !same_mesh(&self.mesh, &other.mesh) {
            return Err(Error::MeshMismatch);
        }
        Ok(self
            .mesh
            .elements()
            .iter()
            .zip(self.z.iter().zip(&other.z))
            .map(|(e, (a, b))| e.measure() * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)))
            .sum::<f64>()
            .sqrt())
    }

    fn check(&self, field: &Field) -> Result<()> {
        if same_mesh(&self.mesh, field.mesh()) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }
}

/// `∫ z·∇u / ∫ |∇u|` over elements with `|∇u| > floor`; 1 when no element
/// qualifies. `floor = None` uses `1e−6 · max |∇u|`.
pub fn flux_alignment(flux: &FluxField, field: &Field, floor: Option<f64>) -> Result<f64> {
    flux.check(field)?;
    let grads = field.gradient();
    let max = grads.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max);
    let floor = floor.unwrap_or(1e-6 * max);
    let (mut num, mut den) = (0.0, 0.0);
    for ((e, g), z) in flux.mesh.elements().iter().zip(&grads).zip(&flux.z) {
        let n = g[0].hypot(g[1]);
        if n > floor {
            num += e.measure() * (z[0] * g[0] + z[1] * g[1]);
            den += e.measure() * n;
        }
    }
    Ok(if den == 0.0 { 1.0 } else { num / den })
}

/// Value of `u` just inside the domain at each boundary node: the mean, over
/// the facets through the node, of `u` at the facet element's nodes off that
/// facet.
pub fn inner_trace(field: &Field) -> Vec<f64> {
    let mesh = field.mesh();
    let u = field.values();
    let mut sum = vec![0.0; mesh.boundary_nodes().len()];
    let mut count = vec![0usize; sum.len()];
    for f in mesh.boundary_facets() {
        let e = &mesh.elements()[f.element];
        let off: Vec<f64> = e.nodes().iter().filter(|n| !f.nodes().contains(n)).map(|&n| u[n]).collect();
        let v = off.iter().sum::<f64>() / off.len() as f64;
        for &n in f.nodes() {
            let s = mesh.boundary_slot(n).expect("facet nodes lie on the boundary");
            sum[s] += v;
            count[s] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySignReport {
    /// Largest violation over boundary nodes; `≤ 0` means every node passes.
    pub worst: f64,
    /// `|[z,ν] − sign(−u)|` at the worst node with `|u| > tol`, if any.
    pub worst_sign_distance: Option<f64>,
    pub worst_node: Option<usize>,
    pub checked: usize,
    pub passes: bool,
}

/// `[z, ν] ∈ sign(−u)` on the boundary, with `u` read from the inner trace.
///
/// Nodes with `|u| ≤ tol` need `|[z,ν]| ≤ 1 + tol`; the others need
/// `|[z,ν] − sign(−u)| ≤ tol_sign`.
pub fn boundary_sign_check(flux: &FluxField, field: &Field, tol: f64, tol_sign: f64) -> Result<BoundarySignReport> {
    flux.check(field)?;
    let inner = inner_trace(field);
    let mut report =
        BoundarySignReport { worst: f64::NEG_INFINITY, worst_sign_distance: None, worst_node: None, checked: 0, passes: true };
    for (k, (&u, &tr)) in inner.iter().zip(&flux.boundary_trace).enumerate() {
        let violation = if u.abs() <= tol {
            tr.abs() - (1.0 + tol)
        } else {
            let d = (tr - (-u).signum()).abs();
            report.worst_sign_distance = Some(report.worst_sign_distance.map_or(d, |w: f64| w.max(d)));
            d - tol_sign
        };
        report.checked += 1;
        if violation > report.worst {
            report.worst = violation;
            report.worst_node = Some(flux.mesh.boundary_nodes()[k]);
        }
    }
    if report.checked == 0 {
        report.worst = 0.0;
    }
    report.passes = report.worst <= 0.0;
    Ok(report)
}

/// `|∫ z·∇w + ∫ w div z − ∫_{∂Ω} w [z,ν]|` and the sum of the absolute
/// values of the three terms, for scaling.
pub fn green_terms(flux: &FluxField, w: &Field) -> Result<(f64, f64)> {
    flux.check(w)?;
    let mesh = &flux.mesh;
    let pairing: f64 = mesh
        .elements()
        .iter()
        .zip(w.gradient())
        .zip(&flux.z)
        .map(|((e, g), z)| e.measure() * (z[0] * g[0] + z[1] * g[1]))
        .sum();
    let volume: f64 = w.values().iter().zip(&flux.div_z).zip(mesh.quad_weights()).map(|((a, b), m)| m * a * b).sum();
    let wb: Vec<f64> = w.boundary_values().iter().zip(&flux.boundary_trace).map(|(a, b)| a * b).collect();
    let boundary = mesh.boundary_integrate(&wb)?;
    Ok(((pairing + volume - boundary).abs(), pairing.abs() + volume.abs() + boundary.abs()))
}

pub fn green_residual(flux: &FluxField, w: &Field) -> Result<f64> {
    green_terms(flux, w).map(|(r, _)| r)
}
