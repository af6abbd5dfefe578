use std::sync::Arc;

use super::{dot, Mesh, Vec2};
use crate::error::{Error, Result};

/// Nodal values of a function on a mesh at one time instant.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        mesh.check_nodal(&values)?;
        Ok(Field { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.node_count()];
        Field { mesh, values }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Vec2) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|&x| f(x)).collect();
        Field { mesh, values }
    }

    /// Nodal interpolant of `f` with the homogeneous Dirichlet condition imposed.
    pub fn dirichlet_from_fn(mesh: Arc<Mesh>, f: impl Fn(Vec2) -> f64) -> Self {
        let mut field = Self::from_fn(mesh, f);
        field.apply_dirichlet();
        field
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn gradient(&self) -> Vec<Vec2> {
        self.mesh.gradient_unchecked(&self.values)
    }

    pub fn apply_dirichlet(&mut self) {
        for &b in self.mesh.boundary_nodes() {
            self.values[b] = 0.0;
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        self.mesh.boundary_nodes().iter().all(|&b| self.values[b] == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_squared().sqrt()
    }

    pub fn l2_norm_squared(&self) -> f64 {
        self.mesh
            .quad_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum()
    }

    /// `∫ u v dx` under the lumped quadrature.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.ensure_same_mesh(other)?;
        let w = self.mesh.quad_weights();
        Ok(self.values.iter().zip(&other.values).zip(w).map(|((a, b), w)| a * b * w).sum())
    }

    pub fn integral(&self) -> f64 {
        dot(self.mesh.quad_weights(), &self.values)
    }

    /// Values at the boundary nodes, in [`Mesh::boundary_nodes`] order.
    pub fn boundary_values(&self) -> Vec<f64> {
        self.mesh.boundary_nodes().iter().map(|&b| self.values[b]).collect()
    }

    pub fn same_mesh(&self, other: &Field) -> bool {
        same_mesh(&self.mesh, &other.mesh)
    }

    pub fn ensure_same_mesh(&self, other: &Field) -> Result<()> {
        if self.same_mesh(other) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }
}

pub(crate) fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}
