//! Spatial discretizations.
//!
//! Three domains are supported: an interval, an annulus `a < |x| < b` in
//! `R^N` reduced to a weighted radial line, and a rectangle carrying a
//! structured triangulation. All of them use a piecewise-affine nodal basis,
//! piecewise-constant element gradients and a mass-lumped nodal quadrature
//! (`quad_weights[i] = ∫ φ_i dμ`), so the mass matrix is diagonal.
//!
//! For the annulus the spatial coordinate is the radius `r`; the volume
//! measure is `|S^{N-1}| r^{N-1} dr` and gradients are radial derivatives.

mod dump;
mod field;
pub mod profiles;

pub use dump::{parse_dump, MeshDump};
pub use field::Field;
pub(crate) use field::same_mesh;

use std::sync::Arc;

use crate::error::{Error, Result};

/// A point or vector. One-dimensional meshes only use the first component.
pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { length: f64 },
    /// `{x ∈ R^dim : inner < |x| < outer}`, handled through radial symmetry.
    Annulus { inner: f64, outer: f64, dim: usize },
    Rectangle { width: f64, height: f64 },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("{name} = {v} must be positive and finite")))
            }
        };
        match *self {
            Domain::Interval { length } => positive("length", length),
            Domain::Annulus { inner, outer, dim } => {
                positive("a", inner)?;
                positive("b", outer)?;
                if inner >= outer {
                    return Err(Error::InvalidDomain(format!(
                        "annulus needs a < b, got a = {inner}, b = {outer}"
                    )));
                }
                if dim < 2 {
                    return Err(Error::InvalidDomain(format!("annulus needs N >= 2, got {dim}")));
                }
                Ok(())
            }
            Domain::Rectangle { width, height } => {
                positive("width", width)?;
                positive("height", height)
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Domain::Interval { .. } => "interval",
            Domain::Annulus { .. } => "annulus",
            Domain::Rectangle { .. } => "rectangle",
        }
    }

    /// Dimension of the gradient vectors on the discretization.
    pub fn grad_dim(&self) -> usize {
        match self {
            Domain::Rectangle { .. } => 2,
            _ => 1,
        }
    }

    /// Exact Lebesgue measure `|Ω|`.
    pub fn volume(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length,
            Domain::Annulus { inner, outer, dim } => {
                let n = dim as i32;
                unit_sphere_area(dim) * (outer.powi(n) - inner.powi(n)) / dim as f64
            }
            Domain::Rectangle { width, height } => width * height,
        }
    }

    /// Exact `(N-1)`-dimensional measure of `∂Ω` (counting measure for an interval).
    pub fn boundary_measure(&self) -> f64 {
        match *self {
            Domain::Interval { .. } => 2.0,
            Domain::Annulus { inner, outer, dim } => {
                let k = dim as i32 - 1;
                unit_sphere_area(dim) * (inner.powi(k) + outer.powi(k))
            }
            Domain::Rectangle { width, height } => 2.0 * (width + height),
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length,
            Domain::Annulus { outer, .. } => 2.0 * outer,
            Domain::Rectangle { width, height } => width.hypot(height),
        }
    }
}

/// Surface measure of the unit sphere `S^{dim-1} ⊂ R^dim`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        n => 2.0 * PI * unit_sphere_area(n - 2) / (n - 2) as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Uniform(usize),
    Grid(usize, usize),
}

/// A segment (1D) or triangle (2D) with the constant gradients of its local
/// basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    nodes: [usize; 3],
    arity: usize,
    basis_gradients: [Vec2; 3],
    measure: f64,
}

impl Element {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.arity]
    }

    pub fn basis_gradients(&self) -> &[Vec2] {
        &self.basis_gradients[..self.arity]
    }

    /// Volume measure of the element (radially weighted on an annulus).
    pub fn measure(&self) -> f64 {
        self.measure
    }
}

/// A piece of `∂Ω`: an endpoint in 1D, an edge in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub element: usize,
    nodes: [usize; 2],
    arity: usize,
    pub normal: Vec2,
    pub measure: f64,
}

impl BoundaryFacet {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.arity]
    }
}

/// Samples handed to [`Mesh::integrate`].
#[derive(Debug, Clone, Copy)]
pub enum Samples<'a> {
    Nodal(&'a [f64]),
    Element(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    domain: Domain,
    nodes: Vec<Vec2>,
    elements: Vec<Element>,
    quad_weights: Vec<f64>,
    boundary_nodes: Vec<usize>,
    boundary_normals: Vec<Vec2>,
    boundary_weights: Vec<f64>,
    boundary_facets: Vec<BoundaryFacet>,
    boundary_slot: Vec<Option<usize>>,
    grid: Option<(usize, usize)>,
    h: f64,
}

/// Builds a mesh and wraps it for sharing between fields.
pub fn build_mesh(domain: Domain, resolution: Resolution) -> Result<Arc<Mesh>> {
    Mesh::build(domain, resolution).map(Arc::new)
}

impl Mesh {
    pub fn build(domain: Domain, resolution: Resolution) -> Result<Mesh> {
        domain.validate()?;
        let mesh = match (domain, resolution) {
            (Domain::Interval { length }, Resolution::Uniform(n)) => {
                check_cells("n", n)?;
                line_mesh(domain, 0.0, length, n, 0, 1.0)
            }
            (Domain::Annulus { inner, outer, dim }, Resolution::Uniform(n)) => {
                check_cells("n", n)?;
                line_mesh(domain, inner, outer, n, dim - 1, unit_sphere_area(dim))
            }
            (Domain::Rectangle { width, height }, Resolution::Uniform(n)) => {
                check_cells("n", n)?;
                rectangle_mesh(domain, width, height, n, n)
            }
            (Domain::Rectangle { width, height }, Resolution::Grid(nx, ny)) => {
                check_cells("nx", nx)?;
                check_cells("ny", ny)?;
                rectangle_mesh(domain, width, height, nx, ny)
            }
            (_, Resolution::Grid(..)) => {
                return Err(Error::InvalidResolution(
                    "a resolution pair is only meaningful for a rectangle".into(),
                ))
            }
        };
        debug_assert!(mesh.validate().is_ok());
        Ok(mesh)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn grad_dim(&self) -> usize {
        self.domain.grad_dim()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn boundary_normals(&self) -> &[Vec2] {
        &self.boundary_normals
    }

    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary_weights
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    /// Position of `node` inside [`Mesh::boundary_nodes`], if it is a boundary node.
    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.boundary_slot[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_slot[node].is_some()
    }

    /// Cell counts of the structured grid for a rectangle.
    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Sum of the quadrature weights, i.e. the discrete `|Ω|`.
    pub fn volume(&self) -> f64 {
        self.quad_weights.iter().sum()
    }

    pub fn element_measures(&self) -> impl Iterator<Item = f64> + '_ {
        self.elements.iter().map(|e| e.measure)
    }

    /// Piecewise-constant gradient of a nodal function, one vector per element.
    pub fn gradient(&self, values: &[f64]) -> Result<Vec<Vec2>> {
        self.check_nodal(values)?;
        Ok(self.gradient_unchecked(values))
    }

    pub(crate) fn gradient_unchecked(&self, values: &[f64]) -> Vec<Vec2> {
        self.elements
            .iter()
            .map(|e| {
                let mut g = [0.0; 2];
                for (&n, dphi) in e.nodes().iter().zip(e.basis_gradients()) {
                    g[0] += values[n] * dphi[0];
                    g[1] += values[n] * dphi[1];
                }
                g
            })
            .collect()
    }

    pub fn integrate(&self, samples: Samples<'_>) -> Result<f64> {
        match samples {
            Samples::Nodal(values) => {
                self.check_nodal(values)?;
                Ok(dot(&self.quad_weights, values))
            }
            Samples::Element(values) => {
                if values.len() != self.elements.len() {
                    return Err(Error::SizeMismatch {
                        expected: self.elements.len(),
                        found: values.len(),
                    });
                }
                Ok(self.elements.iter().zip(values).map(|(e, v)| e.measure * v).sum())
            }
        }
    }

    /// `∫_{∂Ω} g dH^{N-1}` from one sample per boundary node.
    pub fn boundary_integrate(&self, boundary_samples: &[f64]) -> Result<f64> {
        if boundary_samples.len() != self.boundary_nodes.len() {
            return Err(Error::SizeMismatch {
                expected: self.boundary_nodes.len(),
                found: boundary_samples.len(),
            });
        }
        Ok(dot(&self.boundary_weights, boundary_samples))
    }

    pub(crate) fn check_nodal(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.nodes.len() {
            return Err(Error::SizeMismatch {
                expected: self.nodes.len(),
                found: values.len(),
            });
        }
        Ok(())
    }

    /// Checks every structural invariant of the discretization.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDomain(msg));
        let exact = self.domain.volume();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);

        if self.quad_weights.iter().any(|&w| !(w > 0.0)) {
            return bad("non-positive quadrature weight".into());
        }
        if rel(self.volume(), exact) > 1e-12 {
            return bad(format!("quadrature weights sum to {} instead of {exact}", self.volume()));
        }
        let element_volume: f64 = self.element_measures().sum();
        if rel(element_volume, exact) > 1e-12 {
            return bad(format!("element measures sum to {element_volume} instead of {exact}"));
        }
        for n in &self.boundary_normals {
            if (n[0].hypot(n[1]) - 1.0).abs() > 1e-12 {
                return bad(format!("boundary normal {n:?} is not a unit vector"));
            }
        }
        if self.boundary_weights.iter().any(|&w| !(w > 0.0)) {
            return bad("non-positive boundary weight".into());
        }
        let boundary: f64 = self.boundary_weights.iter().sum();
        if rel(boundary, self.domain.boundary_measure()) > 1e-12 {
            return bad(format!("boundary weights sum to {boundary}"));
        }

        // Index partition: no element repeated, every node used, no degenerate element.
        let mut seen = std::collections::HashSet::with_capacity(self.elements.len());
        let mut used = vec![false; self.nodes.len()];
        for e in &self.elements {
            if !(e.measure > 0.0) {
                return bad("degenerate element".into());
            }
            let mut key = e.nodes().to_vec();
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("element repeats a node: {key:?}"));
            }
            if !seen.insert(key.clone()) {
                return bad(format!("element {key:?} appears twice"));
            }
            for &n in e.nodes() {
                used[n] = true;
            }
        }
        if used.iter().any(|u| !u) {
            return bad("node not covered by any element".into());
        }
        Ok(())
    }

    /// Text dump: header plus one line per node (coordinates, weight, boundary flag).
    pub fn dump(&self, values: Option<&[f64]>) -> Result<String> {
        dump::write_dump(self, values)
    }
}

fn check_cells(name: &str, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidResolution(format!("{name} = {n}, need at least 2 cells")));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `∫_0^1 (1-s) (r0 + h s)^k ds` and `∫_0^1 s (r0 + h s)^k ds`, expanded
/// binomially so that no cancellation occurs for small `h`.
fn weighted_hat_moments(r0: f64, h: f64, k: usize) -> (f64, f64) {
    let mut left = 0.0;
    let mut right = 0.0;
    let mut binom = 1.0;
    for j in 0..=k {
        let term = binom * r0.powi((k - j) as i32) * h.powi(j as i32);
        let jf = j as f64;
        left += term / ((jf + 1.0) * (jf + 2.0));
        right += term / (jf + 2.0);
        binom = binom * (k - j) as f64 / (jf + 1.0);
    }
    (left, right)
}

/// Uniform line mesh on `[lo, hi]` with measure `sphere · r^k dr`.
fn line_mesh(domain: Domain, lo: f64, hi: f64, n: usize, k: usize, sphere: f64) -> Mesh {
    let len = hi - lo;
    let coords: Vec<f64> = (0..=n)
        .map(|i| if i == n { hi } else { lo + len * i as f64 / n as f64 })
        .collect();
    let mut quad_weights = vec![0.0; n + 1];
    let mut elements = Vec::with_capacity(n);
    let mut h_max: f64 = 0.0;
    for i in 0..n {
        let (r0, r1) = (coords[i], coords[i + 1]);
        let h = r1 - r0;
        h_max = h_max.max(h);
        let (left, right) = weighted_hat_moments(r0, h, k);
        let (w0, w1) = (sphere * h * left, sphere * h * right);
        quad_weights[i] += w0;
        quad_weights[i + 1] += w1;
        elements.push(Element {
            nodes: [i, i + 1, 0],
            arity: 2,
            basis_gradients: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0; 2]],
            measure: w0 + w1,
        });
    }
    let ends = [(0, lo, -1.0, 0), (n, hi, 1.0, n - 1)];
    let boundary_facets: Vec<BoundaryFacet> = ends
        .iter()
        .map(|&(node, r, sign, element)| BoundaryFacet {
            element,
            nodes: [node, 0],
            arity: 1,
            normal: [sign, 0.0],
            measure: sphere * r.powi(k as i32),
        })
        .collect();
    let mut boundary_slot = vec![None; n + 1];
    boundary_slot[0] = Some(0);
    boundary_slot[n] = Some(1);
    Mesh {
        domain,
        nodes: coords.iter().map(|&x| [x, 0.0]).collect(),
        elements,
        quad_weights,
        boundary_nodes: vec![0, n],
        boundary_normals: vec![[-1.0, 0.0], [1.0, 0.0]],
        boundary_weights: boundary_facets.iter().map(|f| f.measure).collect(),
        boundary_facets,
        boundary_slot,
        grid: None,
        h: h_max,
    }
}

fn triangle(nodes: [usize; 3], coords: &[Vec2]) -> Element {
    let [p0, p1, p2] = nodes.map(|n| coords[n]);
    let area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let g = |a: Vec2, b: Vec2| [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
    Element {
        nodes,
        arity: 3,
        basis_gradients: [g(p1, p2), g(p2, p0), g(p0, p1)],
        measure: 0.5 * area2,
    }
}

/// Structured triangulation: every cell is split along its rising diagonal.
fn rectangle_mesh(domain: Domain, width: f64, height: f64, nx: usize, ny: usize) -> Mesh {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let coord = |i: usize, n: usize, len: f64| if i == n { len } else { len * i as f64 / n as f64 };
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([coord(i, nx, width), coord(j, ny, height)]);
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.push(triangle([a, b, c], &nodes));
            elements.push(triangle([a, c, d], &nodes));
        }
    }
    let mut quad_weights = vec![0.0; nodes.len()];
    for e in &elements {
        for &n in e.nodes() {
            quad_weights[n] += e.measure / 3.0;
        }
    }

    let lower = |i: usize, j: usize| 2 * (j * nx + i);
    let upper = |i: usize, j: usize| 2 * (j * nx + i) + 1;
    let mut boundary_facets = Vec::with_capacity(2 * (nx + ny));
    let edge = |element: usize, a: usize, b: usize, normal: Vec2, nodes: &[Vec2]| {
        let (pa, pb) = (nodes[a], nodes[b]);
        BoundaryFacet {
            element,
            nodes: [a, b],
            arity: 2,
            normal,
            measure: (pb[0] - pa[0]).hypot(pb[1] - pa[1]),
        }
    };
    for i in 0..nx {
        boundary_facets.push(edge(lower(i, 0), id(i, 0), id(i + 1, 0), [0.0, -1.0], &nodes));
    }
    for j in 0..ny {
        boundary_facets.push(edge(lower(nx - 1, j), id(nx, j), id(nx, j + 1), [1.0, 0.0], &nodes));
    }
    for i in 0..nx {
        boundary_facets.push(edge(upper(i, ny - 1), id(i + 1, ny), id(i, ny), [0.0, 1.0], &nodes));
    }
    for j in 0..ny {
        boundary_facets.push(edge(upper(0, j), id(0, j + 1), id(0, j), [-1.0, 0.0], &nodes));
    }

    let mut boundary_slot = vec![None; nodes.len()];
    let mut boundary_nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if i == 0 || j == 0 || i == nx || j == ny {
                boundary_slot[id(i, j)] = Some(boundary_nodes.len());
                boundary_nodes.push(id(i, j));
            }
        }
    }
    let mut boundary_weights = vec![0.0; boundary_nodes.len()];
    let mut normal_sums = vec![[0.0; 2]; boundary_nodes.len()];
    for f in &boundary_facets {
        for &n in f.nodes() {
            let s = boundary_slot[n].expect("facet node on boundary");
            boundary_weights[s] += 0.5 * f.measure;
            normal_sums[s][0] += f.normal[0];
            normal_sums[s][1] += f.normal[1];
        }
    }
    let boundary_normals = normal_sums
        .into_iter()
        .map(|v| {
            let len = v[0].hypot(v[1]);
            [v[0] / len, v[1] / len]
        })
        .collect();

    let dx = width / nx as f64;
    let dy = height / ny as f64;
    Mesh {
        domain,
        nodes,
        elements,
        quad_weights,
        boundary_nodes,
        boundary_normals,
        boundary_weights,
        boundary_facets,
        boundary_slot,
        grid: Some((nx, ny)),
        h: dx.hypot(dy),
    }
}
