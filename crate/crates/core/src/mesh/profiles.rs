//! Named initial profiles. All of them vanish on the boundary.

use std::sync::Arc;

use super::{Domain, Field, Mesh, Vec2};

/// `c` at every interior node, 0 on the boundary.
pub fn flat(mesh: &Arc<Mesh>, c: f64) -> Field {
    Field::dirichlet_from_fn(Arc::clone(mesh), |_| c)
}

/// Unit tent peaking at the center of the domain (a pyramid on a rectangle).
pub fn hat(mesh: &Arc<Mesh>) -> Field {
    let tent = |t: f64, lo: f64, len: f64| 1.0 - (2.0 * (t - lo) / len - 1.0).abs();
    match *mesh.domain() {
        Domain::Interval { length } => {
            Field::dirichlet_from_fn(Arc::clone(mesh), |x| tent(x[0], 0.0, length))
        }
        Domain::Annulus { inner, outer, .. } => {
            Field::dirichlet_from_fn(Arc::clone(mesh), |x| tent(x[0], inner, outer - inner))
        }
        Domain::Rectangle { width, height } => Field::dirichlet_from_fn(Arc::clone(mesh), |x| {
            tent(x[0], 0.0, width).min(tent(x[1], 0.0, height)).max(0.0)
        }),
    }
}

/// Smooth compactly supported bump `amplitude (1 - s²)²`, `s = |x - center| / width`.
///
/// On an annulus the distance is taken in the radial coordinate.
pub fn bump(mesh: &Arc<Mesh>, center: Vec2, width: f64, amplitude: f64) -> Field {
    Field::dirichlet_from_fn(Arc::clone(mesh), |x| {
        let s = (x[0] - center[0]).hypot(x[1] - center[1]) / width;
        if s < 1.0 {
            let t = 1.0 - s * s;
            amplitude * t * t
        } else {
            0.0
        }
    })
}

/// Center and radius of the `k`-th of `count` bumps laid out along the
/// domain (its diagonal for a rectangle), each fitting inside the domain.
pub fn bump_layout(domain: &Domain, k: usize, count: usize) -> (Vec2, f64) {
    let s = (k + 1) as f64 / (count + 1) as f64;
    match *domain {
        Domain::Interval { length } => {
            let c = s * length;
            ([c, 0.0], 0.95 * c.min(length - c))
        }
        Domain::Annulus { inner, outer, .. } => {
            let c = inner + s * (outer - inner);
            ([c, 0.0], 0.95 * (c - inner).min(outer - c))
        }
        Domain::Rectangle { width, height } => {
            let c = [s * width, s * height];
            let reach = c[0].min(width - c[0]).min(c[1]).min(height - c[1]);
            (c, 0.95 * reach)
        }
    }
}
