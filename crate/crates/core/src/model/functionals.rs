//! Discrete energy `E_p`, Nehari functional `I_p = ⟨E_p'(u), u⟩` and related
//! integrals. Gradient terms are integrated element-wise, reaction terms with
//! the lumped nodal quadrature, so `energy_derivative` is the exact
//! derivative of `energy` on the discrete space.

use super::Nonlinearity;
use crate::error::{Error, Result};
use crate::mesh::{Field, Vec2};

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

#[inline]
pub(crate) fn norm(g: Vec2) -> f64 {
    g[0].hypot(g[1])
}

/// `|g|_ε = sqrt(|g|² + ε²)`.
#[inline]
pub fn regularized_norm(g: Vec2, eps: f64) -> f64 {
    if eps == 0.0 {
        norm(g)
    } else {
        norm(g).hypot(eps)
    }
}

/// `|g|_ε^{p-2} g`, with the convention that it vanishes for `g = 0`.
#[inline]
pub fn regularized_flux(g: Vec2, p: f64, eps: f64) -> Vec2 {
    let n = regularized_norm(g, eps);
    if n == 0.0 {
        return [0.0, 0.0];
    }
    let c = n.powf(p - 2.0);
    [c * g[0], c * g[1]]
}

/// Element-wise gradient integrals of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSums {
    /// `∫ |∇u|`
    pub tv: f64,
    /// `∫ |∇u|^p`
    pub p_energy: f64,
    /// `max |∇u|`
    pub max: f64,
}

pub fn gradient_sums(field: &Field, p: f64) -> GradientSums {
    let mesh = field.mesh();
    let mut sums = GradientSums { tv: 0.0, p_energy: 0.0, max: 0.0 };
    for (e, g) in mesh.elements().iter().zip(field.gradient()) {
        let n = norm(g);
        sums.tv += e.measure() * n;
        sums.p_energy += e.measure() * n.powf(p);
        sums.max = sums.max.max(n);
    }
    sums
}

/// `(∫ F(u), ∫ f(u) u)`.
pub fn reaction_integrals(field: &Field, nl: &Nonlinearity) -> (f64, f64) {
    let w = field.mesh().quad_weights();
    field.values().iter().zip(w).fold((0.0, 0.0), |(a, b), (&u, &w)| {
        (a + w * nl.primitive(u), b + w * nl.f(u) * u)
    })
}

/// `E_p(u) = (1/p) ∫|∇u|^p − ∫F(u)`.
pub fn energy(field: &Field, p: f64, nl: &Nonlinearity) -> Result<f64> {
    check_p(p)?;
    let g = gradient_sums(field, p);
    let (big_f, _) = reaction_integrals(field, nl);
    Ok(g.p_energy / p - big_f)
}

/// `I_p(u) = ∫|∇u|^p − ∫f(u)u`.
pub fn nehari_functional(field: &Field, p: f64, nl: &Nonlinearity) -> Result<f64> {
    check_p(p)?;
    let g = gradient_sums(field, p);
    let (_, fu) = reaction_integrals(field, nl);
    Ok(g.p_energy - fu)
}

/// `⟨E_p'(u), v⟩ = ∫|∇u|^{p-2}∇u·∇v − ∫f(u)v`.
pub fn energy_derivative(u: &Field, v: &Field, p: f64, nl: &Nonlinearity) -> Result<f64> {
    check_p(p)?;
    u.ensure_same_mesh(v)?;
    let mesh = u.mesh();
    let diffusion: f64 = mesh
        .elements()
        .iter()
        .zip(u.gradient().into_iter().zip(v.gradient()))
        .map(|(e, (gu, gv))| {
            let z = regularized_flux(gu, p, 0.0);
            e.measure() * (z[0] * gv[0] + z[1] * gv[1])
        })
        .sum();
    let reaction: f64 = mesh
        .quad_weights()
        .iter()
        .zip(u.values().iter().zip(v.values()))
        .map(|(w, (&a, &b))| w * nl.f(a) * b)
        .sum();
    Ok(diffusion - reaction)
}

/// Slack in `∫|∇u| ≤ (1/p)∫|∇u|^p + ((p−1)/p)|Ω|`; non-negative up to rounding
/// because the pointwise Young inequality is integrated with positive weights.
pub fn young_gap(field: &Field, p: f64) -> Result<f64> {
    check_p(p)?;
    let mesh = field.mesh();
    Ok(mesh
        .elements()
        .iter()
        .zip(field.gradient())
        .map(|(e, g)| {
            let n = norm(g);
            e.measure() * (n.powf(p) / p + (p - 1.0) / p - n)
        })
        .sum())
}

/// `∫(|∇u|^{p−2}∇u − |∇v|^{p−2}∇v)·(∇u − ∇v)`, non-negative by monotonicity.
pub fn diffusion_monotonicity(u: &Field, v: &Field, p: f64) -> Result<f64> {
    check_p(p)?;
    u.ensure_same_mesh(v)?;
    Ok(u.mesh()
        .elements()
        .iter()
        .zip(u.gradient().into_iter().zip(v.gradient()))
        .map(|(e, (gu, gv))| {
            let (zu, zv) = (regularized_flux(gu, p, 0.0), regularized_flux(gv, p, 0.0));
            e.measure() * ((zu[0] - zv[0]) * (gu[0] - gv[0]) + (zu[1] - zv[1]) * (gu[1] - gv[1]))
        })
        .sum())
}

/// BV norm `∫|Du| + ∫_{∂Ω}|u| dH^{N-1}` of a piecewise-affine field.
pub fn bv_norm(field: &Field) -> f64 {
    let tv = gradient_sums(field, 1.0).tv;
    let trace: Vec<f64> = field.boundary_values().iter().map(|v| v.abs()).collect();
    tv + field.mesh().boundary_integrate(&trace).expect("one sample per boundary node")
}

/// The 1-Laplacian energy `E(u) = ∫|Du| + ∫_{∂Ω}|u| − ∫F(u)`.
pub fn one_laplacian_energy(field: &Field, nl: &Nonlinearity) -> f64 {
    bv_norm(field) - reaction_integrals(field, nl).0
}

/// `∫ f(u)²`.
pub fn reaction_l2_squared(field: &Field, nl: &Nonlinearity) -> f64 {
    let w = field.mesh().quad_weights();
    field.values().iter().zip(w).map(|(&u, w)| w * nl.f(u).powi(2)).sum()
}

/// Bound `∫ f(u)² ≤ 2C²(|Ω| + |Ω|^{2−q} ‖u‖₂^{2q−2})` implied by the growth
/// bound `|f(s)| ≤ C(1 + |s|^{q−1})` and Hölder's inequality; needs `q < 2`.
pub fn reaction_l2_bound(nl: &Nonlinearity, volume: f64, l2: f64) -> Option<f64> {
    let b = nl.growth_bound()?;
    if b.exponent >= 2.0 {
        return None;
    }
    let q = b.exponent;
    Some(2.0 * b.constant * b.constant * (volume + volume.powf(2.0 - q) * l2.powf(2.0 * q - 2.0)))
}
