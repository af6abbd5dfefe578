//! Nehari scaling `t ↦ t φ` and the dictionary estimate of the well depth.

use std::sync::Arc;

use rayon::prelude::*;

use super::functionals::{check_p, energy, gradient_sums};
use super::Nonlinearity;
use crate::error::{Error, Result};
use crate::mesh::{profiles, Field, Mesh};

const BRACKET_LO: f64 = 1e-8;
const BRACKET_HI: f64 = 1e8;
const REL_TOL: f64 = 1e-12;

/// `r(t) = A − t^{1−p} ∫ f(tφ) φ`, which has the sign of `I_p(tφ)`.
struct Scaling<'a> {
    a: f64,
    p: f64,
    nl: &'a Nonlinearity,
    /// `(weight, φ_i)` over nodes with `φ_i ≠ 0`.
    support: Vec<(f64, f64)>,
}

impl Scaling<'_> {
    fn value(&self, t: f64) -> f64 {
        let s: f64 = self.support.iter().map(|&(w, v)| w * self.nl.f(t * v) * v).sum();
        self.a - t.powf(1.0 - self.p) * s
    }

    fn derivative(&self, t: f64) -> f64 {
        let (mut d1, mut d0) = (0.0, 0.0);
        for &(w, v) in &self.support {
            d1 += w * self.nl.derivative(t * v) * v * v;
            d0 += w * self.nl.f(t * v) * v;
        }
        -(t.powf(1.0 - self.p) * d1 + (1.0 - self.p) * t.powf(-self.p) * d0)
    }
}

/// The scale `t_p > 0` with `I_p(t_p φ) = 0`, i.e.
/// `t^{p−1} ∫|∇φ|^p = ∫ f(tφ) φ`.
///
/// Power reactions use the closed form `(A/B)^{1/(q−p)}` with
/// `A = ∫|∇φ|^p`, `B = ∫|φ|^q`, whatever its size. Otherwise the root is bracketed by factors of
/// 10 inside `[1e−8, 1e8]` and refined by Newton steps safeguarded by
/// bisection.
pub fn nehari_scale(direction: &Field, p: f64, nl: &Nonlinearity) -> Result<f64> {
    check_p(p)?;
    if direction.is_zero() {
        return Err(Error::ZeroDirection);
    }
    let a = gradient_sums(direction, p).p_energy;
    let w = direction.mesh().quad_weights();
    if let Nonlinearity::Power { q } = *nl {
        let b: f64 = direction.values().iter().zip(w).map(|(v, w)| w * v.abs().powf(q)).sum();
        let t = (a / b).powf(1.0 / (q - p));
        return if t.is_finite() && t > 0.0 {
            Ok(t)
        } else {
            Err(Error::NoSignChange)
        };
    }
    let support = direction
        .values()
        .iter()
        .zip(w)
        .filter(|(v, _)| **v != 0.0)
        .map(|(&v, &w)| (w, v))
        .collect();
    let g = Scaling { a, p, nl, support };
    let (mut lo, mut hi) = bracket(&g)?;
    let mut r_lo = g.value(lo);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..500 {
        let r = g.value(t);
        if r == 0.0 {
            return Ok(t);
        }
        if (r > 0.0) == (r_lo > 0.0) {
            lo = t;
            r_lo = r;
        } else {
            hi = t;
        }
        if hi - lo <= REL_TOL * hi {
            break;
        }
        let d = g.derivative(t);
        let newton = t - r / d;
        t = if d.is_finite() && d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(t)
}

/// A bracket `[lo, hi]` with `r(lo) > 0 ≥ r(hi)`, grown from 1 by factors of 10.
fn bracket(g: &Scaling<'_>) -> Result<(f64, f64)> {
    let positive = |t: f64| g.value(t) > 0.0;
    let mut t = 1.0;
    if positive(t) {
        while t < BRACKET_HI {
            let next = t * 10.0;
            if !positive(next) {
                return Ok((t, next));
            }
            t = next;
        }
    } else {
        while t > BRACKET_LO {
            let next = t / 10.0;
            if positive(next) {
                return Ok((next, t));
            }
            t = next;
        }
    }
    Err(Error::NoSignChange)
}

/// Outcome of [`estimate_dp`].
#[derive(Debug, Clone, PartialEq)]
pub struct DpEstimate {
    /// `min_k E_p(t_p(φ_k) φ_k)`; `+∞` when no entry reaches the Nehari set.
    pub d_hat: f64,
    /// Index of the minimizing entry (lowest index on ties).
    pub argmin: Option<usize>,
    /// `E_p(t_p(φ_k) φ_k)` per entry, `+∞` where the scaling has no root.
    pub values: Vec<f64>,
}

/// Upper bound for `d_p = inf_{N_p} E_p` from a finite dictionary of directions.
pub fn estimate_dp(mesh: &Arc<Mesh>, p: f64, nl: &Nonlinearity, dictionary: &[Field]) -> Result<DpEstimate> {
    check_p(p)?;
    if dictionary.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    for phi in dictionary {
        if !crate::mesh::same_mesh(mesh, phi.mesh()) {
            return Err(Error::MeshMismatch);
        }
    }
    let values = dictionary
        .par_iter()
        .map(|phi| match nehari_scale(phi, p, nl) {
            Ok(t) => energy(&phi.scaled(t), p, nl),
            Err(Error::NoSignChange) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut argmin = None;
    let mut d_hat = f64::INFINITY;
    for (k, &v) in values.iter().enumerate() {
        if v < d_hat {
            d_hat = v;
            argmin = Some(k);
        }
    }
    Ok(DpEstimate { d_hat, argmin, values })
}

/// `count` unit-amplitude bumps laid out across the domain.
pub fn default_dictionary(mesh: &Arc<Mesh>, count: usize) -> Vec<Field> {
    (0..count)
        .map(|k| {
            let (c, w) = profiles::bump_layout(mesh.domain(), k, count);
            profiles::bump(mesh, c, w, 1.0)
        })
        .filter(|f| !f.is_zero())
        .collect()
}
