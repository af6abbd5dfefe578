use crate::error::{Error, Result};

/// Reaction term `f` together with its primitive `F(u) = ∫_0^u f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Zero,
    /// `f(u) = |u|^{q-2} u`.
    Power { q: f64 },
    /// `f(u) = |u|^{q-2} u + |u|^{s-2} u`.
    SumPowers { q: f64, s: f64 },
    /// `f(u) = |u|^{q-2} u e^{α u²}`.
    ExpPower { q: f64, alpha: f64 },
}

/// `|f(s)| ≤ constant (1 + |s|^{exponent - 1})` for all `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBound {
    pub constant: f64,
    pub exponent: f64,
}

/// `|u|^{e-1} sign(u)` with the value at 0 pinned to 0.
fn odd_power(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.abs().powf(e - 1.0).copysign(u)
    }
}

/// Derivative of [`odd_power`]: `(e-1)|u|^{e-2}`.
fn odd_power_derivative(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        match e.partial_cmp(&2.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0,
            _ => 0.0,
        }
    } else {
        (e - 1.0) * u.abs().powf(e - 2.0)
    }
}

/// `∫_0^x t^{q-1} e^{α t²} dt` for `x ≥ 0` via its everywhere convergent,
/// positive-term series.
fn exp_power_primitive(x: f64, q: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if q == 2.0 {
        return (alpha * x * x).exp_m1() / (2.0 * alpha);
    }
    let z = alpha * x * x;
    let lead = x.powf(q);
    let mut coeff = 1.0; // z^k / k!
    let mut sum = 0.0;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let term = coeff / (q + 2.0 * kf);
        sum += term;
        if !sum.is_finite() {
            return f64::INFINITY;
        }
        if kf > z && term <= 1e-17 * sum {
            break;
        }
        coeff *= z / (kf + 1.0);
        k += 1;
    }
    lead * sum
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        let exponent = |name: &str, v: f64| {
            if v.is_finite() && v > 1.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("exponent {v} must be > 1")))
            }
        };
        match *self {
            Nonlinearity::Zero => Ok(()),
            Nonlinearity::Power { q } => exponent("q", q),
            Nonlinearity::SumPowers { q, s } => {
                exponent("q", q)?;
                exponent("s", s)
            }
            Nonlinearity::ExpPower { q, alpha } => {
                exponent("q", q)?;
                if alpha.is_finite() && alpha > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config("alpha", format!("alpha = {alpha} must be positive")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Zero => "zero",
            Nonlinearity::Power { .. } => "power",
            Nonlinearity::SumPowers { .. } => "sum_powers",
            Nonlinearity::ExpPower { .. } => "exp_power",
        }
    }

    pub fn f(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { q } => odd_power(u, q),
            Nonlinearity::SumPowers { q, s } => odd_power(u, q) + odd_power(u, s),
            Nonlinearity::ExpPower { q, alpha } => {
                if u == 0.0 {
                    0.0
                } else {
                    odd_power(u, q) * (alpha * u * u).exp()
                }
            }
        }
    }

    /// The primitive `F` with `F(0) = 0`.
    pub fn primitive(&self, u: f64) -> f64 {
        let a = u.abs();
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { q } => a.powf(q) / q,
            Nonlinearity::SumPowers { q, s } => a.powf(q) / q + a.powf(s) / s,
            Nonlinearity::ExpPower { q, alpha } => exp_power_primitive(a, q, alpha),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Power { q } => odd_power_derivative(u, q),
            Nonlinearity::SumPowers { q, s } => {
                odd_power_derivative(u, q) + odd_power_derivative(u, s)
            }
            Nonlinearity::ExpPower { q, alpha } => {
                let e = (alpha * u * u).exp();
                odd_power_derivative(u, q) * e + 2.0 * alpha * u.abs().powf(q) * e
            }
        }
    }

    /// The superlinearity constant `θ` in `0 < θF(t) ≤ f(t)t`; `None` when no
    /// such constant exists (`F ≡ 0`).
    pub fn theta(&self) -> Option<f64> {
        match *self {
            Nonlinearity::Zero => None,
            Nonlinearity::Power { q } => Some(q),
            Nonlinearity::SumPowers { q, s } => Some(q.min(s)),
            Nonlinearity::ExpPower { q, .. } => Some(q),
        }
    }

    /// Polynomial growth bound, when one exists.
    pub fn growth_bound(&self) -> Option<GrowthBound> {
        match *self {
            Nonlinearity::Zero => Some(GrowthBound { constant: 0.0, exponent: 1.0 }),
            Nonlinearity::Power { q } => Some(GrowthBound { constant: 1.0, exponent: q }),
            Nonlinearity::SumPowers { q, s } => Some(GrowthBound { constant: 2.0, exponent: q.max(s) }),
            Nonlinearity::ExpPower { .. } => None,
        }
    }
}

/// `(f(u), F(u))`.
pub fn evaluate_nonlinearity(nl: &Nonlinearity, u: f64) -> (f64, f64) {
    (nl.f(u), nl.primitive(u))
}
