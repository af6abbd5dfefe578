//! Numerical checks of the structural hypotheses on the reaction term:
//! vanishing faster than `|t|^{p0−1}` at 0, the superlinearity
//! `0 < θF(t) ≤ f(t)t`, and the polynomial growth bound.

use super::{GrowthBound, Nonlinearity};

/// Relative slack allowed in `θF(t) ≤ f(t)t`.
pub const F2_REL_TOL: f64 = 1e-12;

/// Log-spaced magnitudes in `[lo, hi]`, `per_decade` points per decade, each
/// with both signs, ordered by magnitude.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    let mut grid = Vec::with_capacity(2 * (n + 1));
    for k in 0..=n {
        let t = lo * 10f64.powf(decades * k as f64 / n as f64);
        grid.push(t);
        grid.push(-t);
    }
    grid
}

/// The grid used by default: `[1e−8, 10]`, 20 points per decade.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-8, 10.0, 20)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FConditionReport {
    pub p0: f64,
    /// `max |f(t)| / |t|^{p0−1}` over the smallest decade of the grid.
    pub f1_ratio_max: f64,
    /// The same ratio at the smallest sampled magnitude.
    pub f1_ratio_at_min: f64,
    pub f1_holds: bool,
    pub theta: Option<f64>,
    /// `min (f(t)t − θF(t))` over the grid.
    pub f2_min_slack: f64,
    pub f2_holds: bool,
    /// Least-squares slope of `log|f|` against `log|t|` on `|t| ∈ [1, 10]`, plus one.
    pub growth_exponent_fit: Option<f64>,
    pub growth_bound: Option<GrowthBound>,
    /// `|f(t)| ≤ C(1 + |t|^{q−1})` on the grid, when a bound is declared.
    pub f3_holds: Option<bool>,
}

pub fn check_f_conditions(nl: &Nonlinearity, p0: f64, grid: &[f64]) -> FConditionReport {
    let min_mag = grid.iter().map(|t| t.abs()).filter(|&t| t > 0.0).fold(f64::INFINITY, f64::min);
    let ratio = |t: f64| nl.f(t).abs() / t.abs().powf(p0 - 1.0);

    let mut f1_ratio_max = 0.0f64;
    let mut f1_ratio_at_min = 0.0f64;
    let mut decade_end = 0.0f64;
    for &t in grid.iter().filter(|t| t.abs() > 0.0 && t.abs() <= 10.0 * min_mag) {
        let r = ratio(t);
        f1_ratio_max = f1_ratio_max.max(r);
        if t.abs() == min_mag {
            f1_ratio_at_min = f1_ratio_at_min.max(r);
        }
        if t.abs() >= decade_end {
            decade_end = t.abs();
        }
    }
    let ratio_at_end = grid
        .iter()
        .filter(|t| t.abs() == decade_end)
        .map(|&t| ratio(t))
        .fold(0.0, f64::max);
    let f1_holds = f1_ratio_max == 0.0 || f1_ratio_at_min < ratio_at_end;

    let theta = nl.theta();
    let (f2_min_slack, f2_holds) = match theta {
        None => (0.0, false),
        Some(theta) => {
            let mut min_slack = f64::INFINITY;
            let mut holds = true;
            for &t in grid.iter().filter(|t| **t != 0.0) {
                let big_f = nl.primitive(t);
                let ft = nl.f(t) * t;
                let slack = ft - theta * big_f;
                min_slack = min_slack.min(slack);
                if !(big_f > 0.0) || slack < -F2_REL_TOL * ft.abs() {
                    holds = false;
                }
            }
            (min_slack, holds)
        }
    };

    let samples: Vec<(f64, f64)> = grid
        .iter()
        .filter(|t| (1.0..=10.0).contains(&t.abs()))
        .map(|&t| (t.abs().ln(), nl.f(t).abs()))
        .filter(|(_, f)| *f > 0.0 && f.is_finite())
        .map(|(x, f)| (x, f.ln()))
        .collect();
    let growth_exponent_fit = (samples.len() >= 2).then(|| {
        let n = samples.len() as f64;
        let (sx, sy) = samples.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let (sxy, sxx) = samples
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
        sxy / sxx + 1.0
    });

    let growth_bound = nl.growth_bound();
    let f3_holds = growth_bound.map(|b| {
        grid.iter().all(|&t| {
            let bound = b.constant * (1.0 + t.abs().powf(b.exponent - 1.0));
            nl.f(t).abs() <= bound * (1.0 + 1e-12)
        })
    });

    FConditionReport {
        p0,
        f1_ratio_max,
        f1_ratio_at_min,
        f1_holds,
        theta,
        f2_min_slack,
        f2_holds,
        growth_exponent_fit,
        growth_bound,
        f3_holds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_three() {
        let r = check_f_conditions(&Nonlinearity::Power { q: 3.0 }, 1.5, &default_grid());
        assert!((r.f1_ratio_at_min - 1e-12).abs() < 1e-24);
        assert!(r.f1_holds);
        assert!(r.f2_holds);
        assert!(r.f2_min_slack.abs() < 1e-12);
        assert!((r.growth_exponent_fit.unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(r.f3_holds, Some(true));
    }

    #[test]
    fn zero_is_flagged() {
        let r = check_f_conditions(&Nonlinearity::Zero, 1.5, &default_grid());
        assert!(!r.f2_holds);
        assert!(r.f1_holds);
        assert_eq!(r.theta, None);
    }

    #[test]
    fn exp_power_superlinear() {
        let r = check_f_conditions(&Nonlinearity::ExpPower { q: 2.0, alpha: 1.0 }, 1.5, &default_grid());
        assert!(r.f2_holds);
        assert!(r.f2_min_slack >= 0.0);
        assert!(r.f3_holds.is_none());
    }

    #[test]
    fn slow_vanishing_fails_f1() {
        // f(t) = |t|^{0.2} t vanishes slower than |t|^{p0 − 1} for p0 = 1.5
        let r = check_f_conditions(&Nonlinearity::Power { q: 1.2 }, 1.5, &default_grid());
        assert!(!r.f1_holds);
    }

    #[test]
    fn grid_shape() {
        let g = log_grid(1e-8, 10.0, 20);
        assert_eq!(g.len(), 2 * 181);
        assert!((g[0] - 1e-8).abs() < 1e-22);
        assert!((g[g.len() - 2] - 10.0).abs() < 1e-12);
    }
}
