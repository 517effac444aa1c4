//! Least-squares fits of resource counts against system size.
//!
//! Both nonlinear models are linear in their prefactor, so the prefactor is
//! eliminated in closed form and the remaining shape parameter is found by a
//! grid scan refined with golden-section search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// `y ≈ a · N^alpha`.
    pub a: f64,
    pub alpha: f64,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// `y ≈ b · (exp(N / beta) − 1)`.
    pub b: f64,
    pub beta: f64,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    /// `y ≈ c · N²`.
    pub c: f64,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

fn check(xs: &[f64], ys: &[f64], min_points: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::arg(format!("{} sizes but {} values", xs.len(), ys.len())));
    }
    if xs.len() < min_points {
        return Err(Error::arg(format!("need at least {min_points} points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) || xs.iter().any(|&x| x <= 0.0) {
        return Err(Error::arg("fit inputs must be finite with positive sizes"));
    }
    Ok(())
}

/// Best prefactor for `y ≈ p · g` and the residuals `y − p·g`.
fn scale_fit(ys: &[f64], g: &[f64]) -> (f64, Vec<f64>, f64) {
    let gg: f64 = g.iter().map(|v| v * v).sum();
    let p = if gg > 0.0 {
        g.iter().zip(ys).map(|(a, b)| a * b).sum::<f64>() / gg
    } else {
        0.0
    };
    let residuals: Vec<f64> = ys.iter().zip(g).map(|(y, v)| y - p * v).collect();
    let rss = residuals.iter().map(|r| r * r).sum();
    (p, residuals, rss)
}

/// Minimizes `f` on `[lo, hi]`: grid scan, then golden section around the best cell.
fn minimize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const GRID: usize = 400;
    let h = (hi - lo) / GRID as f64;
    let best = (0..=GRID)
        .map(|k| lo + k as f64 * h)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(lo);
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while b - a > 1e-12 * (1.0 + best.abs()) {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

/// Power law by least squares in linear space (not a log-log regression).
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    check(xs, ys, 2)?;
    let rss = |alpha: f64| {
        let g: Vec<f64> = xs.iter().map(|x| x.powf(alpha)).collect();
        scale_fit(ys, &g).2
    };
    let alpha = minimize_1d(rss, -2.0, 12.0);
    let g: Vec<f64> = xs.iter().map(|x| x.powf(alpha)).collect();
    let (a, residuals, rss) = scale_fit(ys, &g);
    Ok(PowerLawFit { a, alpha, residuals, rss })
}

/// `b (e^{N/β} − 1)` by least squares; the search runs over `1/β ∈ (0, 5]`.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<ExponentialFit> {
    check(xs, ys, 2)?;
    let basis = |kappa: f64| -> Vec<f64> { xs.iter().map(|x| (kappa * x).exp_m1()).collect() };
    let kappa = minimize_1d(|k| scale_fit(ys, &basis(k)).2, 1e-4, 5.0);
    let (b, residuals, rss) = scale_fit(ys, &basis(kappa));
    Ok(ExponentialFit {
        b,
        beta: 1.0 / kappa,
        residuals,
        rss,
    })
}

/// Coefficient of `c N²` with the exponent held at 2.
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Result<QuadraticFit> {
    check(xs, ys, 1)?;
    let g: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let (c, residuals, rss) = scale_fit(ys, &g);
    Ok(QuadraticFit { c, residuals, rss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn recovers_exact_models() {
        let xs = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 1.16 * x.powf(2.0)).collect();
        let p = fit_power_law(&xs, &ys).unwrap();
        assert!((p.alpha - 2.0).abs() < 1e-7 && (p.a - 1.16).abs() < 1e-6, "{p:?}");
        assert!(p.rss < 1e-10);

        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * (x / 1.4).exp_m1()).collect();
        let e = fit_exponential(&xs, &ys).unwrap();
        assert!((e.beta - 1.4).abs() < 1e-6 && (e.b - 3.0).abs() < 1e-5, "{e:?}");

        let q = fit_quadratic(&[4.0, 5.0], &[16.0 * 0.78, 25.0 * 0.78]).unwrap();
        assert!((q.c - 0.78).abs() < 1e-14);
    }

    #[test]
    fn quadratic_coefficient_matches_normal_equation() {
        let xs = [4.0, 5.0, 6.0, 7.0, 8.0];
        let ys = [8.0, 15.0, 25.0, 31.0, 41.0];
        let q = fit_quadratic(&xs, &ys).unwrap();
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| y * x * x).sum();
        let den: f64 = xs.iter().map(|x| x.powi(4)).sum();
        assert!((q.c - num / den).abs() < 1e-15);
        let dot: f64 = q.residuals.iter().zip(&xs).map(|(r, x)| r * x * x).sum();
        assert!(dot.abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_power_law(&[1.0], &[1.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0]).is_err());
        assert!(fit_power_law(&[0.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_exponential(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn power_law_fit_is_no_worse_than_nearby_exponents(
            ys in proptest::collection::vec(1.0f64..200.0, 4..7),
            delta in -0.5f64..0.5,
        ) {
            let xs: Vec<f64> = (0..ys.len()).map(|k| 3.0 + k as f64).collect();
            let fit = fit_power_law(&xs, &ys).unwrap();
            let other_alpha = (fit.alpha + delta).clamp(-2.0, 12.0);
            let g: Vec<f64> = xs.iter().map(|x| x.powf(other_alpha)).collect();
            let other = scale_fit(&ys, &g).2;
            prop_assert!(fit.rss <= other * (1.0 + 1e-9) + 1e-9);
        }
    }
}
