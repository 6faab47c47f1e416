//! Quadrature on the reference triangle and tetrahedron.
//!
//! Rules are tensor products of Gauss–Legendre rules on the collapsed square
//! or cube, with the collapse Jacobian `1-α` (2D) or `(1-α)²(1-β)` (3D)
//! folded into the weights. All points are strictly interior and all weights
//! are positive.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{FemError, Result};
use crate::simplex::{duffy_forward, CollapsedPoint, Dim};

pub const MAX_DEGREE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: Dim,
    pub degree: usize,
    pub points: Vec<CollapsedPoint>,
    /// The same points in simplex coordinates `(ξ, η[, ζ])`.
    pub ref_points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        // map from [-1, 1] to [0, 1]
        x[n - 1 - i] = 0.5 * (t + 1.0);
        w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// `P_n(t)` and `P_n'(t)` by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

fn build(dim: Dim, degree: usize) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        Dim::Two => {
            let (xa, wa) = gauss_legendre((degree + 2).div_ceil(2));
            let (xb, wb) = gauss_legendre((degree + 1).div_ceil(2));
            for (a, wa) in xa.iter().zip(&wa) {
                for (b, wb) in xb.iter().zip(&wb) {
                    points.push(CollapsedPoint::new2(*a, *b));
                    weights.push(wa * wb * (1.0 - a));
                }
            }
        }
        Dim::Three => {
            let (xa, wa) = gauss_legendre((degree + 3).div_ceil(2));
            let (xb, wb) = gauss_legendre((degree + 2).div_ceil(2));
            let (xg, wg) = gauss_legendre((degree + 1).div_ceil(2));
            for (a, wa) in xa.iter().zip(&wa) {
                for (b, wb) in xb.iter().zip(&wb) {
                    for (g, wg) in xg.iter().zip(&wg) {
                        points.push(CollapsedPoint::new3(*a, *b, *g));
                        weights.push(wa * wb * wg * (1.0 - a) * (1.0 - a) * (1.0 - b));
                    }
                }
            }
        }
    }
    let ref_points = points.iter().map(duffy_forward).collect();
    QuadratureRule { dim, degree, points, ref_points, weights }
}

/// Rule exact for polynomials of total degree `degree` on the reference
/// simplex (measure 1/2 or 1/6).
pub fn rule_for(dim: Dim, degree: usize) -> Result<Arc<QuadratureRule>> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(FemError::UnsupportedDegree(degree));
    }
    static CACHE: OnceLock<Mutex<HashMap<(Dim, usize), Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    Ok(guard.entry((dim, degree)).or_insert_with(|| Arc::new(build(dim, degree))).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// ∫ ξ^a η^b (ζ^c) over the reference simplex.
    fn monomial_integral(dim: Dim, e: [usize; 3]) -> f64 {
        match dim {
            Dim::Two => factorial(e[0]) * factorial(e[1]) / factorial(e[0] + e[1] + 2),
            Dim::Three => {
                factorial(e[0]) * factorial(e[1]) * factorial(e[2]) / factorial(e[0] + e[1] + e[2] + 3)
            }
        }
    }

    fn integrate(rule: &QuadratureRule, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        rule.ref_points.iter().zip(&rule.weights).map(|(x, w)| w * f(x)).sum()
    }

    #[test]
    fn gauss_legendre_small_cases() {
        let (x, w) = gauss_legendre(1);
        assert!((x[0] - 0.5).abs() < 1e-15 && (w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(2);
        let d = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - d)).abs() < 1e-15 && (x[1] - (0.5 + d)).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15);
        for n in 1..=15 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            // exact for t^{2n-1}
            let m = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(m as i32)).sum();
            assert!((s - 1.0 / (m as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn examples() {
        let r = rule_for(Dim::Two, 2).unwrap();
        assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        assert!((integrate(&r, |x| x[0] * x[1]) - 1.0 / 24.0).abs() < 1e-15);
        let r = rule_for(Dim::Three, 1).unwrap();
        assert!((r.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-15);
        assert!(matches!(rule_for(Dim::Two, 0), Err(FemError::UnsupportedDegree(0))));
        assert!(matches!(rule_for(Dim::Three, 21), Err(FemError::UnsupportedDegree(21))));
    }

    #[test]
    fn points_interior_and_weights_positive() {
        for dim in [Dim::Two, Dim::Three] {
            for d in 1..=MAX_DEGREE {
                let r = rule_for(dim, d).unwrap();
                assert!(r.weights.iter().all(|w| *w > 0.0));
                for x in &r.ref_points {
                    let s: f64 = x[..dim.n()].iter().sum();
                    assert!(x[..dim.n()].iter().all(|c| *c > 0.0) && s < 1.0);
                }
            }
        }
    }

    #[test]
    fn exact_on_all_monomials() {
        for dim in [Dim::Two, Dim::Three] {
            for d in 1..=MAX_DEGREE {
                let r = rule_for(dim, d).unwrap();
                for a in 0..=d {
                    for b in 0..=d - a {
                        let cmax = if dim == Dim::Three { d - a - b } else { 0 };
                        for c in 0..=cmax {
                            let e = [a, b, c];
                            let exact = monomial_integral(dim, e);
                            let q = integrate(&r, |x| {
                                x[0].powi(a as i32) * x[1].powi(b as i32) * x[2].powi(c as i32)
                            });
                            assert!((q - exact).abs() <= 1e-12 * exact, "{dim:?} d={d} {e:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn random_polynomials() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(21);
        for dim in [Dim::Two, Dim::Three] {
            for d in [3, 7, 12] {
                let r = rule_for(dim, d).unwrap();
                let mut terms = Vec::new();
                for _ in 0..10 {
                    let a = rng.gen_range(0..=d);
                    let b = rng.gen_range(0..=d - a);
                    let c = if dim == Dim::Three { rng.gen_range(0..=d - a - b) } else { 0 };
                    terms.push(([a, b, c], rng.gen_range(0.1..1.0)));
                }
                let exact: f64 = terms.iter().map(|(e, k)| k * monomial_integral(dim, *e)).sum();
                let q = integrate(&r, |x| {
                    terms
                        .iter()
                        .map(|(e, k)| k * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32))
                        .sum()
                });
                assert!((q - exact).abs() <= 1e-12 * exact);
            }
        }
    }
}
