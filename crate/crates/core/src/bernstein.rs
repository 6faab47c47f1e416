//! Univariate Bernstein polynomials on `[0, 1]`.

use crate::dual::Dual;
use crate::error::{FemError, Result};

/// Above `1 - CLAMP` the ratio recursion is bypassed in favour of the limit
/// values at `ξ = 1`.
pub const CLAMP: f64 = 1e-12;

/// All Bernstein polynomials of one degree evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinEval {
    pub degree: usize,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for m in 0..k {
        acc = acc * (n - m) as f64 / (m + 1) as f64;
    }
    acc.round()
}

fn check_domain(xi: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(FemError::Domain { value: xi, lo: 0.0, hi: 1.0 });
    }
    Ok(())
}

/// Writes `b_0^p .. b_p^p` at `xi` into `out[..=p]` as dual numbers carrying
/// the ξ-derivative.
///
/// Uses `b_0 = (1-ξ)^p` and `b_{i+1} = b_i · (p-i)/(i+1) · ξ/(1-ξ)`. The caller
/// guarantees `xi ∈ [0, 1]`.
pub(crate) fn eval_duals_into(p: usize, xi: f64, out: &mut [Dual]) {
    debug_assert!(out.len() > p);
    if xi > 1.0 - CLAMP {
        for b in out[..=p].iter_mut() {
            *b = Dual::constant(0.0);
        }
        out[p] = Dual::new(1.0, p as f64);
        if p >= 1 {
            out[p - 1].der = -(p as f64);
        }
        return;
    }
    let x = Dual::seed(xi);
    let one_minus = Dual::constant(1.0) - x;
    // 1 - ξ ≥ CLAMP here, so the division cannot fail.
    let ratio = x.checked_div(one_minus).expect("1 - xi is positive");
    let mut b = one_minus.powi(p as u32);
    out[0] = b;
    for i in 0..p {
        let c = (p - i) as f64 / (i + 1) as f64;
        b = b * ratio.scale(c);
        out[i + 1] = b;
    }
}

/// Every Bernstein polynomial of degree `p` at `xi`, with derivatives.
pub fn eval_all(p: usize, xi: f64) -> Result<BernsteinEval> {
    check_domain(xi)?;
    let mut buf = vec![Dual::default(); p + 1];
    eval_duals_into(p, xi, &mut buf);
    Ok(BernsteinEval {
        degree: p,
        values: buf.iter().map(|d| d.val).collect(),
        derivs: buf.iter().map(|d| d.der).collect(),
    })
}

/// One Bernstein polynomial via the closed form `C(p,i) ξ^i (1-ξ)^{p-i}`.
pub fn eval_single(p: usize, i: usize, xi: f64) -> Result<Dual> {
    if i > p {
        return Err(FemError::Index { index: i, degree: p });
    }
    let x = Dual::seed(xi);
    let y = Dual::constant(1.0) - x;
    Ok((x.powi(i as u32) * y.powi((p - i) as u32)).scale(binomial(p, i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Independent oracle: closed form in plain floats.
    fn closed(p: usize, i: usize, x: f64) -> f64 {
        binomial(p, i) * x.powi(i as i32) * (1.0 - x).powi((p - i) as i32)
    }

    #[test]
    fn vertex_and_midpoint_values() {
        assert_eq!(eval_all(2, 0.0).unwrap().values, vec![1.0, 0.0, 0.0]);
        let mid = eval_all(2, 0.5).unwrap();
        for (v, e) in mid.values.iter().zip([0.25, 0.5, 0.25]) {
            assert!((v - e).abs() < 1e-15);
        }
        assert_eq!(eval_all(4, 1.0).unwrap().values, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn single_function_examples() {
        let b = eval_single(1, 0, 0.3).unwrap();
        assert!((b.val - 0.7).abs() < 1e-15 && (b.der + 1.0).abs() < 1e-15);
        assert_eq!(eval_single(3, 3, 1.0).unwrap(), Dual::new(1.0, 3.0));
        assert_eq!(eval_single(0, 0, 0.42).unwrap(), Dual::new(1.0, 0.0));
        assert!(matches!(eval_single(2, 3, 0.5), Err(FemError::Index { .. })));
    }

    #[test]
    fn outside_domain_is_rejected() {
        assert!(matches!(eval_all(3, 1.5), Err(FemError::Domain { .. })));
        assert!(matches!(eval_all(3, -1e-3), Err(FemError::Domain { .. })));
    }

    #[test]
    fn limit_derivatives_at_one() {
        let e = eval_all(3, 1.0).unwrap();
        assert_eq!(e.derivs, vec![0.0, 0.0, -3.0, 3.0]);
        let e = eval_all(0, 1.0).unwrap();
        assert_eq!(e.values, vec![1.0]);
        assert_eq!(e.derivs, vec![0.0]);
    }

    #[test]
    fn recursion_matches_closed_form() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for p in 0..=12 {
            for _ in 0..200 {
                let x: f64 = rng.gen();
                let e = eval_all(p, x).unwrap();
                for i in 0..=p {
                    let s = eval_single(p, i, x).unwrap();
                    assert!((e.values[i] - s.val).abs() < 1e-12);
                    assert!((e.values[i] - closed(p, i, x)).abs() < 1e-12);
                    assert!((e.derivs[i] - s.der).abs() < 1e-10 * (1.0 + s.der.abs()));
                }
            }
        }
    }

    #[test]
    fn collocation_matrix_is_nonsingular() {
        for p in 1..=10 {
            let n = p + 1;
            let pts: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
            let m = faer::Mat::<f64>::from_fn(n, n, |r, c| closed(p, c, pts[r]));
            let sv = m.singular_values().unwrap();
            let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(smallest > 1e-8, "p = {p}: smallest singular value {smallest}");
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_bounds(p in 0usize..16, x in 0.0f64..=1.0) {
            let e = eval_all(p, x).unwrap();
            let s: f64 = e.values.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-13);
            for v in &e.values {
                prop_assert!(*v >= 0.0 && *v <= 1.0 + 1e-15);
            }
            let ds: f64 = e.derivs.iter().sum();
            prop_assert!(ds.abs() <= 1e-11 * (p.max(1) as f64));
        }

        #[test]
        fn symmetry(p in 0usize..14, x in 0.0f64..=1.0) {
            let a = eval_all(p, x).unwrap();
            let b = eval_all(p, 1.0 - x).unwrap();
            for i in 0..=p {
                prop_assert!((a.values[i] - b.values[p - i]).abs() < 1e-13);
            }
        }
    }
}
