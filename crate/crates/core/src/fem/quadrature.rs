//! Quadrature on the reference triangle `{x, y >= 0, x + y <= 1}` and on the
//! unit segment.
//!
//! Triangle rules above degree one are collapsed tensor products of
//! Gauss-Legendre rules: `x = u`, `y = v (1 - u)` with Jacobian `1 - u`. All
//! nodes are closed-form, so the rules are exact to rounding.

use crate::error::{param_err, Result};

pub const MAX_DEGREE: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRule {
    /// Parameters in `[0, 1]`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Gauss-Legendre nodes and weights on `[0, 1]` (weights sum to one).
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = (1.0f64 / 3.0).sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let r = 2.0 / 7.0 * (6.0f64 / 5.0).sqrt();
            let inner = (3.0 / 7.0 - r).sqrt();
            let outer = (3.0 / 7.0 + r).sqrt();
            let wi = (18.0 + 30.0f64.sqrt()) / 36.0;
            let wo = (18.0 - 30.0f64.sqrt()) / 36.0;
            (vec![-outer, -inner, inner, outer], vec![wo, wi, wi, wo])
        }
        _ => unreachable!("Gauss-Legendre order {n} not tabulated"),
    };
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|w| 0.5 * w).collect(),
    )
}

/// A triangle rule exact for all polynomials of total degree `<= degree`.
pub fn quadrature_rule(degree: usize) -> Result<QuadratureRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return param_err(format!("quadrature degree must be in 1..={MAX_DEGREE}, got {degree}"));
    }
    if degree == 1 {
        return Ok(QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            degree,
        });
    }
    let n = (degree + 3) / 2;
    let (gx, gw) = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&u, &wu) in gx.iter().zip(&gw) {
        for (&v, &wv) in gx.iter().zip(&gw) {
            points.push([u, v * (1.0 - u)]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    Ok(QuadratureRule { points, weights, degree })
}

/// A segment rule on `[0, 1]` exact for polynomials of degree `<= degree`.
pub fn segment_rule(degree: usize) -> Result<SegmentRule> {
    if degree == 0 || degree > 7 {
        return param_err(format!("segment quadrature degree must be in 1..=7, got {degree}"));
    }
    let n = degree / 2 + 1;
    let (points, weights) = gauss_legendre_unit(n);
    Ok(SegmentRule { points, weights, degree })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn integrates_constants_and_linears() {
        let r = quadrature_rule(1).unwrap();
        let one: f64 = r.weights.iter().sum();
        assert!((one - 0.5).abs() < 1e-15);
        let x: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| p[0] * w).sum();
        assert!((x - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn monomials_exact_up_to_degree() {
        for degree in 1..=MAX_DEGREE {
            let r = quadrature_rule(degree).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!((q - exact).abs() < 1e-14, "deg {degree} x^{a} y^{b}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn segment_rules_exact() {
        for degree in 1..=7 {
            let r = segment_rule(degree).unwrap();
            for k in 0..=degree as i32 {
                let q: f64 = r.points.iter().zip(&r.weights).map(|(t, w)| w * t.powi(k)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unsupported_degrees_rejected() {
        assert!(quadrature_rule(0).is_err());
        assert!(quadrature_rule(7).is_err());
    }
}
