//! Quadrature on the reference triangle and the unit interval.
//!
//! Triangle rules are collapsed-coordinate (Duffy) products of Gauss–Legendre
//! rules: positive weights, exact for any requested total degree.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Gauss–Legendre nodes and weights mapped to `[0, 1]` (weights sum to 1).
fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("at least one point"));
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Rule on the reference triangle `{ξ ≥ 0, η ≥ 0, ξ + η ≤ 1}`; weights sum to 1/2.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn triangle(degree: usize) -> Self {
        // ξ = u (1 - v), η = v, dξ dη = (1 - v) du dv: degree+1 in v
        let nu = degree / 2 + 1;
        let nv = degree.div_ceil(2) + 1;
        let (ru, rv) = (gauss_legendre_unit(nu), gauss_legendre_unit(nv));
        let mut points = Vec::with_capacity(nu * nv);
        let mut weights = Vec::with_capacity(nu * nv);
        for &(v, wv) in &rv {
            for &(u, wu) in &ru {
                points.push([u * (1.0 - v), v]);
                weights.push(wu * wv * (1.0 - v));
            }
        }
        QuadratureRule {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rule on the unit interval `[0, 1]`; weights sum to 1.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl EdgeRule {
    pub fn new(degree: usize) -> Self {
        let (points, weights) = gauss_legendre_unit(degree / 2 + 1).into_iter().unzip();
        EdgeRule {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Element and edge rules used together by assembly and diagnostics.
#[derive(Clone, Debug)]
pub struct QuadratureSet {
    pub element: QuadratureRule,
    pub edge: EdgeRule,
}

impl QuadratureSet {
    pub fn new(element_degree: usize, edge_degree: usize) -> Self {
        QuadratureSet {
            element: QuadratureRule::triangle(element_degree),
            edge: EdgeRule::new(edge_degree),
        }
    }

    /// Default exactness for polynomial degree `k`: all products of two basis
    /// functions with one extra factor of the same degree are integrated exactly,
    /// which keeps the skew-symmetric convection forms skew to round-off.
    pub fn for_degree(k: usize) -> Self {
        Self::new((2 * k + 2).max(3 * k), (2 * k + 1).max(3 * k))
    }

    /// Same as [`for_degree`](Self::for_degree) with both orders raised by `boost`.
    pub fn boosted(k: usize, boost: usize) -> Self {
        let base = Self::for_degree(k);
        Self::new(base.element.degree + boost, base.edge.degree + boost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_rules_are_exact_for_monomials() {
        for degree in 0..=14 {
            let rule = QuadratureRule::triangle(degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let approx: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!(
                        (approx - exact).abs() < 1e-13,
                        "degree {degree}: x^{a} y^{b}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn edge_rules_are_exact() {
        for degree in 0..=15 {
            let rule = EdgeRule::new(degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for p in 0..=degree as i32 {
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(s, w)| w * s.powi(p))
                    .sum();
                assert!((approx - 1.0 / (p as f64 + 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn points_inside_reference_triangle() {
        let rule = QuadratureRule::triangle(9);
        for p in &rule.points {
            assert!(p[0] > 0.0 && p[1] > 0.0 && p[0] + p[1] < 1.0);
        }
    }
}
