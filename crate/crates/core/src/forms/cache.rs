//! Basis values tabulated once per discretization at every element and edge
//! quadrature point. Lagged-coefficient forms are re-assembled every step, so
//! this removes all basis evaluation from the hot loops.

use rayon::prelude::*;

use crate::mesh::{BoundaryTag, TriMesh};
use crate::space::{BrokenSpace, EdgeRule, QuadratureRule, Tabulation};

/// One side of an edge as seen by a basis.
#[derive(Clone, Debug)]
pub(crate) struct Side {
    pub element: usize,
    /// `+1` on E_i (and on boundary edges), `−1` on E_j: the factor a trace
    /// carries in the jump.
    pub sign: f64,
    /// `values[q * n + j]`
    pub values: Vec<f64>,
    /// Physical gradients, same layout.
    pub grads: Vec<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub(crate) struct EdgeData {
    pub boundary: bool,
    pub tag: Option<BoundaryTag>,
    pub normal: [f64; 2],
    pub length: f64,
    /// Quadrature weights scaled by the edge length.
    pub weights: Vec<f64>,
    pub sides: Vec<Side>,
}

impl EdgeData {
    /// Weight of one side trace in the average: ½ inside, 1 on the boundary.
    #[inline]
    pub fn alpha(&self) -> f64 {
        if self.boundary {
            1.0
        } else {
            0.5
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct BasisCache {
    pub n: usize,
    pub element: Tabulation,
    /// `element weight × |det J|` per element and point, `[e * nq + q]`.
    pub element_weights: Vec<f64>,
    pub edges: Vec<EdgeData>,
}

impl BasisCache {
    pub fn new(mesh: &TriMesh, space: &BrokenSpace, rule: &QuadratureRule, edge_rule: &EdgeRule) -> Self {
        let basis = space.basis();
        let n = basis.len();
        let element = Tabulation::new(basis, rule);
        let element_weights = mesh
            .geometries()
            .iter()
            .flat_map(|g| rule.weights.iter().map(move |w| w * g.det.abs()))
            .collect();
        let edges = mesh
            .edges()
            .par_iter()
            .map(|edge| {
                let (a, b) = mesh.edge_endpoints(edge);
                let points: Vec<[f64; 2]> = edge_rule
                    .points
                    .iter()
                    .map(|s| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
                    .collect();
                let weights = edge_rule.weights.iter().map(|w| w * edge.length).collect();
                let mut owners = vec![(edge.left, 1.0)];
                if let Some(r) = edge.right {
                    owners.push((r, -1.0));
                }
                let sides = owners
                    .into_iter()
                    .map(|(element, sign)| {
                        let geom = mesh.geometry(element);
                        let mut values = vec![0.0; points.len() * n];
                        let mut grads = vec![[0.0; 2]; points.len() * n];
                        for (q, x) in points.iter().enumerate() {
                            let xi = geom.to_reference(*x);
                            space.eval_physical(
                                geom,
                                xi,
                                &mut values[q * n..(q + 1) * n],
                                &mut grads[q * n..(q + 1) * n],
                            );
                        }
                        Side {
                            element,
                            sign,
                            values,
                            grads,
                        }
                    })
                    .collect();
                EdgeData {
                    boundary: edge.is_boundary(),
                    tag: edge.tag,
                    normal: edge.normal,
                    length: edge.length,
                    weights,
                    sides,
                }
            })
            .collect();
        BasisCache {
            n,
            element,
            element_weights,
            edges,
        }
    }

    #[inline]
    pub fn nq(&self) -> usize {
        self.element.values.len() / self.n
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn grad_dot(coeffs: &[f64], grads: &[[f64; 2]]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (c, d) in coeffs.iter().zip(grads) {
        g[0] += c * d[0];
        g[1] += c * d[1];
    }
    g
}
