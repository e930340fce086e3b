//! Local polynomial bases on the reference triangle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// L²-orthonormal on the reference triangle (Gram–Schmidt of monomials).
    #[default]
    Orthonormal,
    /// Nodal basis on the equispaced lattice `(i/k, j/k)`.
    Lagrange,
}

use super::quadrature::QuadratureRule;

/// Monomials are taken in centred, scaled coordinates `s = 1.5 (ξ − 1/3)`,
/// which keeps the Gram matrix and the expansion coefficients well conditioned.
const CENTER: f64 = 1.0 / 3.0;
const SCALE: f64 = 1.5;

#[inline]
fn centred(xi: [f64; 2]) -> [f64; 2] {
    [SCALE * (xi[0] - CENTER), SCALE * (xi[1] - CENTER)]
}

fn monomial(e: (u32, u32), s: [f64; 2]) -> f64 {
    s[0].powi(e.0 as i32) * s[1].powi(e.1 as i32)
}

/// Basis of `P_k` on the reference triangle, stored as coefficients over the
/// centred monomials `s^a t^b`, `a + b ≤ k`, ordered by total degree.
#[derive(Clone, Debug)]
pub struct ReferenceBasis {
    degree: usize,
    kind: BasisKind,
    exponents: Vec<(u32, u32)>,
    /// `coeffs[j * n + m]`: weight of monomial `m` in basis function `j`.
    coeffs: Vec<f64>,
    mass: DMatrix<f64>,
    mass_inverse: DMatrix<f64>,
    integrals: Vec<f64>,
}

impl ReferenceBasis {
    pub fn new(degree: usize, kind: BasisKind) -> Self {
        let mut exponents = Vec::new();
        for total in 0..=degree as u32 {
            for b in 0..=total {
                exponents.push((total - b, b));
            }
        }
        let n = exponents.len();
        // exact: the integrands have degree at most 2k
        let rule = QuadratureRule::triangle(2 * degree);
        let table: Vec<Vec<f64>> = rule
            .points
            .iter()
            .map(|p| exponents.iter().map(|&e| monomial(e, centred(*p))).collect())
            .collect();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            table.iter().zip(&rule.weights).map(|(t, w)| w * t[i] * t[j]).sum()
        });
        let mono_int: Vec<f64> = (0..n)
            .map(|i| table.iter().zip(&rule.weights).map(|(t, w)| w * t[i]).sum())
            .collect();
        let chol = gram
            .clone()
            .cholesky()
            .expect("monomial Gram matrix is positive definite");
        let l_inv = chol
            .l()
            .try_inverse()
            .expect("Cholesky factor is invertible");
        let coeffs = match kind {
            BasisKind::Orthonormal => l_inv,
            BasisKind::Lagrange => {
                let nodes = lattice(degree);
                let vandermonde = DMatrix::from_fn(n, n, |l, j| {
                    let (x, y) = (nodes[l][0], nodes[l][1]);
                    (0..n)
                        .map(|m| l_inv[(j, m)] * monomial(exponents[m], centred([x, y])))
                        .sum::<f64>()
                });
                let a = vandermonde
                    .transpose()
                    .try_inverse()
                    .expect("lattice Vandermonde matrix is invertible");
                a * l_inv
            }
        };
        // one refinement sweep removes the round-off of the ill-conditioned Gram
        let coeffs = match kind {
            BasisKind::Orthonormal => {
                let m = &coeffs * &gram * coeffs.transpose();
                let l = m.cholesky().expect("basis mass is positive definite").l();
                l.try_inverse().expect("invertible") * coeffs
            }
            BasisKind::Lagrange => coeffs,
        };
        let mass = &coeffs * &gram * coeffs.transpose();
        let mass_inverse = mass.clone().try_inverse().expect("reference mass is invertible");
        let integrals = (0..n)
            .map(|j| {
                (0..n)
                    .map(|m| coeffs[(j, m)] * mono_int[m])
                    .sum()
            })
            .collect();
        let mut flat = Vec::with_capacity(n * n);
        for j in 0..n {
            for m in 0..n {
                flat.push(coeffs[(j, m)]);
            }
        }
        ReferenceBasis {
            degree,
            kind,
            exponents,
            coeffs: flat,
            mass,
            mass_inverse,
            integrals,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// `(k+1)(k+2)/2`
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Reference mass matrix `∫_T φ_i φ_j`.
    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn mass_inverse(&self) -> &DMatrix<f64> {
        &self.mass_inverse
    }

    /// `∫_T φ_j` on the reference triangle.
    pub fn integrals(&self) -> &[f64] {
        &self.integrals
    }

    pub fn eval_values(&self, xi: [f64; 2], values: &mut [f64]) {
        let n = self.len();
        let s = centred(xi);
        let mono: Vec<f64> = self.exponents.iter().map(|&e| monomial(e, s)).collect();
        for (j, v) in values.iter_mut().enumerate().take(n) {
            let row = &self.coeffs[j * n..(j + 1) * n];
            *v = row.iter().zip(&mono).map(|(c, m)| c * m).sum();
        }
    }

    /// Values and reference-coordinate gradients of every basis function.
    pub fn eval(&self, xi: [f64; 2], values: &mut [f64], gradients: &mut [[f64; 2]]) {
        let n = self.len();
        let mut mono = [0.0; 64];
        let mut dmono = [[0.0; 2]; 64];
        debug_assert!(n <= 64, "degree too high for the stack buffers");
        let [x, y] = centred(xi);
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            let pa = x.powi(a as i32);
            let pb = y.powi(b as i32);
            mono[m] = pa * pb;
            // chain rule through the centring map
            dmono[m] = [
                if a > 0 { SCALE * a as f64 * x.powi(a as i32 - 1) * pb } else { 0.0 },
                if b > 0 { SCALE * b as f64 * pa * y.powi(b as i32 - 1) } else { 0.0 },
            ];
        }
        for j in 0..n {
            let row = &self.coeffs[j * n..(j + 1) * n];
            let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for m in 0..n {
                v += row[m] * mono[m];
                gx += row[m] * dmono[m][0];
                gy += row[m] * dmono[m][1];
            }
            values[j] = v;
            gradients[j] = [gx, gy];
        }
    }
}

/// Equispaced lattice points of degree `k` (centroid for `k = 0`).
pub fn lattice(k: usize) -> Vec<[f64; 2]> {
    if k == 0 {
        return vec![[1.0 / 3.0, 1.0 / 3.0]];
    }
    let mut nodes = Vec::new();
    for total in 0..=k {
        for j in 0..=total {
            nodes.push([(total - j) as f64 / k as f64, j as f64 / k as f64]);
        }
    }
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_basis_has_identity_mass() {
        for k in 0..=4 {
            let basis = ReferenceBasis::new(k, BasisKind::Orthonormal);
            assert_eq!(basis.len(), (k + 1) * (k + 2) / 2);
            let rule = QuadratureRule::triangle(2 * k + 2);
            let n = basis.len();
            let mut vals = vec![0.0; n];
            let mut gram = vec![0.0; n * n];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                basis.eval_values(*p, &mut vals);
                for i in 0..n {
                    for j in 0..n {
                        gram[i * n + j] += w * vals[i] * vals[j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[i * n + j] - expected).abs() < 1e-12, "k={k} ({i},{j}) {}", gram[i * n + j] - expected);
                }
            }
        }
    }

    #[test]
    fn lagrange_basis_is_nodal() {
        for k in 1..=3 {
            let basis = ReferenceBasis::new(k, BasisKind::Lagrange);
            let nodes = lattice(k);
            let mut vals = vec![0.0; basis.len()];
            for (l, node) in nodes.iter().enumerate() {
                basis.eval_values(*node, &mut vals);
                for (j, v) in vals.iter().enumerate() {
                    let expected = if j == l { 1.0 } else { 0.0 };
                    assert!((v - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let basis = ReferenceBasis::new(3, BasisKind::Orthonormal);
        let n = basis.len();
        let (mut v, mut g) = (vec![0.0; n], vec![[0.0; 2]; n]);
        let (mut vp, mut vm) = (vec![0.0; n], vec![0.0; n]);
        let xi = [0.23, 0.41];
        let step = 1e-6;
        basis.eval(xi, &mut v, &mut g);
        for dir in 0..2 {
            let mut plus = xi;
            let mut minus = xi;
            plus[dir] += step;
            minus[dir] -= step;
            basis.eval_values(plus, &mut vp);
            basis.eval_values(minus, &mut vm);
            for j in 0..n {
                let fd = (vp[j] - vm[j]) / (2.0 * step);
                assert!((fd - g[j][dir]).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn integrals_of_partition_of_unity() {
        let basis = ReferenceBasis::new(2, BasisKind::Lagrange);
        let total: f64 = basis.integrals().iter().sum();
        assert!((total - 0.5).abs() < 1e-14);
    }
}
