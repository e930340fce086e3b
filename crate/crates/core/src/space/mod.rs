//! Broken polynomial spaces, quadrature, and discrete fields.

pub mod basis;
mod field;
pub mod quadrature;

use std::sync::Arc;

pub use basis::{BasisKind, ReferenceBasis};
pub use field::FieldVector;
pub use quadrature::{EdgeRule, QuadratureRule, QuadratureSet};

use crate::error::{Error, Result};
use crate::mesh::{ElementGeometry, TriMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// `P_k` per element (potential, concentrations).
    Scalar,
    /// `(P_k)²` per element (velocity).
    Vector,
    /// `P_{k-1}` per element.
    Pressure,
}

/// Fully discontinuous piecewise-polynomial space on a [`TriMesh`].
///
/// Dofs are numbered component-major: all dofs of component 0, element by
/// element, then all of component 1.
#[derive(Clone, Debug)]
pub struct BrokenSpace {
    kind: SpaceKind,
    basis: Arc<ReferenceBasis>,
    n_elements: usize,
    zero_mean: bool,
}

impl BrokenSpace {
    /// Space of kind `kind` in the family of order `k` (`k ≥ 1`). Scalar and
    /// pressure spaces start zero-mean constrained.
    pub fn new(mesh: &TriMesh, kind: SpaceKind, k: usize, basis_kind: BasisKind) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("polynomial degree k must be at least 1"));
        }
        let degree = match kind {
            SpaceKind::Pressure => k - 1,
            _ => k,
        };
        Ok(BrokenSpace {
            kind,
            basis: Arc::new(ReferenceBasis::new(degree, basis_kind)),
            n_elements: mesh.n_elements(),
            zero_mean: kind != SpaceKind::Vector,
        })
    }

    pub fn scalar(mesh: &TriMesh, k: usize) -> Result<Self> {
        Self::new(mesh, SpaceKind::Scalar, k, BasisKind::Orthonormal)
    }

    pub fn vector(mesh: &TriMesh, k: usize) -> Result<Self> {
        Self::new(mesh, SpaceKind::Vector, k, BasisKind::Orthonormal)
    }

    pub fn pressure(mesh: &TriMesh, k: usize) -> Result<Self> {
        Self::new(mesh, SpaceKind::Pressure, k, BasisKind::Orthonormal)
    }

    pub fn with_zero_mean(mut self, zero_mean: bool) -> Self {
        self.zero_mean = zero_mean && self.kind != SpaceKind::Vector;
        self
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Polynomial degree of this space (`k − 1` for pressure).
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn zero_mean_constrained(&self) -> bool {
        self.zero_mean
    }

    pub fn components(&self) -> usize {
        match self.kind {
            SpaceKind::Vector => 2,
            _ => 1,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    /// Scalar basis functions per element.
    pub fn local_len(&self) -> usize {
        self.basis.len()
    }

    pub fn dofs_per_element(&self) -> usize {
        self.local_len() * self.components()
    }

    /// Dofs of a single component.
    pub fn component_len(&self) -> usize {
        self.n_elements * self.local_len()
    }

    pub fn n_dofs(&self) -> usize {
        self.component_len() * self.components()
    }

    #[inline]
    pub fn dof(&self, element: usize, component: usize, local: usize) -> usize {
        component * self.component_len() + element * self.local_len() + local
    }

    /// The scalar space one velocity component lives in.
    pub fn component_space(&self) -> BrokenSpace {
        BrokenSpace {
            kind: if self.kind == SpaceKind::Vector {
                SpaceKind::Scalar
            } else {
                self.kind
            },
            basis: self.basis.clone(),
            n_elements: self.n_elements,
            zero_mean: false,
        }
    }

    pub(crate) fn same_layout(&self, other: &BrokenSpace) -> bool {
        self.kind == other.kind
            && self.n_elements == other.n_elements
            && self.basis.degree() == other.basis.degree()
            && self.basis.kind() == other.basis.kind()
    }

    /// Values and physical gradients of all local basis functions at a
    /// reference point of `element`.
    pub fn basis_eval(
        &self,
        mesh: &TriMesh,
        element: usize,
        xi: [f64; 2],
    ) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
        if element >= mesh.n_elements() || element >= self.n_elements {
            return Err(Error::invalid(format!("unknown element {element}")));
        }
        let n = self.local_len();
        let (mut v, mut g) = (vec![0.0; n], vec![[0.0; 2]; n]);
        self.eval_physical(mesh.geometry(element), xi, &mut v, &mut g);
        Ok((v, g))
    }

    #[inline]
    pub(crate) fn eval_physical(
        &self,
        geom: &ElementGeometry,
        xi: [f64; 2],
        values: &mut [f64],
        gradients: &mut [[f64; 2]],
    ) {
        self.basis.eval(xi, values, gradients);
        for g in gradients.iter_mut() {
            *g = geom.physical_gradient(*g);
        }
    }

    /// Coefficients of the constant function 1 on one element.
    pub fn unit_coefficients(&self) -> Vec<f64> {
        let b = &self.basis;
        let rhs = nalgebra::DVector::from_column_slice(b.integrals());
        (b.mass_inverse() * rhs).iter().copied().collect()
    }

    /// `∫_Ω φ_j` for every scalar dof of one component.
    pub fn dof_integrals(&self, mesh: &TriMesh) -> Vec<f64> {
        let ints = self.basis.integrals();
        let mut out = Vec::with_capacity(self.component_len());
        for g in mesh.geometries() {
            out.extend(ints.iter().map(|i| i * g.det));
        }
        out
    }
}

/// Basis values and reference gradients tabulated at a triangle rule.
#[derive(Clone, Debug)]
pub(crate) struct Tabulation {
    pub n_basis: usize,
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

impl Tabulation {
    pub fn new(basis: &ReferenceBasis, rule: &QuadratureRule) -> Self {
        let n = basis.len();
        let mut values = vec![0.0; n * rule.len()];
        let mut gradients = vec![[0.0; 2]; n * rule.len()];
        for (q, p) in rule.points.iter().enumerate() {
            basis.eval(*p, &mut values[q * n..(q + 1) * n], &mut gradients[q * n..(q + 1) * n]);
        }
        Tabulation {
            n_basis: n,
            values,
            gradients,
        }
    }

    #[inline]
    pub fn values(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_basis..(q + 1) * self.n_basis]
    }

    #[inline]
    pub fn ref_gradients(&self, q: usize) -> &[[f64; 2]] {
        &self.gradients[q * self.n_basis..(q + 1) * self.n_basis]
    }
}

/// Mesh, the three spaces of the scheme, and the quadrature they share.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: TriMesh,
    pub k: usize,
    /// Potential and concentrations (`X_h`).
    pub scalar: BrokenSpace,
    pub vector: BrokenSpace,
    pub pressure: BrokenSpace,
    pub quad: QuadratureSet,
}

impl Discretization {
    pub fn new(mesh: TriMesh, k: usize) -> Result<Self> {
        Self::with_options(mesh, k, BasisKind::Orthonormal, None)
    }

    pub fn with_options(
        mesh: TriMesh,
        k: usize,
        basis_kind: BasisKind,
        quad: Option<QuadratureSet>,
    ) -> Result<Self> {
        let scalar = BrokenSpace::new(&mesh, SpaceKind::Scalar, k, basis_kind)?;
        let vector = BrokenSpace::new(&mesh, SpaceKind::Vector, k, basis_kind)?;
        let pressure = BrokenSpace::new(&mesh, SpaceKind::Pressure, k, basis_kind)?;
        Ok(Discretization {
            mesh,
            k,
            scalar,
            vector,
            pressure,
            quad: quad.unwrap_or_else(|| QuadratureSet::for_degree(k)),
        })
    }
}
