use crate::error::{Error, Result};
use crate::mesh::TriMesh;

use super::{BrokenSpace, EdgeRule, QuadratureRule, SpaceKind, Tabulation};

/// Coefficients of one discrete field in a [`BrokenSpace`].
#[derive(Clone, Debug)]
pub struct FieldVector {
    space: BrokenSpace,
    coeffs: Vec<f64>,
}

/// Pointwise exact data for error evaluation: value and gradient of a
/// component at a physical point.
pub type ComponentFn<'a> = &'a dyn Fn([f64; 2], usize) -> f64;
pub type ComponentGradFn<'a> = &'a dyn Fn([f64; 2], usize) -> [f64; 2];

impl FieldVector {
    pub fn zeros(space: &BrokenSpace) -> Self {
        FieldVector {
            space: space.clone(),
            coeffs: vec![0.0; space.n_dofs()],
        }
    }

    pub fn from_coeffs(space: &BrokenSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::invalid(format!(
                "coefficient length {} does not match space dimension {}",
                coeffs.len(),
                space.n_dofs()
            )));
        }
        Ok(FieldVector {
            space: space.clone(),
            coeffs,
        })
    }

    pub fn space(&self) -> &BrokenSpace {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// One velocity component as a scalar field.
    pub fn component(&self, c: usize) -> FieldVector {
        let n = self.space.component_len();
        FieldVector {
            space: self.space.component_space(),
            coeffs: self.coeffs[c * n..(c + 1) * n].to_vec(),
        }
    }

    #[inline]
    pub fn local(&self, element: usize, component: usize) -> &[f64] {
        let start = self.space.dof(element, component, 0);
        &self.coeffs[start..start + self.space.local_len()]
    }

    /// Element-wise L² projection of a scalar function (component 0) or, for
    /// vector spaces, of each component of `f`.
    pub fn project(
        mesh: &TriMesh,
        space: &BrokenSpace,
        rule: &QuadratureRule,
        f: impl Fn([f64; 2]) -> f64,
    ) -> Self {
        Self::project_components(mesh, space, rule, |x, _| f(x))
    }

    pub fn project_vector(
        mesh: &TriMesh,
        space: &BrokenSpace,
        rule: &QuadratureRule,
        f: impl Fn([f64; 2]) -> [f64; 2],
    ) -> Self {
        Self::project_components(mesh, space, rule, |x, c| f(x)[c])
    }

    fn project_components(
        mesh: &TriMesh,
        space: &BrokenSpace,
        rule: &QuadratureRule,
        f: impl Fn([f64; 2], usize) -> f64,
    ) -> Self {
        let tab = Tabulation::new(space.basis(), rule);
        let n = space.local_len();
        let minv = space.basis().mass_inverse();
        let mut out = Self::zeros(space);
        let mut load = vec![0.0; n];
        for (e, geom) in mesh.geometries().iter().enumerate() {
            for c in 0..space.components() {
                load.iter_mut().for_each(|l| *l = 0.0);
                for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let fx = f(geom.to_physical(*p), c) * w;
                    for (l, v) in load.iter_mut().zip(tab.values(q)) {
                        *l += fx * v;
                    }
                }
                let start = space.dof(e, c, 0);
                for i in 0..n {
                    out.coeffs[start + i] = (0..n).map(|j| minv[(i, j)] * load[j]).sum();
                }
            }
        }
        out
    }

    /// Value of component `c` at a reference point of `element`.
    pub fn component_at(&self, mesh: &TriMesh, element: usize, c: usize, xi: [f64; 2]) -> f64 {
        let _ = mesh;
        let n = self.space.local_len();
        let mut vals = [0.0; 64];
        self.space.basis().eval_values(xi, &mut vals[..n]);
        self.local(element, c).iter().zip(&vals[..n]).map(|(a, b)| a * b).sum()
    }

    pub fn value_at(&self, mesh: &TriMesh, element: usize, xi: [f64; 2]) -> f64 {
        self.component_at(mesh, element, 0, xi)
    }

    pub fn vector_at(&self, mesh: &TriMesh, element: usize, xi: [f64; 2]) -> [f64; 2] {
        [
            self.component_at(mesh, element, 0, xi),
            self.component_at(mesh, element, 1, xi),
        ]
    }

    /// Trace of the element polynomial at a physical point (possibly on the
    /// element boundary).
    pub fn value_at_physical(&self, mesh: &TriMesh, element: usize, x: [f64; 2]) -> f64 {
        self.value_at(mesh, element, mesh.geometry(element).to_reference(x))
    }

    /// Physical gradient of component `c`.
    pub fn component_gradient_at(
        &self,
        mesh: &TriMesh,
        element: usize,
        c: usize,
        xi: [f64; 2],
    ) -> [f64; 2] {
        let n = self.space.local_len();
        let (mut v, mut g) = ([0.0; 64], [[0.0; 2]; 64]);
        self.space
            .eval_physical(mesh.geometry(element), xi, &mut v[..n], &mut g[..n]);
        let mut out = [0.0; 2];
        for (a, gj) in self.local(element, c).iter().zip(&g[..n]) {
            out[0] += a * gj[0];
            out[1] += a * gj[1];
        }
        out
    }

    pub fn gradient_at(&self, mesh: &TriMesh, element: usize, xi: [f64; 2]) -> [f64; 2] {
        self.component_gradient_at(mesh, element, 0, xi)
    }

    /// `∫_Ω` of component `c`; exact for the polynomial field.
    pub fn integral_component(&self, mesh: &TriMesh, c: usize) -> f64 {
        let ints = self.space.basis().integrals();
        mesh.geometries()
            .iter()
            .enumerate()
            .map(|(e, g)| {
                g.det * self.local(e, c).iter().zip(ints).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum()
    }

    pub fn integral(&self, mesh: &TriMesh) -> f64 {
        self.integral_component(mesh, 0)
    }

    /// Subtracts the domain mean.
    pub fn enforce_zero_mean(&self, mesh: &TriMesh) -> Result<FieldVector> {
        if self.space.kind() == SpaceKind::Vector {
            return Err(Error::invalid("zero-mean projection applies to scalar fields only"));
        }
        let mean = self.integral(mesh) / mesh.domain_area();
        let unit = self.space.unit_coefficients();
        let mut out = self.clone();
        for e in 0..self.space.n_elements() {
            let start = self.space.dof(e, 0, 0);
            for (j, u) in unit.iter().enumerate() {
                out.coeffs[start + j] -= mean * u;
            }
        }
        Ok(out)
    }

    /// Adds a constant to every component-0 value.
    pub fn add_constant(&mut self, value: f64) {
        let unit = self.space.unit_coefficients();
        for e in 0..self.space.n_elements() {
            let start = self.space.dof(e, 0, 0);
            for (j, u) in unit.iter().enumerate() {
                self.coeffs[start + j] += value * u;
            }
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &FieldVector) {
        debug_assert!(self.space.same_layout(&other.space));
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> FieldVector {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= alpha);
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `‖u_h − u‖_{L²(Ω)}` summed over components; pass `|_, _| 0.0` for the
    /// norm of the field itself.
    pub fn l2_error(&self, mesh: &TriMesh, rule: &QuadratureRule, exact: ComponentFn<'_>) -> f64 {
        let tab = Tabulation::new(self.space.basis(), rule);
        let mut sum = 0.0;
        for (e, geom) in mesh.geometries().iter().enumerate() {
            for c in 0..self.space.components() {
                let local = self.local(e, c);
                for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let uh: f64 = local.iter().zip(tab.values(q)).map(|(a, b)| a * b).sum();
                    let d = uh - exact(geom.to_physical(*p), c);
                    sum += w * geom.det * d * d;
                }
            }
        }
        sum.sqrt()
    }

    /// `(Σ_E ‖∇(u_h − u)‖²_{L²(E)})^{1/2}`.
    pub fn broken_gradient_error(
        &self,
        mesh: &TriMesh,
        rule: &QuadratureRule,
        exact_grad: ComponentGradFn<'_>,
    ) -> f64 {
        let tab = Tabulation::new(self.space.basis(), rule);
        let mut sum = 0.0;
        for (e, geom) in mesh.geometries().iter().enumerate() {
            for c in 0..self.space.components() {
                let local = self.local(e, c);
                for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let mut g = [0.0; 2];
                    for (a, rg) in local.iter().zip(tab.ref_gradients(q)) {
                        let pg = geom.physical_gradient(*rg);
                        g[0] += a * pg[0];
                        g[1] += a * pg[1];
                    }
                    let ex = exact_grad(geom.to_physical(*p), c);
                    sum += w * geom.det * ((g[0] - ex[0]).powi(2) + (g[1] - ex[1]).powi(2));
                }
            }
        }
        sum.sqrt()
    }

    /// `(Σ_e σ/h_e ‖⟦u_h − u⟧‖²_{L²(e)})^{1/2}` over interior edges, plus the
    /// boundary edges when `include_boundary` (where the jump is the trace).
    /// The exact field is continuous, so it only enters on the boundary.
    pub fn jump_error(
        &self,
        mesh: &TriMesh,
        rule: &EdgeRule,
        sigma: f64,
        include_boundary: bool,
        exact: ComponentFn<'_>,
    ) -> f64 {
        let mut sum = 0.0;
        for edge in mesh.edges() {
            if edge.is_boundary() && !include_boundary {
                continue;
            }
            let (a, b) = mesh.edge_endpoints(edge);
            for c in 0..self.space.components() {
                let mut acc = 0.0;
                for (s, w) in rule.points.iter().zip(&rule.weights) {
                    let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    let left = self.component_at(mesh, edge.left, c, mesh.geometry(edge.left).to_reference(x));
                    let jump = match edge.right {
                        Some(r) => left - self.component_at(mesh, r, c, mesh.geometry(r).to_reference(x)),
                        None => left - exact(x, c),
                    };
                    acc += w * edge.length * jump * jump;
                }
                sum += sigma / edge.length * acc;
            }
        }
        sum.sqrt()
    }

    /// Energy norm `|||u_h − u|||`.
    #[allow(clippy::too_many_arguments)]
    pub fn energy_error(
        &self,
        mesh: &TriMesh,
        rule: &QuadratureRule,
        edge_rule: &EdgeRule,
        sigma: f64,
        include_boundary: bool,
        exact: ComponentFn<'_>,
        exact_grad: ComponentGradFn<'_>,
    ) -> f64 {
        let g = self.broken_gradient_error(mesh, rule, exact_grad);
        let j = self.jump_error(mesh, edge_rule, sigma, include_boundary, exact);
        (g * g + j * j).sqrt()
    }

    /// `|||u_h|||` (scalars: interior jumps; vectors: all edges).
    pub fn energy_norm(&self, mesh: &TriMesh, rule: &QuadratureRule, edge_rule: &EdgeRule, sigma: f64) -> f64 {
        let include_boundary = self.space.kind() == SpaceKind::Vector;
        self.energy_error(mesh, rule, edge_rule, sigma, include_boundary, &|_, _| 0.0, &|_, _| [0.0; 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::QuadratureSet;

    fn unit_mesh(n: usize) -> TriMesh {
        TriMesh::rectangle(1.0, 1.0, n, n).unwrap()
    }

    #[test]
    fn projecting_one_integrates_to_area() {
        let mesh = TriMesh::rectangle(1.0, 2.0, 3, 4).unwrap();
        let s = BrokenSpace::scalar(&mesh, 2).unwrap().with_zero_mean(false);
        let f = FieldVector::project(&mesh, &s, &QuadratureRule::triangle(6), |_| 1.0);
        assert!((f.integral(&mesh) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn polynomials_are_reproduced() {
        let mesh = unit_mesh(3);
        for k in 1..=3 {
            let s = BrokenSpace::scalar(&mesh, k).unwrap();
            let rule = QuadratureRule::triangle(2 * k + 2);
            let poly = |x: [f64; 2]| x[0].powi(k as i32) - 0.5 * x[0] * x[1].powi(k as i32 - 1) + 2.0;
            let f = FieldVector::project(&mesh, &s, &rule, poly);
            for e in 0..mesh.n_elements() {
                for xi in [[0.1, 0.1], [0.5, 0.2], [0.3, 0.6]] {
                    let x = mesh.geometry(e).to_physical(xi);
                    assert!((f.value_at(&mesh, e, xi) - poly(x)).abs() < 1e-12);
                }
            }
            let err = f.l2_error(&mesh, &rule, &|x, _| poly(x));
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn projection_error_converges_at_k_plus_one() {
        // exact L² error measured with a dense rule; k = 2 expects slope 3
        let f = |x: [f64; 2]| (2.0 * std::f64::consts::PI * x[0]).cos() + 1.0;
        let mut errs = Vec::new();
        for n in [8, 16, 32, 64] {
            let mesh = unit_mesh(n);
            let s = BrokenSpace::scalar(&mesh, 2).unwrap();
            let proj = FieldVector::project(&mesh, &s, &QuadratureRule::triangle(8), f);
            errs.push(proj.l2_error(&mesh, &QuadratureRule::triangle(14), &|x, _| f(x)));
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 3.0).abs() < 0.15, "rate {rate}");
        }
    }

    #[test]
    fn zero_mean_projection() {
        let mesh = TriMesh::rectangle(1.0, 2.0, 2, 2).unwrap();
        let s = BrokenSpace::scalar(&mesh, 2).unwrap();
        let rule = QuadratureRule::triangle(6);
        let c = FieldVector::project(&mesh, &s, &rule, |_| 4.2);
        assert!(c.enforce_zero_mean(&mesh).unwrap().max_abs_coeff() < 1e-13);

        let f = FieldVector::project(&mesh, &s, &rule, |x| x[0] * x[1] - 0.2 * x[1]);
        let z = f.enforce_zero_mean(&mesh).unwrap();
        assert!(z.integral(&mesh).abs() < 1e-14);
        let zz = z.enforce_zero_mean(&mesh).unwrap();
        for (a, b) in z.coeffs().iter().zip(zz.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }

        // ∫ = 0.7 on |Ω| = 2 shifts every value by -0.35
        let g = FieldVector::project(&mesh, &s, &rule, |_| 0.35);
        let shifted = g.enforce_zero_mean(&mesh).unwrap();
        assert!((g.integral(&mesh) - 0.7).abs() < 1e-14);
        assert!((shifted.value_at(&mesh, 3, [0.2, 0.2]) - (0.35 - 0.35)).abs() < 1e-14);
        let h = FieldVector::project(&mesh, &s, &rule, |x| x[0]);
        let hs = h.enforce_zero_mean(&mesh).unwrap();
        let mean = h.integral(&mesh) / 2.0;
        assert!((hs.value_at(&mesh, 1, [0.3, 0.3]) - (h.value_at(&mesh, 1, [0.3, 0.3]) - mean)).abs() < 1e-14);

        let v = BrokenSpace::vector(&mesh, 1).unwrap();
        assert!(FieldVector::zeros(&v).enforce_zero_mean(&mesh).is_err());
    }

    #[test]
    fn energy_norm_vanishes_only_on_constants() {
        let mesh = unit_mesh(3);
        let s = BrokenSpace::scalar(&mesh, 2).unwrap();
        let q = QuadratureSet::for_degree(2);
        let c = FieldVector::project(&mesh, &s, &q.element, |_| 1.3);
        assert!(c.energy_norm(&mesh, &q.element, &q.edge, 10.0) < 1e-12);
        let f = FieldVector::project(&mesh, &s, &q.element, |x| (3.0 * x[0]).sin());
        let en = f.energy_norm(&mesh, &q.element, &q.edge, 10.0);
        let semi = f.broken_gradient_error(&mesh, &q.element, &|_, _| [0.0; 2]);
        assert!(en >= semi && semi > 0.1);
    }

    #[test]
    fn coefficient_length_checked() {
        let mesh = unit_mesh(1);
        let s = BrokenSpace::scalar(&mesh, 1).unwrap();
        assert!(FieldVector::from_coeffs(&s, vec![0.0; 5]).is_err());
        assert!(FieldVector::from_coeffs(&s, vec![0.0; 6]).is_ok());
    }
}
