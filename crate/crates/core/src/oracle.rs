//! Reference evaluation of every form straight from its definition.
//!
//! Nothing here shares code with [`crate::forms`]: fields are evaluated point
//! by point through [`FieldVector`], traces are taken from each neighbour
//! explicitly, and jumps and averages are formed literally. The rules are
//! much richer than the assembly rules. Slow by design; meant for small
//! meshes.

use crate::forms::{Assembler, ConvectionBoundary};
use crate::linalg::SparseMatrix;
use crate::mesh::{Edge, TriMesh};
use crate::space::{BrokenSpace, EdgeRule, FieldVector, QuadratureRule};

/// Dense-quadrature evaluator bound to one mesh.
pub struct Oracle<'a> {
    mesh: &'a TriMesh,
    rule: QuadratureRule,
    edge_rule: EdgeRule,
}

/// Traces of one field on both sides of an edge at one point.
#[derive(Clone, Copy, Debug)]
struct Pair<T> {
    left: T,
    right: Option<T>,
}

impl Pair<f64> {
    fn jump(&self) -> f64 {
        match self.right {
            Some(r) => self.left - r,
            None => self.left,
        }
    }
    fn avg(&self) -> f64 {
        match self.right {
            Some(r) => 0.5 * (self.left + r),
            None => self.left,
        }
    }
    /// Boundary traces paired with a zero exterior value.
    fn with_zero_exterior(self) -> Pair<f64> {
        Pair {
            left: self.left,
            right: Some(self.right.unwrap_or(0.0)),
        }
    }
}

impl Pair<[f64; 2]> {
    fn avg_dot(&self, n: [f64; 2]) -> f64 {
        let l = self.left[0] * n[0] + self.left[1] * n[1];
        match self.right {
            Some(r) => 0.5 * (l + r[0] * n[0] + r[1] * n[1]),
            None => l,
        }
    }
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl<'a> Oracle<'a> {
    pub fn new(mesh: &'a TriMesh, degree: usize) -> Self {
        Oracle {
            mesh,
            rule: QuadratureRule::triangle(3 * degree + 8),
            edge_rule: EdgeRule::new(3 * degree + 8),
        }
    }

    /// `Σ_E ∫_E f` where `f(e, ξ, x)`.
    fn volume(&self, f: impl Fn(usize, [f64; 2], [f64; 2]) -> f64) -> f64 {
        let mut s = 0.0;
        for (e, g) in self.mesh.geometries().iter().enumerate() {
            for (p, w) in self.rule.points.iter().zip(&self.rule.weights) {
                s += w * g.det.abs() * f(e, *p, g.to_physical(*p));
            }
        }
        s
    }

    /// `Σ_e ∫_e f` over the selected edges, `f(edge, x)`.
    fn surface(&self, include: impl Fn(&Edge) -> bool, f: impl Fn(&Edge, [f64; 2]) -> f64) -> f64 {
        let mut s = 0.0;
        for edge in self.mesh.edges() {
            if !include(edge) {
                continue;
            }
            let (a, b) = self.mesh.edge_endpoints(edge);
            for (t, w) in self.edge_rule.points.iter().zip(&self.edge_rule.weights) {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                s += w * edge.length * f(edge, x);
            }
        }
        s
    }

    fn value(&self, f: &FieldVector, c: usize, edge: &Edge, x: [f64; 2]) -> Pair<f64> {
        let at = |e: usize| f.component_at(self.mesh, e, c, self.mesh.geometry(e).to_reference(x));
        Pair {
            left: at(edge.left),
            right: edge.right.map(at),
        }
    }

    fn grad(&self, f: &FieldVector, c: usize, edge: &Edge, x: [f64; 2]) -> Pair<[f64; 2]> {
        let at = |e: usize| f.component_gradient_at(self.mesh, e, c, self.mesh.geometry(e).to_reference(x));
        Pair {
            left: at(edge.left),
            right: edge.right.map(at),
        }
    }

    fn vel(&self, f: &FieldVector, e: usize, xi: [f64; 2]) -> [f64; 2] {
        f.vector_at(self.mesh, e, xi)
    }

    fn interior(e: &Edge) -> bool {
        !e.is_boundary()
    }

    /// SIPG form for one scalar component pair.
    fn sipg(&self, psi: &FieldVector, chi: &FieldVector, c: usize, sigma: f64, all_edges: bool) -> f64 {
        let vol = self.volume(|e, xi, _| {
            dot2(
                psi.component_gradient_at(self.mesh, e, c, xi),
                chi.component_gradient_at(self.mesh, e, c, xi),
            )
        });
        let include = |e: &Edge| all_edges || Self::interior(e);
        let t2 = self.surface(include, |e, x| self.grad(psi, c, e, x).avg_dot(e.normal) * self.value(chi, c, e, x).jump());
        let t3 = self.surface(include, |e, x| self.grad(chi, c, e, x).avg_dot(e.normal) * self.value(psi, c, e, x).jump());
        let t4 = self.surface(include, |e, x| {
            sigma / e.length * self.value(psi, c, e, x).jump() * self.value(chi, c, e, x).jump()
        });
        vol - t2 - t3 + t4
    }

    pub fn a1(&self, psi: &FieldVector, chi: &FieldVector, sigma: f64) -> f64 {
        self.sipg(psi, chi, 0, sigma, false)
    }

    pub fn a2(&self, v: &FieldVector, w: &FieldVector, sigma: f64) -> f64 {
        (0..2).map(|c| self.sipg(v, w, c, sigma, true)).sum()
    }

    /// `Σ_E ∫ q ∇·v − Σ_{all e} ∫ {q} n·⟦v⟧`
    pub fn d(&self, v: &FieldVector, q: &FieldVector) -> f64 {
        let vol = self.volume(|e, xi, _| {
            let div = v.component_gradient_at(self.mesh, e, 0, xi)[0] + v.component_gradient_at(self.mesh, e, 1, xi)[1];
            q.value_at(self.mesh, e, xi) * div
        });
        let edge = self.surface(|_| true, |e, x| {
            let jn = self.value(v, 0, e, x).jump() * e.normal[0] + self.value(v, 1, e, x).jump() * e.normal[1];
            self.value(q, 0, e, x).avg() * jn
        });
        vol - edge
    }

    /// `−Σ_E ∫ v·∇q + Σ_e ∫ {v}·n ⟦q⟧` with the edge sum over interior
    /// edges, or over all edges when `boundary_edges` is set.
    pub fn d_integrated_by_parts(&self, v: &FieldVector, q: &FieldVector, boundary_edges: bool) -> f64 {
        let vol = self.volume(|e, xi, _| dot2(self.vel(v, e, xi), q.gradient_at(self.mesh, e, xi)));
        let edge = self.surface(
            |e| boundary_edges || Self::interior(e),
            |e, x| {
                let an = self.value(v, 0, e, x).avg() * e.normal[0] + self.value(v, 1, e, x).avg() * e.normal[1];
                an * self.value(q, 0, e, x).jump()
            },
        );
        -vol + edge
    }

    fn convection(&self, w: &FieldVector, psi: &FieldVector, chi: &FieldVector, c: usize, edges: Option<ConvectionBoundary>) -> f64 {
        let vol = self.volume(|e, xi, _| {
            let wv = self.vel(w, e, xi);
            let div = w.component_gradient_at(self.mesh, e, 0, xi)[0] + w.component_gradient_at(self.mesh, e, 1, xi)[1];
            let gp = psi.component_gradient_at(self.mesh, e, c, xi);
            let pv = psi.component_at(self.mesh, e, c, xi);
            let cv = chi.component_at(self.mesh, e, c, xi);
            dot2(wv, gp) * cv + 0.5 * div * pv * cv
        });
        let closure = |p: Pair<f64>, e: &Edge| match (e.is_boundary(), edges) {
            (true, Some(ConvectionBoundary::ZeroExterior)) => p.with_zero_exterior(),
            _ => p,
        };
        let include = |e: &Edge| !e.is_boundary() || edges.is_some();
        let edge = self.surface(include, |e, x| {
            let w0 = closure(self.value(w, 0, e, x), e);
            let w1 = closure(self.value(w, 1, e, x), e);
            let p = closure(self.value(psi, c, e, x), e);
            let q = closure(self.value(chi, c, e, x), e);
            let prod = Pair {
                left: p.left * q.left,
                right: p.right.zip(q.right).map(|(a, b)| a * b),
            };
            let avg_wn = w0.avg() * e.normal[0] + w1.avg() * e.normal[1];
            let jump_wn = w0.jump() * e.normal[0] + w1.jump() * e.normal[1];
            avg_wn * p.jump() * q.avg() + 0.5 * jump_wn * prod.avg()
        });
        vol - edge
    }

    /// `𝒩₁(w, ψ, χ)`.
    pub fn n1(&self, w: &FieldVector, psi: &FieldVector, chi: &FieldVector, mode: ConvectionBoundary) -> f64 {
        let edges = match mode {
            ConvectionBoundary::Literal => None,
            ConvectionBoundary::ZeroExterior => Some(mode),
        };
        self.convection(w, psi, chi, 0, edges)
    }

    /// `𝒩₂(w, v, φ)`.
    pub fn n2(&self, w: &FieldVector, v: &FieldVector, phi: &FieldVector, mode: ConvectionBoundary) -> f64 {
        (0..2).map(|c| self.convection(w, v, phi, c, Some(mode))).sum()
    }

    /// `𝒢(χ + shift, ψ, ζ)`.
    pub fn g(&self, chi: &FieldVector, shift: f64, psi: &FieldVector, zeta: &FieldVector) -> f64 {
        let vol = self.volume(|e, xi, _| {
            (chi.value_at(self.mesh, e, xi) + shift)
                * dot2(psi.gradient_at(self.mesh, e, xi), zeta.gradient_at(self.mesh, e, xi))
        });
        let weighted = |f: &FieldVector, e: &Edge, x: [f64; 2]| {
            let c = self.value(chi, 0, e, x);
            let g = self.grad(f, 0, e, x);
            let l = (c.left + shift) * dot2(g.left, e.normal);
            Pair {
                left: l,
                right: c.right.zip(g.right).map(|(cr, gr)| (cr + shift) * dot2(gr, e.normal)),
            }
            .avg()
        };
        let t2 = self.surface(Self::interior, |e, x| weighted(psi, e, x) * self.value(zeta, 0, e, x).jump());
        let t3 = self.surface(Self::interior, |e, x| weighted(zeta, e, x) * self.value(psi, 0, e, x).jump());
        vol - t2 - t3
    }

    /// `𝒯(χ, ψ, w)`.
    pub fn t(&self, chi: &FieldVector, psi: &FieldVector, w: &FieldVector) -> f64 {
        let vol = self.volume(|e, xi, _| {
            chi.value_at(self.mesh, e, xi) * dot2(psi.gradient_at(self.mesh, e, xi), self.vel(w, e, xi))
        });
        let edge = self.surface(Self::interior, |e, x| {
            let an = self.value(w, 0, e, x).avg() * e.normal[0] + self.value(w, 1, e, x).avg() * e.normal[1];
            self.value(chi, 0, e, x).avg() * self.value(psi, 0, e, x).jump() * an
        });
        vol - edge
    }
}

/// Unit coefficient vector `e_i` in `space`.
pub fn unit(space: &BrokenSpace, i: usize) -> FieldVector {
    let mut f = FieldVector::zeros(space);
    f.coeffs_mut()[i] = 1.0;
    f
}

/// Dense matrix `[b, a] = form(trial = e_a, test = e_b)`.
pub fn form_matrix(
    test: &BrokenSpace,
    trial: &BrokenSpace,
    form: impl Fn(&FieldVector, &FieldVector) -> f64,
) -> nalgebra::DMatrix<f64> {
    let trials: Vec<FieldVector> = (0..trial.n_dofs()).map(|a| unit(trial, a)).collect();
    let tests: Vec<FieldVector> = (0..test.n_dofs()).map(|b| unit(test, b)).collect();
    nalgebra::DMatrix::from_fn(test.n_dofs(), trial.n_dofs(), |b, a| form(&trials[a], &tests[b]))
}

/// Largest entrywise difference between an assembled and a reference matrix.
pub fn max_entry_difference(assembled: &SparseMatrix, reference: &nalgebra::DMatrix<f64>) -> f64 {
    (assembled.to_dense() - reference).abs().max()
}

/// Outcome of comparing one assembled operator with its reference.
#[derive(Clone, Debug)]
pub struct OracleCheck {
    pub name: String,
    pub max_difference: f64,
    pub max_entry: f64,
}

/// Compares every assembled form with the reference on the mesh of
/// `assembler`, using fixed non-trivial coefficient fields.
pub fn check_all(assembler: &Assembler, sigma: f64) -> Vec<OracleCheck> {
    let disc = assembler.discretization();
    let mesh = &disc.mesh;
    let oracle = Oracle::new(mesh, disc.k);
    let (s, v, p) = (&disc.scalar, &disc.vector, &disc.pressure);
    let rule = QuadratureRule::triangle(2 * disc.k + 4);
    let w = FieldVector::project_vector(mesh, v, &rule, |x| [1.0 + 0.3 * x[1], -0.4 * x[0] + 0.2]);
    // discontinuous on purpose: element-wise perturbation of a smooth field
    let mut wd = w.clone();
    for (i, c) in wd.coeffs_mut().iter_mut().enumerate() {
        *c += 0.05 * ((i * 37 % 11) as f64 - 5.0);
    }
    let chi = FieldVector::project(mesh, s, &rule, |x| 0.5 + x[0] - 0.3 * x[1]);
    let psi = FieldVector::project(mesh, s, &rule, |x| x[0] * x[1] - 0.2 * x[0]);
    let mut out = Vec::new();
    let mut push = |name: &str, m: &SparseMatrix, r: nalgebra::DMatrix<f64>| {
        out.push(OracleCheck {
            name: name.to_string(),
            max_difference: max_entry_difference(m, &r),
            max_entry: r.abs().max(),
        });
    };
    push("A1", &assembler.a1(sigma), form_matrix(s, s, |a, b| oracle.a1(a, b, sigma)));
    push("A1 (pressure)", &assembler.a1_pressure(sigma), form_matrix(p, p, |a, b| oracle.a1(a, b, sigma)));
    push("A2", &assembler.a2(sigma), form_matrix(v, v, |a, b| oracle.a2(a, b, sigma)));
    push("D", &assembler.d(), form_matrix(p, v, |a, b| oracle.d(a, b)));
    push(
        "D (integrated by parts)",
        &assembler.d_integrated_by_parts(),
        form_matrix(p, v, |a, b| oracle.d_integrated_by_parts(a, b, false)),
    );
    for (name, field) in [("N1", &w), ("N1 (discontinuous w)", &wd)] {
        for mode in [ConvectionBoundary::ZeroExterior, ConvectionBoundary::Literal] {
            let m = assembler.n1(field, mode).expect("velocity field");
            let r = form_matrix(s, s, |a, b| oracle.n1(field, a, b, mode));
            push(&format!("{name} [{mode:?}]"), &m, r);
        }
    }
    for (name, field) in [("N2", &w), ("N2 (discontinuous w)", &wd)] {
        for mode in [ConvectionBoundary::ZeroExterior, ConvectionBoundary::Literal] {
            let m = assembler.n2(field, mode).expect("velocity field");
            let r = form_matrix(v, v, |a, b| oracle.n2(field, a, b, mode));
            push(&format!("{name} [{mode:?}]"), &m, r);
        }
    }
    push("G", &assembler.g(&chi, 0.7).expect("scalar"), form_matrix(s, s, |a, b| oracle.g(&chi, 0.7, a, b)));
    let t = assembler.t(&chi, &psi).expect("scalar");
    let t_ref: Vec<f64> = (0..v.n_dofs()).map(|b| oracle.t(&chi, &psi, &unit(v, b))).collect();
    let t_mat = SparseMatrix::from_triplets(t.len(), 1, &t.iter().enumerate().map(|(i, x)| (i, 0, *x)).collect::<Vec<_>>())
        .expect("column");
    push("T", &t_mat, nalgebra::DMatrix::from_column_slice(t_ref.len(), 1, &t_ref));
    let ga = assembler.apply_g(&chi, 0.7, &psi).expect("scalar");
    let ga_ref: Vec<f64> = (0..s.n_dofs()).map(|b| oracle.g(&chi, 0.7, &psi, &unit(s, b))).collect();
    let ga_mat = SparseMatrix::from_triplets(ga.len(), 1, &ga.iter().enumerate().map(|(i, x)| (i, 0, *x)).collect::<Vec<_>>())
        .expect("column");
    push("G applied", &ga_mat, nalgebra::DMatrix::from_column_slice(ga_ref.len(), 1, &ga_ref));
    out
}
