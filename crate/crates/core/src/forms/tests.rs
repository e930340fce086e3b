use super::*;
use crate::mesh::TriMesh;
use crate::oracle::{self, Oracle};
use crate::space::QuadratureRule;

fn assembler(n: usize, k: usize) -> Assembler {
    let mesh = TriMesh::rectangle(1.0, 1.0, n, n).unwrap();
    Assembler::new(Arc::new(Discretization::new(mesh, k).unwrap()))
}

fn pseudo_random(len: usize, seed: u64) -> Vec<f64> {
    // splitmix64; good enough for test vectors
    let mut s = seed;
    (0..len)
        .map(|_| {
            s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            ((z ^ (z >> 31)) as f64 / u64::MAX as f64) * 2.0 - 1.0
        })
        .collect()
}

fn field(space: &crate::space::BrokenSpace, seed: u64) -> FieldVector {
    FieldVector::from_coeffs(space, pseudo_random(space.n_dofs(), seed)).unwrap()
}

fn quad_form(m: &SparseMatrix, x: &[f64], y: &[f64]) -> f64 {
    dot(y, &m.mul_vec(x))
}

#[test]
fn sipg_operators_are_symmetric() {
    for k in 1..=2 {
        let a = assembler(3, k);
        assert!(a.a1(10.0).symmetry_defect() < 1e-13);
        assert!(a.a2(10.0).symmetry_defect() < 1e-13);
        assert!(a.a1_pressure(10.0).symmetry_defect() < 1e-13);
    }
}

#[test]
fn a1_annihilates_constants_but_a2_does_not() {
    let a = assembler(4, 2);
    let disc = a.discretization();
    let rule = QuadratureRule::triangle(4);
    let one = FieldVector::project(&disc.mesh, &disc.scalar.clone().with_zero_mean(false), &rule, |_| 1.0);
    let r = a.a1(40.0).mul_vec(one.coeffs());
    assert!(r.iter().all(|v| v.abs() < 1e-12));
    let c = FieldVector::project_vector(&disc.mesh, &disc.vector, &rule, |_| [1.0, -2.0]);
    assert!(quad_form(&a.a2(40.0), c.coeffs(), c.coeffs()) > 1.0);
}

#[test]
fn convection_is_skew_for_any_advecting_field() {
    let a = assembler(4, 2);
    let disc = a.discretization();
    for seed in 0..3 {
        let w = field(&disc.vector, 100 + seed);
        let n1 = a.n1(&w, ConvectionBoundary::ZeroExterior).unwrap();
        let n2 = a.n2(&w, ConvectionBoundary::ZeroExterior).unwrap();
        let scale1 = n1.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sum = n1.add_scaled(1.0, &n1.transpose()).unwrap();
        assert!(sum.values().iter().all(|v| v.abs() < 1e-12 * scale1));
        let psi = pseudo_random(disc.scalar.n_dofs(), seed);
        let rel = quad_form(&n1, &psi, &psi).abs() / (scale1 * dot(&psi, &psi));
        assert!(rel < 1e-12);
        let v = pseudo_random(disc.vector.n_dofs(), seed + 7);
        let scale2 = n2.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(quad_form(&n2, &v, &v).abs() / (scale2 * dot(&v, &v)) < 1e-12);
    }
}

#[test]
fn literal_convection_is_not_skew_when_flow_crosses_the_boundary() {
    let a = assembler(3, 1);
    let disc = a.discretization();
    let w = FieldVector::project_vector(&disc.mesh, &disc.vector, &QuadratureRule::triangle(4), |_| [1.0, 0.0]);
    let n1 = a.n1(&w, ConvectionBoundary::Literal).unwrap();
    let x = FieldVector::project(&disc.mesh, &disc.scalar, &QuadratureRule::triangle(4), |p| p[0]);
    let lit = quad_form(&n1, x.coeffs(), x.coeffs());
    // ½ ∫_∂Ω (w·n) x² = ½ (1·1 − 0) on the right side
    assert!((lit - 0.5).abs() < 1e-12, "{lit}");
}

#[test]
fn zero_advecting_field_gives_zero_operator() {
    let a = assembler(2, 2);
    let disc = a.discretization();
    let w = FieldVector::zeros(&disc.vector);
    assert!(a.n1(&w, ConvectionBoundary::ZeroExterior).unwrap().values().iter().all(|v| *v == 0.0));
    assert!(a.n2(&w, ConvectionBoundary::Literal).unwrap().values().iter().all(|v| *v == 0.0));
}

#[test]
fn both_d_expressions_agree() {
    for k in 1..=2 {
        let a = assembler(3, k);
        let d1 = a.d();
        let d2 = a.d_integrated_by_parts();
        let diff = d1.add_scaled(-1.0, &d2).unwrap();
        assert!(diff.values().iter().all(|v| v.abs() < 1e-12), "k={k}");
    }
}

#[test]
fn d_vanishes_on_continuous_solenoidal_fields() {
    let a = assembler(3, 2);
    let disc = a.discretization();
    // (y² − x, x² + y) is continuous and divergence free
    let v = FieldVector::project_vector(&disc.mesh, &disc.vector, &QuadratureRule::triangle(6), |x| {
        [x[1] * x[1] - x[0], x[0] * x[0] + x[1]]
    });
    let r = a.d().mul_vec(v.coeffs());
    // boundary edges carry {q} n·v ≠ 0, so only test away from ∂Ω
    for (e, _) in disc.mesh.triangles().iter().enumerate() {
        let touches = disc
            .mesh
            .edges()
            .iter()
            .any(|ed| ed.is_boundary() && ed.left == e);
        if !touches {
            for j in 0..disc.pressure.local_len() {
                assert!(r[disc.pressure.dof(e, 0, j)].abs() < 1e-12);
            }
        }
    }
}

#[test]
fn g_with_unit_coefficient_is_the_laplacian_on_continuous_fields() {
    let a = assembler(3, 2);
    let disc = a.discretization();
    let rule = QuadratureRule::triangle(6);
    let chi = FieldVector::zeros(&disc.scalar);
    let psi = FieldVector::project(&disc.mesh, &disc.scalar, &rule, |x| x[0] * x[0] + x[1]);
    let zeta = FieldVector::project(&disc.mesh, &disc.scalar, &rule, |x| x[0] * x[1]);
    let g = a.g(&chi, 1.0).unwrap();
    let val = quad_form(&g, psi.coeffs(), zeta.coeffs());
    // ∫ (2x, 1)·(y, x) = ∫ 2xy + x = 1/2 + 1/2
    assert!((val - 1.0).abs() < 1e-12, "{val}");
    let zero = a.g(&chi, 0.0).unwrap();
    assert!(zero.values().iter().all(|v| *v == 0.0));
    let applied = a.apply_g(&chi, 1.0, &psi).unwrap();
    assert!((dot(&applied, zeta.coeffs()) - 1.0).abs() < 1e-12);
}

#[test]
fn t_vanishes_for_zero_charge_or_constant_potential() {
    let a = assembler(3, 1);
    let disc = a.discretization();
    let rule = QuadratureRule::triangle(4);
    let phi = field(&disc.scalar, 3);
    let zero = FieldVector::zeros(&disc.scalar);
    assert!(a.t(&zero, &phi).unwrap().iter().all(|v| *v == 0.0));
    let d = field(&disc.scalar, 4);
    let c = FieldVector::project(&disc.mesh, &disc.scalar, &rule, |_| 2.5);
    assert!(a.t(&d, &c).unwrap().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn mixed_bc_reduces_to_a1_when_insulated() {
    let a = assembler(3, 2);
    let (m, load) = a.a1_mixed_bc(40.0, &PotentialBoundary::default()).unwrap();
    let diff = m.add_scaled(-1.0, &a.a1(40.0)).unwrap();
    assert!(diff.values().iter().all(|v| v.abs() < 1e-14));
    assert!(load.iter().all(|v| *v == 0.0));
    let bad = PotentialBoundary {
        dirichlet: vec![(BoundaryTag::Top, 0.0)],
        flux: vec![(BoundaryTag::Top, 1.0)],
    };
    assert!(a.a1_mixed_bc(40.0, &bad).is_err());
}

#[test]
fn mass_matrix_and_inverse() {
    let a = assembler(2, 2);
    let disc = a.discretization();
    let x = pseudo_random(disc.vector.n_dofs(), 9);
    let mx = a.mass(SpaceKind::Vector).mul_vec(&x);
    assert!(mx.iter().zip(a.apply_mass(SpaceKind::Vector, &x)).all(|(p, q)| (p - q).abs() < 1e-14));
    let back = a.apply_mass_inverse(SpaceKind::Vector, &mx);
    assert!(back.iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-12));
}

#[test]
fn every_operator_matches_the_oracle_on_a_small_mesh() {
    for (n, k, sigma) in [(1, 1, 10.0), (1, 2, 40.0)] {
        let a = assembler(n, k);
        for check in oracle::check_all(&a, sigma) {
            assert!(
                check.max_difference <= 1e-12 * check.max_entry.max(1.0),
                "{} (n={n}, k={k}): {:e}",
                check.name,
                check.max_difference
            );
        }
    }
}

#[test]
fn oracle_shows_boundary_edges_break_the_second_d_expression() {
    let a = assembler(1, 2);
    let disc = a.discretization();
    let o = Oracle::new(&disc.mesh, 2);
    let rule = QuadratureRule::triangle(4);
    let v = FieldVector::project_vector(&disc.mesh, &disc.vector, &rule, |_| [1.0, 0.0]);
    let q = FieldVector::project(&disc.mesh, &disc.pressure, &rule, |x| x[0]);
    let form1 = o.d(&v, &q);
    let interior = o.d_integrated_by_parts(&v, &q, false);
    let all = o.d_integrated_by_parts(&v, &q, true);
    assert!((form1 - interior).abs() < 1e-13);
    // the extra boundary sum is ∮ (v·n) q = ∫_{x=1} 1 − ∫_{x=0} 0 = 1
    assert!((all - interior - 1.0).abs() < 1e-12);
}
