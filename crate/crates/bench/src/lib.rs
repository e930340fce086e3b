//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use pnpns_core::linalg::{PreparedSystem, SolverKind};
use pnpns_core::{preset, Assembler, Discretization, FieldVector, RunOptions, Simulation, TriMesh};

/// Assembler on the unit square with `n` by `n` cells.
pub fn assembler(n: usize, k: usize) -> Assembler {
    let mesh = TriMesh::rectangle(1.0, 1.0, n, n).expect("valid mesh");
    Assembler::new(Arc::new(Discretization::new(mesh, k).expect("valid degree")))
}

/// A smooth divergence-free velocity and a positive concentration.
pub fn coefficient_fields(asm: &Assembler) -> (FieldVector, FieldVector) {
    let d = asm.discretization();
    let pi = std::f64::consts::PI;
    let w = FieldVector::project_vector(&d.mesh, &d.vector, &d.quad.element, |x| {
        [(pi * x[0]).sin() * (pi * x[1]).cos(), -(pi * x[0]).cos() * (pi * x[1]).sin()]
    });
    let c = FieldVector::project(&d.mesh, &d.scalar, &d.quad.element, |x| 1.5 + (2.0 * pi * x[0]).cos());
    (w, c)
}

/// Factorized concentration-like system `M + A₁` of size `n²·2·dim(P_k)`.
pub fn scalar_system(asm: &Assembler, kind: SolverKind) -> PreparedSystem {
    let m = asm.mass(pnpns_core::space::SpaceKind::Scalar).matrix;
    let a = m.add_scaled(1e-3, &asm.a1(10.0).matrix).expect("same shape");
    PreparedSystem::new(a, kind, true, 1e-10).expect("nonsingular")
}

/// The decay scenario on `n` by `n` cells, ready to step.
pub fn decay(n: usize, k: usize) -> Simulation {
    let mut p = preset("decay").expect("known preset");
    p.cells = [n, n];
    p.k = k;
    p.t_final = 1e3;
    Simulation::new(&p, &RunOptions::default()).expect("valid scenario")
}
