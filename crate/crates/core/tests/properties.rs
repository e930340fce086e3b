use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use pnpns_core::space::{EdgeRule, SpaceKind};
use pnpns_core::stepper::TraceEntry;
use pnpns_core::{
    preset, Assembler, BoundaryTag, Discretization, InitialCondition, PressureOperator, RunOptions, Simulation,
    TriMesh,
};
use statrs::function::erf::erf;

fn assembler(n: usize, k: usize) -> Assembler {
    let mesh = TriMesh::rectangle(1.0, 1.0, n, n).unwrap();
    Assembler::new(Arc::new(Discretization::new(mesh, k).unwrap()))
}

fn eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `β_h = min_q sup_v D(v, q) / (‖v‖_X ‖q‖)` over non-constant `q`, with
/// `X` the viscous SIPG matrix.
fn inf_sup(n: usize, k: usize, sigma: f64) -> f64 {
    let asm = assembler(n, k);
    let b = asm.d().matrix.to_dense();
    let x = asm.a2(sigma).matrix.to_dense();
    let xinv_bt = x.lu().solve(&b.transpose()).unwrap();
    let s = &b * xinv_bt;
    // the pressure mass matrix is diagonal for the orthonormal basis
    let mp = asm.mass(SpaceKind::Pressure).matrix.diagonal_values();
    let scale = DMatrix::from_fn(mp.len(), mp.len(), |i, j| s[(i, j)] / (mp[i] * mp[j]).sqrt());
    let ev = eigenvalues((&scale + scale.transpose()) * 0.5);
    assert!(ev[0].abs() < 1e-9 * ev[ev.len() - 1], "constants must be the only kernel");
    ev[1].sqrt()
}

#[test]
fn inf_sup_constant_stays_away_from_zero() {
    for (k, sigma) in [(1, 10.0), (2, 40.0)] {
        let betas: Vec<f64> = [2, 4, 8].iter().map(|&n| inf_sup(n, k, sigma)).collect();
        let lo = betas.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = betas.iter().copied().fold(0.0, f64::max);
        assert!(lo > 0.05, "k={k} {betas:?}");
        assert!(lo / hi > 0.5, "k={k} {betas:?}");
    }
}

#[test]
fn viscous_form_is_coercive_only_above_a_penalty_threshold() {
    for (k, sigma) in [(1, 10.0), (2, 40.0)] {
        let asm = assembler(4, k);
        let ev = eigenvalues(asm.a2(sigma).matrix.to_dense());
        assert!(ev[0] > 0.0, "k={k} sigma={sigma} {}", ev[0]);
        let weak = eigenvalues(asm.a2(0.5).matrix.to_dense());
        assert!(weak[0] < 0.0, "k={k} small penalty {}", weak[0]);
    }
}

#[test]
fn charged_wall_gives_the_linear_potential() {
    let mut p = preset("reservoir").unwrap();
    p.cells = [4, 8];
    p.initial = InitialCondition::Uniform { c1: 1.0, c2: 1.0 };
    let sim = Simulation::new(&p, &RunOptions::default()).unwrap();
    let d = sim.discretization();
    let mesh = &d.mesh;
    let phi = &sim.state().phi;
    let (mu, sigma) = (p.params.mu, p.params.sigma);
    // −μφ'' = 0, −μφ'(0) = 1, φ(2) = 0
    let exact = |y: f64| (2.0 - y) / mu;
    for x in [[0.5, 0.0], [0.1, 0.7], [0.9, 1.99]] {
        let e = mesh.locate(x).unwrap();
        let v = phi.value_at_physical(mesh, e, x);
        assert!((v - exact(x[1])).abs() < 1e-9 * exact(0.0), "{x:?}: {v}");
    }

    // flux leaving through the grounded wall balances the charged wall
    let rule = EdgeRule::new(6);
    let mut top = 0.0;
    for edge in mesh.boundary_edges().filter(|e| e.tag == Some(BoundaryTag::Top)) {
        let (a, b) = mesh.edge_endpoints(edge);
        let geom = mesh.geometry(edge.left);
        for (t, w) in rule.points.iter().zip(&rule.weights) {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let xi = geom.to_reference(x);
            let g = phi.gradient_at(mesh, edge.left, xi);
            let v = phi.value_at(mesh, edge.left, xi);
            let flux = g[0] * edge.normal[0] + g[1] * edge.normal[1] - sigma / edge.length * v;
            top += w * edge.length * mu * flux;
        }
    }
    assert!((top + 1.0).abs() < 1e-9, "{top}");
}

#[test]
fn gaussian_clouds_lose_mass_to_truncation() {
    let mut p = preset("reservoir").unwrap();
    p.cells = [16, 32];
    let sim = Simulation::new(&p, &RunOptions::default()).unwrap();
    let (r0, r) = (3.0, 0.25);
    let s = std::f64::consts::SQRT_2 * r;
    let interval = |a: f64, b: f64, c: f64| 0.5 * (erf((b - c) / s) - erf((a - c) / s));
    let [ca, cb] = p.initial.gaussian_centres(p.extents).unwrap();
    let exact = [
        r0 * interval(0.0, 1.0, ca[0]) * interval(0.0, 2.0, ca[1]),
        r0 * interval(0.0, 1.0, cb[0]) * interval(0.0, 2.0, cb[1]),
    ];
    let mass = sim.initial_record().mass;
    for i in 0..2 {
        assert!((mass[i] - exact[i]).abs() < 1e-6 * exact[i], "{} vs {}", mass[i], exact[i]);
    }
    assert!((exact[0] - exact[1]).abs() < 1e-14);
    assert!(exact[0] < 0.92 * r0);
}

#[test]
fn each_step_reads_the_intended_time_levels() {
    let mut p = preset("decay").unwrap();
    p.cells = [3, 3];
    let mut sim = Simulation::new(&p, &RunOptions::default()).unwrap();
    sim.step().unwrap();
    sim.stepper().set_tracing(true);
    sim.step().unwrap();
    let trace: Vec<TraceEntry> = sim.stepper().trace().unwrap().to_vec();
    let expected = [
        ("potential", "charge", 1),
        ("N1", "velocity", 1),
        ("G", "concentration", 1),
        ("G", "potential", 2),
        ("N2", "velocity", 1),
        ("mass", "velocity", 1),
        ("D", "pressure", 1),
        ("T", "charge", 1),
        ("T", "potential", 2),
        ("D", "intermediate velocity", 2),
    ];
    for (operator, input, level) in expected {
        let e = TraceEntry { operator, input, level };
        assert!(trace.contains(&e), "missing {e:?} in {trace:?}");
    }
    assert!(trace.iter().all(|e| e.level == 1 || e.level == 2));
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut p = preset("decay").unwrap();
            p.cells = [6, 6];
            p.t_final = 0.004;
            let mut sim = Simulation::new(&p, &RunOptions::default()).unwrap();
            let records = sim.run().unwrap();
            (records, sim.state().u.coeffs().to_vec(), sim.state().c[0].coeffs().to_vec())
        })
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.0, b.0);
    assert!(a.1.iter().zip(&b.1).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(a.2.iter().zip(&b.2).all(|(x, y)| x.to_bits() == y.to_bits()));
}

/// `max |D u|` after a few manufactured steps, relative to `max |D û|`.
fn divergence_after_steps(op: PressureOperator) -> f64 {
    let mut p = preset("mms-k1").unwrap();
    p.cells = [4, 4];
    p.dt = 0.01;
    let options = RunOptions {
        pressure_operator: op,
        ..Default::default()
    };
    let mut sim = Simulation::new(&p, &options).unwrap();
    for _ in 0..3 {
        sim.step().unwrap();
    }
    let b = sim.stepper().assembler().d().matrix;
    let s = sim.state();
    let norm = |v: Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    norm(b.mul_vec(s.u.coeffs())) / norm(b.mul_vec(s.u_hat.coeffs()))
}

#[test]
fn projection_operator_makes_the_velocity_discretely_solenoidal() {
    let exact = divergence_after_steps(PressureOperator::Projection);
    assert!(exact < 1e-10, "{exact}");
    // the penalty Laplacian only approximates the projection
    let sipg = divergence_after_steps(PressureOperator::Sipg);
    assert!(sipg > 1e-6 && sipg < 1.0, "{sipg}");
}
