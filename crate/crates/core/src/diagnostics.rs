//! Masses, extrema, energies and error norms of a [`SystemState`].

use crate::forms::FormParams;
use crate::mms::ManufacturedSolution;
use crate::space::{Discretization, FieldVector, QuadratureRule, QuadratureSet, Tabulation};
use crate::stepper::SystemState;

/// Extra quadrature order used for energies and errors.
pub const QUADRATURE_BOOST: usize = 3;

/// `∫_Ω c`, exact for the polynomial field.
pub fn compute_mass(disc: &Discretization, c: &FieldVector) -> f64 {
    c.integral(&disc.mesh)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energies {
    /// `∫ ½|u|²`.
    pub kinetic: f64,
    /// `∫ ½|u|² + μ/2 |∇φ|²`.
    pub elec: f64,
    /// `E_elec + Σ κᵢ ∫ cᵢ(log cᵢ − 1)`, with the integrand extended by 0 at
    /// `cᵢ = 0`; `None` if some `cᵢ < 0` at a quadrature point.
    pub total: Option<f64>,
}

/// Per-point values of a scalar field and its physical gradient on every
/// element, at the points of `rule`.
fn for_each_point(
    disc: &Discretization,
    rule: &QuadratureRule,
    field: &FieldVector,
    mut f: impl FnMut(f64, f64, [f64; 2]),
) {
    let tab = Tabulation::new(field.space().basis(), rule);
    for (e, geom) in disc.mesh.geometries().iter().enumerate() {
        let local = field.local(e, 0);
        for (q, w) in rule.weights.iter().enumerate() {
            let v: f64 = local.iter().zip(tab.values(q)).map(|(a, b)| a * b).sum();
            let mut g = [0.0; 2];
            for (a, rg) in local.iter().zip(tab.ref_gradients(q)) {
                let pg = geom.physical_gradient(*rg);
                g[0] += a * pg[0];
                g[1] += a * pg[1];
            }
            f(w * geom.det.abs(), v, g);
        }
    }
}

pub fn compute_energies(disc: &Discretization, state: &SystemState, params: &FormParams) -> Energies {
    let rule = &QuadratureSet::boosted(disc.k, QUADRATURE_BOOST).element;
    let mut kinetic = 0.0;
    for c in 0..2 {
        for_each_point(disc, rule, &state.u.component(c), |w, v, _| kinetic += 0.5 * w * v * v);
    }
    let mut field = 0.0;
    for_each_point(disc, rule, &state.phi, |w, _, g| {
        field += 0.5 * params.mu * w * (g[0] * g[0] + g[1] * g[1])
    });
    let mut entropy = 0.0;
    let mut positive = true;
    for i in 0..2 {
        for_each_point(disc, rule, &state.c[i], |w, v, _| {
            let c = v + state.m0;
            if c > 0.0 {
                entropy += params.kappa[i] * w * c * (c.ln() - 1.0);
            } else if c < 0.0 {
                positive = false;
            }
        });
    }
    let elec = kinetic + field;
    Energies {
        kinetic,
        elec,
        total: positive.then_some(elec + entropy),
    }
}

/// Smallest and largest value of `field + shift` sampled at the element
/// quadrature points and at every element vertex.
pub fn sampled_range(disc: &Discretization, field: &FieldVector, shift: f64) -> (f64, f64) {
    let rule = &disc.quad.element;
    let mut points = rule.points.clone();
    points.extend([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    let weights = vec![1.0; points.len()];
    let sampler = QuadratureRule {
        points,
        weights,
        degree: 0,
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for_each_point(disc, &sampler, field, |_, v, _| {
        lo = lo.min(v + shift);
        hi = hi.max(v + shift);
    });
    (lo, hi)
}

/// Errors against the manufactured solution at time `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorBundle {
    pub phi_l2: f64,
    pub phi_energy: f64,
    pub c_l2: [f64; 2],
    pub c_energy: [f64; 2],
    pub u_l2: f64,
    pub u_energy: f64,
    pub p_l2: f64,
}

impl ErrorBundle {
    pub const COLUMNS: [&'static str; 9] = [
        "err_phi_l2",
        "err_phi_energy",
        "err_c1_l2",
        "err_c1_energy",
        "err_c2_l2",
        "err_c2_energy",
        "err_u_l2",
        "err_u_energy",
        "err_p_l2",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.phi_l2,
            self.phi_energy,
            self.c_l2[0],
            self.c_energy[0],
            self.c_l2[1],
            self.c_energy[1],
            self.u_l2,
            self.u_energy,
            self.p_l2,
        ]
    }
}

/// L² and energy-norm errors of every field, with quadrature raised by
/// `boost` above the assembly default.
pub fn compute_errors(
    disc: &Discretization,
    state: &SystemState,
    exact: &ManufacturedSolution,
    sigma: f64,
    boost: usize,
) -> ErrorBundle {
    let q = QuadratureSet::boosted(disc.k, boost);
    let mesh = &disc.mesh;
    let t = state.t;
    let (rule, edge) = (&q.element, &q.edge);
    let phi = |x: [f64; 2], _: usize| exact.phi(x, t);
    let gphi = |x: [f64; 2], _: usize| exact.grad_phi(x, t);
    let mut c_l2 = [0.0; 2];
    let mut c_energy = [0.0; 2];
    for i in 0..2 {
        let ci = state.concentration(i);
        let c = |x: [f64; 2], _: usize| exact.c(i, x, t);
        let gc = |x: [f64; 2], _: usize| exact.grad_c(i, x, t);
        c_l2[i] = ci.l2_error(mesh, rule, &c);
        c_energy[i] = ci.energy_error(mesh, rule, edge, sigma, false, &c, &gc);
    }
    let u = |x: [f64; 2], c: usize| exact.u(x, t)[c];
    let gu = |x: [f64; 2], c: usize| exact.grad_u(x, t)[c];
    ErrorBundle {
        phi_l2: state.phi.l2_error(mesh, rule, &phi),
        phi_energy: state.phi.energy_error(mesh, rule, edge, sigma, false, &phi, &gphi),
        c_l2,
        c_energy,
        u_l2: state.u.l2_error(mesh, rule, &u),
        u_energy: state.u.energy_error(mesh, rule, edge, sigma, true, &u, &gu),
        p_l2: state.p.l2_error(mesh, rule, &|x, _| exact.p(x, t)),
    }
}

/// Everything reported for one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    /// `∫ cᵢ`.
    pub mass: [f64; 2],
    /// `∫ cᵢ − ∫ cᵢ⁰`.
    pub mass_deviation: [f64; 2],
    pub min_c: [f64; 2],
    pub max_c: [f64; 2],
    pub energies: Energies,
    pub errors: Option<ErrorBundle>,
}

impl DiagnosticsRecord {
    /// `initial_mass` is `[∫c₁⁰, ∫c₂⁰]`; pass `None` at the initial level.
    pub fn compute(
        disc: &Discretization,
        state: &SystemState,
        params: &FormParams,
        initial_mass: Option<[f64; 2]>,
        exact: Option<&ManufacturedSolution>,
    ) -> Self {
        let area = disc.mesh.domain_area();
        let mass = [0, 1].map(|i| compute_mass(disc, &state.c[i]) + state.m0 * area);
        let reference = initial_mass.unwrap_or(mass);
        let ranges = [0, 1].map(|i| sampled_range(disc, &state.c[i], state.m0));
        DiagnosticsRecord {
            step: state.step,
            t: state.t,
            mass,
            mass_deviation: [mass[0] - reference[0], mass[1] - reference[1]],
            min_c: [ranges[0].0, ranges[1].0],
            max_c: [ranges[0].1, ranges[1].1],
            energies: compute_energies(disc, state, params),
            errors: exact.map(|m| compute_errors(disc, state, m, params.sigma, QUADRATURE_BOOST)),
        }
    }
}
