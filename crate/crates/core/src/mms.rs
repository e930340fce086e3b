//! Manufactured solution with its forcing terms, and the scenario presets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{ConvectionBoundary, FormParams, PotentialBoundary};
use crate::mesh::BoundaryTag;

/// Closed-form solution on the unit square, decaying like `e^{−t}`:
///
/// ```text
/// φ  = e^{−t} (cos πx cos πy − cos 2πx cos 2πy / 4) / (2π²)
/// c₁ = e^{−t} (cos πx cos πy + 1) / 2
/// c₂ = e^{−t} (cos 2πx cos 2πy + 1) / 2
/// u  = e^{−t} (sin 2πy (1 − cos 2πx), −sin 2πx (1 − cos 2πy))
/// p  = e^{−t} (cos 2πx + sin 2πy)
/// ```
///
/// Every derivative below is written out by hand; the tests check each one
/// against finite differences of the base field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ManufacturedSolution;

struct Trig {
    c1x: f64,
    c1y: f64,
    s1x: f64,
    s1y: f64,
    c2x: f64,
    c2y: f64,
    s2x: f64,
    s2y: f64,
}

impl Trig {
    fn at(x: [f64; 2]) -> Self {
        let (s1x, c1x) = (PI * x[0]).sin_cos();
        let (s1y, c1y) = (PI * x[1]).sin_cos();
        let (s2x, c2x) = (2.0 * PI * x[0]).sin_cos();
        let (s2y, c2y) = (2.0 * PI * x[1]).sin_cos();
        Trig {
            c1x,
            c1y,
            s1x,
            s1y,
            c2x,
            c2y,
            s2x,
            s2y,
        }
    }
}

impl ManufacturedSolution {
    pub fn phi(&self, x: [f64; 2], t: f64) -> f64 {
        let g = Trig::at(x);
        (-t).exp() * (g.c1x * g.c1y - g.c2x * g.c2y / 4.0) / (2.0 * PI * PI)
    }

    pub fn grad_phi(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = Trig::at(x);
        let e = (-t).exp() / (2.0 * PI * PI);
        [
            e * (-PI * g.s1x * g.c1y + PI * g.s2x * g.c2y / 2.0),
            e * (-PI * g.c1x * g.s1y + PI * g.c2x * g.s2y / 2.0),
        ]
    }

    pub fn laplacian_phi(&self, x: [f64; 2], t: f64) -> f64 {
        let g = Trig::at(x);
        (-t).exp() * (g.c2x * g.c2y - g.c1x * g.c1y)
    }

    /// Concentration of ion `i ∈ {0, 1}`.
    pub fn c(&self, i: usize, x: [f64; 2], t: f64) -> f64 {
        let g = Trig::at(x);
        let e = (-t).exp() / 2.0;
        match i {
            0 => e * (g.c1x * g.c1y + 1.0),
            _ => e * (g.c2x * g.c2y + 1.0),
        }
    }

    pub fn grad_c(&self, i: usize, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = Trig::at(x);
        let e = (-t).exp() / 2.0;
        match i {
            0 => [-e * PI * g.s1x * g.c1y, -e * PI * g.c1x * g.s1y],
            _ => [-e * 2.0 * PI * g.s2x * g.c2y, -e * 2.0 * PI * g.c2x * g.s2y],
        }
    }

    pub fn laplacian_c(&self, i: usize, x: [f64; 2], t: f64) -> f64 {
        let g = Trig::at(x);
        let e = (-t).exp() / 2.0;
        match i {
            0 => -e * 2.0 * PI * PI * g.c1x * g.c1y,
            _ => -e * 8.0 * PI * PI * g.c2x * g.c2y,
        }
    }

    pub fn dt_c(&self, i: usize, x: [f64; 2], t: f64) -> f64 {
        -self.c(i, x, t)
    }

    pub fn u(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = Trig::at(x);
        let e = (-t).exp();
        [e * g.s2y * (1.0 - g.c2x), -e * g.s2x * (1.0 - g.c2y)]
    }

    /// `grad_u[c] = ∇u_c`.
    pub fn grad_u(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let g = Trig::at(x);
        let e = (-t).exp();
        let tp = 2.0 * PI;
        [
            [e * tp * g.s2x * g.s2y, e * tp * g.c2y * (1.0 - g.c2x)],
            [-e * tp * g.c2x * (1.0 - g.c2y), -e * tp * g.s2x * g.s2y],
        ]
    }

    pub fn laplacian_u(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = Trig::at(x);
        let e = (-t).exp() * 4.0 * PI * PI;
        [e * g.s2y * (2.0 * g.c2x - 1.0), -e * g.s2x * (2.0 * g.c2y - 1.0)]
    }

    pub fn dt_u(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let u = self.u(x, t);
        [-u[0], -u[1]]
    }

    pub fn p(&self, x: [f64; 2], t: f64) -> f64 {
        let g = Trig::at(x);
        (-t).exp() * (g.c2x + g.s2y)
    }

    pub fn grad_p(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = Trig::at(x);
        let e = (-t).exp() * 2.0 * PI;
        [-e * g.s2x, e * g.c2y]
    }

    /// `f_φ = −μΔφ − (c₁ − c₂)`.
    pub fn f_phi(&self, params: &FormParams, x: [f64; 2], t: f64) -> f64 {
        -params.mu * self.laplacian_phi(x, t) - (self.c(0, x, t) - self.c(1, x, t))
    }

    /// `f_cᵢ = ∂ₜcᵢ − κᵢΔcᵢ + u·∇cᵢ − βᵢ(∇cᵢ·∇φ + cᵢΔφ)`.
    pub fn f_c(&self, params: &FormParams, i: usize, x: [f64; 2], t: f64) -> f64 {
        let gc = self.grad_c(i, x, t);
        let gp = self.grad_phi(x, t);
        let u = self.u(x, t);
        self.dt_c(i, x, t) - params.kappa[i] * self.laplacian_c(i, x, t) + u[0] * gc[0] + u[1] * gc[1]
            - params.beta[i] * (gc[0] * gp[0] + gc[1] * gp[1] + self.c(i, x, t) * self.laplacian_phi(x, t))
    }

    /// `f_u = ∂ₜu − νΔu + (u·∇)u + ∇p + (c₁ − c₂)∇φ`.
    pub fn f_u(&self, params: &FormParams, x: [f64; 2], t: f64) -> [f64; 2] {
        let u = self.u(x, t);
        let gu = self.grad_u(x, t);
        let lu = self.laplacian_u(x, t);
        let du = self.dt_u(x, t);
        let gp = self.grad_p(x, t);
        let gphi = self.grad_phi(x, t);
        let q = self.c(0, x, t) - self.c(1, x, t);
        let mut f = [0.0; 2];
        for c in 0..2 {
            let adv = u[0] * gu[c][0] + u[1] * gu[c][1];
            f[c] = du[c] - params.nu * lu[c] + adv + gp[c] + q * gphi[c];
        }
        f
    }
}

/// Right-hand sides added to the potential, concentration and momentum
/// equations.
pub trait SourceTerms: Send + Sync {
    fn phi(&self, x: [f64; 2], t: f64) -> f64;
    fn c(&self, i: usize, x: [f64; 2], t: f64) -> f64;
    fn u(&self, x: [f64; 2], t: f64) -> [f64; 2];
}

/// Forcing that makes [`ManufacturedSolution`] exact for given parameters.
#[derive(Clone, Debug)]
pub struct ManufacturedForcing {
    pub params: FormParams,
}

impl SourceTerms for ManufacturedForcing {
    fn phi(&self, x: [f64; 2], t: f64) -> f64 {
        ManufacturedSolution.f_phi(&self.params, x, t)
    }

    fn c(&self, i: usize, x: [f64; 2], t: f64) -> f64 {
        ManufacturedSolution.f_c(&self.params, i, x, t)
    }

    fn u(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        ManufacturedSolution.f_u(&self.params, x, t)
    }
}

/// Initial data of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// The manufactured solution at `t = 0`, pressure included.
    Manufactured,
    /// `c₁ = cos 2πx + 1`, `c₂ = cos 2πy + 1` and a strong cellular flow.
    Decay,
    /// Two Gaussian ion clouds of equal mass `r0` and width `radius`.
    Gaussians { r0: f64, radius: f64 },
    /// Uniform concentrations, fluid at rest.
    Uniform { c1: f64, c2: f64 },
}

impl InitialCondition {
    pub fn concentration(&self, i: usize, x: [f64; 2], extents: [f64; 2]) -> f64 {
        match self {
            InitialCondition::Manufactured => ManufacturedSolution.c(i, x, 0.0),
            InitialCondition::Decay => {
                let s = if i == 0 { x[0] } else { x[1] };
                (2.0 * PI * s).cos() + 1.0
            }
            InitialCondition::Gaussians { r0, radius } => {
                let q = if i == 0 { 1.0 } else { -1.0 };
                let dx = x[0] - extents[0] / 2.0 + q / 8.0;
                let dy = x[1] - extents[1] / 2.0 + q / 2.0;
                r0 / (2.0 * PI * radius * radius) * (-(dx * dx + dy * dy) / (2.0 * radius * radius)).exp()
            }
            InitialCondition::Uniform { c1, c2 } => {
                if i == 0 {
                    *c1
                } else {
                    *c2
                }
            }
        }
    }

    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        match self {
            InitialCondition::Manufactured => ManufacturedSolution.u(x, 0.0),
            InitialCondition::Decay => {
                let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
                let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
                [10.0 * sx * cy, -10.0 * sy * cx]
            }
            _ => [0.0, 0.0],
        }
    }

    /// Initial pressure, when the scenario knows one.
    pub fn pressure(&self, x: [f64; 2]) -> Option<f64> {
        match self {
            InitialCondition::Manufactured => Some(ManufacturedSolution.p(x, 0.0)),
            _ => None,
        }
    }

    /// Centres of the two ion clouds for [`Gaussians`](Self::Gaussians).
    pub fn gaussian_centres(&self, extents: [f64; 2]) -> Option<[[f64; 2]; 2]> {
        match self {
            InitialCondition::Gaussians { .. } => Some([
                [extents[0] / 2.0 - 0.125, extents[1] / 2.0 - 0.5],
                [extents[0] / 2.0 + 0.125, extents[1] / 2.0 + 0.5],
            ]),
            _ => None,
        }
    }
}

/// How a prescribed surface charge enters the potential equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceChargeScaling {
    /// `μ ∇φ·n = σ_s`.
    #[default]
    Dielectric,
    /// `∇φ·n = σ_s`.
    Plain,
}

/// Boundary conditions for the potential.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryMode {
    /// Insulated walls everywhere; the potential is fixed by a zero mean.
    #[default]
    Homogeneous,
    /// Charged, grounded and insulated walls.
    Reservoir {
        /// Surface charge on the charged sides.
        charged: Vec<(BoundaryTag, f64)>,
        /// Potential on the grounded sides.
        grounded: Vec<(BoundaryTag, f64)>,
        #[serde(default)]
        scaling: SurfaceChargeScaling,
    },
}

impl BoundaryMode {
    /// Boundary data in the form the assembler takes, for dielectric `mu`.
    pub fn potential_boundary(&self, mu: f64) -> Option<PotentialBoundary> {
        match self {
            BoundaryMode::Homogeneous => None,
            BoundaryMode::Reservoir {
                charged,
                grounded,
                scaling,
            } => {
                let factor = match scaling {
                    SurfaceChargeScaling::Dielectric => 1.0 / mu,
                    SurfaceChargeScaling::Plain => 1.0,
                };
                Some(PotentialBoundary {
                    dirichlet: grounded.clone(),
                    flux: charged.iter().map(|(t, s)| (*t, s * factor)).collect(),
                })
            }
        }
    }
}

/// A complete scenario: domain, discretization, physics and time stepping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioPreset {
    pub name: String,
    pub extents: [f64; 2],
    /// Cells per side; each cell is split into two triangles.
    pub cells: [usize; 2],
    pub k: usize,
    pub params: FormParams,
    pub dt: f64,
    pub t_final: f64,
    pub initial: InitialCondition,
    #[serde(default)]
    pub boundary: BoundaryMode,
    #[serde(default)]
    pub convection: ConvectionBoundary,
    /// Whether the manufactured forcing is switched on.
    #[serde(default)]
    pub manufactured_sources: bool,
    /// Steps between field snapshots; 0 disables them.
    #[serde(default)]
    pub output_every: usize,
}

pub const PRESET_NAMES: [&str; 4] = ["mms-k1", "mms-k2", "decay", "reservoir"];

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<ScenarioPreset> {
    let unit = FormParams::default();
    let mms = |k: usize, sigma: f64, n: usize, dt: f64| ScenarioPreset {
        name: name.to_string(),
        extents: [1.0, 1.0],
        cells: [n, n],
        k,
        params: FormParams { sigma, ..unit.clone() },
        dt,
        t_final: 0.1,
        initial: InitialCondition::Manufactured,
        boundary: BoundaryMode::Homogeneous,
        convection: ConvectionBoundary::default(),
        manufactured_sources: true,
        output_every: 0,
    };
    match name {
        "mms-k1" => Ok(mms(1, 10.0, 16, 0.1 / 256.0)),
        "mms-k2" => Ok(mms(2, 40.0, 8, 0.1 / 512.0)),
        "decay" => Ok(ScenarioPreset {
            name: name.to_string(),
            extents: [1.0, 1.0],
            cells: [64, 64],
            k: 2,
            params: FormParams {
                sigma: 40.0,
                ..unit
            },
            dt: 0.001,
            t_final: 0.5,
            initial: InitialCondition::Decay,
            boundary: BoundaryMode::Homogeneous,
            convection: ConvectionBoundary::default(),
            manufactured_sources: false,
            output_every: 0,
        }),
        "reservoir" => Ok(ScenarioPreset {
            name: name.to_string(),
            extents: [1.0, 2.0],
            cells: [64, 128],
            k: 2,
            params: FormParams {
                sigma: 40.0,
                mu: 0.01,
                nu: 0.08,
                kappa: [0.5, 0.5],
                beta: [0.01, -0.01],
            },
            dt: 0.01,
            t_final: 10.0,
            initial: InitialCondition::Gaussians { r0: 3.0, radius: 0.25 },
            boundary: BoundaryMode::Reservoir {
                charged: vec![(BoundaryTag::Bottom, 1.0)],
                grounded: vec![(BoundaryTag::Top, 0.0)],
                scaling: SurfaceChargeScaling::Dielectric,
            },
            convection: ConvectionBoundary::default(),
            manufactured_sources: false,
            output_every: 25,
        }),
        other => Err(Error::invalid(format!(
            "unknown preset '{other}' (known: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Finite-difference derivatives used to check the closed forms.
mod fd {
    const H: f64 = 1e-2;

    /// Eighth-order central differences of `f` along `dir` (0, 1: space, 2: time).
    pub fn d1(f: &dyn Fn([f64; 3]) -> f64, p: [f64; 3], dir: usize) -> f64 {
        const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let mut s = 0.0;
        for (j, c) in C.iter().enumerate() {
            let o = (j + 1) as f64 * H;
            let (mut a, mut b) = (p, p);
            a[dir] += o;
            b[dir] -= o;
            s += c * (f(a) - f(b));
        }
        s / H
    }

    pub fn d2(f: &dyn Fn([f64; 3]) -> f64, p: [f64; 3], dir: usize) -> f64 {
        const C: [f64; 4] = [8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
        let mut s = -205.0 / 72.0 * f(p);
        for (j, c) in C.iter().enumerate() {
            let o = (j + 1) as f64 * H;
            let (mut a, mut b) = (p, p);
            a[dir] += o;
            b[dir] -= o;
            s += c * (f(a) + f(b));
        }
        s / (H * H)
    }

    pub fn lap(f: &dyn Fn([f64; 3]) -> f64, p: [f64; 3]) -> f64 {
        d2(f, p, 0) + d2(f, p, 1)
    }

    pub fn points(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut s = seed;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..n).map(|_| [next(), next(), 0.2 * next()]).collect()
    }
}

/// Largest residual of the three balance laws when the manufactured fields
/// are differentiated by finite differences and the closed-form forcing is
/// subtracted, over `n` pseudo-random points of `[0, 1]² × [0, 0.2]`.
pub fn forcing_residual(params: &FormParams, n: usize, seed: u64) -> f64 {
    use fd::{d1, lap, points};
    let m = ManufacturedSolution;
    let phi = |p: [f64; 3]| m.phi([p[0], p[1]], p[2]);
    let c = |i: usize| move |p: [f64; 3]| m.c(i, [p[0], p[1]], p[2]);
    let u = |k: usize| move |p: [f64; 3]| m.u([p[0], p[1]], p[2])[k];
    let pr = |p: [f64; 3]| m.p([p[0], p[1]], p[2]);
    let mut worst = 0.0f64;
    for p in points(n, seed) {
        let x = [p[0], p[1]];
        let t = p[2];
        let q = m.c(0, x, t) - m.c(1, x, t);
        let lphi = lap(&phi, p);
        let gphi = [d1(&phi, p, 0), d1(&phi, p, 1)];
        worst = worst.max((-params.mu * lphi - q - m.f_phi(params, x, t)).abs());
        let uv = m.u(x, t);
        for i in 0..2 {
            let f = c(i);
            let g = [d1(&f, p, 0), d1(&f, p, 1)];
            let r = d1(&f, p, 2) - params.kappa[i] * lap(&f, p) + uv[0] * g[0] + uv[1] * g[1]
                - params.beta[i] * (g[0] * gphi[0] + g[1] * gphi[1] + f(p) * lphi);
            worst = worst.max((r - m.f_c(params, i, x, t)).abs());
        }
        let fu = m.f_u(params, x, t);
        for k in 0..2 {
            let f = u(k);
            let adv = uv[0] * d1(&f, p, 0) + uv[1] * d1(&f, p, 1);
            let r = d1(&f, p, 2) - params.nu * lap(&f, p) + adv + d1(&pr, p, k) + q * gphi[k];
            worst = worst.max((r - fu[k]).abs());
        }
    }
    worst
}
