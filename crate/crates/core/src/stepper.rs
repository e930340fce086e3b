//! The decoupled, linearized pressure-correction time loop.
//!
//! One step from level `m − 1` to `m`:
//!
//! 1. potential from the lagged net charge;
//! 2. both concentrations, convected by `u^{m−1}` and drifted against `φ^m`;
//! 3. intermediate velocity with lagged pressure and electric force;
//! 4. pressure increment from the divergence of the intermediate velocity;
//! 5. velocity correction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forms::{Assembler, ConvectionBoundary, FormParams};
use crate::linalg::{ConstrainedSystem, LinearSolveReport, PreparedSystem, SolverKind, SparseMatrix, DEFAULT_TOLERANCE};
use crate::mms::{BoundaryMode, InitialCondition, SourceTerms};
use crate::space::{Discretization, FieldVector, SpaceKind};

/// All unknowns at one time level. Concentrations are stored shifted by `m0`.
#[derive(Clone, Debug)]
pub struct SystemState {
    pub step: usize,
    pub t: f64,
    pub phi: FieldVector,
    /// `c̃ᵢ = cᵢ − m₀`.
    pub c: [FieldVector; 2],
    pub u_hat: FieldVector,
    pub u: FieldVector,
    pub p: FieldVector,
    pub m0: f64,
}

impl SystemState {
    /// All fields zero at `t = 0`.
    pub fn zeros(disc: &Discretization, m0: f64) -> Self {
        SystemState {
            step: 0,
            t: 0.0,
            phi: FieldVector::zeros(&disc.scalar),
            c: [FieldVector::zeros(&disc.scalar), FieldVector::zeros(&disc.scalar)],
            u_hat: FieldVector::zeros(&disc.vector),
            u: FieldVector::zeros(&disc.vector),
            p: FieldVector::zeros(&disc.pressure),
            m0,
        }
    }

    /// Unshifted concentration `cᵢ = c̃ᵢ + m₀`.
    pub fn concentration(&self, i: usize) -> FieldVector {
        let mut c = self.c[i].clone();
        c.add_constant(self.m0);
        c
    }

    /// Net charge `c₁ − c₂` (the shift cancels).
    pub fn net_charge(&self) -> FieldVector {
        let mut q = self.c[0].clone();
        q.axpy(-1.0, &self.c[1]);
        q
    }
}

/// Operator of the pressure-increment solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PressureOperator {
    /// SIPG Laplacian on the pressure space.
    #[default]
    Sipg,
    /// `D M⁻¹ Dᵀ`, which makes the corrected velocity discretely
    /// divergence-free.
    Projection,
}

/// Time stepping parameters shared by every substep.
#[derive(Clone)]
pub struct SchemeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub params: FormParams,
    pub boundary: BoundaryMode,
    pub convection: ConvectionBoundary,
    pub pressure_operator: PressureOperator,
    pub solver: SolverKind,
    /// Relative residual every linear solve must reach.
    pub tolerance: f64,
    pub sources: Option<Arc<dyn SourceTerms>>,
}

impl fmt::Debug for SchemeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchemeConfig")
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .field("params", &self.params)
            .field("boundary", &self.boundary)
            .field("convection", &self.convection)
            .field("pressure_operator", &self.pressure_operator)
            .field("solver", &self.solver)
            .field("tolerance", &self.tolerance)
            .field("sources", &self.sources.is_some())
            .finish()
    }
}

impl SchemeConfig {
    pub fn new(dt: f64, t_final: f64, params: FormParams) -> Self {
        SchemeConfig {
            dt,
            t_final,
            params,
            boundary: BoundaryMode::Homogeneous,
            convection: ConvectionBoundary::default(),
            pressure_operator: PressureOperator::Sipg,
            solver: SolverKind::Direct,
            tolerance: DEFAULT_TOLERANCE,
            sources: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return Err(Error::invalid(format!(
                "final time {} must be at least one time step {}",
                self.t_final, self.dt
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::invalid("solver tolerance must be positive"));
        }
        if let Some(bc) = self.boundary.potential_boundary(self.params.mu) {
            bc.validate()?;
        }
        Ok(())
    }

    /// Number of steps to reach `t_final`, rounding to the nearest step.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// A field tagged with the time level it belongs to.
#[derive(Clone, Debug)]
pub struct Stamped {
    pub level: usize,
    pub field: FieldVector,
}

/// One input consumed by one operator during a step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub operator: &'static str,
    pub input: &'static str,
    pub level: usize,
}

/// The potential system: zero-mean Neumann, or mixed with a boundary load.
#[derive(Debug)]
enum PotentialSystem {
    Neumann(ConstrainedSystem),
    Mixed { system: PreparedSystem, load: Vec<f64> },
}

/// Advances a [`SystemState`]; owns the assembler and every reusable
/// factorization.
pub struct Stepper {
    assembler: Arc<Assembler>,
    cfg: SchemeConfig,
    scalar_integrals: Vec<f64>,
    pressure_integrals: Vec<f64>,
    potential: PotentialSystem,
    pressure: ConstrainedSystem,
    /// `M/Δt + κA₁` per ion, without convection.
    diffusion: [SparseMatrix; 2],
    /// One system per ion, or a single shared one when `κ₁ = κ₂`.
    concentration: Vec<ConstrainedSystem>,
    /// `M/Δt + νA₂` on one velocity component.
    viscous: SparseMatrix,
    velocity: Option<PreparedSystem>,
    b: SparseMatrix,
    trace: Option<Vec<TraceEntry>>,
    reports: Vec<(&'static str, LinearSolveReport)>,
}

impl fmt::Debug for Stepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stepper").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl Stepper {
    pub fn new(assembler: Arc<Assembler>, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let a = &*assembler;
        let disc = a.discretization();
        let p = &cfg.params;
        let scalar_integrals = disc.scalar.dof_integrals(&disc.mesh);
        let pressure_integrals = disc.pressure.dof_integrals(&disc.mesh);
        let a1 = a.a1(p.sigma);

        let scalar_kernel = disc.scalar.unit_coefficients().repeat(disc.mesh.n_elements());
        let potential = match cfg.boundary.potential_boundary(p.mu) {
            None => PotentialSystem::Neumann(ConstrainedSystem::singular(
                a1.scaled(p.mu),
                scalar_integrals.clone(),
                scalar_kernel,
                cfg.solver,
                true,
                cfg.tolerance,
            )?),
            Some(bc) => {
                let (m, load) = a.a1_mixed_bc(p.sigma, &bc)?;
                PotentialSystem::Mixed {
                    system: PreparedSystem::new(m.scaled(p.mu), cfg.solver, true, cfg.tolerance)?,
                    load: load.iter().map(|v| v * p.mu).collect(),
                }
            }
        };
        let b = a.d().matrix;
        let pressure_matrix = match cfg.pressure_operator {
            PressureOperator::Sipg => a.a1_pressure(p.sigma).matrix,
            PressureOperator::Projection => b.matmul(&a.mass_inverse(SpaceKind::Vector))?.matmul(&b.transpose())?,
        };
        let pressure = ConstrainedSystem::singular(
            pressure_matrix,
            pressure_integrals.clone(),
            disc.pressure.unit_coefficients().repeat(disc.mesh.n_elements()),
            cfg.solver,
            true,
            cfg.tolerance,
        )?;

        let mass = a.mass(SpaceKind::Scalar).matrix.scaled(1.0 / cfg.dt);
        let diffusion = [mass.add_scaled(p.kappa[0], &a1)?, mass.add_scaled(p.kappa[1], &a1)?];
        let viscous = mass.add_scaled(p.nu, &a.a2_block(p.sigma))?;
        Ok(Stepper {
            assembler,
            cfg,
            scalar_integrals,
            pressure_integrals,
            potential,
            pressure,
            diffusion,
            concentration: Vec::new(),
            viscous,
            velocity: None,
            b,
            trace: None,
            reports: Vec::new(),
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    fn disc(&self) -> &Discretization {
        self.assembler.discretization()
    }

    /// Turns recording of consumed time levels on or off.
    pub fn set_tracing(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    /// Inputs consumed during the last completed step, when tracing.
    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    /// Reports of the linear solves of the last step.
    pub fn reports(&self) -> &[(&'static str, LinearSolveReport)] {
        &self.reports
    }

    fn record(&mut self, operator: &'static str, input: &'static str, level: usize) {
        if let Some(t) = &mut self.trace {
            t.push(TraceEntry { operator, input, level });
        }
    }

    fn scalar_load(&self, f: impl Fn([f64; 2]) -> f64 + Sync) -> FieldVector {
        let d = self.disc();
        FieldVector::project(&d.mesh, &d.scalar, &d.quad.element, f)
    }

    /// Projects the initial data and computes the diagnostic `φ⁰`. The
    /// shift `m₀` is the mean of the two projected initial concentrations.
    pub fn initialize(&mut self, initial: &InitialCondition) -> Result<SystemState> {
        let d = self.disc();
        let mesh = &d.mesh;
        let rule = &d.quad.element;
        let extents = mesh.extents();
        let c: Vec<FieldVector> = (0..2)
            .map(|i| FieldVector::project(mesh, &d.scalar, rule, |x| initial.concentration(i, x, extents)))
            .collect();
        let m0 = (c[0].integral(mesh) + c[1].integral(mesh)) / (2.0 * mesh.domain_area());
        let shifted = |mut f: FieldVector| {
            f.add_constant(-m0);
            f
        };
        let mut state = SystemState::zeros(d, m0);
        let mut it = c.into_iter().map(shifted);
        state.c = [it.next().expect("two ions"), it.next().expect("two ions")];
        state.u = FieldVector::project_vector(mesh, &d.vector, rule, |x| initial.velocity(x));
        state.u_hat = state.u.clone();
        if initial.pressure([0.0, 0.0]).is_some() {
            let p = FieldVector::project(mesh, &d.pressure, rule, |x| initial.pressure(x).unwrap_or(0.0));
            state.p = p.enforce_zero_mean(mesh)?;
        }
        state.phi = self.solve_potential(&state.c, 0.0)?.0;
        Ok(state)
    }

    fn solve_potential(&self, c: &[FieldVector; 2], t: f64) -> Result<(FieldVector, LinearSolveReport)> {
        let d = self.disc();
        let a = &self.assembler;
        let mut charge = c[0].clone();
        charge.axpy(-1.0, &c[1]);
        let mut rhs = a.apply_mass(SpaceKind::Scalar, charge.coeffs());
        if let Some(src) = &self.cfg.sources {
            let f = self.scalar_load(|x| src.phi(x, t));
            add(&mut rhs, &a.apply_mass(SpaceKind::Scalar, f.coeffs()));
        }
        match &self.potential {
            PotentialSystem::Mixed { system, load } => {
                add(&mut rhs, load);
                let (x, report) = system.solve(&rhs)?;
                Ok((FieldVector::from_coeffs(&d.scalar.clone().with_zero_mean(false), x)?, report))
            }
            PotentialSystem::Neumann(system) => {
                let (x, report) = system.solve(&rhs, 0.0)?;
                Ok((FieldVector::from_coeffs(&d.scalar, x)?.enforce_zero_mean(&d.mesh)?, report))
            }
        }
    }

    /// Potential at level `m` from the charges at `m − 1`.
    pub fn step_potential(&mut self, prev: &SystemState) -> Result<Stamped> {
        self.record("potential", "charge", prev.step);
        let (field, report) = self.solve_potential(&prev.c, prev.t + self.cfg.dt)?;
        self.reports.push(("potential", report));
        Ok(Stamped {
            level: prev.step + 1,
            field,
        })
    }

    /// Both shifted concentrations at level `m`. Each system is solved on
    /// the zero-mean-constrained space through a multiplier; the constraint
    /// keeps `∫c̃ᵢ` at its previous value plus the integrated source.
    pub fn step_concentrations(&mut self, prev: &SystemState, phi: &Stamped) -> Result<[Stamped; 2]> {
        let dt = self.cfg.dt;
        let t = prev.t + dt;
        let a = Arc::clone(&self.assembler);
        let n1 = a.n1(&prev.u, self.cfg.convection)?;
        self.record("N1", "velocity", prev.step);
        let same = self.cfg.params.kappa[0] == self.cfg.params.kappa[1];
        let matrices: Vec<SparseMatrix> = (0..if same { 1 } else { 2 })
            .map(|i| {
                self.diffusion[i].add_scaled(1.0, &n1.matrix)
            })
            .collect::<Result<_>>()?;
        if self.concentration.len() == matrices.len() {
            for (sys, m) in self.concentration.iter_mut().zip(matrices) {
                sys.update(m)?;
            }
        } else {
            self.concentration = matrices
                .into_iter()
                .map(|m| {
                    ConstrainedSystem::regular(
                        m,
                        self.scalar_integrals.clone(),
                        self.cfg.solver,
                        false,
                        self.cfg.tolerance,
                    )
                })
                .collect::<Result<_>>()?;
        }

        let mut rhs = Vec::with_capacity(2);
        for i in 0..2 {
            self.record("G", "concentration", prev.step);
            self.record("G", "potential", phi.level);
            let mesh = &a.discretization().mesh;
            let mut r: Vec<f64> = a.apply_mass(SpaceKind::Scalar, prev.c[i].coeffs()).iter().map(|v| v / dt).collect();
            let drift = a.apply_g(&prev.c[i], prev.m0, &phi.field)?;
            let beta = self.cfg.params.beta[i];
            for (r, g) in r.iter_mut().zip(&drift) {
                *r -= beta * g;
            }
            let mut target = prev.c[i].integral(mesh);
            if let Some(src) = &self.cfg.sources {
                let f = self.scalar_load(|x| src.c(i, x, t));
                add(&mut r, &a.apply_mass(SpaceKind::Scalar, f.coeffs()));
                target += dt * f.integral(mesh);
            }
            rhs.push((r, target));
        }
        let systems = &self.concentration;
        let second = &systems[systems.len() - 1];
        let (r0, r1) = rayon::join(
            || systems[0].solve(&rhs[0].0, rhs[0].1),
            || second.solve(&rhs[1].0, rhs[1].1),
        );
        let (x0, rep0) = r0?;
        let (x1, rep1) = r1?;
        self.reports.push(("concentration 1", rep0));
        self.reports.push(("concentration 2", rep1));
        let d = a.discretization();
        let level = prev.step + 1;
        Ok([
            Stamped {
                level,
                field: FieldVector::from_coeffs(&d.scalar, x0)?,
            },
            Stamped {
                level,
                field: FieldVector::from_coeffs(&d.scalar, x1)?,
            },
        ])
    }

    /// Intermediate velocity: lagged convection, pressure and charge, with the
    /// new potential in the electric force.
    pub fn step_intermediate_velocity(&mut self, prev: &SystemState, phi: &Stamped) -> Result<Stamped> {
        let dt = self.cfg.dt;
        let t = prev.t + dt;
        let a = Arc::clone(&self.assembler);
        let d = a.discretization();
        let block = self.viscous.add_scaled(1.0, &a.n2_block(&prev.u, self.cfg.convection)?)?;
        self.record("N2", "velocity", prev.step);
        match &mut self.velocity {
            Some(s) => s.update(block)?,
            None => self.velocity = Some(PreparedSystem::new(block, self.cfg.solver, false, self.cfg.tolerance)?),
        }

        let mut rhs: Vec<f64> = a.apply_mass(SpaceKind::Vector, prev.u.coeffs()).iter().map(|v| v / dt).collect();
        self.record("mass", "velocity", prev.step);
        add(&mut rhs, &self.b.transpose_mul_vec(prev.p.coeffs()));
        self.record("D", "pressure", prev.step);
        let force = a.t(&prev.net_charge(), &phi.field)?;
        self.record("T", "charge", prev.step);
        self.record("T", "potential", phi.level);
        for (r, f) in rhs.iter_mut().zip(&force) {
            *r -= f;
        }
        if let Some(src) = &self.cfg.sources {
            let f = FieldVector::project_vector(&d.mesh, &d.vector, &d.quad.element, |x| src.u(x, t));
            add(&mut rhs, &a.apply_mass(SpaceKind::Vector, f.coeffs()));
        }
        let half = rhs.len() / 2;
        let sys = self.velocity.as_ref().expect("prepared above");
        let (r0, r1) = rayon::join(|| sys.solve(&rhs[..half]), || sys.solve(&rhs[half..]));
        let (mut x, rep0) = r0?;
        let (y, rep1) = r1?;
        self.reports.push(("velocity x", rep0));
        self.reports.push(("velocity y", rep1));
        x.extend(y);
        Ok(Stamped {
            level: prev.step + 1,
            field: FieldVector::from_coeffs(&d.vector, x)?,
        })
    }

    /// Pressure at level `m` and the increment `p^m − p^{m−1}`.
    pub fn step_pressure(&mut self, u_hat: &Stamped, p_prev: &FieldVector) -> Result<(FieldVector, FieldVector)> {
        self.record("D", "intermediate velocity", u_hat.level);
        let d = self.disc();
        let rhs: Vec<f64> = self.b.mul_vec(u_hat.field.coeffs()).iter().map(|v| -v / self.cfg.dt).collect();
        let (x, report) = self.pressure.solve(&rhs, 0.0)?;
        let dp = FieldVector::from_coeffs(&d.pressure, x)?.enforce_zero_mean(&d.mesh)?;
        let mut p = p_prev.clone();
        p.axpy(1.0, &dp);
        let p = p.enforce_zero_mean(&d.mesh)?;
        self.reports.push(("pressure", report));
        Ok((p, dp))
    }

    /// `u^m = û^m + Δt M⁻¹ Dᵀ (p^m − p^{m−1})`, solved element by element.
    pub fn step_velocity_correction(&self, u_hat: &FieldVector, dp: &FieldVector) -> Result<FieldVector> {
        let d = self.disc();
        let load = self.b.transpose_mul_vec(dp.coeffs());
        let inc = self.assembler.apply_mass_inverse(SpaceKind::Vector, &load);
        let mut u = u_hat.clone();
        for (ui, di) in u.coeffs_mut().iter_mut().zip(&inc) {
            *ui += self.cfg.dt * di;
        }
        FieldVector::from_coeffs(&d.vector, u.into_coeffs())
    }

    /// One full step. On error the caller's state is untouched.
    pub fn advance(&mut self, prev: &SystemState) -> Result<SystemState> {
        self.reports.clear();
        if let Some(t) = &mut self.trace {
            t.clear();
        }
        let phi = self.step_potential(prev)?;
        let [c1, c2] = self.step_concentrations(prev, &phi)?;
        let u_hat = self.step_intermediate_velocity(prev, &phi)?;
        let (p, dp) = self.step_pressure(&u_hat, &prev.p)?;
        let u = self.step_velocity_correction(&u_hat.field, &dp)?;
        Ok(SystemState {
            step: prev.step + 1,
            t: prev.t + self.cfg.dt,
            phi: phi.field,
            c: [c1.field, c2.field],
            u_hat: u_hat.field,
            u,
            p,
            m0: prev.m0,
        })
    }

    /// Integral constraints the solves use, exposed for diagnostics.
    pub fn dof_integrals(&self, kind: SpaceKind) -> &[f64] {
        match kind {
            SpaceKind::Pressure => &self.pressure_integrals,
            _ => &self.scalar_integrals,
        }
    }
}

fn add(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
