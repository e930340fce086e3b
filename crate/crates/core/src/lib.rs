//! Discontinuous Galerkin solver for the Poisson-Nernst-Planck-Navier-Stokes
//! system on rectangles meshed by triangles.
//!
//! Each time step solves, in order, the potential, the two ion
//! concentrations, an intermediate velocity, a pressure increment and a
//! velocity correction. Every solve is linear; the couplings are lagged.
//!
//! Entry points are [`Simulation`] for stepping a [`ScenarioPreset`],
//! [`run::run_scenario`] for a full run with file output and
//! [`run::convergence_study`] for manufactured-solution refinement studies.

#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod forms;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod oracle;
pub mod output;
pub mod run;
pub mod space;
pub mod stepper;

pub use config::{ResolvedRun, RunConfig};
pub use diagnostics::{DiagnosticsRecord, Energies, ErrorBundle};
pub use error::{Error, Result};
pub use forms::{Assembler, ConvectionBoundary, FormParams, PotentialBoundary};
pub use linalg::SolverKind;
pub use mesh::{BoundaryTag, TriMesh};
pub use mms::{preset, BoundaryMode, InitialCondition, ManufacturedSolution, ScenarioPreset, PRESET_NAMES};
pub use run::{convergence_study, run_scenario, OutputPlan, RunOptions, RunSummary, Simulation, StudyMode, StudyResult};
pub use space::{BrokenSpace, Discretization, FieldVector};
pub use stepper::{PressureOperator, SchemeConfig, Stepper, SystemState};
