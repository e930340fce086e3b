//! Time loop, output cadence and convergence studies.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsRecord, ErrorBundle};
use crate::error::{Error, Result};
use crate::forms::Assembler;
use crate::linalg::SolverKind;
use crate::mesh::TriMesh;
use crate::mms::{preset, ManufacturedForcing, ManufacturedSolution, ScenarioPreset};
use crate::output::{self, CsvWriter};
use crate::space::{BasisKind, Discretization, QuadratureSet};
use crate::stepper::{PressureOperator, SchemeConfig, Stepper, SystemState};

/// Numerical options that are not part of the physical scenario.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub solver: SolverKind,
    /// Overrides the default linear-solve tolerance.
    pub tolerance: Option<f64>,
    /// Overrides the default quadrature.
    pub quadrature: Option<QuadratureSet>,
    pub pressure_operator: PressureOperator,
}

/// A scenario being stepped, with its diagnostics history.
pub struct Simulation {
    disc: Arc<Discretization>,
    stepper: Stepper,
    state: SystemState,
    initial: DiagnosticsRecord,
    exact: Option<ManufacturedSolution>,
    n_steps: usize,
}

impl Simulation {
    pub fn new(scenario: &ScenarioPreset, options: &RunOptions) -> Result<Self> {
        if !(1..=2).contains(&scenario.k) {
            return Err(Error::invalid(format!("polynomial degree must be 1 or 2, got {}", scenario.k)));
        }
        let mesh = TriMesh::rectangle(
            scenario.extents[0],
            scenario.extents[1],
            scenario.cells[0],
            scenario.cells[1],
        )?;
        let disc = Arc::new(Discretization::with_options(
            mesh,
            scenario.k,
            BasisKind::Orthonormal,
            options.quadrature.clone(),
        )?);
        let mut cfg = SchemeConfig::new(scenario.dt, scenario.t_final, scenario.params.clone());
        cfg.boundary = scenario.boundary.clone();
        cfg.convection = scenario.convection;
        cfg.solver = options.solver;
        cfg.pressure_operator = options.pressure_operator;
        if let Some(tol) = options.tolerance {
            cfg.tolerance = tol;
        }
        if scenario.manufactured_sources {
            cfg.sources = Some(Arc::new(ManufacturedForcing {
                params: scenario.params.clone(),
            }));
        }
        let n_steps = cfg.n_steps();
        let mut stepper = Stepper::new(Arc::new(Assembler::new(disc.clone())), cfg)?;
        let state = stepper.initialize(&scenario.initial)?;
        let exact = scenario.manufactured_sources.then_some(ManufacturedSolution);
        let initial = DiagnosticsRecord::compute(&disc, &state, &scenario.params, None, exact.as_ref());
        Ok(Simulation {
            disc,
            stepper,
            state,
            initial,
            exact,
            n_steps,
        })
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn stepper(&mut self) -> &mut Stepper {
        &mut self.stepper
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    /// Diagnostics of the projected initial data.
    pub fn initial_record(&self) -> &DiagnosticsRecord {
        &self.initial
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.n_steps
    }

    /// Advances one step and returns the diagnostics of the new level.
    pub fn step(&mut self) -> Result<DiagnosticsRecord> {
        self.state = self.stepper.advance(&self.state)?;
        Ok(DiagnosticsRecord::compute(
            &self.disc,
            &self.state,
            &self.stepper.config().params,
            Some(self.initial.mass),
            self.exact.as_ref(),
        ))
    }

    /// Steps to the final time, calling `observe` after every step.
    pub fn run_with(&mut self, mut observe: impl FnMut(&Self, &DiagnosticsRecord) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            let r = self.step()?;
            observe(self, &r)?;
        }
        Ok(())
    }

    /// Steps to the final time and returns every record after the initial one.
    pub fn run(&mut self) -> Result<Vec<DiagnosticsRecord>> {
        let mut out = Vec::with_capacity(self.n_steps);
        self.run_with(|_, r| {
            out.push(r.clone());
            Ok(())
        })?;
        Ok(out)
    }
}

/// Where and how often a run writes output.
#[derive(Clone, Debug, Default)]
pub struct OutputPlan {
    pub dir: PathBuf,
    /// Steps between field snapshots; 0 disables the cadence.
    pub every: usize,
    /// Extra snapshot times, each mapped to the nearest step.
    pub times: Vec<f64>,
}

impl OutputPlan {
    fn wants(&self, step: usize, dt: f64) -> bool {
        (self.every > 0 && step % self.every == 0) || self.times.iter().any(|t| (t / dt).round() as usize == step)
    }
}

/// Summary of a finished run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub steps: usize,
    pub csv: PathBuf,
    pub snapshots: Vec<usize>,
    pub last: DiagnosticsRecord,
}

/// Runs a scenario, writing `diagnostics.csv` (one row per step) and VTK
/// snapshots to `plan.dir`.
pub fn run_scenario(scenario: &ScenarioPreset, options: &RunOptions, plan: &OutputPlan) -> Result<RunSummary> {
    let mut sim = Simulation::new(scenario, options)?;
    let csv_path = plan.dir.join("diagnostics.csv");
    let mut csv = CsvWriter::create(&csv_path, scenario.manufactured_sources)?;
    let mut snapshots = Vec::new();
    let mut last = sim.initial_record().clone();
    let dt = scenario.dt;
    sim.run_with(|s, r| {
        csv.write(r)?;
        if plan.wants(r.step, dt) {
            output::write_fields(s.discretization(), s.state(), &plan.dir, r.step)?;
            snapshots.push(r.step);
        }
        last = r.clone();
        Ok(())
    })?;
    csv.finish()?;
    Ok(RunSummary {
        steps: sim.state().step,
        csv: csv_path,
        snapshots,
        last,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyMode {
    /// Mesh refinement with `Δt = 0.1 h^{k+1}`.
    SpatialL2,
    /// Mesh refinement with `Δt = 0.1 h^k`.
    SpatialH1,
    /// Time step halving with the mesh refined alongside.
    Temporal,
}

impl StudyMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spatial-l2" => Ok(StudyMode::SpatialL2),
            "spatial-h1" => Ok(StudyMode::SpatialH1),
            "temporal" => Ok(StudyMode::Temporal),
            other => Err(Error::Config(format!(
                "unknown study mode '{other}' (expected spatial-l2, spatial-h1 or temporal)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyLevel {
    pub cells: usize,
    /// Cell width `1/n`.
    pub h: f64,
    pub dt: f64,
    pub errors: ErrorBundle,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub mode: StudyMode,
    pub k: usize,
    pub levels: Vec<StudyLevel>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

impl StudyResult {
    /// Refinement parameter: `h` for spatial studies, `Δt` for temporal.
    pub fn abscissa(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| if self.mode == StudyMode::Temporal { l.dt } else { l.h })
            .collect()
    }

    /// Fitted slope of every error column, in [`ErrorBundle::COLUMNS`] order.
    pub fn slopes(&self) -> [f64; 9] {
        let x = self.abscissa();
        std::array::from_fn(|j| {
            let y: Vec<f64> = self.levels.iter().map(|l| l.errors.values()[j]).collect();
            fitted_slope(&x, &y)
        })
    }

    /// Rates between consecutive levels, one row per refinement.
    pub fn pairwise_rates(&self) -> Vec<[f64; 9]> {
        let x = self.abscissa();
        self.levels
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (a, b) = (w[0].errors.values(), w[1].errors.values());
                std::array::from_fn(|j| (a[j] / b[j]).ln() / (x[i] / x[i + 1]).ln())
            })
            .collect()
    }

    /// Table with one row per level followed by the fitted slopes. Each
    /// level after the first also carries the rates against its predecessor.
    pub fn to_csv(&self) -> String {
        let cols = ErrorBundle::COLUMNS;
        let rates: Vec<String> = cols.iter().map(|c| format!("rate_{c}")).collect();
        let mut s = format!("cells,h,dt,{},{}\n", cols.join(","), rates.join(","));
        let pairwise = self.pairwise_rates();
        for (i, l) in self.levels.iter().enumerate() {
            let vals: Vec<String> = l.errors.values().iter().map(|v| format!("{v:.6e}")).collect();
            let r: Vec<String> = match i.checked_sub(1) {
                Some(j) => pairwise[j].iter().map(|v| format!("{v:.4}")).collect(),
                None => vec![String::new(); cols.len()],
            };
            s += &format!("{},{:.6e},{:.6e},{},{}\n", l.cells, l.h, l.dt, vals.join(","), r.join(","));
        }
        let slopes: Vec<String> = self.slopes().iter().map(|v| format!("{v:.4}")).collect();
        s += &format!("slope,,,{},{}\n", slopes.join(","), vec![""; cols.len()].join(","));
        s
    }
}

/// Mesh and time step of level `i` (1-based) of a study.
pub fn study_level(mode: StudyMode, k: usize, i: usize, base_cells: usize) -> (usize, f64) {
    match mode {
        StudyMode::SpatialL2 | StudyMode::SpatialH1 => {
            let n = 1usize << i;
            let p = if mode == StudyMode::SpatialL2 { k + 1 } else { k };
            (n, 0.1 * (n as f64).powi(-(p as i32)))
        }
        StudyMode::Temporal => {
            let n = (base_cells as f64 * 2f64.powf(i as f64 / (k + 1) as f64)).round() as usize;
            (n, 0.1 * 0.5f64.powi(i as i32))
        }
    }
}

/// Runs the manufactured problem at `levels` refinements and collects the
/// errors at `T = 0.1`. `base_cells` is the coarsest mesh of a temporal study.
pub fn convergence_study(
    mode: StudyMode,
    k: usize,
    levels: usize,
    base_cells: usize,
    options: &RunOptions,
) -> Result<StudyResult> {
    if levels < 2 {
        return Err(Error::invalid("a convergence study needs at least two levels"));
    }
    let mut base = preset(if k == 1 { "mms-k1" } else { "mms-k2" })?;
    base.k = k;
    let mut out = Vec::with_capacity(levels);
    for i in 1..=levels {
        let (n, dt) = study_level(mode, k, i, base_cells);
        let scenario = ScenarioPreset {
            cells: [n, n],
            dt,
            ..base.clone()
        };
        let mut sim = Simulation::new(&scenario, options)?;
        let last = sim.run()?.pop().ok_or_else(|| Error::invalid("study level took no steps"))?;
        out.push(StudyLevel {
            cells: n,
            h: 1.0 / n as f64,
            dt,
            errors: last.errors.expect("manufactured runs report errors"),
        });
    }
    Ok(StudyResult { mode, k, levels: out })
}

/// Writes a study table to `path`.
pub fn write_study(result: &StudyResult, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, result.to_csv()).map_err(|e| Error::io(path, e))
}
