//! TOML run configuration.
//!
//! A configuration either names a preset and overrides parts of it, or spells
//! out a full scenario. Unknown keys are rejected.
//!
//! ```toml
//! preset = "reservoir"
//! t_final = 0.1
//!
//! [params]
//! sigma = 20.0
//!
//! [output]
//! dir = "out/reservoir"
//! every = 5
//!
//! [solver]
//! kind = "direct"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::forms::ConvectionBoundary;
use crate::linalg::SolverKind;
use crate::mms::{preset, BoundaryMode, InitialCondition, ScenarioPreset};
use crate::run::{OutputPlan, RunOptions};
use crate::space::QuadratureSet;
use crate::stepper::PressureOperator;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub sigma: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub kappa: Option<[f64; 2]>,
    pub beta: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Defaults to `out/<preset name>`.
    pub dir: Option<PathBuf>,
    /// Steps between field snapshots; defaults to the preset cadence.
    pub every: Option<usize>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub kind: SolverKind,
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub pressure_operator: PressureOperator,
    /// Exactness degree of the element rule.
    pub quadrature_element: Option<usize>,
    /// Exactness degree of the edge rule.
    pub quadrature_edge: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub name: Option<String>,
    pub extents: Option<[f64; 2]>,
    pub cells: Option<[usize; 2]>,
    pub k: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub initial: Option<InitialCondition>,
    pub boundary: Option<BoundaryMode>,
    pub convection: Option<ConvectionBoundary>,
    pub manufactured_sources: Option<bool>,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// Everything a run needs, after validation.
#[derive(Clone, Debug)]
pub struct ResolvedRun {
    pub scenario: ScenarioPreset,
    pub options: RunOptions,
    pub plan: OutputPlan,
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("'{key}' is required when no preset is given")))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies the overrides to the preset (if any) and validates the result.
    pub fn resolve(self) -> Result<ResolvedRun> {
        let mut s = match &self.preset {
            Some(name) => preset(name).map_err(|e| Error::Config(e.to_string()))?,
            None => ScenarioPreset {
                name: self.name.clone().unwrap_or_else(|| "custom".to_string()),
                extents: required(self.extents, "extents")?,
                cells: required(self.cells, "cells")?,
                k: required(self.k, "k")?,
                params: Default::default(),
                dt: required(self.dt, "dt")?,
                t_final: required(self.t_final, "t_final")?,
                initial: required(self.initial.clone(), "initial")?,
                boundary: BoundaryMode::default(),
                convection: ConvectionBoundary::default(),
                manufactured_sources: false,
                output_every: 0,
            },
        };
        if let Some(v) = self.name {
            s.name = v;
        }
        if let Some(v) = self.extents {
            s.extents = v;
        }
        if let Some(v) = self.cells {
            s.cells = v;
        }
        if let Some(v) = self.k {
            s.k = v;
        }
        if let Some(v) = self.dt {
            s.dt = v;
        }
        if let Some(v) = self.t_final {
            s.t_final = v;
        }
        if let Some(v) = self.initial {
            s.initial = v;
        }
        if let Some(v) = self.boundary {
            s.boundary = v;
        }
        if let Some(v) = self.convection {
            s.convection = v;
        }
        if let Some(v) = self.manufactured_sources {
            s.manufactured_sources = v;
        }
        let p = &mut s.params;
        let o = self.params;
        p.sigma = o.sigma.unwrap_or(p.sigma);
        p.mu = o.mu.unwrap_or(p.mu);
        p.nu = o.nu.unwrap_or(p.nu);
        p.kappa = o.kappa.unwrap_or(p.kappa);
        p.beta = o.beta.unwrap_or(p.beta);

        if !(1..=2).contains(&s.k) {
            return Err(Error::Config(format!("k must be 1 or 2, got {}", s.k)));
        }
        if s.cells.contains(&0) {
            return Err(Error::Config("cells must be positive".into()));
        }
        positive("extents[0]", s.extents[0])?;
        positive("extents[1]", s.extents[1])?;
        positive("dt", s.dt)?;
        positive("t_final", s.t_final)?;
        s.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        if s.manufactured_sources && s.extents != [1.0, 1.0] {
            return Err(Error::Config("manufactured sources need the unit square".into()));
        }
        if let Some(t) = self.solver.tolerance {
            positive("solver.tolerance", t)?;
        }
        if self.output.snapshot_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("snapshot times must be non-negative".into()));
        }

        let quadrature = match (self.solver.quadrature_element, self.solver.quadrature_edge) {
            (None, None) => None,
            (e, g) => {
                let base = QuadratureSet::for_degree(s.k);
                Some(QuadratureSet::new(
                    e.unwrap_or(base.element.degree),
                    g.unwrap_or(base.edge.degree),
                ))
            }
        };
        let plan = OutputPlan {
            dir: self.output.dir.unwrap_or_else(|| Path::new("out").join(&s.name)),
            every: self.output.every.unwrap_or(s.output_every),
            times: self.output.snapshot_times,
        };
        s.output_every = plan.every;
        Ok(ResolvedRun {
            options: RunOptions {
                solver: self.solver.kind,
                tolerance: self.solver.tolerance,
                quadrature,
                pressure_operator: self.solver.pressure_operator,
            },
            scenario: s,
            plan,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_with_overrides() {
        let r = RunConfig::parse(
            "preset = \"reservoir\"\nt_final = 0.1\n[params]\nsigma = 20.0\n[output]\ndir = \"o\"\nevery = 5\n",
        )
        .unwrap()
        .resolve()
        .unwrap();
        assert_eq!(r.scenario.t_final, 0.1);
        assert_eq!(r.scenario.params.sigma, 20.0);
        assert_eq!(r.scenario.params.nu, 0.08);
        assert_eq!(r.plan.every, 5);
        assert_eq!(r.plan.dir, PathBuf::from("o"));
        assert!(r.options.quadrature.is_none());
    }

    #[test]
    fn explicit_scenario() {
        let text = r#"
            name = "quiet"
            extents = [1.0, 1.0]
            cells = [2, 2]
            k = 1
            dt = 0.01
            t_final = 0.05
            initial = { kind = "uniform", c1 = 0.0, c2 = 0.0 }
            [solver]
            quadrature_element = 8
        "#;
        let r = RunConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(r.scenario.name, "quiet");
        assert_eq!(r.plan.dir, Path::new("out").join("quiet"));
        let q = r.options.quadrature.unwrap();
        assert_eq!(q.element.degree, 8);
        assert_eq!(q.edge.degree, QuadratureSet::for_degree(1).edge.degree);
    }

    #[test]
    fn rejections() {
        let bad = [
            "preset = \"decay\"\ntypo = 1\n",
            "preset = \"decay\"\nk = 3\n",
            "preset = \"decay\"\ndt = -1.0\n",
            "preset = \"decay\"\n[params]\nnu = 0.0\n",
            "preset = \"nowhere\"\n",
            "k = 1\n",
            "preset = \"decay\"\n[solver]\nkind = \"magic\"\n",
        ];
        for text in bad {
            let r = RunConfig::parse(text).and_then(RunConfig::resolve);
            assert!(matches!(r, Err(Error::Config(_))), "{text}");
        }
    }
}
