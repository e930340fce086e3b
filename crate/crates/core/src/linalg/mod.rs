//! Sparse matrices and the linear solvers behind each substep.

mod constrained;
mod direct;
mod iterative;
mod sparse;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use constrained::ConstrainedSystem;
pub use direct::{LuFactorization, DEFAULT_TOLERANCE};
pub use iterative::{cg, gmres, IterativeOptions};
pub use sparse::{SparseMatrix, TripletBuilder};

use crate::error::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Sparse LU with partial pivoting.
    #[default]
    Direct,
    /// Jacobi-preconditioned CG for symmetric systems, GMRES otherwise.
    Iterative,
}

/// Outcome of one linear solve.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSolveReport {
    pub method: &'static str,
    pub size: usize,
    pub iterations: usize,
    /// `‖b − A x‖ / ‖b‖` (absolute when `b = 0`).
    pub relative_residual: f64,
    pub converged: bool,
}

impl fmt::Display for LinearSolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} on n={}: {} iterations, relative residual {:.3e}{}",
            self.method,
            self.size,
            self.iterations,
            self.relative_residual,
            if self.converged { "" } else { " (not converged)" }
        )
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let nb = norm(b);
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

/// Solves `A x = b` once. Symmetric systems go to CG in iterative mode.
pub fn solve(a: &SparseMatrix, b: &[f64], kind: SolverKind, symmetric: bool) -> Result<(Vec<f64>, LinearSolveReport)> {
    match kind {
        SolverKind::Direct => LuFactorization::new(a)?.solve(b),
        SolverKind::Iterative => {
            let opts = IterativeOptions::default();
            if symmetric {
                cg(a, b, None, &opts)
            } else {
                gmres(a, b, None, &opts)
            }
        }
    }
}

/// A system matrix prepared once and solved against many right-hand sides:
/// the LU factors in direct mode, the matrix alone in iterative mode.
#[derive(Debug)]
pub struct PreparedSystem {
    kind: SolverKind,
    symmetric: bool,
    tolerance: f64,
    matrix: SparseMatrix,
    lu: Option<LuFactorization>,
}

impl PreparedSystem {
    /// `symmetric` selects CG over GMRES in iterative mode and must only be
    /// set for positive definite matrices.
    pub fn new(matrix: SparseMatrix, kind: SolverKind, symmetric: bool, tolerance: f64) -> Result<Self> {
        let lu = match kind {
            SolverKind::Direct => Some(LuFactorization::new(&matrix)?),
            SolverKind::Iterative => None,
        };
        Ok(PreparedSystem {
            kind,
            symmetric,
            tolerance,
            matrix,
            lu,
        })
    }

    /// Replaces the matrix, reusing the symbolic factorization when possible.
    pub fn update(&mut self, matrix: SparseMatrix) -> Result<()> {
        if let Some(lu) = &mut self.lu {
            lu.refactor(&matrix)?;
        }
        self.matrix = matrix;
        Ok(())
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
        match (&self.lu, self.kind) {
            (Some(lu), _) => lu.solve_with_tolerance(b, self.tolerance),
            (None, _) => {
                let opts = IterativeOptions {
                    tolerance: self.tolerance / 100.0,
                    ..IterativeOptions::default()
                };
                if self.symmetric {
                    cg(&self.matrix, b, None, &opts)
                } else {
                    gmres(&self.matrix, b, None, &opts)
                }
            }
        }
    }
}
