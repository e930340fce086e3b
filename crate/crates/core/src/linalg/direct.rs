use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SparseRowMatRef, SymbolicSparseRowMatRef};

use super::{relative_residual, LinearSolveReport, SparseMatrix};
use crate::error::{Error, Result};

/// Relative residual a direct solve must reach, after refinement.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Iterative-refinement sweeps tried before giving up on the tolerance.
const REFINEMENT_SWEEPS: usize = 3;

/// Cached sparse LU factorization. Refactoring a matrix with the same
/// pattern reuses the symbolic analysis.
pub struct LuFactorization {
    matrix: SparseMatrix,
    symbolic: SymbolicLu<usize>,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for LuFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactorization")
            .field("n", &self.matrix.nrows())
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

fn failure(reason: impl Into<String>, n: usize) -> Error {
    Error::SolverFailure {
        reason: reason.into(),
        report: LinearSolveReport {
            method: "sparse LU",
            size: n,
            iterations: 0,
            relative_residual: f64::NAN,
            converged: false,
        },
    }
}

fn to_csc(a: &SparseMatrix) -> Result<SparseColMat<usize, f64>> {
    let n = a.nrows();
    let sym = SymbolicSparseRowMatRef::new_checked(a.nrows(), a.ncols(), a.row_ptr(), None, a.col_idx());
    SparseRowMatRef::new(sym, a.values())
        .to_col_major()
        .map_err(|e| failure(format!("conversion to column-major failed: {e:?}"), n))
}

impl LuFactorization {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::invalid("LU needs a square matrix"));
        }
        if a.values().iter().any(|v| !v.is_finite()) {
            return Err(failure("matrix has non-finite entries", n));
        }
        let csc = to_csc(a)?;
        let symbolic = SymbolicLu::try_new(csc.symbolic())
            .map_err(|e| failure(format!("symbolic LU failed: {e:?}"), n))?;
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), csc.as_ref())
            .map_err(|e| failure(format!("numeric LU failed: {e:?}"), n))?;
        Ok(LuFactorization {
            matrix: a.clone(),
            symbolic,
            lu,
        })
    }

    /// Refactors in place; reuses the symbolic analysis when the pattern matches.
    pub fn refactor(&mut self, a: &SparseMatrix) -> Result<()> {
        if !self.matrix.same_pattern(a) {
            *self = Self::new(a)?;
            return Ok(());
        }
        let n = a.nrows();
        if a.values().iter().any(|v| !v.is_finite()) {
            return Err(failure("matrix has non-finite entries", n));
        }
        let csc = to_csc(a)?;
        self.lu = Lu::try_new_with_symbolic(self.symbolic.clone(), csc.as_ref())
            .map_err(|e| failure(format!("numeric LU failed: {e:?}"), n))?;
        self.matrix = a.clone();
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Solves with a residual check against [`DEFAULT_TOLERANCE`].
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
        self.solve_with_tolerance(b, DEFAULT_TOLERANCE)
    }

    /// Solves, then applies a few sweeps of iterative refinement while the
    /// relative residual is above `tol`. Failing to reach it is an error.
    pub fn solve_with_tolerance(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, LinearSolveReport)> {
        let n = self.size();
        if b.len() != n {
            return Err(Error::invalid(format!("right-hand side has length {}, expected {n}", b.len())));
        }
        let mut x = b.to_vec();
        self.substitute(&mut x);
        let mut res = relative_residual(&self.matrix, &x, b);
        let mut sweeps = 0;
        while res.is_finite() && res > tol && sweeps < REFINEMENT_SWEEPS {
            let ax = self.matrix.mul_vec(&x);
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            self.substitute(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
            res = relative_residual(&self.matrix, &x, b);
            sweeps += 1;
        }
        let report = LinearSolveReport {
            method: "sparse LU",
            size: n,
            iterations: 1 + sweeps,
            relative_residual: res,
            converged: res.is_finite() && res <= tol,
        };
        if !report.converged || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure {
                reason: "direct solve produced a large or non-finite residual".into(),
                report,
            });
        }
        Ok((x, report))
    }

    fn substitute(&self, x: &mut [f64]) {
        let n = x.len();
        self.lu.solve_in_place(faer::MatMut::from_column_major_slice_mut(x, n, 1));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize, shift: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn solves_and_refactors() {
        let a = laplacian(50, 0.0);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x_true);
        let mut lu = LuFactorization::new(&a).unwrap();
        let (x, rep) = lu.solve(&b).unwrap();
        assert!(rep.converged && rep.relative_residual < 1e-12);
        assert!(x.iter().zip(&x_true).all(|(p, q)| (p - q).abs() < 1e-9));

        let a2 = laplacian(50, 1.0);
        lu.refactor(&a2).unwrap();
        let b2 = a2.mul_vec(&x_true);
        let (x2, _) = lu.solve(&b2).unwrap();
        assert!(x2.iter().zip(&x_true).all(|(p, q)| (p - q).abs() < 1e-10));
    }

    #[test]
    fn bordered_singular_system_is_solvable() {
        // pure Neumann 1D Laplacian is singular; one mean constraint fixes it
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n {
            let d = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            t.push((i, i, d));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let big = a.bordered(&vec![1.0; n]).unwrap();
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64 - 9.5) / 10.0).collect();
        b.push(0.0);
        let (x, _) = LuFactorization::new(&big).unwrap().solve(&b).unwrap();
        assert!(x[..n].iter().sum::<f64>().abs() < 1e-10);
        assert!(x[n].abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0)]).unwrap();
        assert!(LuFactorization::new(&a).is_err());
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, f64::NAN), (1, 1, 1.0)]).unwrap();
        assert!(matches!(LuFactorization::new(&a), Err(Error::SolverFailure { .. })));
        let a = laplacian(3, 0.0);
        assert!(LuFactorization::new(&a).unwrap().solve(&[1.0]).is_err());
    }
}
