//! Systems with one linear side constraint, solved without forming the
//! bordered matrix. A dense border row and column would destroy the
//! sparsity of the LU factors.

use super::{LinearSolveReport, PreparedSystem, SolverKind, SparseMatrix};
use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug)]
enum Elimination {
    /// `A` invertible; `z = A⁻¹c`.
    Regular { z: Vec<f64>, cz: f64 },
    /// `A` symmetric and singular with `A k = 0`; dof `pin` is fixed to zero.
    Singular { kernel: Vec<f64>, pin: usize, kc: f64, ck: f64 },
}

/// Solves `A x + λ c = b`, `cᵀx = g`.
///
/// For an invertible `A` the multiplier is eliminated by a Schur complement.
/// For a symmetric `A` with a one-dimensional kernel the right-hand side is
/// first made compatible, one kernel dof is pinned, and the kernel component
/// is then chosen to meet the constraint. Both give the bordered solution.
#[derive(Debug)]
pub struct ConstrainedSystem {
    inner: PreparedSystem,
    c: Vec<f64>,
    elimination: Elimination,
}

impl ConstrainedSystem {
    pub fn regular(a: SparseMatrix, c: Vec<f64>, kind: SolverKind, symmetric: bool, tol: f64) -> Result<Self> {
        check(&a, &c)?;
        let inner = PreparedSystem::new(a, kind, symmetric, tol)?;
        let (z, _) = inner.solve(&c)?;
        let cz = dot(&c, &z);
        if cz == 0.0 {
            return Err(Error::invalid("constraint is degenerate for this matrix"));
        }
        Ok(ConstrainedSystem {
            inner,
            c,
            elimination: Elimination::Regular { z, cz },
        })
    }

    /// `kernel` must span the null space of the symmetric matrix `a`.
    pub fn singular(
        a: SparseMatrix,
        c: Vec<f64>,
        kernel: Vec<f64>,
        kind: SolverKind,
        symmetric: bool,
        tol: f64,
    ) -> Result<Self> {
        check(&a, &c)?;
        if kernel.len() != c.len() {
            return Err(Error::invalid("kernel length does not match the system"));
        }
        let pin = kernel
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::invalid("empty system"))?;
        let (kc, ck) = (dot(&kernel, &c), dot(&c, &kernel));
        if kc == 0.0 {
            return Err(Error::invalid("constraint does not see the kernel"));
        }
        let inner = PreparedSystem::new(a.pinned(pin), kind, symmetric, tol)?;
        Ok(ConstrainedSystem {
            inner,
            c,
            elimination: Elimination::Singular { kernel, pin, kc, ck },
        })
    }

    /// Replaces `A`, keeping the constraint.
    pub fn update(&mut self, a: SparseMatrix) -> Result<()> {
        check(&a, &self.c)?;
        match &mut self.elimination {
            Elimination::Regular { z, cz } => {
                self.inner.update(a)?;
                *z = self.inner.solve(&self.c)?.0;
                *cz = dot(&self.c, z);
            }
            Elimination::Singular { pin, .. } => self.inner.update(a.pinned(*pin))?,
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64], g: f64) -> Result<(Vec<f64>, LinearSolveReport)> {
        match &self.elimination {
            Elimination::Regular { z, cz } => {
                let (mut x, report) = self.inner.solve(b)?;
                let lambda = (dot(&self.c, &x) - g) / cz;
                for (xi, zi) in x.iter_mut().zip(z) {
                    *xi -= lambda * zi;
                }
                Ok((x, report))
            }
            Elimination::Singular { kernel, pin, kc, ck } => {
                let lambda = dot(kernel, b) / kc;
                let mut rhs: Vec<f64> = b.iter().zip(&self.c).map(|(bi, ci)| bi - lambda * ci).collect();
                rhs[*pin] = 0.0;
                let (mut x, report) = self.inner.solve(&rhs)?;
                let alpha = (g - dot(&self.c, &x)) / ck;
                for (xi, ki) in x.iter_mut().zip(kernel) {
                    *xi += alpha * ki;
                }
                Ok((x, report))
            }
        }
    }
}

fn check(a: &SparseMatrix, c: &[f64]) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() != c.len() {
        return Err(Error::invalid("constrained system needs a square matrix and a matching constraint"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neumann_1d(n: usize, shift: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            let deg = if i == 0 || i + 1 == n { 1.0 } else { 2.0 };
            t.push((i, i, deg + shift));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn bordered_reference(a: &SparseMatrix, c: &[f64], b: &[f64], g: f64) -> Vec<f64> {
        let big = a.bordered(c).unwrap();
        let mut rhs = b.to_vec();
        rhs.push(g);
        let x = big.to_dense().lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        x.as_slice()[..c.len()].to_vec()
    }

    #[test]
    fn both_eliminations_match_the_bordered_solution() {
        let n = 30;
        let c: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).cos()).collect();
        for kind in [SolverKind::Direct, SolverKind::Iterative] {
            let reg = neumann_1d(n, 0.5);
            let expect = bordered_reference(&reg, &c, &b, 0.7);
            let sys = ConstrainedSystem::regular(reg, c.clone(), kind, true, 1e-12).unwrap();
            let (x, _) = sys.solve(&b, 0.7).unwrap();
            assert!(x.iter().zip(&expect).all(|(p, q)| (p - q).abs() < 1e-9));

            let sing = neumann_1d(n, 0.0);
            let expect = bordered_reference(&sing, &c, &b, -0.2);
            let sys = ConstrainedSystem::singular(sing, c.clone(), vec![1.0; n], kind, true, 1e-12).unwrap();
            let (x, _) = sys.solve(&b, -0.2).unwrap();
            assert!(x.iter().zip(&expect).all(|(p, q)| (p - q).abs() < 1e-9));
        }
    }

    #[test]
    fn update_recomputes_the_elimination() {
        let n = 12;
        let c = vec![1.0; n];
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut sys = ConstrainedSystem::regular(neumann_1d(n, 1.0), c.clone(), SolverKind::Direct, true, 1e-12).unwrap();
        sys.update(neumann_1d(n, 2.0)).unwrap();
        let (x, _) = sys.solve(&b, 1.0).unwrap();
        let expect = bordered_reference(&neumann_1d(n, 2.0), &c, &b, 1.0);
        assert!(x.iter().zip(&expect).all(|(p, q)| (p - q).abs() < 1e-10));
    }
}
