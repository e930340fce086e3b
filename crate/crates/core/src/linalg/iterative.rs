use super::{norm, relative_residual, LinearSolveReport, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct IterativeOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// GMRES restart length.
    pub restart: usize,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        IterativeOptions {
            tolerance: 1e-12,
            max_iterations: 20_000,
            restart: 200,
        }
    }
}

fn jacobi(a: &SparseMatrix) -> Vec<f64> {
    a.diagonal_values()
        .into_iter()
        .map(|d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn finish(
    method: &'static str,
    a: &SparseMatrix,
    x: Vec<f64>,
    b: &[f64],
    iterations: usize,
    tol: f64,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let res = relative_residual(a, &x, b);
    // allow for the gap between recursive and true residual
    let report = LinearSolveReport {
        method,
        size: a.nrows(),
        iterations,
        relative_residual: res,
        converged: res.is_finite() && res <= 100.0 * tol,
    };
    if report.converged {
        Ok((x, report))
    } else {
        Err(Error::SolverFailure {
            reason: format!("{method} did not reach the tolerance"),
            report,
        })
    }
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite `A`.
pub fn cg(a: &SparseMatrix, b: &[f64], x0: Option<&[f64]>, opts: &IterativeOptions) -> Result<(Vec<f64>, LinearSolveReport)> {
    let n = a.nrows();
    if b.len() != n || a.ncols() != n {
        return Err(Error::invalid("CG dimension mismatch"));
    }
    let dinv = jacobi(a);
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let ax = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let nb = norm(b).max(f64::MIN_POSITIVE);
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(p, d)| p * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    while it < opts.max_iterations && norm(&r) / nb > opts.tolerance {
        a.mul_vec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
    finish("CG", a, x, b, it, opts.tolerance)
}

/// Restarted GMRES with right Jacobi preconditioning.
pub fn gmres(a: &SparseMatrix, b: &[f64], x0: Option<&[f64]>, opts: &IterativeOptions) -> Result<(Vec<f64>, LinearSolveReport)> {
    let n = a.nrows();
    if b.len() != n || a.ncols() != n {
        return Err(Error::invalid("GMRES dimension mismatch"));
    }
    let dinv = jacobi(a);
    let m = opts.restart.max(1).min(n.max(1));
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let nb = norm(b).max(f64::MIN_POSITIVE);
    let mut total = 0;
    let mut w = vec![0.0; n];
    let mut zt = vec![0.0; n];
    loop {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        if beta / nb <= opts.tolerance || total >= opts.max_iterations {
            break;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut j = 0;
        while j < m && total < opts.max_iterations {
            for i in 0..n {
                zt[i] = v[j][i] * dinv[i];
            }
            a.mul_vec_into(&zt, &mut w);
            for (i, vi) in v.iter().enumerate() {
                h[i][j] = dot(&w, vi);
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= h[i][j] * vk;
                }
            }
            h[j + 1][j] = norm(&w);
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            if d == 0.0 {
                break;
            }
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            let hn = h[j + 1][j];
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total += 1;
            j += 1;
            if g[j].abs() / nb <= opts.tolerance || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wk| wk / hn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; j];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..j).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yk * v[k][i] * dinv[i];
            }
        }
        if j == 0 {
            break;
        }
    }
    finish("GMRES", a, x, b, total, opts.tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LuFactorization;

    fn convection_diffusion(n: usize, c: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i > 0 {
                t.push((i, i - 1, -1.0 - c));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0 + c));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn cg_matches_direct() {
        let a = convection_diffusion(80, 0.0);
        let b: Vec<f64> = (0..80).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let (x, rep) = cg(&a, &b, None, &IterativeOptions::default()).unwrap();
        let (xd, _) = LuFactorization::new(&a).unwrap().solve(&b).unwrap();
        assert!(rep.converged);
        assert!(x.iter().zip(&xd).all(|(p, q)| (p - q).abs() < 1e-8));
    }

    #[test]
    fn gmres_on_nonsymmetric_and_bordered() {
        let a = convection_diffusion(60, 0.4);
        let b: Vec<f64> = (0..60).map(|i| (i as f64 * 0.3).cos()).collect();
        let opts = IterativeOptions {
            restart: 15,
            ..Default::default()
        };
        let (x, rep) = gmres(&a, &b, None, &opts).unwrap();
        assert!(rep.iterations > 15, "restart path exercised");
        let (xd, _) = LuFactorization::new(&a).unwrap().solve(&b).unwrap();
        assert!(x.iter().zip(&xd).all(|(p, q)| (p - q).abs() < 1e-8));

        let big = a.bordered(&vec![1.0; 60]).unwrap();
        let mut bb = b.clone();
        bb.push(0.5);
        let (x, _) = gmres(&big, &bb, None, &IterativeOptions::default()).unwrap();
        assert!((x[..60].iter().sum::<f64>() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn non_convergence_is_reported() {
        let a = convection_diffusion(200, 0.0);
        let b = vec![1.0; 200];
        let opts = IterativeOptions {
            max_iterations: 3,
            ..Default::default()
        };
        match cg(&a, &b, None, &opts) {
            Err(Error::SolverFailure { report, .. }) => assert_eq!(report.iterations, 3),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
