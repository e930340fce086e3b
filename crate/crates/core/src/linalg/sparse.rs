use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Clone, Debug)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn extend_from(&mut self, other: TripletBuilder) {
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Builds the matrix. Summation order is fixed by a stable sort, so the
    /// result does not depend on thread scheduling upstream as long as the
    /// entries arrive in a fixed order.
    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        SparseMatrix {
            nrows: d.len(),
            ncols: d.len(),
            row_ptr: (0..=d.len()).collect(),
            col_idx: (0..d.len()).collect(),
            values: d.to_vec(),
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut b = TripletBuilder::with_capacity(nrows, ncols, triplets.len());
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::invalid(format!(
                    "entry ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            b.push(r, c, v);
        }
        Ok(b.build())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[s..e].binary_search(&j) {
            Ok(p) => self.values[s + p],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        assert_eq!(y.len(), self.nrows, "matvec dimension mismatch");
        let kernel = |(i, yi): (usize, &mut f64)| {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            *yi = self.col_idx[s..e]
                .iter()
                .zip(&self.values[s..e])
                .map(|(&j, v)| v * x[j])
                .sum();
        };
        if self.nnz() > 50_000 {
            y.par_iter_mut().enumerate().for_each(kernel);
        } else {
            y.iter_mut().enumerate().for_each(kernel);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `Aᵀ x`
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "matvec dimension mismatch");
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                b.push(j, i, v);
            }
        }
        b.build()
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.scale(alpha);
        m
    }

    /// `self + alpha * other` on the union of both patterns.
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::invalid(format!(
                "cannot add {}x{} and {}x{} matrices",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (mut a, ae) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let (mut b, be) = (other.row_ptr[i], other.row_ptr[i + 1]);
            while a < ae || b < be {
                let ca = if a < ae { self.col_idx[a] } else { usize::MAX };
                let cb = if b < be { other.col_idx[b] } else { usize::MAX };
                if ca < cb {
                    col_idx.push(ca);
                    values.push(self.values[a]);
                    a += 1;
                } else if cb < ca {
                    col_idx.push(cb);
                    values.push(alpha * other.values[b]);
                    b += 1;
                } else {
                    col_idx.push(ca);
                    values.push(self.values[a] + alpha * other.values[b]);
                    a += 1;
                    b += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// `self * other`, row by row.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut acc = vec![0.0; other.ncols];
        let mut used = vec![false; other.ncols];
        let mut cols = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let (mut col_idx, mut values) = (Vec::new(), Vec::new());
        row_ptr.push(0);
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !used[j] {
                        used[j] = true;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                col_idx.push(j);
                values.push(acc[j]);
                acc[j] = 0.0;
                used[j] = false;
            }
            cols.clear();
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// `diag(self, self)`: a scalar operator acting on both velocity components.
    pub fn block_diagonal2(&self) -> SparseMatrix {
        let mut row_ptr = self.row_ptr.clone();
        let nnz = self.nnz();
        row_ptr.extend(self.row_ptr[1..].iter().map(|p| p + nnz));
        let mut col_idx = self.col_idx.clone();
        col_idx.extend(self.col_idx.iter().map(|c| c + self.ncols));
        let mut values = self.values.clone();
        values.extend_from_slice(&self.values);
        SparseMatrix {
            nrows: 2 * self.nrows,
            ncols: 2 * self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `max |a_ij − a_ji|`, relative to `max |a_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Row and column `j` replaced by the unit vector `e_j`.
    pub fn pinned(&self, j: usize) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            if i == j {
                continue;
            }
            for (k, v) in self.row(i) {
                if k != j {
                    b.push(i, k, v);
                }
            }
        }
        b.push(j, j, 1.0);
        b.build()
    }

    /// `[[A, c], [cᵀ, 0]]`: square system bordered by one constraint row.
    pub fn bordered(&self, c: &[f64]) -> Result<SparseMatrix> {
        if self.nrows != self.ncols || c.len() != self.nrows {
            return Err(Error::invalid("bordering needs a square matrix and a matching constraint"));
        }
        let n = self.nrows;
        let mut row_ptr = Vec::with_capacity(n + 2);
        let mut col_idx = Vec::with_capacity(self.nnz() + 2 * n);
        let mut values = Vec::with_capacity(self.nnz() + 2 * n);
        row_ptr.push(0);
        for i in 0..n {
            for (j, v) in self.row(i) {
                col_idx.push(j);
                values.push(v);
            }
            col_idx.push(n);
            values.push(c[i]);
            row_ptr.push(col_idx.len());
        }
        col_idx.extend(0..n);
        values.extend_from_slice(c);
        col_idx.push(n);
        values.push(0.0);
        row_ptr.push(col_idx.len());
        Ok(SparseMatrix {
            nrows: n + 1,
            ncols: n + 1,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    pub(crate) fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// Matrix Market coordinate format (1-based).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::with_capacity(32 * self.nnz() + 64);
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
            }
        }
        s
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_matrix_market().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (0, 2, 1.0), (1, 1, 3.0), (2, 0, 1.0), (2, 2, 4.0), (0, 0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let a = sample();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 0.0);
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn matvec_and_transpose() {
        let a = sample();
        assert_eq!(a.mul_vec(&[1.0, 2.0, 3.0]), vec![6.0, 6.0, 13.0]);
        assert_eq!(a.transpose_mul_vec(&[1.0, 0.0, 0.0]), vec![3.0, 0.0, 1.0]);
        assert_eq!(a.transpose().transpose(), a);
        assert!(a.symmetry_defect() < 1e-15);
    }

    #[test]
    fn bordered_system() {
        let a = sample();
        let b = a.bordered(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(b.nrows(), 4);
        assert_eq!(b.get(3, 1), 1.0);
        assert_eq!(b.get(1, 3), 1.0);
        assert_eq!(b.get(3, 3), 0.0);
        assert_eq!(b.get(2, 2), 4.0);
    }

    #[test]
    fn block_diagonal() {
        let a = sample();
        let b = a.block_diagonal2();
        assert_eq!(b.nrows(), 6);
        assert_eq!(b.get(3, 3), 3.0);
        assert_eq!(b.get(5, 3), 1.0);
        assert_eq!(b.get(0, 3), 0.0);
        let y = b.mul_vec(&[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        assert_eq!(y, vec![6.0, 6.0, 13.0, 6.0, 6.0, 13.0]);
    }

    #[test]
    fn matrix_market_header() {
        let mm = sample().to_matrix_market();
        let mut lines = mm.lines();
        assert!(lines.next().unwrap().starts_with("%%MatrixMarket"));
        assert_eq!(lines.next().unwrap(), "3 3 5");
        assert_eq!(lines.count(), 5);
    }

    proptest! {
        #[test]
        fn add_scaled_matches_dense(
            ta in proptest::collection::vec((0usize..6, 0usize..5, -3.0f64..3.0), 0..20),
            tb in proptest::collection::vec((0usize..6, 0usize..5, -3.0f64..3.0), 0..20),
            alpha in -2.0f64..2.0,
        ) {
            let a = SparseMatrix::from_triplets(6, 5, &ta).unwrap();
            let b = SparseMatrix::from_triplets(6, 5, &tb).unwrap();
            let c = a.add_scaled(alpha, &b).unwrap();
            let dense = a.to_dense() + b.to_dense() * alpha;
            prop_assert!((c.to_dense() - dense).abs().max() < 1e-12);
            for i in 0..6 {
                let cols: Vec<usize> = c.row(i).map(|(j, _)| j).collect();
                prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
