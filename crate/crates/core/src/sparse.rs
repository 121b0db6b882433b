//! Compressed sparse row storage and the linear solvers used on grid operators.
//!
//! Grid matrices are numbered lexicographically, so their nonzeros stay inside a
//! band of width one grid line. An envelope (skyline) Cholesky factorization
//! exploits exactly that: fill is confined to the profile and no reordering is
//! needed. Preconditioned conjugate gradients is kept for systems too large to
//! factor.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Above this many unknowns `solve_spd` switches from Cholesky to PCG.
pub const CHOLESKY_LIMIT: usize = 60_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and explicit zeros are kept so the pattern reflects the stencil.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// Product of row `i` with `x`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * x[j]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji|` over the stored pattern.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let vt = if j < self.nrows { self.get(j, i) } else { 0.0 };
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Replaces rows and columns of the `fixed` unknowns by identity rows.
    /// Symmetry and definiteness of the remaining block are preserved.
    pub fn with_identity_rows(&self, fixed: &[bool]) -> Self {
        assert_eq!(fixed.len(), self.nrows);
        let t = self.triplets().filter_map(|(i, j, v)| {
            if fixed[i] || fixed[j] {
                (i == j).then_some((i, j, 1.0))
            } else {
                Some((i, j, v))
            }
        });
        Self::from_triplets(self.nrows, self.ncols, t)
    }
}

/// Envelope Cholesky factor `A = L L^T`, stored row by row from the first
/// nonzero column of each row to the diagonal.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j <= i).min().unwrap_or(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    values[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = values[start[i] + j - fi];
                let ri = &values[start[i] + k0 - fi..start[i] + j - fi];
                let rj = &values[start[j] + k0 - fj..start[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                if j < i {
                    values[start[i] + j - fi] = s / values[start[j + 1] - 1];
                } else {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    values[start[i] + j - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            first,
            start,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (k, l) in (fi..i).zip(&row[..i - fi]) {
                y[k] -= l * xi;
            }
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients, started from `x`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> CgOutcome {
    let n = b.len();
    let diag = a.diagonal();
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = norm2(&r) / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        a.mul_vec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rel = norm2(&r) / bnorm;
        it += 1;
    }
    CgOutcome {
        iterations: it,
        relative_residual: rel,
    }
}

/// Solves an SPD system: envelope Cholesky up to [`CHOLESKY_LIMIT`] unknowns,
/// PCG beyond.
pub fn solve_spd(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() <= CHOLESKY_LIMIT {
        Ok(EnvelopeCholesky::factor(a)?.solve(b))
    } else {
        let mut x = vec![0.0; b.len()];
        let out = pcg(a, b, &mut x, 1e-13, 20 * b.len());
        if out.relative_residual > 1e-10 {
            return Err(Error::LinearSolver {
                residual: out.relative_residual,
            });
        }
        Ok(x)
    }
}

/// Solves `A x = b` with `x[i] = values[i]` prescribed wherever `fixed[i]`.
/// Rows of fixed unknowns are dropped from the equations.
pub fn solve_with_fixed(
    a: &CsrMatrix,
    b: &[f64],
    fixed: &[bool],
    values: &[f64],
) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        if fixed[i] {
            rhs[i] = values[i];
        } else {
            rhs[i] = b[i]
                - a.row(i)
                    .filter(|&(j, _)| fixed[j])
                    .map(|(j, v)| v * values[j])
                    .sum::<f64>();
        }
    }
    let reduced = a.with_identity_rows(fixed);
    let mut x = solve_spd(&reduced, &rhs)?;
    for i in 0..n {
        if fixed[i] {
            x[i] = values[i];
        }
    }
    Ok(x)
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub(crate) fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn cholesky_matches_dense_solve() {
        let a = laplace_1d(7);
        let b: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let x = EnvelopeCholesky::factor(&a).unwrap().solve(&b);
        let dense = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for (xi, di) in x.iter().zip(dense.iter()) {
            assert!((xi - di).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            EnvelopeCholesky::factor(&a),
            Err(Error::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    fn pcg_agrees_with_cholesky() {
        let a = laplace_1d(50);
        let b = vec![1.0; 50];
        let direct = EnvelopeCholesky::factor(&a).unwrap().solve(&b);
        let mut x = vec![0.0; 50];
        let out = pcg(&a, &b, &mut x, 1e-14, 500);
        assert!(out.relative_residual <= 1e-14);
        assert!(direct.iter().zip(&x).all(|(d, c)| (d - c).abs() < 1e-9));
    }

    #[test]
    fn fixed_unknowns_keep_their_values() {
        let a = laplace_1d(5);
        let fixed = [false, false, true, false, false];
        let vals = [0.0, 0.0, 3.0, 0.0, 0.0];
        let x = solve_with_fixed(&a, &[0.0; 5], &fixed, &vals).unwrap();
        assert_eq!(x[2], 3.0);
        // free rows still satisfied
        let ax = a.mul_vec(&x);
        for i in [0, 1, 3, 4] {
            assert!(ax[i].abs() < 1e-12);
        }
    }
}
