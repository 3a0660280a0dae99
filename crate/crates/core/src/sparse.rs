//! Compressed sparse row matrices and a reusable sparse LU factorization.
//!
//! The factorization is backed by `faer`'s supernodal/simplicial LU with a
//! COLAMD fill-reducing column ordering and partial row pivoting, always run
//! sequentially so repeated factorizations of one matrix are bitwise
//! reproducible. The symbolic analysis depends only on the sparsity pattern
//! and can be shared by every matrix with that pattern ([`LuPlan`]).

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Row-major compressed sparse matrix. Column indices are sorted and unique
/// within each row; explicit zeros are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|&&(i, j, _)| i >= nrows || j >= ncols) {
            return Err(invalid(format!("entry ({i}, {j}) outside a {nrows}x{ncols} matrix")));
        }
        // stable, so duplicates are summed in input order
        triplets.par_sort_by_key(|&(i, j, _)| (i, j));
        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self { nrows, ncols, row_offsets, col_indices, values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let triplets = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, &v)| (i, j, v)))
            .collect();
        Self::from_triplets(rows.len(), ncols, triplets).expect("indices in range")
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

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    /// Stored value at `(i, j)`, zero when the entry is not in the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "vector length must match column count");
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(x)).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let k = next[j];
                col_indices[k] = i;
                values[k] = v;
                next[j] += 1;
            }
        }
        SparseMatrix { nrows: self.ncols, ncols: self.nrows, row_offsets: counts, col_indices, values }
    }

    pub fn scaled(&self, alpha: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `sum_k c_k A_k` over the union of the patterns.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix> {
        let (nrows, ncols) = match terms.first() {
            Some((_, m)) => (m.nrows, m.ncols),
            None => return Err(invalid("empty linear combination")),
        };
        if terms.iter().any(|(_, m)| m.nrows != nrows || m.ncols != ncols) {
            return Err(invalid("linear combination of matrices with different shapes"));
        }
        if terms.iter().all(|(_, m)| m.same_pattern(terms[0].1)) {
            let mut out = terms[0].1.clone();
            for (k, v) in out.values.iter_mut().enumerate() {
                *v = terms.iter().map(|(c, m)| c * m.values[k]).sum();
            }
            return Ok(out);
        }
        let triplets = terms
            .iter()
            .flat_map(|(c, m)| {
                (0..m.nrows).flat_map(move |i| {
                    let (cols, vals) = m.row(i);
                    cols.iter().zip(vals).map(move |(&j, &v)| (i, j, c * v))
                })
            })
            .collect();
        SparseMatrix::from_triplets(nrows, ncols, triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// Column-compressed copy of the pattern and values (row indices sorted).
    fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let t = self.transpose();
        (t.row_offsets, t.col_indices, t.values)
    }
}

/// Symbolic LU analysis (column ordering and elimination structure) for one
/// sparsity pattern.
#[derive(Debug, Clone)]
pub struct LuPlan {
    n: usize,
    pattern: Arc<(Vec<usize>, Vec<usize>)>,
    symbolic: Arc<SymbolicLu<usize>>,
}

impl LuPlan {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(invalid(format!("cannot factorize a {}x{} matrix", a.nrows, a.ncols)));
        }
        let (col_ptr, row_idx, _) = a.to_csc();
        let symbolic = {
            let sym = SymbolicSparseColMatRef::new_checked(a.nrows, a.ncols, &col_ptr, None, &row_idx);
            factorize_symbolic_lu(sym, LuSymbolicParams::default())
                .map_err(|e| Error::SingularMatrix(format!("symbolic analysis failed: {e:?}")))?
        };
        Ok(Self {
            n: a.nrows,
            pattern: Arc::new((a.row_offsets.clone(), a.col_indices.clone())),
            symbolic: Arc::new(symbolic),
        })
    }

    pub fn matches(&self, a: &SparseMatrix) -> bool {
        a.nrows == self.n && a.ncols == self.n && a.row_offsets == self.pattern.0 && a.col_indices == self.pattern.1
    }

    /// Numeric factorization of a matrix with this plan's pattern.
    pub fn factorize(&self, a: &SparseMatrix) -> Result<Factorization> {
        if !self.matches(a) {
            return Err(invalid("matrix pattern differs from the symbolic plan"));
        }
        let (col_ptr, row_idx, values) = a.to_csc();
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &col_ptr, None, &row_idx);
        let mat = SparseColMatRef::new(sym, &values);
        let mut numeric = NumericLu::<usize, f64>::new();
        let par = Par::Seq;
        let params = Default::default();
        let mut buf = MemBuffer::new(self.symbolic.factorize_numeric_lu_scratch::<f64>(par, params));
        self.symbolic
            .factorize_numeric_lu(&mut numeric, mat, par, MemStack::new(&mut buf), params)
            .map_err(|e| Error::SingularMatrix(format!("numeric factorization failed: {e:?}")))?;
        let f = Factorization { n: self.n, symbolic: Arc::clone(&self.symbolic), numeric };
        f.check_nonsingular(a)?;
        Ok(f)
    }
}

/// Immutable LU factors; concurrent solves are safe.
#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    symbolic: Arc<SymbolicLu<usize>>,
    numeric: NumericLu<usize, f64>,
}

/// Symbolic analysis plus numeric factorization.
pub fn factorize(a: &SparseMatrix) -> Result<Factorization> {
    LuPlan::new(a)?.factorize(a)
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Partial pivoting does not report exact zero pivots; a singular matrix
    /// shows up as a non-finite or wildly wrong solution of `A x = A 1`.
    fn check_nonsingular(&self, a: &SparseMatrix) -> Result<()> {
        if self.n == 0 {
            return Ok(());
        }
        let ones = vec![1.0; self.n];
        let b = a.mul_vec(&ones);
        let x = self.solve(&b)?;
        let err = x.iter().map(|v| (v - 1.0).abs()).fold(0.0, |m: f64, e| if e.is_nan() { f64::INFINITY } else { m.max(e) });
        if !err.is_finite() || err > 1e-4 {
            return Err(Error::SingularMatrix(format!(
                "{}x{} matrix is numerically singular (probe error {err:e})",
                self.n, self.n
            )));
        }
        Ok(())
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let lu = LuRef::new_unchecked(&self.symbolic, &self.numeric);
        let par = Par::Seq;
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, par));
        let rhs = MatMut::from_column_major_slice_mut(x, self.n, 1);
        lu.solve_in_place_with_conj(Conj::No, rhs, par, MemStack::new(&mut buf));
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(invalid(format!("rhs length {} does not match dimension {}", b.len(), self.n)));
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// Solves `A [x_1 | ... | x_J] = [b_1 | ... | b_J]` with one blocked
    /// triangular solve over all columns.
    pub fn solve_block(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if let Some((j, b)) = rhs.iter().enumerate().find(|(_, b)| b.len() != self.n) {
            return Err(invalid(format!("rhs column {j} has length {}, expected {}", b.len(), self.n)));
        }
        let k = rhs.len();
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut block: Vec<f64> = rhs.iter().flatten().copied().collect();
        let lu = LuRef::new_unchecked(&self.symbolic, &self.numeric);
        let par = Par::Seq;
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(k, par));
        let x = MatMut::from_column_major_slice_mut(&mut block, self.n, k);
        lu.solve_in_place_with_conj(Conj::No, x, par, MemStack::new(&mut buf));
        Ok(block.chunks_exact(self.n).map(<[f64]>::to_vec).collect())
    }

    /// [`Self::solve_block`] followed by one step of iterative refinement
    /// against `a`, the matrix this factorization came from.
    ///
    /// Saddle systems whose data carry a large gradient part produce large
    /// pressures, and the rounding error of the constraint rows grows with
    /// them. One correction brings those rows back to rounding level relative
    /// to the velocity instead.
    pub fn solve_block_refined(&self, a: &SparseMatrix, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if a.nrows() != self.n || a.ncols() != self.n {
            return Err(invalid(format!("{}x{} matrix does not match dimension {}", a.nrows(), a.ncols(), self.n)));
        }
        let mut sol = self.solve_block(rhs)?;
        let residuals: Vec<Vec<f64>> = sol
            .par_iter()
            .zip(rhs)
            .map(|(x, b)| {
                let mut r = a.mul_vec(x);
                r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
                r
            })
            .collect();
        let corrections = self.solve_block(&residuals)?;
        for (x, d) in sol.iter_mut().zip(&corrections) {
            x.iter_mut().zip(d).for_each(|(xi, di)| *xi += di);
        }
        Ok(sol)
    }
}

/// `||A x - b|| / ||b||` (or `||A x||` when `b = 0`).
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}
