use crate::error::{invalid, Result};
use crate::sparse::SparseMatrix;

/// Enforces Dirichlet values by row replacement.
///
/// Each constrained row becomes the identity row (off-diagonal entries are set
/// to explicit zeros so the sparsity pattern is unchanged) and in every rhs
/// column the constrained entry is overwritten by its prescribed value.
/// `values[j][k]` is the value of `bdofs[k]` for rhs column `j`. Columns of
/// constrained dofs are left in place, so the modified matrix is not
/// symmetric.
pub fn apply_dirichlet(matrix: &mut SparseMatrix, rhs: &mut [Vec<f64>], bdofs: &[usize], values: &[Vec<f64>]) -> Result<()> {
    if values.len() != rhs.len() {
        return Err(invalid(format!("{} value lists for {} rhs columns", values.len(), rhs.len())));
    }
    if let Some(v) = values.iter().find(|v| v.len() != bdofs.len()) {
        return Err(invalid(format!("{} boundary values for {} constrained dofs", v.len(), bdofs.len())));
    }
    if let Some(&d) = bdofs.iter().find(|&&d| d >= matrix.nrows()) {
        return Err(invalid(format!("constrained dof {d} outside the system")));
    }
    if let Some(col) = rhs.iter().find(|c| c.len() != matrix.nrows()) {
        return Err(invalid(format!("rhs column of length {} for a {}-row system", col.len(), matrix.nrows())));
    }
    if bdofs.iter().any(|&d| matrix.row(d).0.binary_search(&d).is_err()) {
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(matrix.nnz() + bdofs.len());
        for i in 0..matrix.nrows() {
            let (cols, vals) = matrix.row(i);
            triplets.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
        }
        triplets.extend(bdofs.iter().map(|&d| (d, d, 0.0)));
        *matrix = SparseMatrix::from_triplets(matrix.nrows(), matrix.ncols(), triplets)?;
    }
    constrain_rows(matrix, bdofs);
    for (col, vals) in rhs.iter_mut().zip(values) {
        for (&d, &g) in bdofs.iter().zip(vals) {
            col[d] = g;
        }
    }
    Ok(())
}

/// Identity rows for `rows`; the diagonal must already be in the pattern.
pub(crate) fn constrain_rows(matrix: &mut SparseMatrix, rows: &[usize]) {
    let offsets = matrix.row_offsets().to_vec();
    let cols = matrix.col_indices().to_vec();
    let values = matrix.values_mut();
    for &d in rows {
        for k in offsets[d]..offsets[d + 1] {
            values[k] = if cols[k] == d { 1.0 } else { 0.0 };
        }
    }
}
