use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{GdfError, Result};

/// Eigendecomposition of a symmetric matrix with eigenvalues in descending
/// order. Each eigenvector is signed so that its first entry of largest
/// magnitude is positive.
pub(crate) fn descending_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GdfError::Numeric("matrix has non-finite entries".into()));
    }
    let d = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| GdfError::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    Ok((values, vectors))
}

/// Largest eigenvalue of a symmetric matrix.
pub(crate) fn top_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 1 {
        return Ok(m[(0, 0)]);
    }
    Ok(descending_eigen(m)?.0[0])
}
