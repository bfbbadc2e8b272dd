use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) type Matrix = DMatrix<f64>;
pub(crate) type Vector = DVector<f64>;

const EIGEN_MAX_ITER: usize = 10_000;

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub(crate) fn sym_eigen(a: &Matrix) -> Result<(Vector, Matrix)> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerics("non-finite entry in symmetric matrix"));
    }
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::numerics("symmetric eigendecomposition did not converge"))?;
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

pub(crate) fn symmetric_eigenvalues(a: &Matrix) -> Result<Vector> {
    sym_eigen(a).map(|(values, _)| values)
}

pub(crate) fn min_eigenvalue(a: &Matrix) -> Result<f64> {
    Ok(symmetric_eigenvalues(a)?.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `V diag(f(λ)) Vᵀ` for the eigenpairs of a symmetric matrix.
pub(crate) fn spectral_map(values: &Vector, vectors: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let mut scaled = vectors.clone();
    for (c, &lambda) in values.iter().enumerate() {
        let w = f(lambda);
        scaled.column_mut(c).scale_mut(w);
    }
    let mut out = &scaled * vectors.transpose();
    symmetrize_in_place(&mut out);
    out
}

pub(crate) fn symmetrize_in_place(a: &mut Matrix) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// `Tr(AB)` for symmetric `A`, `B`; equals the Frobenius inner product.
pub(crate) fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `uᵀ A u`.
pub(crate) fn quad_form(a: &Matrix, u: &[f64]) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for j in 0..n {
        let col = a.column(j);
        let mut inner = 0.0;
        for i in 0..n {
            inner += col[i] * u[i];
        }
        acc += inner * u[j];
    }
    acc
}
