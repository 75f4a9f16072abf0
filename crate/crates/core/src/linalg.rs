//! Small dense linear-algebra helpers shared by the FIM and bound code.
//!
//! Fisher matrices here mix wildly different units (radians next to seconds),
//! so conditioning is always judged on the Jacobi-scaled matrix
//! `D^{-1/2} J D^{-1/2}`; inversion goes through a symmetric eigendecomposition
//! of that scaled matrix and never falls back to a pseudo-inverse.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Largest scaled condition number accepted before a matrix is declared singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Condition number of the Jacobi-scaled symmetric matrix; `inf` when the
/// matrix has a non-positive diagonal entry or eigenvalue.
pub fn scaled_condition(m: &DMatrix<f64>) -> f64 {
    match scaled_eigen(m) {
        Some((_, eig)) => condition_of(&eig.eigenvalues),
        None => f64::INFINITY,
    }
}

fn condition_of(eigenvalues: &nalgebra::DVector<f64>) -> f64 {
    let max = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

fn scaled_eigen(m: &DMatrix<f64>) -> Option<(Vec<f64>, SymmetricEigen<f64, nalgebra::Dyn>)> {
    let n = m.nrows();
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = m[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        scale.push(1.0 / d.sqrt());
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]) * scale[i] * scale[j]);
    if scaled.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((scale, SymmetricEigen::new(scaled)))
}

/// Inverse of a symmetric positive-definite matrix with condition screening.
pub fn sym_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{context}: {}x{} is not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let (scale, eig) = scaled_eigen(m).ok_or_else(|| Error::singular(context, f64::INFINITY))?;
    let cond = condition_of(&eig.eigenvalues);
    if !(cond < CONDITION_LIMIT) {
        return Err(Error::singular(context, cond));
    }
    let v = &eig.eigenvectors;
    let inv_eig = eig.eigenvalues.map(|l| 1.0 / l);
    let inner = v * DMatrix::from_diagonal(&inv_eig) * v.transpose();
    Ok(DMatrix::from_fn(n, n, |i, j| inner[(i, j)] * scale[i] * scale[j]))
}

/// Rows/columns `rows` x `cols` of `m`, in the order given.
pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Schur complement `J11 - J12 J22^{-1} J21` keeping the indices in `keep`
/// (in that order) and eliminating every other index.
pub fn schur_keep(m: &DMatrix<f64>, keep: &[usize], context: &str) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{context}: matrix not square")));
    }
    let mut is_kept = vec![false; n];
    for &k in keep {
        if k >= n || is_kept[k] {
            return Err(Error::invalid(format!("{context}: bad keep index {k}")));
        }
        is_kept[k] = true;
    }
    let drop: Vec<usize> = (0..n).filter(|i| !is_kept[*i]).collect();
    let j11 = select(m, keep, keep);
    if drop.is_empty() {
        return Ok(j11);
    }
    let j12 = select(m, keep, &drop);
    let j22 = select(m, &drop, &drop);
    let j22_inv = sym_inverse(&j22, context)?;
    let out = &j11 - &j12 * j22_inv * j12.transpose();
    Ok(symmetrize(&out))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Frobenius norm of `a - b` divided by the Frobenius norm of `b`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_of_badly_scaled_spd_matrix() {
        // angle-like and delay-like parameters side by side
        let m = DMatrix::from_row_slice(2, 2, &[1e3, 2e11, 2e11, 1e20]);
        let inv = sym_inverse(&m, "test").unwrap();
        let det = 1e3 * 1e20 - 2e11 * 2e11;
        let expect = DMatrix::from_row_slice(2, 2, &[1e20 / det, -2e11 / det, -2e11 / det, 1e3 / det]);
        for (a, b) in inv.iter().zip(expect.iter()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-9);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match sym_inverse(&m, "ones") {
            Err(Error::Singular { condition, .. }) => assert!(condition >= CONDITION_LIMIT),
            other => panic!("expected singular, got {other:?}"),
        }
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(sym_inverse(&z, "zero"), Err(Error::Singular { .. })));
    }

    #[test]
    fn scalar_schur_complement() {
        let (a, b, c) = (4.0, 1.5, 2.0);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let s = schur_keep(&m, &[0], "2x2").unwrap();
        assert_relative_eq!(s[(0, 0)], a - b * b / c, epsilon = 1e-14);
    }

    #[test]
    fn schur_of_block_diagonal_is_block() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, 5.0]);
        let s = schur_keep(&m, &[0, 1], "bd").unwrap();
        assert_relative_eq!(s, select(&m, &[0, 1], &[0, 1]), epsilon = 1e-15);
    }
}
