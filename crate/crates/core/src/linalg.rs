//! Small dense linear-algebra helpers.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues of a real 3×3 matrix.
pub(crate) fn eigenvalues3(m: &[[f64; 3]; 3]) -> [Complex64; 3] {
    let mat = Matrix3::from_fn(|i, j| m[i][j]);
    let ev = mat.complex_eigenvalues();
    [ev[0], ev[1], ev[2]]
}

/// Eigenvalues of a real 2×2 matrix.
pub(crate) fn eigenvalues2(m: &[[f64; 2]; 2]) -> [Complex64; 2] {
    let mat = Matrix2::from_fn(|i, j| m[i][j]);
    let ev = mat.complex_eigenvalues();
    [ev[0], ev[1]]
}

fn cross(a: &[Complex64; 3], b: &[Complex64; 3]) -> [Complex64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Eigenvector of a real 3×3 matrix for a simple eigenvalue `lambda`, as
/// the best-conditioned cross product of two rows of `m − λI`.
pub(crate) fn eigenvector3(m: &[[f64; 3]; 3], lambda: Complex64) -> [Complex64; 3] {
    let rows: Vec<[Complex64; 3]> = (0..3)
        .map(|i| {
            let mut r = [Complex64::new(0.0, 0.0); 3];
            for j in 0..3 {
                r[j] = Complex64::new(m[i][j], 0.0)
                    - if i == j {
                        lambda
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
            }
            r
        })
        .collect();
    let mut best = [Complex64::new(0.0, 0.0); 3];
    let mut best_norm = -1.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let c = cross(&rows[i], &rows[j]);
        let n: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        if n > best_norm {
            best_norm = n;
            best = c;
        }
    }
    best
}

/// Residual `‖M v − λ v‖₂`.
pub(crate) fn eigen_residual3(m: &[[f64; 3]; 3], lambda: Complex64, v: &[Complex64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        let mut acc = -lambda * v[i];
        for j in 0..3 {
            acc += v[j] * m[i][j];
        }
        s += acc.norm_sqr();
    }
    s.sqrt()
}

/// Least-squares solution of `A x ≈ b` (rows are observations).
pub(crate) fn least_squares(rows: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.len());
    if n < p || p == 0 {
        return Err(Error::InsufficientData {
            needed: p.max(1),
            found: n,
        });
    }
    let a = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let rhs = DVector::from_column_slice(b);
    let svd = a.svd(true, true);
    let x = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::FitFailure(format!("least squares: {e}")))?;
    Ok(x.iter().copied().collect())
}

/// Solves a 2×2 linear system.
pub(crate) fn solve2(m: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * m[1][1] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}
