//! Small dense linear algebra for dimensions 2 and 3.
//!
//! Everything here works on stack-allocated nalgebra types or fixed arrays so
//! the projection inner loops never touch the heap.

use nalgebra::{DMatrix, SMatrix, SVector};

use crate::error::{GeomError, Result};

pub type Vector<const D: usize> = SVector<f64, D>;
pub type Matrix<const D: usize> = SMatrix<f64, D, D>;

/// Largest system handled by [`solve_dense`]: a 3x3 block bordered by one row.
pub const MAX_SYSTEM: usize = 4;

/// Gaussian elimination with partial pivoting on the leading `n`x`n` block.
/// Returns `None` when a pivot falls below `1e-14` times the largest entry.
pub fn solve_dense(
    a: &mut [[f64; MAX_SYSTEM]; MAX_SYSTEM],
    b: &mut [f64; MAX_SYSTEM],
    n: usize,
) -> Option<[f64; MAX_SYSTEM]> {
    debug_assert!(n <= MAX_SYSTEM);
    let scale = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max(a[i][j].abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = [0.0; MAX_SYSTEM];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Coordinate unit vector `e_i`.
pub fn axis<const D: usize>(i: usize) -> Vector<D> {
    Vector::<D>::from_fn(|k, _| if k == i { 1.0 } else { 0.0 })
}

pub fn solve<const D: usize>(m: &Matrix<D>, rhs: &Vector<D>) -> Option<Vector<D>> {
    let mut a = [[0.0; MAX_SYSTEM]; MAX_SYSTEM];
    let mut b = [0.0; MAX_SYSTEM];
    for i in 0..D {
        for j in 0..D {
            a[i][j] = m[(i, j)];
        }
        b[i] = rhs[i];
    }
    let x = solve_dense(&mut a, &mut b, D)?;
    Some(Vector::<D>::from_fn(|i, _| x[i]))
}

pub fn inverse<const D: usize>(m: &Matrix<D>) -> Option<Matrix<D>> {
    let mut inv = Matrix::<D>::zeros();
    for j in 0..D {
        let col = solve(m, &axis::<D>(j))?;
        inv.set_column(j, &col);
    }
    Some(inv)
}

pub fn determinant<const D: usize>(m: &Matrix<D>) -> f64 {
    match D {
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => m.fixed_view::<3, 3>(0, 0).determinant(),
        _ => to_dynamic(m).determinant(),
    }
}

pub fn to_dynamic<const D: usize>(m: &Matrix<D>) -> DMatrix<f64> {
    DMatrix::from_column_slice(D, D, m.as_slice())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues<const D: usize>(m: &Matrix<D>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut values: Vec<f64> = to_dynamic(&sym)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Orthonormal basis of the hyperplane orthogonal to `normal` (need not be unit).
pub fn tangent_basis<const D: usize>(normal: &Vector<D>) -> Vec<Vector<D>> {
    let n = normal.normalize();
    // Start from the coordinate axes least aligned with the normal.
    let mut axes: Vec<usize> = (0..D).collect();
    axes.sort_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()));
    let mut basis: Vec<Vector<D>> = Vec::with_capacity(D - 1);
    for &a in axes.iter().take(D - 1) {
        let mut v = axis::<D>(a);
        v -= n * n.dot(&v);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        basis.push(v.normalize());
    }
    basis
}

/// Matrix of the operator `m` in the orthonormal frame `basis`: entries `b_i . m b_j`.
pub fn restrict<const D: usize>(m: &Matrix<D>, basis: &[Vector<D>]) -> DMatrix<f64> {
    let k = basis.len();
    DMatrix::from_fn(k, k, |i, j| basis[i].dot(&(m * basis[j])))
}

/// Real eigen-decomposition of a 1x1 or 2x2 matrix with real spectrum.
///
/// Eigenvalues are ascending, eigenvectors unit length. Returns
/// `IllConditioned` if the discriminant is negative beyond rounding noise.
pub fn real_eigen_small(m: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    match m.nrows() {
        1 => Ok((vec![m[(0, 0)]], vec![vec![1.0]])),
        2 => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let half_trace = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs()).max(1e-300);
            if disc < -1e-8 * scale * scale {
                return Err(GeomError::IllConditioned {
                    residual: (-disc).sqrt() / scale,
                });
            }
            let root = disc.max(0.0).sqrt();
            let values = vec![half_trace - root, half_trace + root];
            let mut vectors = Vec::with_capacity(2);
            for (k, &lambda) in values.iter().enumerate() {
                let v1 = [b, lambda - a];
                let v2 = [lambda - d, c];
                let n1 = v1[0].hypot(v1[1]);
                let n2 = v2[0].hypot(v2[1]);
                let v = if n1.max(n2) <= 1e-10 * scale {
                    // Multiple of the identity: any basis diagonalizes it.
                    if k == 0 {
                        vec![1.0, 0.0]
                    } else {
                        vec![0.0, 1.0]
                    }
                } else if n1 >= n2 {
                    vec![v1[0] / n1, v1[1] / n1]
                } else {
                    vec![v2[0] / n2, v2[1] / n2]
                };
                vectors.push(v);
            }
            Ok((values, vectors))
        }
        k => Err(GeomError::InvalidArgument(format!(
            "real_eigen_small supports sizes 1 and 2, got {k}"
        ))),
    }
}

/// Volume of the Euclidean unit ball in dimension `d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => {
            // omega_d = pi^{d/2} / Gamma(d/2 + 1), via the two-step recursion.
            let mut v = [2.0, std::f64::consts::PI];
            let mut k = 2;
            while k < d {
                k += 1;
                let next = v[0] * 2.0 * std::f64::consts::PI / k as f64;
                v = [v[1], next];
            }
            v[1]
        }
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
