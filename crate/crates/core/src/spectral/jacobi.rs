//! Cyclic Jacobi iterations for small dense symmetric problems.
//!
//! Matrices are row-major `Vec<f64>`. Both routines sweep the `(p, q)`
//! pairs in row order and use the stable tangent formula
//! `t = sgn(θ) / (|θ| + √(θ² + 1))`.

/// Off-diagonal Frobenius norm at which the two-sided iteration stops.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

fn rotation(app: f64, aqq: f64, apq: f64) -> (f64, f64) {
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
    let c = 1.0 / t.hypot(1.0);
    (c, t * c)
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues of a symmetric `n × n` matrix, sorted descending.
pub fn symmetric_eigenvalues(matrix: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(matrix.len(), n * n, "matrix must be n×n");
    let mut a = matrix.to_vec();
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a, n) < OFF_DIAGONAL_TOLERANCE {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (c, s) = rotation(a[p * n + p], a[q * n + q], apq);
                // A <- A·J (columns p, q)
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                // A <- Jᵀ·A (rows p, q)
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

/// Singular values of a `rows × cols` matrix, sorted descending, `cols` of
/// them.
///
/// One-sided (Hestenes) Jacobi: each step is the cyclic Jacobi rotation of
/// the Gram matrix `MᵀM` at `(p, q)`, applied to columns `p` and `q` of `M`
/// instead of to the explicit Gram matrix. The singular values are the
/// final column norms, which keeps zero singular values near machine zero
/// rather than at the square root of the Gram rounding error.
pub fn singular_values(matrix: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    assert_eq!(matrix.len(), rows * cols, "matrix must be rows×cols");
    // Column-major working copy.
    let mut u: Vec<f64> = (0..cols)
        .flat_map(|j| (0..rows).map(move |i| (i, j)))
        .map(|(i, j)| matrix[i * cols + j])
        .collect();
    let col = |j: usize| j * rows..(j + 1) * rows;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for (x, y) in u[col(p)].iter().zip(&u[col(q)]) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let (c, s) = rotation(alpha, beta, gamma);
                for i in 0..rows {
                    let (x, y) = (u[p * rows + i], u[q * rows + i]);
                    u[p * rows + i] = c * x - s * y;
                    u[q * rows + i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|j| u[col(j)].iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let eig = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((eig[0] - 3.0).abs() < 1e-14 && (eig[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tridiagonal_laplacian_matches_cosine_formula() {
        // Path-graph Laplacian-like tridiag(−1, 2, −1): λ_k = 2 − 2cos(kπ/(n+1)).
        let n = 12;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 2.0;
            if i + 1 < n {
                a[i * n + i + 1] = -1.0;
                a[(i + 1) * n + i] = -1.0;
            }
        }
        let eig = symmetric_eigenvalues(&a, n);
        let mut expected: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        expected.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in eig.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn singular_values_of_rank_one() {
        let sv = singular_values(&[1.0; 9], 3, 3);
        assert!((sv[0] - 3.0).abs() < 1e-14);
        assert!(sv[1].abs() < 1e-14 && sv[2].abs() < 1e-14);
    }

    #[test]
    fn singular_values_rectangular() {
        // diag(3, 2) padded with a zero row.
        let sv = singular_values(&[0.0, 2.0, 3.0, 0.0, 0.0, 0.0], 3, 2);
        assert!((sv[0] - 3.0).abs() < 1e-15 && (sv[1] - 2.0).abs() < 1e-15);
    }
}
