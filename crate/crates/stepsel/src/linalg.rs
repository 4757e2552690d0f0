//! Dense symmetric solves via Cholesky factorization.
//!
//! The fitters only ever need to solve small symmetric positive-definite
//! systems (Newton steps, penalized normal equations, covariance inversion),
//! so a plain row-major Cholesky with a reported failing pivot covers all of
//! it without pulling in a linear-algebra dependency.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    /// The matrix is not positive definite; `pivot` is the first column at
    /// which the factorization broke down.
    #[error("matrix is singular or not positive definite at pivot column {pivot}")]
    NotPositiveDefinite { pivot: usize },
}

/// Row-major square matrix with minimal structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }

    pub fn add_scaled_identity(&mut self, eps: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += eps;
        }
    }
}

/// Lower-triangular Cholesky factor L with A = L L^T.
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SymMatrix) -> Result<Self, LinalgError> {
        let n = a.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a.at(j, j);
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j });
            }
            let diag = diag.sqrt();
            l[j * n + j] = diag;
            for i in (j + 1)..n {
                let mut v = a.at(i, j);
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / diag;
            }
        }
        Ok(Cholesky { n, l })
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = b.to_vec();
        // Forward: L y = b.
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.l[i * n + k] * y[k];
            }
            y[i] = v / self.l[i * n + i];
        }
        // Backward: L^T x = y.
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= self.l[k * n + i] * y[k];
            }
            y[i] = v / self.l[i * n + i];
        }
        y
    }

    /// Full inverse of A, column by column.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.n;
        let mut inv = SymMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                *inv.at_mut(i, j) = col[i];
            }
        }
        // Symmetrize to scrub rounding asymmetry.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (inv.at(i, j) + inv.at(j, i));
                *inv.at_mut(i, j) = v;
                *inv.at_mut(j, i) = v;
            }
        }
        inv
    }
}

/// Solves the symmetric positive-definite system A x = b.
pub fn solve_spd(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Ok(Cholesky::factor(a)?.solve(b))
}

/// Ordinary least squares for a skinny design: minimizes ||X beta - y||^2
/// via the normal equations. `x` is row-major with `cols` columns.
pub fn least_squares(x: &[f64], y: &[f64], cols: usize) -> Result<Vec<f64>, LinalgError> {
    let rows = y.len();
    assert_eq!(x.len(), rows * cols);
    let mut xtx = SymMatrix::zeros(cols);
    let mut xty = vec![0.0; cols];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        for i in 0..cols {
            xty[i] += row[i] * y[r];
            for j in i..cols {
                *xtx.at_mut(i, j) += row[i] * row[j];
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            *xtx.at_mut(i, j) = xtx.at(j, i);
        }
    }
    solve_spd(&xtx, &xty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        // B^T B + I is symmetric positive definite.
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += b[k * n + i] * b[k * n + j];
                }
                *a.at_mut(i, j) = v + if i == j { 1.0 } else { 0.0 };
            }
        }
        a
    }

    #[test]
    fn solve_recovers_known_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 5, 12] {
            let a = random_spd(n, &mut rng);
            let x_true: Vec<f64> = (0..n).map(|i| i as f64 - 1.5).collect();
            let mut b = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    b[i] += a.at(i, j) * x_true[j];
                }
            }
            let x = solve_spd(&a, &b).unwrap();
            for i in 0..n {
                assert!((x[i] - x_true[i]).abs() < 1e-9, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_spd(6, &mut rng);
        let inv = Cholesky::factor(&a).unwrap().inverse();
        for i in 0..6 {
            for j in 0..6 {
                let mut v = 0.0;
                for k in 0..6 {
                    v += a.at(i, k) * inv.at(k, j);
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-9, "({i},{j}) -> {v}");
            }
        }
    }

    #[test]
    fn singular_matrix_reports_failing_pivot() {
        let mut a = SymMatrix::zeros(3);
        *a.at_mut(0, 0) = 1.0;
        *a.at_mut(1, 1) = 1.0;
        // Third row/column linearly dependent on the second.
        *a.at_mut(1, 2) = 1.0;
        *a.at_mut(2, 1) = 1.0;
        *a.at_mut(2, 2) = 1.0;
        match Cholesky::factor(&a) {
            Err(LinalgError::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 2),
            other => panic!("expected failure, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn least_squares_fits_exact_linear_data() {
        // y = 2*x0 - 3*x1 + 0.5, three columns with intercept.
        let rows = 20;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = Vec::with_capacity(rows * 3);
        let mut y = Vec::with_capacity(rows);
        for _ in 0..rows {
            let a: f64 = rng.gen_range(-2.0..2.0);
            let b: f64 = rng.gen_range(-2.0..2.0);
            x.extend_from_slice(&[1.0, a, b]);
            y.push(0.5 + 2.0 * a - 3.0 * b);
        }
        let beta = least_squares(&x, &y, 3).unwrap();
        assert!((beta[0] - 0.5).abs() < 1e-9);
        assert!((beta[1] - 2.0).abs() < 1e-9);
        assert!((beta[2] + 3.0).abs() < 1e-9);
    }
}
