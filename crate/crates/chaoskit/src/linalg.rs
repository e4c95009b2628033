//! Dense linear algebra for small matrices: LU inversion with a condition
//! estimate, Cholesky factorisation, and Gauss-Hermite quadrature rules.
//!
//! Everything here operates on matrices of modest size (quadrature grids,
//! Gram matrices of time partitions, trigonometric change-of-basis
//! matrices), so simple `O(n^3)` dense algorithms are the right tool.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinAlgError {
    #[error("matrix is singular to working precision (pivot column {column})")]
    Singular { column: usize },
    #[error("matrix is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("matrix is not positive definite (leading minor {index})")]
    NotPositiveDefinite { index: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].len();
        assert!(
            rows.iter().all(|r| r.len() == cols),
            "all rows must have equal length"
        );
        Mat {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mat_mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "mat_mul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mat_vec shape mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Maximum absolute row sum (the operator infinity-norm).
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

/// Invert a square matrix by LU decomposition with partial pivoting.
///
/// Returns the inverse together with the condition number estimate
/// `||A||_inf * ||A^{-1}||_inf`.
pub fn lu_inverse(a: &Mat) -> Result<(Mat, f64), LinAlgError> {
    if a.rows != a.cols {
        return Err(LinAlgError::Shape(format!(
            "lu_inverse needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for col in 0..n {
        let (pivot_row, pivot_val) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_val == 0.0 || !pivot_val.is_finite() {
            return Err(LinAlgError::Singular { column: col });
        }
        if pivot_row != col {
            perm.swap(pivot_row, col);
            for j in 0..n {
                let tmp = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = lu[(col, j)];
                lu[(col, j)] = tmp;
            }
        }
        let pivot = lu[(col, col)];
        for r in (col + 1)..n {
            let factor = lu[(r, col)] / pivot;
            lu[(r, col)] = factor;
            for j in (col + 1)..n {
                let sub = factor * lu[(col, j)];
                lu[(r, j)] -= sub;
            }
        }
    }

    // Solve A x = e_k for each unit vector via the factorisation.
    let mut inv = Mat::zeros(n, n);
    for k in 0..n {
        let mut x = vec![0.0; n];
        for (dst, &src) in perm.iter().enumerate() {
            x[dst] = if src == k { 1.0 } else { 0.0 };
        }
        // Forward substitution with unit lower triangle.
        for i in 1..n {
            for j in 0..i {
                x[i] -= lu[(i, j)] * x[j];
            }
        }
        // Back substitution.
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= lu[(i, j)] * x[j];
            }
            x[i] /= lu[(i, i)];
        }
        for i in 0..n {
            inv[(i, k)] = x[i];
        }
    }

    let condition = a.inf_norm() * inv.inf_norm();
    Ok((inv, condition))
}

/// Cholesky factor `L` (lower triangular, `A = L L^T`) of a symmetric
/// positive definite matrix. Fails with the index of the first
/// non-positive leading minor.
pub fn cholesky_lower(a: &Mat) -> Result<Mat, LinAlgError> {
    if a.rows != a.cols {
        return Err(LinAlgError::Shape(format!(
            "cholesky_lower needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(LinAlgError::NotPositiveDefinite { index: i });
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule for the weight
/// `exp(-x^2)` on the real line: `∫ f(x) e^{-x^2} dx ≈ Σ w_i f(x_i)`.
///
/// Newton iteration on the orthonormal Hermite recurrence; nodes are
/// returned in increasing order.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature rule needs at least one node");
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^{-1/4}
    const MAX_ITER: usize = 64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[n - 1],
            3 => 1.91 * z - 0.91 * nodes[n - 2],
            _ => 2.0 * z - nodes[n - i + 1],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..MAX_ITER {
            // Evaluate the orthonormal Hermite polynomial and derivative.
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * (1.0 + z.abs()) {
                converged = true;
                break;
            }
        }
        assert!(converged, "Gauss-Hermite Newton iteration failed for n={n}");
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        weights[n - 1 - i] = 2.0 / (pp * pp);
        weights[i] = weights[n - 1 - i];
    }
    (nodes, weights)
}
