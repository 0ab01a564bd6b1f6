//! Dense symmetric matrices sized for a handful of encoders.
//!
//! Storage and general (non-symmetric) linear solves come from `nalgebra`;
//! the symmetric eigensolver is a cyclic Jacobi iteration so that spectra,
//! determinants and Loewner tests all agree to working precision.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

const JACOBI_REL_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    m: Matrix,
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored as columns of `basis`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub basis: Matrix,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn reconstruct(&self) -> SymMatrix {
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.values));
        SymMatrix::symmetrized(&self.basis * d * self.basis.transpose())
    }
}

impl SymMatrix {
    /// Validates a square finite matrix that is symmetric up to rounding and
    /// stores its exact symmetric part.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let scale = m.amax().max(1.0);
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_REL_TOL * scale {
                    return Err(Error::InvalidMatrix(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Self::new(Matrix::from_row_slice(dim, dim, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, &data)
    }

    /// Averages `m` with its transpose. Used for results of products that are
    /// symmetric in exact arithmetic.
    pub fn symmetrized(m: Matrix) -> Self {
        let mut m = m;
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: Matrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: Matrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            m: Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.amax()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        Self {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        Self {
            m: &self.m - &other.m,
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        Self { m: &self.m * c }
    }

    pub fn add_diagonal(&self, d: &[f64]) -> SymMatrix {
        let mut m = self.m.clone();
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] += v;
        }
        Self { m }
    }

    /// `g * self * gᵀ`.
    pub fn congruence(&self, g: &Matrix) -> SymMatrix {
        Self::symmetrized(g * &self.m * g.transpose())
    }

    pub fn eig(&self) -> Spectrum {
        jacobi(&self.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eig().max()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }

    /// Product of eigenvalues.
    pub fn det(&self) -> f64 {
        self.eig().values.iter().product()
    }

    /// Sum of log-eigenvalues; fails unless every eigenvalue is positive.
    pub fn logdet(&self) -> Result<f64> {
        let spec = self.eig();
        if spec.min() <= 0.0 {
            return Err(Error::SingularInput(format!(
                "minimum eigenvalue {:e}",
                spec.min()
            )));
        }
        Ok(spec.values.iter().map(|v| v.ln()).sum())
    }

    /// Inverse of a positive definite matrix through its spectrum.
    pub fn inverse(&self) -> Result<SymMatrix> {
        let spec = self.eig();
        if spec.min() <= 0.0 {
            return Err(Error::SingularInput(format!(
                "minimum eigenvalue {:e}",
                spec.min()
            )));
        }
        let inv: Vec<f64> = spec.values.iter().map(|v| 1.0 / v).collect();
        Ok(Spectrum {
            values: inv,
            basis: spec.basis,
        }
        .reconstruct())
    }

    /// Principal submatrix on the given indices.
    pub fn principal(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        let mut m = Matrix::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self.m[(i, j)];
            }
        }
        Self { m }
    }
}

fn jacobi(input: &Matrix) -> Spectrum {
    let n = input.nrows();
    let mut a = input.clone();
    let mut v = Matrix::identity(n, n);
    let norm = a.norm();
    let thresh = JACOBI_REL_TOL * norm;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off.sqrt() <= thresh {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut basis = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let lead = (0..n)
            .map(|k| v[(k, src)])
            .find(|x| x.abs() > 1e-12)
            .unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            basis[(k, col)] = sign * v[(k, src)];
        }
    }
    Spectrum { values, basis }
}

/// `a ⪯ b` up to `tol`: the smallest eigenvalue of `b - a` is at least `-tol`.
pub fn loewner_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(b.sub(a).min_eigenvalue() >= -tol)
}

/// Loewner test with tolerance `1e-9 * max(1, max|b - a|)`.
pub fn loewner_leq_default(a: &SymMatrix, b: &SymMatrix) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = b.sub(a);
    let tol = 1e-9 * diff.max_abs().max(1.0);
    Ok(diff.min_eigenvalue() >= -tol)
}

/// Orthogonal `T` with `v T = |v| e_k` (row vector convention, `k` zero-based).
pub fn householder_to_axis(v: &[f64], k: usize) -> Result<Matrix> {
    let n = v.len();
    if k >= n {
        return Err(Error::DimMismatch {
            expected: n,
            found: k + 1,
        });
    }
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::DegenerateInput("zero vector".into()));
    }
    // Reflect onto -|v| e_k when v_k >= 0 to avoid cancellation, then flip column k.
    let flip = v[k] >= 0.0;
    let mut u = v.to_vec();
    u[k] += if flip { nrm } else { -nrm };
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let mut t = Matrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            t[(i, j)] -= 2.0 * u[i] * u[j] / uu;
        }
    }
    if flip {
        for i in 0..n {
            t[(i, k)] = -t[(i, k)];
        }
    }
    Ok(t)
}

pub fn general_inverse(m: &Matrix) -> Result<Matrix> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularInput("matrix is not invertible".into()))
}

pub fn general_det(m: &Matrix) -> f64 {
    m.determinant()
}
