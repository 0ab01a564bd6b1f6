//! Small determinant-maximization programs solved by a log-det barrier
//! method with damped Newton steps.
//!
//! maximize `Σ_i w_i log det F_i(x)` subject to `G_j(x) ⪰ 0`,
//! with every `F_i`, `G_j` affine and symmetric in `x`.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{Error, Result};
use crate::symcore::Matrix;

/// `base + Σ_k x_k coeffs[k]`.
#[derive(Clone, Debug)]
pub struct AffineSym {
    pub base: Matrix,
    pub coeffs: Vec<Matrix>,
}

impl AffineSym {
    pub fn eval(&self, x: &[f64]) -> Matrix {
        let mut m = self.base.clone();
        for (c, &xk) in self.coeffs.iter().zip(x) {
            if xk != 0.0 {
                m += c * xk;
            }
        }
        m
    }

    /// Scalar affine function as a 1×1 block.
    pub fn scalar(base: f64, coeffs: Vec<f64>) -> Self {
        Self {
            base: Matrix::from_element(1, 1, base),
            coeffs: coeffs.into_iter().map(|c| Matrix::from_element(1, 1, c)).collect(),
        }
    }
}

/// Basis `E_ij` (i ≤ j) of symmetric `n×n` matrices, row by row.
pub fn sym_basis(n: usize) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut e = Matrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            out.push(e);
        }
    }
    out
}

/// Symmetric matrix from coordinates in the [`sym_basis`] ordering.
pub fn sym_from_coords(n: usize, x: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = x[k];
            m[(j, i)] = x[k];
            k += 1;
        }
    }
    m
}

pub struct MaxDet {
    pub n: usize,
    pub objective: Vec<(f64, AffineSym)>,
    pub constraints: Vec<AffineSym>,
}

#[derive(Clone, Debug)]
pub struct MaxDetSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub gap: f64,
}

struct TermEval {
    logdet: f64,
    w: Vec<Matrix>,
}

fn eval_term(a: &AffineSym, x: &[f64], need_derivs: bool) -> Option<TermEval> {
    let m = a.eval(x);
    let ch = Cholesky::<f64, Dyn>::new(m)?;
    let l = ch.l_dirty();
    let mut logdet = 0.0;
    for i in 0..l.nrows() {
        logdet += 2.0 * l[(i, i)].ln();
    }
    if !logdet.is_finite() {
        return None;
    }
    let w = if need_derivs {
        a.coeffs.iter().map(|c| ch.solve(c)).collect()
    } else {
        Vec::new()
    };
    Some(TermEval { logdet, w })
}

fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

impl MaxDet {
    fn barrier(&self, x: &[f64], t: f64) -> Option<f64> {
        let mut v = 0.0;
        for (w, a) in &self.objective {
            v += t * w * eval_term(a, x, false)?.logdet;
        }
        for g in &self.constraints {
            v += eval_term(g, x, false)?.logdet;
        }
        Some(v)
    }

    fn derivs(&self, x: &[f64], t: f64) -> Option<(DVector<f64>, Matrix)> {
        let n = self.n;
        let mut grad = DVector::zeros(n);
        let mut hess = Matrix::zeros(n, n);
        let terms = self
            .objective
            .iter()
            .map(|(w, a)| (t * w, a))
            .chain(self.constraints.iter().map(|g| (1.0, g)));
        for (c, a) in terms {
            let te = eval_term(a, x, true)?;
            for k in 0..n {
                grad[k] += c * te.w[k].trace();
                for l in k..n {
                    let h = c * trace_product(&te.w[k], &te.w[l]);
                    hess[(k, l)] += h;
                    if l != k {
                        hess[(l, k)] += h;
                    }
                }
            }
        }
        Some((grad, hess))
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.objective
            .iter()
            .map(|(w, a)| w * eval_term(a, x, false).map_or(f64::NAN, |t| t.logdet))
            .sum()
    }

    /// Runs the barrier method from a strictly feasible `x0` until the
    /// barrier duality-gap bound falls below `gap_tol`.
    pub fn solve(&self, x0: &[f64], gap_tol: f64) -> Result<MaxDetSolution> {
        if x0.len() != self.n {
            return Err(Error::DimMismatch {
                expected: self.n,
                found: x0.len(),
            });
        }
        let m_total: usize = self.constraints.iter().map(|g| g.base.nrows()).sum();
        let mut x = x0.to_vec();
        if self.barrier(&x, 1.0).is_none() {
            return Err(Error::InvalidParameter("starting point is not strictly feasible".into()));
        }
        let mut t = 1.0;
        loop {
            let last = m_total as f64 / t <= gap_tol || t > 1e15;
            self.centre(&mut x, t, 1e-6);
            let gap = m_total as f64 / t;
            if last {
                return Ok(MaxDetSolution {
                    value: self.value(&x),
                    x,
                    gap,
                });
            }
            t *= 50.0;
        }
    }

    fn centre(&self, x: &mut Vec<f64>, t: f64, dec_tol: f64) {
        for _ in 0..200 {
            let Some((g, h)) = self.derivs(x, t) else { return };
            let Some(ch) = Cholesky::new(h) else { return };
            let dx = ch.solve(&g);
            let dec = g.dot(&dx);
            if !(dec > dec_tol) {
                return;
            }
            if dec < 1e-4 {
                // Quadratic region: the barrier value is too large to resolve the increase.
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + d).collect();
                if self.barrier(&trial, t).is_some() {
                    *x = trial;
                    continue;
                }
            }
            let f0 = self.barrier(x, t).unwrap_or(f64::NEG_INFINITY);
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-16 {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + s * d).collect();
                if let Some(f1) = self.barrier(&trial, t) {
                    if f1 >= f0 + 0.25 * s * dec {
                        *x = trial;
                        moved = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !moved {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_capped_logdet() {
        // maximize log det X subject to tr X <= 3, X ⪰ 0: optimum X = I.
        let basis = sym_basis(3);
        let tr: Vec<f64> = basis.iter().map(|e| -e.trace()).collect();
        let prob = MaxDet {
            n: basis.len(),
            objective: vec![(1.0, AffineSym { base: Matrix::zeros(3, 3), coeffs: basis.clone() })],
            constraints: vec![AffineSym::scalar(3.0, tr)],
        };
        let x0 = [0.5, 0.0, 0.0, 0.5, 0.0, 0.5];
        let sol = prob.solve(&x0, 1e-11).unwrap();
        let x = sym_from_coords(3, &sol.x);
        assert!((x - Matrix::identity(3, 3)).amax() < 1e-9);
        assert!(sol.value.abs() < 1e-9);
    }

    #[test]
    fn rejects_infeasible_start() {
        let prob = MaxDet {
            n: 1,
            objective: vec![(1.0, AffineSym::scalar(0.0, vec![1.0]))],
            constraints: vec![AffineSym::scalar(1.0, vec![-1.0])],
        };
        assert!(prob.solve(&[2.0], 1e-10).is_err());
        let sol = prob.solve(&[0.5], 1e-12).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-10);
    }
}

