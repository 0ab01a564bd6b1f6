//! Problem definitions.
//!
//! A [`RemoteProblem`] observes a hidden Gaussian vector `X` through
//! `Y = A X + N` at `L` separate encoders. A [`MultiterminalProblem`] encodes
//! the observations `Y` themselves; it carries an explicit diagonal split
//! `Σ_Y = Σ_X + Σ_N` so that it can be mapped onto a remote problem.
//!
//! Auxiliary rates `r_l` (nats) index Gaussian test channels. A zero rate
//! means the encoder sends nothing, which is represented by an exact zero
//! precision rather than a large variance.

pub mod json;

use crate::error::{Error, Result};
use crate::symcore::{general_det, general_inverse, Matrix, SymMatrix};

#[derive(Clone, Debug)]
pub struct RemoteProblem {
    sigma_x: SymMatrix,
    a: Matrix,
    noise_vars: Vec<f64>,
    gamma: Matrix,
    sigma_x_inv: SymMatrix,
    gamma_inv: Matrix,
    gamma_det: f64,
}

impl RemoteProblem {
    pub fn new(sigma_x: SymMatrix, a: Matrix, noise_vars: Vec<f64>, gamma: Matrix) -> Result<Self> {
        let k = sigma_x.dim();
        let l = noise_vars.len();
        if l == 0 {
            return Err(Error::InvalidProblem("at least one encoder is required".into()));
        }
        if a.nrows() != l || a.ncols() != k {
            return Err(Error::InvalidProblem(format!(
                "observation matrix is {}x{}, expected {l}x{k}",
                a.nrows(),
                a.ncols()
            )));
        }
        if gamma.nrows() != k || gamma.ncols() != k {
            return Err(Error::InvalidProblem(format!(
                "weight matrix is {}x{}, expected {k}x{k}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        if a.iter().chain(gamma.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        if let Some((i, v)) = noise_vars
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidProblem(format!("noise variance {i} is {v}")));
        }
        if sigma_x.min_eigenvalue() <= 0.0 {
            return Err(Error::SingularInput("source covariance is not positive definite".into()));
        }
        let sigma_x_inv = sigma_x.inverse()?;
        let gamma_det = general_det(&gamma);
        if gamma_det == 0.0 || !gamma_det.is_finite() {
            return Err(Error::SingularInput("weight matrix is singular".into()));
        }
        let gamma_inv = general_inverse(&gamma)?;
        Ok(Self {
            sigma_x,
            a,
            noise_vars,
            gamma,
            sigma_x_inv,
            gamma_inv,
            gamma_det,
        })
    }

    pub fn k(&self) -> usize {
        self.sigma_x.dim()
    }

    pub fn l(&self) -> usize {
        self.noise_vars.len()
    }

    pub fn sigma_x(&self) -> &SymMatrix {
        &self.sigma_x
    }

    pub fn sigma_x_inv(&self) -> &SymMatrix {
        &self.sigma_x_inv
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn noise_vars(&self) -> &[f64] {
        &self.noise_vars
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    pub fn gamma_inv(&self) -> &Matrix {
        &self.gamma_inv
    }

    pub fn gamma_det(&self) -> f64 {
        self.gamma_det
    }

    pub fn with_gamma(&self, gamma: Matrix) -> Result<Self> {
        Self::new(self.sigma_x.clone(), self.a.clone(), self.noise_vars.clone(), gamma)
    }

    /// `Σ_X⁻¹ + Aᵀ diag(q) A` for an arbitrary diagonal precision `q`.
    pub fn information_with(&self, q: &[f64]) -> SymMatrix {
        let k = self.k();
        let mut m = self.sigma_x_inv.matrix().clone();
        for (l, &ql) in q.iter().enumerate() {
            if ql == 0.0 {
                continue;
            }
            for i in 0..k {
                let ai = self.a[(l, i)] * ql;
                for j in 0..k {
                    m[(i, j)] += ai * self.a[(l, j)];
                }
            }
        }
        SymMatrix::symmetrized(m)
    }

    /// `M(r) = Σ_X⁻¹ + Aᵀ Σ_{N(r)}⁻¹ A`, the posterior information matrix.
    pub fn information(&self, r: &AuxRates) -> Result<SymMatrix> {
        self.check_rates(r)?;
        Ok(self.information_with(&test_channel_precision(&self.noise_vars, r.as_slice())))
    }

    /// Information with every encoder at full precision (the `r → ∞` limit).
    pub fn full_information(&self) -> SymMatrix {
        let q: Vec<f64> = self.noise_vars.iter().map(|s| 1.0 / s).collect();
        self.information_with(&q)
    }

    pub fn check_rates(&self, r: &AuxRates) -> Result<()> {
        if r.len() != self.l() {
            return Err(Error::DimMismatch {
                expected: self.l(),
                found: r.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MultiterminalProblem {
    sigma_y: SymMatrix,
    split: Vec<f64>,
    gamma: Matrix,
    sigma_x: SymMatrix,
}

impl MultiterminalProblem {
    pub fn new(sigma_y: SymMatrix, split: Vec<f64>, gamma: Matrix) -> Result<Self> {
        let l = sigma_y.dim();
        if split.len() != l {
            return Err(Error::DimMismatch {
                expected: l,
                found: split.len(),
            });
        }
        if gamma.nrows() != l || gamma.ncols() != l {
            return Err(Error::InvalidProblem(format!(
                "weight matrix is {}x{}, expected {l}x{l}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        if gamma.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite weight entry".into()));
        }
        if let Some((i, v)) = split.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidProblem(format!("split variance {i} is {v}")));
        }
        if sigma_y.min_eigenvalue() <= 0.0 {
            return Err(Error::SingularInput("observation covariance is not positive definite".into()));
        }
        let sigma_x = sigma_y.add_diagonal(&split.iter().map(|v| -v).collect::<Vec<_>>());
        if sigma_x.min_eigenvalue() <= 0.0 {
            return Err(Error::SingularSplit);
        }
        let det = general_det(&gamma);
        if det == 0.0 || !det.is_finite() {
            return Err(Error::SingularInput("weight matrix is singular".into()));
        }
        Ok(Self {
            sigma_y,
            split,
            gamma,
            sigma_x,
        })
    }

    /// Split `Σ_N = δ Γ⁻²` for a diagonal weight matrix `Γ`.
    pub fn with_weighted_split(sigma_y: SymMatrix, gamma_weights: &[f64], delta: f64) -> Result<Self> {
        if gamma_weights.iter().any(|g| !(g.is_finite() && *g != 0.0)) {
            return Err(Error::InvalidWeights);
        }
        let split = gamma_weights.iter().map(|g| delta / (g * g)).collect();
        let gamma = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(gamma_weights));
        Self::new(sigma_y, split, gamma)
    }

    pub fn l(&self) -> usize {
        self.sigma_y.dim()
    }

    pub fn sigma_y(&self) -> &SymMatrix {
        &self.sigma_y
    }

    pub fn split(&self) -> &[f64] {
        &self.split
    }

    pub fn sigma_n(&self) -> SymMatrix {
        SymMatrix::from_diagonal(&self.split)
    }

    pub fn sigma_x(&self) -> &SymMatrix {
        &self.sigma_x
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    pub fn with_split(&self, split: Vec<f64>) -> Result<Self> {
        Self::new(self.sigma_y.clone(), split, self.gamma.clone())
    }

    pub fn with_gamma(&self, gamma: Matrix) -> Result<Self> {
        Self::new(self.sigma_y.clone(), self.split.clone(), gamma)
    }

    /// Diagonal of `Γ` when `Γ` is diagonal.
    pub fn diagonal_weights(&self) -> Option<Vec<f64>> {
        let l = self.l();
        for i in 0..l {
            for j in 0..l {
                if i != j && self.gamma[(i, j)] != 0.0 {
                    return None;
                }
            }
        }
        Some((0..l).map(|i| self.gamma[(i, i)]).collect())
    }

    pub fn check_rates(&self, r: &AuxRates) -> Result<()> {
        if r.len() != self.l() {
            return Err(Error::DimMismatch {
                expected: self.l(),
                found: r.len(),
            });
        }
        Ok(())
    }
}

/// Nonnegative auxiliary rates in nats, one per encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxRates(Vec<f64>);

impl AuxRates {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = r.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidAuxRate { index, value });
        }
        Ok(Self(r))
    }

    pub fn zeros(l: usize) -> Self {
        Self(vec![0.0; l])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Clone, Debug)]
pub enum DistortionCriterion {
    Matrix(SymMatrix),
    Vector(Vec<f64>),
    Sum(f64),
}

impl DistortionCriterion {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Matrix(m) => {
                if m.min_eigenvalue() <= 0.0 {
                    return Err(Error::InvalidDistortion(m.min_eigenvalue()));
                }
            }
            Self::Vector(d) => {
                if let Some(&v) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::InvalidDistortion(v));
                }
            }
            Self::Sum(d) => {
                if !(d.is_finite() && *d > 0.0) {
                    return Err(Error::InvalidDistortion(*d));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub margin: f64,
}

/// Test-channel precision `(1 - e^{-2r_l}) / σ²_l`, exactly zero at `r_l = 0`.
pub fn test_channel_precision(noise_vars: &[f64], r: &[f64]) -> Vec<f64> {
    noise_vars
        .iter()
        .zip(r)
        .map(|(s, &rl)| if rl == 0.0 { 0.0 } else { -(-2.0 * rl).exp_m1() / s })
        .collect()
}

/// `(Σ_X⁻¹ + Aᵀ Σ_N⁻¹ A)⁻¹`.
pub fn conditional_covariance(p: &RemoteProblem) -> Result<SymMatrix> {
    p.full_information().inverse()
}

pub fn noise_precision(p: &RemoteProblem, r: &AuxRates) -> Result<SymMatrix> {
    p.check_rates(r)?;
    Ok(SymMatrix::from_diagonal(&test_channel_precision(p.noise_vars(), r.as_slice())))
}

/// Estimation error covariance `M(r)⁻¹` of the MMSE decoder.
pub fn error_covariance(p: &RemoteProblem, r: &AuxRates) -> Result<SymMatrix> {
    p.information(r)?.inverse()
}

pub fn feasibility(p: &RemoteProblem, c: &DistortionCriterion) -> Result<Feasibility> {
    c.validate()?;
    let cond = conditional_covariance(p)?;
    let margin = match c {
        DistortionCriterion::Matrix(sd) => {
            if sd.dim() != p.k() {
                return Err(Error::DimMismatch {
                    expected: p.k(),
                    found: sd.dim(),
                });
            }
            sd.sub(&cond).min_eigenvalue()
        }
        DistortionCriterion::Vector(d) => {
            if d.len() != p.k() {
                return Err(Error::DimMismatch {
                    expected: p.k(),
                    found: d.len(),
                });
            }
            let w = cond.congruence(p.gamma()).diagonal();
            d.iter().zip(&w).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min)
        }
        DistortionCriterion::Sum(d) => d - cond.congruence(p.gamma()).trace(),
    };
    Ok(Feasibility {
        feasible: margin > 0.0,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::loewner_leq;
    use proptest::prelude::*;

    fn scalar() -> RemoteProblem {
        RemoteProblem::new(
            SymMatrix::identity(1),
            Matrix::from_element(1, 1, 1.0),
            vec![1.0],
            Matrix::identity(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn conditional_covariance_examples() {
        assert_eq!(conditional_covariance(&scalar()).unwrap().get(0, 0), 0.5);

        let sx = SymMatrix::from_row_major(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let p = RemoteProblem::new(sx.clone(), Matrix::zeros(3, 2), vec![1.0; 3], Matrix::identity(2, 2)).unwrap();
        let c = conditional_covariance(&p).unwrap();
        assert!((c.matrix() - sx.matrix()).amax() < 1e-14);

        let p = RemoteProblem::new(
            SymMatrix::identity(1),
            Matrix::from_column_slice(2, 1, &[1.0, 1.0]),
            vec![1.0, 1.0],
            Matrix::identity(1, 1),
        )
        .unwrap();
        assert!((conditional_covariance(&p).unwrap().get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn noise_precision_examples() {
        let p = scalar();
        assert_eq!(noise_precision(&p, &AuxRates::zeros(1)).unwrap().get(0, 0), 0.0);
        let big = noise_precision(&p, &AuxRates::new(vec![50.0]).unwrap()).unwrap();
        assert!((big.get(0, 0) - 1.0).abs() < 1e-15);
        let half = noise_precision(&p, &AuxRates::new(vec![2f64.sqrt().ln()]).unwrap()).unwrap();
        assert!((half.get(0, 0) - 0.5).abs() < 1e-15);
        assert!(matches!(
            AuxRates::new(vec![-0.1]),
            Err(Error::InvalidAuxRate { index: 0, .. })
        ));
    }

    #[test]
    fn feasibility_examples() {
        let p = scalar();
        let f = feasibility(&p, &DistortionCriterion::Sum(0.6)).unwrap();
        assert!(f.feasible && (f.margin - 0.1).abs() < 1e-15);
        let f = feasibility(&p, &DistortionCriterion::Sum(0.5)).unwrap();
        assert!(!f.feasible && f.margin == 0.0);
        let target = conditional_covariance(&p).unwrap().add(&SymMatrix::identity(1));
        let f = feasibility(&p, &DistortionCriterion::Matrix(target)).unwrap();
        assert!(f.feasible && (f.margin - 1.0).abs() < 1e-15);
    }

    #[test]
    fn multiterminal_split_validation() {
        let sy = SymMatrix::from_row_major(2, &[1.0, 0.5, 0.5, 1.0]).unwrap();
        assert!(MultiterminalProblem::new(sy.clone(), vec![0.2, 0.2], Matrix::identity(2, 2)).is_ok());
        assert!(matches!(
            MultiterminalProblem::new(sy.clone(), vec![0.6, 0.6], Matrix::identity(2, 2)),
            Err(Error::SingularSplit)
        ));
        let mp = MultiterminalProblem::with_weighted_split(sy, &[1.0, 2.0], 0.2).unwrap();
        assert_eq!(mp.split(), &[0.2, 0.05]);
        assert_eq!(mp.diagonal_weights(), Some(vec![1.0, 2.0]));
    }

    fn remote_strategy() -> impl Strategy<Value = RemoteProblem> {
        (1usize..4, 1usize..5).prop_flat_map(|(k, l)| {
            (
                proptest::collection::vec(-1.0f64..1.0, k * k),
                proptest::collection::vec(-1.5f64..1.5, l * k),
                proptest::collection::vec(0.2f64..2.0, l),
            )
                .prop_map(move |(g, a, n)| {
                    let g = Matrix::from_row_slice(k, k, &g);
                    let sx = SymMatrix::symmetrized(&g * g.transpose()).add(&SymMatrix::identity(k).scale(0.3));
                    RemoteProblem::new(sx, Matrix::from_row_slice(l, k, &a), n, Matrix::identity(k, k)).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn observing_never_increases_uncertainty(p in remote_strategy()) {
            let c = conditional_covariance(&p).unwrap();
            let tol = 1e-9 * c.sub(p.sigma_x()).max_abs().max(1.0);
            prop_assert!(loewner_leq(&c, p.sigma_x(), tol).unwrap());
        }

        #[test]
        fn precision_monotone(s in 0.1f64..5.0, r in 0.0f64..5.0, dr in 0.0f64..1.0) {
            let a = test_channel_precision(&[s], &[r])[0];
            let b = test_channel_precision(&[s], &[r + dr])[0];
            prop_assert!(b >= a);
        }

        #[test]
        fn split_reconstruction_exact(d1 in 0.05f64..0.4, d2 in 0.05f64..0.4) {
            let sy = SymMatrix::from_row_major(2, &[1.0, 0.4, 0.4, 1.5]).unwrap();
            let a = MultiterminalProblem::new(sy.clone(), vec![d1, d2], Matrix::identity(2, 2)).unwrap();
            let b = MultiterminalProblem::new(sy.clone(), vec![d2, d1], Matrix::identity(2, 2)).unwrap();
            prop_assert_eq!(a.sigma_y(), b.sigma_y());
            let rec = a.sigma_x().add(&a.sigma_n());
            prop_assert!((rec.matrix() - sy.matrix()).amax() <= 1e-15);
        }
    }
}
