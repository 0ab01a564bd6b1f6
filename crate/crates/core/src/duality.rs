//! The correspondence between a multiterminal problem with split
//! `Σ_Y = Σ_X + Σ_N` and a remote problem with `K = L`, `A = I`.
//!
//! With `Ã = (Σ_X⁻¹ + Σ_N⁻¹)⁻¹ Σ_N⁻¹` and `B = Σ_N + Σ_N Σ_X⁻¹ Σ_N`, a
//! multiterminal distortion matrix `Σ_d` corresponds to the remote matrix
//! `Ã (Σ_d + B) Ãᵀ`, and weighted criteria pick up the offset `ΓBΓᵀ`.
//!
//! Multiterminal bounds are evaluated natively from `Σ_Y` and the test
//! channel `U_l = Y_l + V_l` with `Var(V_l) = σ²_{N_l} / (e^{2r_l} - 1)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{AuxRates, DistortionCriterion, MultiterminalProblem, RemoteProblem};
use crate::regions::{BoundMode, RegionSpec, Subset, MAX_ENUMERATED_ENCODERS};
use crate::symcore::{general_det, general_inverse, Matrix, SymMatrix};

#[derive(Clone, Debug)]
pub struct DualityData {
    pub a_tilde: Matrix,
    pub a_tilde_inv: Matrix,
    pub b_mat: SymMatrix,
    pub b_diag: Vec<f64>,
    pub b_tilde: SymMatrix,
    pub b_tilde_diag: Vec<f64>,
    pub sigma_tilde_n: SymMatrix,
}

impl DualityData {
    pub fn a_tilde_det(&self) -> f64 {
        general_det(&self.a_tilde)
    }
}

pub fn tilde_transform(mp: &MultiterminalProblem) -> Result<DualityData> {
    let sx_inv = mp.sigma_x().inverse().map_err(|_| Error::SingularSplit)?;
    let n = mp.split();
    let sn_inv: Vec<f64> = n.iter().map(|v| 1.0 / v).collect();
    let sigma_tilde_n = sx_inv.add_diagonal(&sn_inv).inverse().map_err(|_| Error::SingularSplit)?;
    let l = mp.l();
    let a_tilde = Matrix::from_fn(l, l, |i, j| sigma_tilde_n.get(i, j) * sn_inv[j]);
    let a_tilde_inv = general_inverse(&a_tilde).map_err(|_| Error::SingularSplit)?;
    let b_mat = SymMatrix::symmetrized(Matrix::from_fn(l, l, |i, j| {
        n[i] * sx_inv.get(i, j) * n[j] + if i == j { n[i] } else { 0.0 }
    }));
    let check = sigma_tilde_n.congruence(&a_tilde_inv);
    let resid = (check.matrix() - b_mat.matrix()).amax();
    if !(resid <= 1e-9 * b_mat.max_abs() && b_mat.min_eigenvalue() > 0.0) {
        return Err(Error::SingularSplit);
    }
    let b_tilde = b_mat.congruence(mp.gamma());
    Ok(DualityData {
        a_tilde,
        a_tilde_inv,
        b_diag: b_mat.diagonal(),
        b_tilde_diag: b_tilde.diagonal(),
        b_mat,
        b_tilde,
        sigma_tilde_n,
    })
}

#[derive(Clone, Debug)]
pub struct RemoteTransform {
    pub problem: RemoteProblem,
    pub criterion: DistortionCriterion,
    pub data: DualityData,
}

/// The equivalent remote problem: `Σ_X` implied by the split, `A = I`,
/// noise variances equal to the split and weights `ΓÃ⁻¹`.
pub fn remote_problem(mp: &MultiterminalProblem, data: &DualityData) -> Result<RemoteProblem> {
    let l = mp.l();
    RemoteProblem::new(
        mp.sigma_x().clone(),
        Matrix::identity(l, l),
        mp.split().to_vec(),
        mp.gamma() * &data.a_tilde_inv,
    )
}

pub fn to_remote(mp: &MultiterminalProblem, c: &DistortionCriterion) -> Result<RemoteTransform> {
    c.validate()?;
    let data = tilde_transform(mp)?;
    let problem = remote_problem(mp, &data)?;
    let l = mp.l();
    let criterion = match c {
        DistortionCriterion::Matrix(sd) => {
            if sd.dim() != l {
                return Err(Error::DimMismatch {
                    expected: l,
                    found: sd.dim(),
                });
            }
            DistortionCriterion::Matrix(sd.add(&data.b_mat).congruence(&data.a_tilde))
        }
        DistortionCriterion::Vector(d) => {
            if d.len() != l {
                return Err(Error::DimMismatch {
                    expected: l,
                    found: d.len(),
                });
            }
            DistortionCriterion::Vector(d.iter().zip(&data.b_tilde_diag).map(|(a, b)| a + b).collect())
        }
        DistortionCriterion::Sum(d) => DistortionCriterion::Sum(d + data.b_tilde.trace()),
    };
    Ok(RemoteTransform {
        problem,
        criterion,
        data,
    })
}

/// Test-channel precision `(e^{2r_l} - 1) / σ²_{N_l}` of `V_l`.
pub fn mt_channel_precision(split: &[f64], r: &[f64]) -> Vec<f64> {
    split
        .iter()
        .zip(r)
        .map(|(s, &rl)| if rl == 0.0 { 0.0 } else { (2.0 * rl).exp_m1() / s })
        .collect()
}

struct MtEvaluator<'a> {
    r: &'a [f64],
    v: Vec<f64>,
    sy_inv: SymMatrix,
    logdet_full: f64,
    /// `log|Σ_Y + B| - log|Σ_Y|`.
    outer_offset: f64,
}

impl<'a> MtEvaluator<'a> {
    fn new(mp: &MultiterminalProblem, r: &'a AuxRates, need_outer: bool) -> Result<Self> {
        mp.check_rates(r)?;
        let sy_inv = mp.sigma_y().inverse()?;
        let v = mt_channel_precision(mp.split(), r.as_slice());
        let logdet_full = sy_inv.add_diagonal(&v).logdet()?;
        let outer_offset = if need_outer {
            let data = tilde_transform(mp)?;
            mp.sigma_y().add(&data.b_mat).logdet()? - mp.sigma_y().logdet()?
        } else {
            0.0
        };
        Ok(Self {
            r: r.as_slice(),
            v,
            sy_inv,
            logdet_full,
            outer_offset,
        })
    }

    fn eval(&self, s: Subset, mode: BoundMode) -> Result<f64> {
        let v_sc: Vec<f64> = self
            .v
            .iter()
            .enumerate()
            .map(|(l, &x)| if s.contains(l) { 0.0 } else { x })
            .collect();
        let logdet_sc = self.sy_inv.add_diagonal(&v_sc).logdet()?;
        Ok(match mode {
            BoundMode::Inner => 0.5 * (self.logdet_full - logdet_sc),
            BoundMode::Outer { theta } => {
                let total: f64 = self.r.iter().sum();
                0.5 * (self.outer_offset + 2.0 * total - theta.ln() - logdet_sc).max(0.0)
            }
        })
    }
}

/// Native multiterminal bound. In outer mode `theta` is `|Σ_d + B|`.
pub fn mt_rate_bound(mp: &MultiterminalProblem, r: &AuxRates, s: Subset, mode: BoundMode) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let BoundMode::Outer { theta } = mode {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidTheta(theta));
        }
    }
    let ev = MtEvaluator::new(mp, r, matches!(mode, BoundMode::Outer { .. }))?;
    ev.eval(s, mode)
}

pub fn mt_region_spec(mp: &MultiterminalProblem, r: &AuxRates, mode: BoundMode) -> Result<RegionSpec> {
    let l = mp.l();
    if l > MAX_ENUMERATED_ENCODERS {
        return Err(Error::SubsetExplosion(l));
    }
    if let BoundMode::Outer { theta } = mode {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidTheta(theta));
        }
    }
    let ev = MtEvaluator::new(mp, r, matches!(mode, BoundMode::Outer { .. }))?;
    let mut bounds = vec![0.0];
    bounds.extend(
        (1..1u32 << l)
            .into_par_iter()
            .map(|m| ev.eval(Subset(m), mode))
            .collect::<Result<Vec<f64>>>()?,
    );
    RegionSpec::new(l, mode.into(), bounds)
}

/// `(Σ_Y⁻¹ + Σ_V⁻¹)⁻¹`, the error covariance of `Y` given all `U`.
pub fn mt_error_covariance(mp: &MultiterminalProblem, r: &AuxRates) -> Result<SymMatrix> {
    mp.check_rates(r)?;
    let v = mt_channel_precision(mp.split(), r.as_slice());
    mp.sigma_y().inverse()?.add_diagonal(&v).inverse()
}
