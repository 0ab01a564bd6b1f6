//! Water-filling for the sum-distortion determinant maximization, plus
//! brute-force oracles for the sum and vector criteria.

use crate::error::{Error, Result};
use crate::maxdet::{sym_basis, sym_from_coords, AffineSym, MaxDet};
use crate::model::{AuxRates, DistortionCriterion, RemoteProblem};
use crate::symcore::{loewner_leq, Matrix, Spectrum, SymMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct WaterFillResult {
    pub level: f64,
    pub components: Vec<f64>,
    pub value: f64,
    pub active: Vec<usize>,
}

/// Relative slack under which a budget that falls short of the floors by
/// rounding is treated as exactly tight.
const BUDGET_SLACK: f64 = 1e-12;

fn fill(alpha_inv: &[f64], budget: f64) -> Result<(f64, Vec<f64>, Vec<usize>)> {
    if alpha_inv.is_empty() {
        return Err(Error::InvalidParameter("no components to fill".into()));
    }
    if alpha_inv.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::InvalidParameter("floors must be positive and finite".into()));
    }
    if !budget.is_finite() {
        return Err(Error::InvalidParameter(format!("budget {budget} is not finite")));
    }
    let total: f64 = alpha_inv.iter().sum();
    let mut budget = budget;
    if budget < total {
        if total - budget > BUDGET_SLACK * total.max(1.0) {
            return Err(Error::InfeasibleBudget {
                deficit: total - budget,
            });
        }
        budget = total;
    }
    let mut sorted = alpha_inv.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let mut tail: f64 = sorted.iter().sum();
    let mut level = sorted[0];
    for m in 1..=k {
        tail -= sorted[m - 1];
        let xi = (budget - tail) / m as f64;
        if m == k || xi <= sorted[m] {
            level = xi.max(sorted[0]);
            break;
        }
    }
    let components: Vec<f64> = alpha_inv.iter().map(|&b| level.max(b)).collect();
    let active = alpha_inv
        .iter()
        .enumerate()
        .filter(|(_, &b)| level > b)
        .map(|(i, _)| i)
        .collect();
    Ok((level, components, active))
}

/// Solves `Σ_k max(ξ, b_k) = budget` exactly by a sorted breakpoint scan.
pub fn water_level(alpha_inv: &[f64], budget: f64) -> Result<WaterFillResult> {
    let (level, components, active) = fill(alpha_inv, budget)?;
    let value = components.iter().product();
    Ok(WaterFillResult {
        level,
        components,
        value,
        active,
    })
}

/// Spectrum of `Γ⁻ᵀ M(r) Γ⁻¹`.
pub fn alpha_spectrum(p: &RemoteProblem, r: &AuxRates) -> Result<Spectrum> {
    let m = p.information(r)?;
    Ok(m.congruence(&p.gamma_inv().transpose()).eig())
}

/// The water-filling value including the `|Γ|⁻²` factor.
pub fn omega(p: &RemoteProblem, r: &AuxRates, d: f64) -> Result<WaterFillResult> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidDistortion(d));
    }
    let spec = alpha_spectrum(p, r)?;
    if spec.min() <= 0.0 {
        return Err(Error::SingularInput("information matrix is not positive definite".into()));
    }
    let floors: Vec<f64> = spec.values.iter().map(|a| 1.0 / a).collect();
    let mut res = water_level(&floors, d)?;
    res.value /= p.gamma_det() * p.gamma_det();
    Ok(res)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaMethod {
    /// Simplex grid plus pairwise-transfer refinement in the eigenbasis.
    EigenGrid,
    /// The target matrix itself is optimal.
    Exact,
    /// Log-det barrier; global for this convex program up to `gap`.
    Barrier,
}

#[derive(Clone, Debug)]
pub struct ThetaEstimate {
    pub value: f64,
    pub certificate: SymMatrix,
    pub method: ThetaMethod,
    pub gap: f64,
}

/// Direct maximization of `|Σ_d|` over `Σ_d ⪰ M(r)⁻¹` under the criterion.
///
/// `grid` is the number of simplex divisions per axis for the sum
/// criterion, which is limited to three dimensions.
pub fn theta_oracle(
    p: &RemoteProblem,
    r: &AuxRates,
    c: &DistortionCriterion,
    grid: usize,
) -> Result<ThetaEstimate> {
    c.validate()?;
    let floor = p.information(r)?.inverse()?;
    let gdet2 = p.gamma_det() * p.gamma_det();
    let k = p.k();
    match c {
        DistortionCriterion::Matrix(target) => {
            if target.dim() != k {
                return Err(Error::DimMismatch {
                    expected: k,
                    found: target.dim(),
                });
            }
            let diff = target.sub(&floor).min_eigenvalue();
            if !loewner_leq(&floor, target, 1e-12 * target.max_abs().max(1.0))? {
                return Err(Error::InfeasibleBudget { deficit: -diff });
            }
            Ok(ThetaEstimate {
                value: target.det(),
                certificate: target.clone(),
                method: ThetaMethod::Exact,
                gap: 0.0,
            })
        }
        DistortionCriterion::Sum(d) => sum_oracle(p, &floor, *d, grid, gdet2),
        DistortionCriterion::Vector(caps) => {
            if caps.len() != k {
                return Err(Error::DimMismatch {
                    expected: k,
                    found: caps.len(),
                });
            }
            vector_oracle(p, &floor, caps, gdet2)
        }
    }
}

fn sum_oracle(p: &RemoteProblem, floor: &SymMatrix, d: f64, grid: usize, gdet2: f64) -> Result<ThetaEstimate> {
    let k = p.k();
    if k > 3 {
        return Err(Error::InvalidParameter("grid oracle supports at most three dimensions".into()));
    }
    if grid == 0 {
        return Err(Error::InvalidParameter("grid must be positive".into()));
    }
    let weighted = floor.congruence(p.gamma());
    let spec = weighted.eig();
    let base = spec.values.clone();
    let surplus = d - base.iter().sum::<f64>();
    if surplus < -BUDGET_SLACK * d.max(1.0) {
        return Err(Error::InfeasibleBudget { deficit: -surplus });
    }
    let surplus = surplus.max(0.0);
    let objective = |t: &[f64]| -> f64 { base.iter().zip(t).map(|(b, ti)| (b + ti).ln()).sum() };

    let mut best = vec![0.0; k];
    best[0] = surplus;
    let mut best_val = objective(&best);
    for_each_composition(grid, k, &mut Vec::with_capacity(k), &mut |idx| {
        let t: Vec<f64> = idx.iter().map(|&i| surplus * i as f64 / grid as f64).collect();
        let v = objective(&t);
        if v > best_val {
            best_val = v;
            best = t;
        }
    });

    let mut h = surplus / grid as f64;
    while h > 1e-15 * surplus.max(1.0) {
        let mut improved = false;
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let step = h.min(best[i]);
                if step <= 0.0 {
                    continue;
                }
                let mut t = best.clone();
                t[i] -= step;
                t[j] += step;
                let v = objective(&t);
                if v > best_val {
                    best_val = v;
                    best = t;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }

    let xi: Vec<f64> = base.iter().zip(&best).map(|(b, t)| b + t).collect();
    let inner = Spectrum {
        values: xi.clone(),
        basis: spec.basis,
    }
    .reconstruct();
    let certificate = inner.congruence(p.gamma_inv());
    Ok(ThetaEstimate {
        value: xi.iter().product::<f64>() / gdet2,
        certificate,
        method: ThetaMethod::EigenGrid,
        gap: 0.0,
    })
}

fn for_each_composition(total: usize, parts: usize, prefix: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if parts == 1 {
        prefix.push(total);
        f(prefix);
        prefix.pop();
        return;
    }
    for i in 0..=total {
        prefix.push(i);
        for_each_composition(total - i, parts - 1, prefix, f);
        prefix.pop();
    }
}

fn vector_oracle(p: &RemoteProblem, floor: &SymMatrix, caps: &[f64], gdet2: f64) -> Result<ThetaEstimate> {
    let k = p.k();
    let weighted = floor.congruence(p.gamma());
    let slack: Vec<f64> = caps.iter().zip(weighted.diagonal()).map(|(d, c)| d - c).collect();
    let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
    if min_slack < -BUDGET_SLACK * caps.iter().fold(1.0f64, |a, b| a.max(*b)) {
        return Err(Error::InfeasibleBudget { deficit: -min_slack });
    }
    if min_slack <= 1e-14 {
        return Ok(ThetaEstimate {
            value: weighted.det() / gdet2,
            certificate: floor.clone(),
            method: ThetaMethod::Barrier,
            gap: f64::INFINITY,
        });
    }
    let basis = sym_basis(k);
    let mut constraints = vec![AffineSym {
        base: Matrix::zeros(k, k),
        coeffs: basis.clone(),
    }];
    for (i, s) in slack.iter().enumerate() {
        let coeffs = basis.iter().map(|e| -e[(i, i)]).collect();
        constraints.push(AffineSym::scalar(*s, coeffs));
    }
    let prob = MaxDet {
        n: basis.len(),
        objective: vec![(
            1.0,
            AffineSym {
                base: weighted.matrix().clone(),
                coeffs: basis,
            },
        )],
        constraints,
    };
    let eps = 0.5 * min_slack;
    let mut x0 = vec![0.0; prob.n];
    let mut pos = 0;
    for i in 0..k {
        x0[pos] = eps;
        pos += k - i;
    }
    let sol = prob.solve(&x0, 1e-11)?;
    let inner = SymMatrix::symmetrized(weighted.matrix() + sym_from_coords(k, &sol.x));
    Ok(ThetaEstimate {
        value: sol.value.exp() / gdet2,
        certificate: inner.congruence(p.gamma_inv()),
        method: ThetaMethod::Barrier,
        gap: sol.gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn isotropic(gamma: f64) -> RemoteProblem {
        RemoteProblem::new(
            SymMatrix::identity(2),
            Matrix::identity(2, 2),
            vec![1.0, 1.0],
            Matrix::identity(2, 2) * gamma,
        )
        .unwrap()
    }

    #[test]
    fn water_level_examples() {
        let w = water_level(&[1.0, 1.0, 1.0], 6.0).unwrap();
        assert_eq!((w.level, w.value), (2.0, 8.0));
        assert_eq!(w.components, vec![2.0, 2.0, 2.0]);

        let w = water_level(&[1.0, 4.0], 7.0).unwrap();
        assert_eq!((w.level, w.value), (3.0, 12.0));
        assert_eq!(w.components, vec![3.0, 4.0]);
        assert_eq!(w.active, vec![0]);

        let w = water_level(&[1.0, 4.0], 5.0).unwrap();
        assert_eq!(w.components, vec![1.0, 4.0]);
        assert_eq!(w.value, 4.0);
        assert!(w.level <= 1.0);
        assert!(w.active.is_empty());

        assert!(matches!(
            water_level(&[1.0, 4.0], 4.0),
            Err(Error::InfeasibleBudget { deficit }) if deficit == 1.0
        ));
    }

    #[test]
    fn omega_examples() {
        let p = RemoteProblem::new(
            SymMatrix::identity(1),
            Matrix::from_element(1, 1, 1.0),
            vec![1.0],
            Matrix::from_element(1, 1, 2.0),
        )
        .unwrap();
        let r = AuxRates::new(vec![1.0]).unwrap();
        let w = omega(&p, &r, 3.0).unwrap();
        assert!((w.value - 3.0 / 4.0).abs() < 1e-15);

        let p = isotropic(1.0);
        let r = AuxRates::new(vec![50.0, 50.0]).unwrap();
        let w = omega(&p, &r, 2.0).unwrap();
        assert!((w.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sum_oracle_alpha_hand_case() {
        // Σ_X = diag(1, 4) with a silent encoder gives floors (1, 4).
        let p = RemoteProblem::new(
            SymMatrix::from_diagonal(&[1.0, 4.0]),
            Matrix::zeros(1, 2),
            vec![1.0],
            Matrix::identity(2, 2),
        )
        .unwrap();
        let est = theta_oracle(&p, &AuxRates::zeros(1), &DistortionCriterion::Sum(7.0), 50).unwrap();
        assert!((est.value - 12.0).abs() < 1e-9);
        let k1 = RemoteProblem::new(
            SymMatrix::identity(1),
            Matrix::from_element(1, 1, 1.0),
            vec![1.0],
            Matrix::identity(1, 1),
        )
        .unwrap();
        let est = theta_oracle(&k1, &AuxRates::new(vec![0.3]).unwrap(), &DistortionCriterion::Sum(1.5), 10).unwrap();
        assert!((est.value - 1.5).abs() < 1e-12);
    }

    #[test]
    fn vector_caps_at_sum_argmax_reproduce_sum_value() {
        let p = RemoteProblem::new(
            SymMatrix::from_row_major(2, &[1.5, 0.4, 0.4, 1.0]).unwrap(),
            Matrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 1.0]),
            vec![0.5, 0.8],
            Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.3]),
        )
        .unwrap();
        let r = AuxRates::new(vec![0.4, 0.9]).unwrap();
        let sum = theta_oracle(&p, &r, &DistortionCriterion::Sum(2.5), 200).unwrap();
        let caps = sum.certificate.congruence(p.gamma()).diagonal();
        let vec = theta_oracle(&p, &r, &DistortionCriterion::Vector(caps), 0).unwrap();
        assert!((vec.value - sum.value).abs() < 1e-8 * sum.value);
        let w = omega(&p, &r, 2.5).unwrap();
        assert!((w.value - sum.value).abs() < 1e-9 * sum.value);
    }

    #[test]
    fn matrix_oracle_is_target_determinant() {
        let p = isotropic(1.0);
        let r = AuxRates::new(vec![1.0, 1.0]).unwrap();
        let target = SymMatrix::identity(2);
        let est = theta_oracle(&p, &r, &DistortionCriterion::Matrix(target), 0).unwrap();
        assert_eq!(est.value, 1.0);
        let tight = SymMatrix::identity(2).scale(0.1);
        assert!(theta_oracle(&p, &r, &DistortionCriterion::Matrix(tight), 0).is_err());
    }
}
