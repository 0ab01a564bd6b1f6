//! Sum rate of cyclic-shift-invariant sources under a sum-distortion
//! criterion.
//!
//! The noise split is `Σ_N = εI`, so every quantity is a function of the
//! eigenvalues `μ_l` of `Σ_Y` and a common rate `r` per encoder. Writing
//! `a_l = 1 - ε/μ_l` and `x = e^{2r}`, the distortion reached at `r` is
//! `π(r) - tr B = Σ εμ_l / (μ_l (x - 1) + ε)`; this form is used
//! throughout because `π(r)` and `tr B` separately blow up as `ε → μ_min`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::symcore::SymMatrix;

/// Relative gap below which two eigenvalues count as one.
const DISTINCT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct CyclicInstance {
    mu: Vec<f64>,
    epsilon: f64,
    mu_tilde: f64,
}

impl CyclicInstance {
    /// Checks shift invariance of `sigma_y` and diagonalizes it.
    pub fn new(sigma_y: &SymMatrix, epsilon: f64) -> Result<Self> {
        let l = sigma_y.dim();
        let scale = sigma_y.max_abs().max(1.0);
        let mut residual = 0.0f64;
        for i in 0..l {
            for j in 0..l {
                residual = residual.max((sigma_y.get((i + 1) % l, (j + 1) % l) - sigma_y.get(i, j)).abs());
            }
        }
        if residual > 1e-9 * scale {
            return Err(Error::NotShiftInvariant { residual });
        }
        Self::from_eigenvalues(sigma_y.eig().values, epsilon)
    }

    /// `ε = μ_min (1 - 1e-9)`, the practical stand-in for the excluded
    /// endpoint `ε = μ_min`.
    pub fn with_default_epsilon(sigma_y: &SymMatrix) -> Result<Self> {
        let eps = sigma_y.min_eigenvalue() * (1.0 - 1e-9);
        Self::new(sigma_y, eps)
    }

    pub fn from_eigenvalues(mut mu: Vec<f64>, epsilon: f64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidParameter("no eigenvalues".into()));
        }
        if mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::SingularInput("eigenvalues must be positive".into()));
        }
        mu.sort_by(f64::total_cmp);
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("noise variance {epsilon} must be positive")));
        }
        if let Some(&m) = mu.iter().find(|m| **m == epsilon) {
            return Err(Error::DegenerateEigenvalue { mu: m });
        }
        if epsilon > mu[0] {
            return Err(Error::InvalidParameter(format!(
                "noise variance {epsilon} exceeds the smallest eigenvalue {}",
                mu[0]
            )));
        }
        let mu_max = *mu.last().expect("nonempty");
        let mu_tilde = mu
            .iter()
            .rev()
            .copied()
            .find(|m| mu_max - m > DISTINCT_TOL * mu_max)
            .unwrap_or(mu_max);
        Ok(Self { mu, epsilon, mu_tilde })
    }

    pub fn l(&self) -> usize {
        self.mu.len()
    }

    /// Ascending eigenvalues of `Σ_Y`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Second largest distinct eigenvalue (`μ_max` when all coincide).
    pub fn mu_tilde(&self) -> f64 {
        self.mu_tilde
    }

    pub fn mu_min(&self) -> f64 {
        self.mu[0]
    }

    pub fn mu_max(&self) -> f64 {
        *self.mu.last().expect("nonempty")
    }

    /// `Σ εμ_l / (μ_l - ε)`.
    pub fn tr_b(&self) -> f64 {
        self.mu.iter().map(|m| self.epsilon * m / (m - self.epsilon)).sum()
    }

    /// `log|Σ_Y + B| = Σ log(μ_l² / (μ_l - ε))`.
    pub fn logdet_sy_b(&self) -> f64 {
        self.mu.iter().map(|m| 2.0 * m.ln() - (m - self.epsilon).ln()).sum()
    }

    fn a(&self, l: usize) -> f64 {
        1.0 - self.epsilon / self.mu[l]
    }

    fn check_index(&self, l: usize) -> Result<()> {
        if l >= self.l() {
            return Err(Error::InvalidParameter(format!("index {l} out of range")));
        }
        Ok(())
    }

    /// `β_l(r) = [a_l - a_l² e^{-2r}] / ε`.
    pub fn beta(&self, l: usize, r: f64) -> Result<f64> {
        self.check_index(l)?;
        check_rate(r)?;
        let a = self.a(l);
        Ok(a * (1.0 - a * (-2.0 * r).exp()) / self.epsilon)
    }

    /// `π(r) = Σ 1/β_l(r)`.
    pub fn pi(&self, r: f64) -> Result<f64> {
        (0..self.l()).map(|l| self.beta(l, r).map(|b| 1.0 / b)).sum()
    }

    /// `π(r) - tr B`, the sum distortion reached with common rate `r`.
    pub fn distortion_at(&self, r: f64) -> Result<f64> {
        check_rate(r)?;
        let xm1 = (2.0 * r).exp_m1();
        Ok(self
            .mu
            .iter()
            .map(|m| self.epsilon * m / (m * xm1 + self.epsilon))
            .sum())
    }

    /// `Σ ½ log{(μ_l/ε)(e^{2r} - 1) + 1}`.
    pub fn rate_at(&self, r: f64) -> Result<f64> {
        check_rate(r)?;
        let xm1 = (2.0 * r).exp_m1();
        Ok(self.mu.iter().map(|m| 0.5 * (m / self.epsilon * xm1).ln_1p()).sum())
    }

    /// The common rate at which `π(r) = D + tr B`; zero when `D ≥ tr Σ_Y`.
    pub fn r_star(&self, d: f64) -> Result<f64> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidDistortion(d));
        }
        if self.distortion_at(0.0)? <= d {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0f64, 60.0f64);
        if self.distortion_at(hi)? > d {
            return Err(Error::InvalidDistortion(d));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.distortion_at(mid)? > d {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Water-fills the floors `1/β_l(r)` to the budget `D + tr B` using only
    /// the excess `D - (π(r) - tr B)`. Returns the floors, the common level
    /// and how many of the lowest floors (in `order`) are raised.
    fn fill(&self, d: f64, r: f64) -> Result<Fill> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidDistortion(d));
        }
        check_rate(r)?;
        let excess = d - self.distortion_at(r)?;
        if excess < -1e-12 * d {
            return Err(Error::InfeasibleBudget { deficit: -excess });
        }
        let excess = excess.max(0.0);
        let floors: Vec<f64> = (0..self.l()).map(|l| 1.0 / self.beta(l, r).expect("valid")).collect();
        let mut order: Vec<usize> = (0..self.l()).collect();
        order.sort_by(|&i, &j| floors[i].total_cmp(&floors[j]));
        let mut raised = 1;
        let mut acc = floors[order[0]];
        let level = loop {
            let cand = (excess + acc) / raised as f64;
            if raised < order.len() && cand > floors[order[raised]] {
                acc += floors[order[raised]];
                raised += 1;
            } else {
                break cand.max(floors[order[0]]);
            }
        };
        if excess == 0.0 {
            raised = 0;
        }
        Ok(Fill {
            floors,
            order,
            level,
            raised,
        })
    }

    /// `ω̃(D, r) = Π max(ξ, 1/β_l(r))`.
    pub fn omega_tilde(&self, d: f64, r: f64) -> Result<f64> {
        let f = self.fill(d, r)?;
        Ok(f.order
            .iter()
            .enumerate()
            .map(|(rank, &l)| if rank < f.raised { f.level } else { f.floors[l] })
            .product())
    }

    /// `J̲(D, r) = ½ log[e^{2Lr} |Σ_Y + B| / ω̃(D, r)]`.
    pub fn jbar(&self, d: f64, r: f64) -> Result<f64> {
        let f = self.fill(d, r)?;
        let y = (-2.0 * r).exp();
        let mut total = 0.0;
        for (rank, &l) in f.order.iter().enumerate() {
            let m = self.mu[l];
            total += if rank < f.raised {
                0.5 * (2.0 * r + 2.0 * m.ln() - (m - self.epsilon).ln() - f.level.ln())
            } else {
                0.5 * (2.0 * r + (m / self.epsilon).ln() + (-self.a(l) * y).ln_1p())
            };
        }
        Ok(total)
    }

    /// `J̲(D, r*)`, which equals [`Self::rate_at`] at `r*`.
    pub fn sum_rate_upper(&self, d: f64) -> Result<f64> {
        self.rate_at(self.r_star(d)?)
    }

    /// Minimum of `J̲(D, ·)` over `[r*, r* + span]`: a grid scan, then
    /// golden-section refinement of the best cell.
    pub fn sum_rate_lower(&self, d: f64, span: f64, grid: usize) -> Result<(f64, f64)> {
        let rs = self.r_star(d)?;
        let grid = grid.max(2);
        let h = span / grid as f64;
        let vals: Vec<(f64, f64)> = (0..=grid)
            .into_par_iter()
            .map(|i| {
                let r = rs + h * i as f64;
                (r, self.jbar(d, r).unwrap_or(f64::INFINITY))
            })
            .collect();
        let (mut br, mut bv) = vals.iter().copied().fold((rs, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let (mut a, mut b) = ((br - h).max(rs), br + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let f = |r: f64| self.jbar(d, r).unwrap_or(f64::INFINITY);
        let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
        let (mut f1, mut f2) = (f(x1), f(x2));
        while b - a > 1e-12 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = f(x2);
            }
        }
        for (x, v) in [(x1, f1), (x2, f2)] {
            if v < bv {
                br = x;
                bv = v;
            }
        }
        Ok((br, bv))
    }
}

struct Fill {
    floors: Vec<f64>,
    order: Vec<usize>,
    level: f64,
    raised: usize,
}

fn check_rate(r: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidParameter(format!("rate {r} must be finite and nonnegative")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CyclicThresholds {
    pub s_eps: f64,
    /// Distortion reached at `s(ε)`; always positive in this form.
    pub d_th: f64,
}

/// `s(ε) = ½ log{1 + min([1 - ε(1/μ̃ + 1/μ_max)]⁺, ⅓[1 - 4ε/μ_max]⁺)}`
/// and `D_th = π(s(ε)) - tr B`.
pub fn thresholds_cyclic(ci: &CyclicInstance) -> CyclicThresholds {
    let eps = ci.epsilon();
    let first = (1.0 - eps * (1.0 / ci.mu_tilde() + 1.0 / ci.mu_max())).max(0.0);
    let second = ((1.0 - 4.0 * eps / ci.mu_max()) / 3.0).max(0.0);
    let s_eps = 0.5 * first.min(second).ln_1p();
    CyclicThresholds {
        s_eps,
        d_th: ci.distortion_at(s_eps).expect("s is a valid rate"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeCondition {
    pub satisfied: bool,
    /// Right derivative of `J̲(D, ·)` at `r*`.
    pub derivative: f64,
    pub r_star: f64,
    /// Index (ascending eigenvalue order) of the largest `β_l(r*)`, ties to the larger index.
    pub l1: usize,
}

/// Sign of the right derivative of `J̲(D, r)` at `r = r*`:
/// `Σ_l [x(x - a_l) - a_{l₁}(x - a_{l₁})] / (x - a_l)²`, `x = e^{2r*}`.
pub fn derivative_condition(ci: &CyclicInstance, d: f64) -> Result<DerivativeCondition> {
    let rs = ci.r_star(d)?;
    let mut l1 = 0;
    let mut best = f64::NEG_INFINITY;
    for l in 0..ci.l() {
        let b = ci.beta(l, rs)?;
        if b >= best {
            best = b;
            l1 = l;
        }
    }
    let x = (2.0 * rs).exp();
    let a1 = ci.a(l1);
    let derivative = (0..ci.l())
        .map(|l| {
            let gap = x - ci.a(l);
            (x * gap - a1 * (x - a1)) / (gap * gap)
        })
        .sum::<f64>();
    Ok(DerivativeCondition {
        satisfied: derivative >= 0.0,
        derivative,
        r_star: rs,
        l1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub r: f64,
    pub rate: f64,
    pub distortion: f64,
    /// `r ≥ s(ε)`, where the point is known to lie on the sum-rate curve.
    pub certified: bool,
}

/// `(R(r), D(r))` at `samples` evenly spaced rates in `[r_min, r_max]`.
pub fn parametric_curve(ci: &CyclicInstance, r_min: f64, r_max: f64, samples: usize) -> Result<Vec<CurvePoint>> {
    check_rate(r_min)?;
    check_rate(r_max)?;
    if r_max < r_min {
        return Err(Error::InvalidParameter("empty rate interval".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("at least two samples are required".into()));
    }
    let s = thresholds_cyclic(ci).s_eps;
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let r = r_min + (r_max - r_min) * i as f64 / (samples - 1) as f64;
            Ok(CurvePoint {
                r,
                rate: ci.rate_at(r)?,
                distortion: ci.distortion_at(r)?,
                certified: r >= s,
            })
        })
        .collect()
}
