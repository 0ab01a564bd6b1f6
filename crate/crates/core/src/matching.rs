//! Thresholds below which the remote problem's inner and outer bounds
//! coincide, and a grid scanner for the monotone-decrease (MD) condition:
//! `e^{-2 r_l} ω(Γ, D, r)` nonincreasing in each `r_l`.
//!
//! `Υ_l` is evaluated at the canonical Householder rotation for every axis
//! `k` and optionally at random rotations of the complement of that axis.
//! The `k`-th column of any admissible rotation is `â_lᵀ/‖â_l‖`, so the
//! objective is in fact the same for every admissible rotation; the random
//! search is kept as an empirical check of that invariance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{conditional_covariance, AuxRates, RemoteProblem};
use crate::symcore::{householder_to_axis, Matrix, SymMatrix};
use crate::waterfill::omega;

pub const DEFAULT_SCAN_RMAX: f64 = 8.0;
pub const MD_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct RowData {
    pub a_hat: Vec<f64>,
    pub norm_sq: f64,
    /// `σ²_{N_l} / ‖â_l‖²`; `None` for an encoder whose row vanishes.
    pub tau: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SpectrumLimits {
    pub alpha_max_star: f64,
    pub alpha_min_star: f64,
    pub rows: Vec<RowData>,
    /// `Γ⁻ᵀ M* Γ⁻¹` at full precision.
    pub c_star: SymMatrix,
}

pub fn spectrum_limits(p: &RemoteProblem) -> SpectrumLimits {
    let ginv = p.gamma_inv();
    let c_star = p.full_information().congruence(&ginv.transpose());
    let spec = c_star.eig();
    let a_hat = p.a() * ginv;
    let rows = (0..p.l())
        .map(|l| {
            let row: Vec<f64> = a_hat.row(l).iter().copied().collect();
            let norm_sq: f64 = row.iter().map(|x| x * x).sum();
            let tau = (norm_sq > 0.0).then(|| p.noise_vars()[l] / norm_sq);
            RowData {
                a_hat: row,
                norm_sq,
                tau,
            }
        })
        .collect();
    SpectrumLimits {
        alpha_max_star: spec.max(),
        alpha_min_star: spec.min(),
        rows,
        c_star,
    }
}

#[derive(Clone, Debug)]
pub struct UpsilonEstimate {
    /// Best objective value found; a lower bound on `Υ_l`.
    pub value: f64,
    /// Value at the canonical rotation (maximized over `k`).
    pub canonical: f64,
    /// `1/χ*_k`, the cheap lower bound.
    pub floor: f64,
    pub samples: usize,
    /// Whether the value is known to equal `Υ_l` exactly.
    pub exact: bool,
}

fn upsilon_at(c_star: &SymMatrix, t: &Matrix, k: usize, alpha_max: f64) -> (f64, f64) {
    let rotated = c_star.congruence(&t.transpose());
    let chi = rotated.get(k, k);
    let off: f64 = (0..rotated.dim())
        .filter(|&j| j != k)
        .map(|j| rotated.get(k, j).powi(2))
        .sum();
    let value = (1.0 + off / (alpha_max * alpha_max)) / (chi - off / alpha_max);
    (value, chi)
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let g = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Rotation fixing axis `k` and acting as `q` on the remaining axes.
fn embed_fixing(k: usize, q: &Matrix) -> Matrix {
    let n = q.nrows() + 1;
    let others: Vec<usize> = (0..n).filter(|&i| i != k).collect();
    let mut t = Matrix::zeros(n, n);
    t[(k, k)] = 1.0;
    for (a, &i) in others.iter().enumerate() {
        for (b, &j) in others.iter().enumerate() {
            t[(i, j)] = q[(a, b)];
        }
    }
    t
}

pub fn upsilon(p: &RemoteProblem, l: usize, refine: usize, seed: u64) -> Result<UpsilonEstimate> {
    if l >= p.l() {
        return Err(Error::DimMismatch {
            expected: p.l(),
            found: l + 1,
        });
    }
    let lim = spectrum_limits(p);
    let row = &lim.rows[l];
    if row.norm_sq == 0.0 {
        return Err(Error::DegenerateInput(format!("encoder {l} does not observe the source")));
    }
    let k_dim = p.k();
    let amax = lim.alpha_max_star;
    let mut canonical = f64::NEG_INFINITY;
    let mut floor = f64::NEG_INFINITY;
    let mut bases = Vec::with_capacity(k_dim);
    for k in 0..k_dim {
        let t = householder_to_axis(&row.a_hat, k)?;
        let (v, chi) = upsilon_at(&lim.c_star, &t, k, amax);
        canonical = canonical.max(v);
        floor = floor.max(1.0 / chi);
        bases.push(t);
    }
    let mut best = canonical;
    if refine > 0 && k_dim > 1 {
        let refined = (0..refine)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                let k = i % k_dim;
                let q = random_orthogonal(k_dim - 1, &mut rng);
                let t = &bases[k] * embed_fixing(k, &q);
                upsilon_at(&lim.c_star, &t, k, amax).0
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        best = best.max(refined);
    }
    Ok(UpsilonEstimate {
        value: best,
        canonical,
        floor,
        samples: refine,
        exact: true,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thm6Thresholds {
    pub full: Option<f64>,
    pub simplified: f64,
}

pub fn threshold_thm6(p: &RemoteProblem, refine: usize, seed: u64) -> Result<Thm6Thresholds> {
    let lim = spectrum_limits(p);
    let k = p.k() as f64;
    let amax = lim.alpha_max_star;
    let simplified = (k + 1.0) / amax;
    let full = if lim.rows.iter().all(|r| r.norm_sq > 0.0) {
        let mut min_u = f64::INFINITY;
        for l in 0..p.l() {
            min_u = min_u.min(upsilon(p, l, refine, seed)?.value);
        }
        Some(k / amax + min_u)
    } else {
        None
    };
    Ok(Thm6Thresholds { full, simplified })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thm7Threshold {
    pub value: f64,
    pub tau_star: f64,
}

pub fn threshold_thm7(p: &RemoteProblem) -> Result<Thm7Threshold> {
    let lim = spectrum_limits(p);
    let mut tau_star = f64::INFINITY;
    for (l, row) in lim.rows.iter().enumerate() {
        let tau = row
            .tau
            .ok_or_else(|| Error::DegenerateInput(format!("encoder {l} does not observe the source")))?;
        tau_star = tau_star.min(tau);
    }
    let a = lim.alpha_max_star;
    let value = p.k() as f64 / a + ((1.0 + 4.0 * a * tau_star).sqrt() - 1.0) / (2.0 * a);
    Ok(Thm7Threshold { value, tau_star })
}

#[derive(Clone, Debug)]
pub struct MdScan {
    pub holds: bool,
    /// Largest increase of `e^{-2 r_l} ω` between axis neighbours, floored at 0.
    pub worst_violation: f64,
    pub witness: AuxRates,
    pub points_in_region: usize,
    pub pairs_checked: usize,
}

/// Checks the MD condition on the grid `{0, h, ..., r_max}^L`, `grid` points
/// per axis, restricted to rates whose water-filling floors fit in `d`.
pub fn md_scan(p: &RemoteProblem, d: f64, grid: usize, r_max: f64) -> Result<MdScan> {
    if grid == 0 || !(r_max.is_finite() && r_max >= 0.0) {
        return Err(Error::InvalidParameter("grid must be positive and r_max finite".into()));
    }
    let floor = conditional_covariance(p)?.congruence(p.gamma()).trace();
    if !(d > floor) {
        return Err(Error::InfeasibleDistortion(format!(
            "sum distortion {d} does not exceed the floor {floor}"
        )));
    }
    let l = p.l();
    let total = grid
        .checked_pow(l as u32)
        .filter(|&t| t <= 50_000_000)
        .ok_or_else(|| Error::InvalidParameter("scan grid is too large".into()))?;
    let step = if grid > 1 { r_max / (grid - 1) as f64 } else { 0.0 };
    let coords = |mut idx: usize| -> Vec<usize> {
        let mut c = vec![0; l];
        for ci in c.iter_mut() {
            *ci = idx % grid;
            idx /= grid;
        }
        c
    };
    let values: Vec<Option<f64>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let r: Vec<f64> = coords(idx).iter().map(|&i| i as f64 * step).collect();
            let r = AuxRates::new(r).ok()?;
            omega(p, &r, d).ok().map(|w| w.value)
        })
        .collect();
    let mut worst = 0.0f64;
    let mut witness = vec![0.0; l];
    let mut pairs = 0;
    let mut stride = 1;
    for axis in 0..l {
        for idx in 0..total {
            let c = coords(idx);
            if c[axis] + 1 >= grid {
                continue;
            }
            let (Some(w0), Some(w1)) = (values[idx], values[idx + stride]) else { continue };
            let r0 = c[axis] as f64 * step;
            let r1 = (c[axis] + 1) as f64 * step;
            let inc = (-2.0 * r1).exp() * w1 - (-2.0 * r0).exp() * w0;
            pairs += 1;
            if inc > worst {
                worst = inc;
                witness = c.iter().map(|&i| i as f64 * step).collect();
            }
        }
        stride *= grid;
    }
    Ok(MdScan {
        holds: worst <= MD_TOLERANCE,
        worst_violation: worst,
        witness: AuxRates::new(witness)?,
        points_in_region: values.iter().filter(|v| v.is_some()).count(),
        pairs_checked: pairs,
    })
}
