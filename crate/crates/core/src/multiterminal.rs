//! Sum-rate bounds for the direct multiterminal problem, its matching
//! thresholds, weighted-distortion boundary batches and the two-terminal
//! closed forms.
//!
//! Upper program: minimize `½ log|I + Σ_Y Q|` over diagonal `Q ⪰ 0` with
//! `diag((Σ_Y⁻¹ + Q)⁻¹) ≤ D`. Lower program: minimize
//! `½ log(|Σ_Y + B| / |Σ_d + B|) + Σ r_l` over `r` and `Σ_d ⪰ F(r)` with
//! `diag Σ_d ≤ D`, where `F(r) = (Σ_Y⁻¹ + Σ_V⁻¹)⁻¹`. Substituting
//! `δ_l = σ²_{N_l} e^{-2 r_l}` turns the lower program into a convex
//! determinant maximization, solved directly by [`sum_rate_lower_convex`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::duality::{mt_channel_precision, remote_problem, tilde_transform};
use crate::error::{Error, Result};
use crate::maxdet::{sym_basis, sym_from_coords, AffineSym, MaxDet};
use crate::model::{AuxRates, MultiterminalProblem};
use crate::symcore::{Matrix, SymMatrix};
use crate::waterfill::water_level;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Clone, Copy, Debug)]
pub struct SumRateOptions {
    pub starts: usize,
    pub seed: u64,
    pub step_tol: f64,
}

impl Default for SumRateOptions {
    fn default() -> Self {
        Self {
            starts: 16,
            seed: 0,
            step_tol: 1e-7,
        }
    }
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
fn golden_min(f: &mut dyn FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn check_distortion(mp: &MultiterminalProblem, d: &[f64]) -> Result<()> {
    if d.len() != mp.l() {
        return Err(Error::DimMismatch {
            expected: mp.l(),
            found: d.len(),
        });
    }
    if let Some(&v) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InfeasibleDistortion(format!("distortion {v} must be positive")));
    }
    Ok(())
}

fn rates_from_precision(split: &[f64], q: &[f64]) -> Result<AuxRates> {
    AuxRates::new(split.iter().zip(q).map(|(s, q)| 0.5 * (s * q).ln_1p()).collect())
}

#[derive(Clone, Debug)]
pub struct UpperSolution {
    pub value: f64,
    pub r: AuxRates,
    /// Test-channel precision `Σ_V⁻¹`.
    pub q: Vec<f64>,
    pub achieved: Vec<f64>,
}

struct UpperProgram {
    sy_inv: SymMatrix,
    logdet_sy: f64,
    d: Vec<f64>,
}

impl UpperProgram {
    fn cov(&self, q: &[f64]) -> Option<SymMatrix> {
        self.sy_inv.add_diagonal(q).inverse().ok()
    }

    fn feasible(&self, q: &[f64]) -> bool {
        self.cov(q)
            .is_some_and(|c| c.diagonal().iter().zip(&self.d).all(|(a, b)| a <= b))
    }

    fn objective(&self, q: &[f64]) -> f64 {
        0.5 * (self.sy_inv.add_diagonal(q).logdet().unwrap_or(f64::INFINITY) + self.logdet_sy)
    }

    /// Smallest feasible `t` along `q = t u`, with its objective.
    fn along(&self, u: &[f64]) -> Option<(Vec<f64>, f64)> {
        let scaled = |t: f64| -> Vec<f64> { u.iter().map(|x| x * t).collect() };
        let mut hi = 1.0;
        while !self.feasible(&scaled(hi)) {
            hi *= 2.0;
            if hi > 1e14 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.feasible(&scaled(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let q = scaled(hi);
        let v = self.objective(&q);
        Some((q, v))
    }

    /// Newton solve of `diag((Σ_Y⁻¹ + Q)⁻¹) = D` with `Q ≻ 0`.
    fn corner(&self) -> Option<Vec<f64>> {
        let l = self.d.len();
        let diag0 = self.cov(&vec![0.0; l])?.diagonal();
        let mut q: Vec<f64> = diag0
            .iter()
            .zip(&self.d)
            .map(|(s, d)| (1.0 / d - 1.0 / s).max(1e-3 / d))
            .collect();
        let scale = self.d.iter().fold(0.0f64, |a, b| a.max(*b));
        for _ in 0..200 {
            let f = self.cov(&q)?;
            let phi: Vec<f64> = f.diagonal().iter().zip(&self.d).map(|(a, b)| a - b).collect();
            let norm = phi.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if norm <= 1e-15 * scale {
                return Some(q);
            }
            let jac = Matrix::from_fn(l, l, |i, j| -f.get(i, j).powi(2));
            let rhs = nalgebra::DVector::from_iterator(l, phi.iter().map(|v| -v));
            let dq = jac.lu().solve(&rhs)?;
            let mut s = 1.0;
            loop {
                let trial: Vec<f64> = q.iter().zip(dq.iter()).map(|(a, b)| a + s * b).collect();
                if trial.iter().all(|v| *v > 0.0) {
                    if let Some(ft) = self.cov(&trial) {
                        let nt = ft
                            .diagonal()
                            .iter()
                            .zip(&self.d)
                            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                        if nt < norm {
                            q = trial;
                            break;
                        }
                    }
                }
                s *= 0.5;
                if s < 1e-12 {
                    return None;
                }
            }
        }
        None
    }
}

/// Point of the simplex from stick-breaking coordinates in `[0, 1]^{L-1}`.
fn stick(w: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(w.len() + 1);
    let mut rest = 1.0;
    for &wi in w {
        u.push(rest * wi);
        rest *= 1.0 - wi;
    }
    u.push(rest);
    u
}

/// Upper sum-rate program. The search runs over rays `Q = t u` of the
/// precision simplex, taking the smallest feasible `t` on each ray; the
/// all-constraints-active Newton point is added as a candidate.
pub fn sum_rate_upper(mp: &MultiterminalProblem, d: &[f64], opts: &SumRateOptions) -> Result<UpperSolution> {
    check_distortion(mp, d)?;
    let l = mp.l();
    let prog = UpperProgram {
        sy_inv: mp.sigma_y().inverse()?,
        logdet_sy: mp.sigma_y().logdet()?,
        d: d.to_vec(),
    };
    let finish = |q: Vec<f64>| -> Result<UpperSolution> {
        let achieved = prog.cov(&q).expect("feasible precision").diagonal();
        Ok(UpperSolution {
            value: prog.objective(&q).max(0.0),
            r: rates_from_precision(mp.split(), &q)?,
            q,
            achieved,
        })
    };
    if prog.feasible(&vec![0.0; l]) {
        return finish(vec![0.0; l]);
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let consider = |cand: Option<(Vec<f64>, f64)>, best: &mut Option<(Vec<f64>, f64)>| {
        if let Some((q, v)) = cand {
            if best.as_ref().is_none_or(|b| v < b.1) {
                *best = Some((q, v));
            }
        }
    };
    if let Some(q) = prog.corner() {
        if prog.feasible(&q) {
            let v = prog.objective(&q);
            consider(Some((q, v)), &mut best);
        } else {
            // Rounding may leave the Newton point a hair outside; pull it back along its ray.
            let s: f64 = q.iter().sum();
            let u: Vec<f64> = q.iter().map(|x| x / s).collect();
            consider(prog.along(&u), &mut best);
        }
    }
    if l == 1 {
        consider(prog.along(&[1.0]), &mut best);
    } else {
        let dim = l - 1;
        let grid_pts: Vec<Vec<f64>> = match dim {
            1 => (0..=200).map(|i| vec![i as f64 / 200.0]).collect(),
            2 => (0..=40)
                .flat_map(|i| (0..=40).map(move |j| vec![i as f64 / 40.0, j as f64 / 40.0]))
                .collect(),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                (0..3000).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
            }
        };
        let mut scored: Vec<(Vec<f64>, f64)> = grid_pts
            .par_iter()
            .filter_map(|w| prog.along(&stick(w)).map(|(_, v)| (w.clone(), v)))
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
        let mut starts: Vec<Vec<f64>> = scored.iter().take(opts.starts.div_ceil(2)).map(|s| s.0.clone()).collect();
        while starts.len() < opts.starts.max(1) {
            starts.push((0..dim).map(|_| rng.random::<f64>()).collect());
        }
        let spacing = match dim {
            1 => 1.0 / 200.0,
            2 => 1.0 / 40.0,
            _ => 0.1,
        };
        let results: Vec<Option<(Vec<f64>, f64)>> = starts
            .par_iter()
            .map(|w0| descend_directions(&prog, w0, spacing, opts.step_tol))
            .collect();
        for r in results {
            consider(r, &mut best);
        }
    }
    let (q, _) = best.ok_or_else(|| Error::InfeasibleDistortion("no feasible test channel found".into()))?;
    finish(q)
}

fn descend_directions(prog: &UpperProgram, w0: &[f64], spacing: f64, tol: f64) -> Option<(Vec<f64>, f64)> {
    let eval = |w: &[f64]| prog.along(&stick(w)).map_or(f64::INFINITY, |(_, v)| v);
    let mut w = w0.to_vec();
    let mut val = eval(&w);
    let mut radius = 2.0 * spacing;
    for _ in 0..200 {
        let before = w.clone();
        for i in 0..w.len() {
            let a = (w[i] - radius).max(0.0);
            let b = (w[i] + radius).min(1.0);
            let mut f = |x: f64| {
                let mut t = w.clone();
                t[i] = x;
                eval(&t)
            };
            let (x, fx) = golden_min(&mut f, a, b, tol * 0.1);
            let (fa, fb) = (f(a), f(b));
            let (x, fx) = [(x, fx), (a, fa), (b, fb)]
                .into_iter()
                .fold((w[i], val), |acc, c| if c.1 < acc.1 { c } else { acc });
            w[i] = x;
            val = fx;
        }
        let moved = w.iter().zip(&before).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if moved < tol {
            if radius <= tol {
                break;
            }
            radius *= 0.5;
        }
    }
    prog.along(&stick(&w))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LowerMethod {
    Nested,
    Convex,
}

#[derive(Clone, Debug)]
pub struct LowerSolution {
    pub value: f64,
    pub r: AuxRates,
    pub sigma_d: SymMatrix,
    pub method: LowerMethod,
}

struct LowerProgram {
    sy_inv: SymMatrix,
    split: Vec<f64>,
    b: SymMatrix,
    logdet_syb: f64,
    d: Vec<f64>,
}

impl LowerProgram {
    fn new(mp: &MultiterminalProblem, d: &[f64]) -> Result<Self> {
        let data = tilde_transform(mp)?;
        Ok(Self {
            sy_inv: mp.sigma_y().inverse()?,
            split: mp.split().to_vec(),
            logdet_syb: mp.sigma_y().add(&data.b_mat).logdet()?,
            b: data.b_mat,
            d: d.to_vec(),
        })
    }

    fn floor(&self, r: &[f64]) -> Option<SymMatrix> {
        self.sy_inv.add_diagonal(&mt_channel_precision(&self.split, r)).inverse().ok()
    }

    /// Objective at fixed `r` after maximizing `|Σ_d + B|`.
    fn inner(&self, r: &[f64]) -> Option<(f64, SymMatrix)> {
        let f = self.floor(r)?;
        let l = f.dim();
        let slack: Vec<f64> = self.d.iter().zip(f.diagonal()).map(|(d, c)| d - c).collect();
        let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
        if min_slack < 0.0 {
            return None;
        }
        let rsum: f64 = r.iter().sum();
        let base = f.add(&self.b);
        if min_slack <= 1e-13 * self.d.iter().fold(1.0f64, |a, b| a.max(*b)) {
            let v = 0.5 * (self.logdet_syb - base.logdet().ok()?) + rsum;
            return Some((v, f));
        }
        let basis = sym_basis(l);
        let mut constraints = vec![AffineSym {
            base: Matrix::zeros(l, l),
            coeffs: basis.clone(),
        }];
        for (i, s) in slack.iter().enumerate() {
            constraints.push(AffineSym::scalar(*s, basis.iter().map(|e| -e[(i, i)]).collect()));
        }
        let prob = MaxDet {
            n: basis.len(),
            objective: vec![(
                1.0,
                AffineSym {
                    base: base.matrix().clone(),
                    coeffs: basis,
                },
            )],
            constraints,
        };
        let mut x0 = vec![0.0; prob.n];
        let mut pos = 0;
        for i in 0..l {
            x0[pos] = 0.5 * min_slack;
            pos += l - i;
        }
        let sol = prob.solve(&x0, 1e-11).ok()?;
        let sigma_d = SymMatrix::symmetrized(f.matrix() + sym_from_coords(l, &sol.x));
        Some((0.5 * (self.logdet_syb - sol.value) + rsum, sigma_d))
    }

    fn eval(&self, r: &[f64]) -> f64 {
        self.inner(r).map_or(f64::INFINITY, |v| v.0)
    }
}

/// Nelder–Mead minimization; infinite values mark points outside the domain.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, tol: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f(x0))];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] -= step;
        let mut v = f(&x);
        if !v.is_finite() {
            x[i] = x0[i] + step;
            v = f(&x);
        }
        simplex.push((x, v));
    }
    let mut evals = n + 1;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread < tol && (simplex[n].1 - simplex[0].1).abs() < 1e-15 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let toward = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = toward(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = toward(2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = toward(if fr < simplex[n].1 { 0.5 } else { -0.5 });
            let fc = f(&xc);
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    *x = x.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    *v = f(x);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Lower sum-rate program, solved exactly through its convex form.
pub fn sum_rate_lower(mp: &MultiterminalProblem, d: &[f64], _opts: &SumRateOptions) -> Result<LowerSolution> {
    sum_rate_lower_convex(mp, d)
}

/// Lower sum-rate program by nested optimization. The outer search runs
/// over `x_l = e^{-2 r_l}` by Nelder–Mead with a shrinking log barrier on
/// the distortion caps; each evaluation solves the inner determinant
/// maximization over `Σ_d`. Multi-started from seeded random points;
/// a heuristic optimum, kept as an independent check on the convex form.
pub fn sum_rate_lower_nested(mp: &MultiterminalProblem, d: &[f64], opts: &SumRateOptions) -> Result<LowerSolution> {
    check_distortion(mp, d)?;
    let prog = LowerProgram::new(mp, d)?;
    let l = mp.l();
    let to_r = |x: &[f64]| -> Option<Vec<f64>> {
        x.iter()
            .map(|&v| (v > 0.0 && v <= 1.0).then(|| -0.5 * v.ln()))
            .collect()
    };
    let strict = |x: &[f64]| -> bool {
        to_r(x)
            .and_then(|r| prog.floor(&r))
            .is_some_and(|f| f.diagonal().iter().zip(d).all(|(a, b)| a < b))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .filter_map(|_| {
            let mut x: Vec<f64> = (0..l).map(|_| rng.random_range(0.05..1.0)).collect();
            for _ in 0..200 {
                if strict(&x) {
                    return Some(x);
                }
                x.iter_mut().for_each(|v| *v *= 0.7);
            }
            None
        })
        .collect();
    let runs: Vec<(Vec<f64>, f64)> = starts
        .par_iter()
        .map(|x0| {
            let mut x = x0.clone();
            let mut mu = 1e-2;
            while mu >= 1e-11 {
                let f = |x: &[f64]| -> f64 {
                    let Some(r) = to_r(x) else { return f64::INFINITY };
                    let Some(fl) = prog.floor(&r) else { return f64::INFINITY };
                    let mut bar = 0.0;
                    for (a, b) in fl.diagonal().iter().zip(d) {
                        if a >= b {
                            return f64::INFINITY;
                        }
                        bar -= (b - a).ln();
                    }
                    prog.eval(&r) + mu * bar
                };
                let step = 0.05 * x.iter().copied().fold(1.0f64, f64::min);
                x = nelder_mead(&f, &x, step, opts.step_tol * 1e-2, 2000).0;
                mu *= 0.1;
            }
            let r = to_r(&x).expect("search stays in the unit box");
            let v = prog.eval(&r);
            (r, v)
        })
        .collect();
    let (r, _) = runs
        .into_iter()
        .filter(|r| r.1.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InfeasibleDistortion("no strictly feasible start".into()))?;
    let (value, sigma_d) = prog
        .inner(&r)
        .ok_or_else(|| Error::InfeasibleDistortion("optimizer left the feasible set".into()))?;
    Ok(LowerSolution {
        value: value.max(0.0),
        r: AuxRates::new(r)?,
        sigma_d,
        method: LowerMethod::Nested,
    })
}

/// Lower sum-rate program in the convex `δ` parameterization:
/// maximize `½ log|Σ_d + B| + ½ Σ log δ_l` subject to
/// `[[Σ_d + B, B], [B, B - Diag δ]] ⪰ 0`, `diag Σ_d ≤ D`, `δ_l ≤ σ²_{N_l}`.
pub fn sum_rate_lower_convex(mp: &MultiterminalProblem, d: &[f64]) -> Result<LowerSolution> {
    check_distortion(mp, d)?;
    let l = mp.l();
    let data = tilde_transform(mp)?;
    let b = &data.b_mat;
    let split = mp.split();
    let basis = sym_basis(l);
    let ns = basis.len();
    let n = ns + l;
    let zero_l = Matrix::zeros(l, l);
    let pad = |top_left: &Matrix, bottom_right: &Matrix| -> Matrix {
        let mut m = Matrix::zeros(2 * l, 2 * l);
        m.view_mut((0, 0), (l, l)).copy_from(top_left);
        m.view_mut((l, l), (l, l)).copy_from(bottom_right);
        m
    };
    let mut big_base = Matrix::zeros(2 * l, 2 * l);
    big_base.view_mut((0, 0), (l, l)).copy_from(b.matrix());
    big_base.view_mut((0, l), (l, l)).copy_from(b.matrix());
    big_base.view_mut((l, 0), (l, l)).copy_from(b.matrix());
    big_base.view_mut((l, l), (l, l)).copy_from(b.matrix());
    let mut big_coeffs: Vec<Matrix> = basis.iter().map(|e| pad(e, &zero_l)).collect();
    for i in 0..l {
        let mut e = Matrix::zeros(l, l);
        e[(i, i)] = -1.0;
        big_coeffs.push(pad(&zero_l, &e));
    }
    let mut constraints = vec![
        AffineSym {
            base: big_base,
            coeffs: big_coeffs,
        },
        AffineSym {
            base: zero_l.clone(),
            coeffs: basis.iter().cloned().chain((0..l).map(|_| zero_l.clone())).collect(),
        },
    ];
    for i in 0..l {
        let mut c: Vec<f64> = basis.iter().map(|e| -e[(i, i)]).collect();
        c.extend(std::iter::repeat_n(0.0, l));
        constraints.push(AffineSym::scalar(d[i], c));
        let mut c = vec![0.0; n];
        c[ns + i] = -1.0;
        constraints.push(AffineSym::scalar(split[i], c));
    }
    let mut objective = vec![(
        0.5,
        AffineSym {
            base: b.matrix().clone(),
            coeffs: basis.iter().cloned().chain((0..l).map(|_| zero_l.clone())).collect(),
        },
    )];
    for i in 0..l {
        let mut c = vec![0.0; n];
        c[ns + i] = 1.0;
        objective.push((0.5, AffineSym::scalar(0.0, c)));
    }
    let prob = MaxDet {
        n,
        objective,
        constraints,
    };
    let sd0 = SymMatrix::from_diagonal(&d.iter().map(|v| 0.5 * v).collect::<Vec<_>>());
    let k = sd0.inverse()?.add(&b.inverse()?).inverse()?;
    let delta0 = 0.5 * k.min_eigenvalue().min(split.iter().copied().fold(f64::INFINITY, f64::min));
    let mut x0 = vec![0.0; n];
    let mut pos = 0;
    for i in 0..l {
        x0[pos] = 0.5 * d[i];
        pos += l - i;
    }
    for i in 0..l {
        x0[ns + i] = delta0;
    }
    let sol = prob.solve(&x0, 1e-11)?;
    let sigma_d = SymMatrix::symmetrized(sym_from_coords(l, &sol.x[..ns]));
    let delta = &sol.x[ns..];
    let log_split: f64 = split.iter().map(|s| s.ln()).sum();
    let value = 0.5 * mp.sigma_y().add(b).logdet()? + 0.5 * log_split - sol.value;
    let r = AuxRates::new(
        split
            .iter()
            .zip(delta)
            .map(|(s, dl)| (0.5 * (s / dl).ln()).max(0.0))
            .collect(),
    )?;
    Ok(LowerSolution {
        value: value.max(0.0),
        r,
        sigma_d,
        method: LowerMethod::Convex,
    })
}

#[derive(Clone, Debug)]
pub struct SumRateBounds {
    pub lower: f64,
    pub upper: f64,
    pub argmin_r_lower: AuxRates,
    pub argmin_r_upper: AuxRates,
    pub argmin_sigma_lower: SymMatrix,
    pub gap: f64,
}

pub fn sum_rate_bounds(mp: &MultiterminalProblem, d: &[f64], opts: &SumRateOptions) -> Result<SumRateBounds> {
    let up = sum_rate_upper(mp, d, opts)?;
    let lo = sum_rate_lower(mp, d, opts)?;
    Ok(SumRateBounds {
        lower: lo.value,
        upper: up.value,
        gap: up.value - lo.value,
        argmin_r_lower: lo.r,
        argmin_r_upper: up.r,
        argmin_sigma_lower: lo.sigma_d,
    })
}

#[derive(Clone, Debug)]
pub struct SplitSearch {
    pub problem: MultiterminalProblem,
    pub lower: LowerSolution,
}

/// Searches diagonal splits of `Σ_Y` for the largest convex lower bound.
/// Splits are parameterized as `σ²_{N_l} = t_l / [Σ_Y⁻¹]_ll`, `t ∈ (0, 1)^L`.
pub fn best_split_lower(sigma_y: &SymMatrix, gamma: &Matrix, d: &[f64], grid: usize) -> Result<SplitSearch> {
    let l = sigma_y.dim();
    let caps: Vec<f64> = sigma_y.inverse()?.diagonal().iter().map(|v| 1.0 / v).collect();
    let grid = grid.max(2);
    let eval = |t: &[f64]| -> Option<(f64, MultiterminalProblem, LowerSolution)> {
        if t.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
            return None;
        }
        let split: Vec<f64> = t.iter().zip(&caps).map(|(a, b)| a * b).collect();
        let mp = MultiterminalProblem::new(sigma_y.clone(), split, gamma.clone()).ok()?;
        let lo = sum_rate_lower_convex(&mp, d).ok()?;
        Some((lo.value, mp, lo))
    };
    let total = grid.pow(l as u32);
    let pts: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            (0..l)
                .map(|_| {
                    let i = idx % grid;
                    idx /= grid;
                    (i as f64 + 0.5) / grid as f64
                })
                .collect()
        })
        .collect();
    let scored: Vec<(Vec<f64>, f64)> = pts
        .par_iter()
        .filter_map(|t| eval(t).map(|(v, _, _)| (t.clone(), v)))
        .collect();
    let (mut t, mut best) = scored
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InfeasibleDistortion("no admissible split".into()))?;
    let mut radius = 1.0 / grid as f64;
    for _ in 0..30 {
        let start = best;
        for i in 0..l {
            let a = (t[i] - radius).max(1e-6);
            let b = (t[i] + radius).min(1.0 - 1e-6);
            let mut f = |x: f64| {
                let mut tt = t.clone();
                tt[i] = x;
                eval(&tt).map_or(f64::INFINITY, |v| -v.0)
            };
            let (x, fx) = golden_min(&mut f, a, b, 1e-6);
            if -fx > best {
                best = -fx;
                t[i] = x;
            }
        }
        if best - start <= 1e-12 * best.abs().max(1.0) {
            break;
        }
        radius *= 0.6;
    }
    let (_, problem, lower) = eval(&t).expect("best split stays admissible");
    Ok(SplitSearch { problem, lower })
}

/// `(L+1) μ*_min - tr B̃` with `μ*_min` the smallest eigenvalue of `B̃ = ΓBΓᵀ`.
pub fn threshold_thm12(mp: &MultiterminalProblem) -> Result<f64> {
    let data = tilde_transform(mp)?;
    let mu_min = data.b_tilde.min_eigenvalue();
    Ok((mp.l() as f64 + 1.0) * mu_min - data.b_tilde.trace())
}

fn sqrt_pair(l: usize) -> f64 {
    let l = l as f64;
    (l.sqrt() + (l - 1.0).sqrt()).powi(2)
}

/// Weighted-criterion threshold from the extreme eigenvalues of `Σ_Y`;
/// `+∞` when the denominator vanishes.
pub fn threshold_cor4(sigma_y: &SymMatrix, gamma_weights: &[f64]) -> Result<f64> {
    if gamma_weights.len() != sigma_y.dim() {
        return Err(Error::DimMismatch {
            expected: sigma_y.dim(),
            found: gamma_weights.len(),
        });
    }
    if gamma_weights.iter().any(|g| !(*g >= 1.0) || !g.is_finite()) {
        return Err(Error::InvalidWeights);
    }
    let spec = sigma_y.eig();
    if spec.min() <= 0.0 {
        return Err(Error::SingularInput("observation covariance is not positive definite".into()));
    }
    let (emin, emax) = (spec.min(), spec.max());
    let gmax = gamma_weights.iter().copied().fold(1.0f64, f64::max);
    let denom = emax - emin / (gmax * gmax);
    if denom <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(emax * emin / denom / sqrt_pair(sigma_y.dim()))
}

/// `η_min / (√L + √(L-1))²`.
pub fn zeta(sigma_y: &SymMatrix) -> f64 {
    sigma_y.min_eigenvalue() / sqrt_pair(sigma_y.dim())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoTermSumRate {
    pub in_d: bool,
    pub value: f64,
}

fn check_two(sigma1: f64, sigma2: f64, rho: f64) -> Result<()> {
    if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
        return Err(Error::InvalidParameter("standard deviations must be positive".into()));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidCorrelation(rho));
    }
    Ok(())
}

/// Two-terminal sum rate for unit-free correlation `rho`; `in_d` reports
/// whether the pair of distortions lies in the region where the closed
/// form is the exact sum rate.
pub fn twoterm_sum_rate(sigma1: f64, sigma2: f64, rho: f64, d1: f64, d2: f64) -> Result<TwoTermSumRate> {
    check_two(sigma1, sigma2, rho)?;
    for d in [d1, d2] {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidDistortion(d));
        }
    }
    let (u1, u2) = (d1 / (sigma1 * sigma1), d2 / (sigma2 * sigma2));
    let rho2 = rho * rho;
    let in_d = u1.max(u2) <= 1.0f64.min(rho2 * u1.min(u2) + 1.0 - rho2);
    let x = 1.0 / (u1 * u2);
    let c = 1.0 - rho2;
    let value = 0.5 * (0.5 * c * (x + (x * x + 4.0 * rho2 * x / (c * c)).sqrt())).ln();
    Ok(TwoTermSumRate { in_d, value })
}

/// Boundary of the single-distortion region for encoder `which` (1 or 2),
/// as `(R₁, R₂)` pairs for `s` log-uniform in `[1e-6, 1]`.
pub fn twoterm_region_curve(
    sigma1: f64,
    sigma2: f64,
    rho: f64,
    d_l: f64,
    which: usize,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    check_two(sigma1, sigma2, rho)?;
    if !(d_l > 0.0 && d_l.is_finite()) {
        return Err(Error::InvalidDistortion(d_l));
    }
    if which != 1 && which != 2 {
        return Err(Error::InvalidParameter("encoder must be 1 or 2".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("at least two samples are required".into()));
    }
    let sigma = if which == 1 { sigma1 } else { sigma2 };
    let rho2 = rho * rho;
    let ln_min = 1e-6f64.ln();
    Ok((0..samples)
        .map(|i| {
            let s = (ln_min * (1.0 - i as f64 / (samples - 1) as f64)).exp();
            let own = twoterm_own_rate(sigma, rho2, d_l, s);
            let other = -0.5 * s.ln();
            if which == 1 {
                (own, other)
            } else {
                (other, own)
            }
        })
        .collect())
}

fn twoterm_own_rate(sigma: f64, rho2: f64, d: f64, s: f64) -> f64 {
    let c = 1.0 - rho2;
    let arg = c * sigma * sigma / d * (1.0 + rho2 / c * s);
    0.5 * arg.ln().max(0.0)
}

#[derive(Clone, Debug)]
pub struct BoundaryRow {
    pub gamma: Vec<f64>,
    pub d_upper: f64,
    pub d_lower: f64,
    pub certified: bool,
}

struct InnerRates {
    sy_inv: SymMatrix,
    split: Vec<f64>,
    budget: Vec<f64>,
    l: usize,
}

impl InnerRates {
    fn bound(&self, r: &[f64], s: u32) -> f64 {
        let v = mt_channel_precision(&self.split, r);
        let v_sc: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, &x)| if s >> i & 1 == 1 { 0.0 } else { x })
            .collect();
        let full = self.sy_inv.add_diagonal(&v).logdet().unwrap_or(f64::INFINITY);
        let sc = self.sy_inv.add_diagonal(&v_sc).logdet().unwrap_or(0.0);
        0.5 * (full - sc)
    }

    fn ok(&self, r: &[f64], filter: impl Fn(u32) -> bool) -> bool {
        (1..1u32 << self.l)
            .filter(|&s| filter(s))
            .all(|s| self.bound(r, s) <= self.budget_sum(s) + 1e-12)
    }

    fn budget_sum(&self, s: u32) -> f64 {
        (0..self.l).filter(|&i| s >> i & 1 == 1).map(|i| self.budget[i]).sum()
    }

    /// Largest feasible value of coordinate `j`, if any.
    fn max_coord(&self, r: &[f64], j: usize, cap: f64) -> Option<f64> {
        let mut t = r.to_vec();
        let upper = |t: &[f64]| self.ok(t, |s| s >> j & 1 == 1);
        t[j] = cap;
        let x = if upper(&t) {
            cap
        } else {
            t[j] = 0.0;
            if !upper(&t) {
                return None;
            }
            let (mut lo, mut hi) = (0.0, cap);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                t[j] = mid;
                if upper(&t) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        t[j] = x;
        self.ok(&t, |s| s >> j & 1 == 0).then_some(x)
    }
}

/// For each weight vector, brackets the minimum weighted distortion
/// `Σ γ_l² D_l` reachable at the given rates: `d_upper` from the inner
/// region, `d_lower` from the outer region. `certified` marks rows where
/// `d_upper` lies below the contact threshold `ζ_L`.
pub fn boundary_batch(
    mp: &MultiterminalProblem,
    rate_budget: &[f64],
    weight_grid: &[Vec<f64>],
) -> Result<Vec<BoundaryRow>> {
    let l = mp.l();
    if rate_budget.len() != l {
        return Err(Error::DimMismatch {
            expected: l,
            found: rate_budget.len(),
        });
    }
    if rate_budget.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::InvalidParameter("rates must be finite and nonnegative".into()));
    }
    for g in weight_grid {
        if g.len() != l {
            return Err(Error::DimMismatch {
                expected: l,
                found: g.len(),
            });
        }
        if g.iter().any(|x| !(x.is_finite() && *x >= 1.0)) {
            return Err(Error::InvalidWeights);
        }
    }
    let z = zeta(mp.sigma_y());
    weight_grid
        .par_iter()
        .map(|g| {
            let gamma = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(g));
            let mpg = mp.with_gamma(gamma)?;
            let d_upper = boundary_upper(&mpg, rate_budget, g)?;
            let d_lower = boundary_lower(&mpg, rate_budget)?.min(d_upper);
            Ok(BoundaryRow {
                gamma: g.clone(),
                d_upper,
                d_lower,
                certified: d_upper <= z,
            })
        })
        .collect()
}

fn weighted_trace(sy_inv: &SymMatrix, split: &[f64], g: &[f64], r: &[f64]) -> f64 {
    let f = sy_inv
        .add_diagonal(&mt_channel_precision(split, r))
        .inverse()
        .expect("positive definite posterior");
    f.diagonal().iter().zip(g).map(|(v, w)| v * w * w).sum()
}

fn boundary_upper(mp: &MultiterminalProblem, budget: &[f64], g: &[f64]) -> Result<f64> {
    let l = mp.l();
    let inner = InnerRates {
        sy_inv: mp.sigma_y().inverse()?,
        split: mp.split().to_vec(),
        budget: budget.to_vec(),
        l,
    };
    let cap = 2.0 * budget.iter().copied().fold(0.0f64, f64::max) + 20.0;
    let obj = |r: &[f64]| weighted_trace(&inner.sy_inv, &inner.split, g, r);
    let mut r = vec![0.0; l];
    let mut val = obj(&r);
    for _ in 0..200 {
        let start = val;
        for j in 0..l {
            if let Some(x) = inner.max_coord(&r, j, cap) {
                if x > r[j] {
                    r[j] = x;
                    val = obj(&r);
                }
            }
        }
        for i in 0..l {
            for j in 0..l {
                if i == j {
                    continue;
                }
                let ri = r[i];
                let mut phi = |s: f64| -> f64 {
                    let mut t = r.clone();
                    t[i] = s;
                    match inner.max_coord(&t, j, cap) {
                        Some(x) => {
                            t[j] = x;
                            obj(&t)
                        }
                        None => f64::INFINITY,
                    }
                };
                let n = 16;
                let (mut bs, mut bv) = (ri, val);
                for k in 0..=n {
                    let s = ri * k as f64 / n as f64;
                    let v = phi(s);
                    if v < bv {
                        bs = s;
                        bv = v;
                    }
                }
                let h = ri / n as f64;
                if h > 0.0 {
                    let (s, v) = golden_min(&mut phi, (bs - h).max(0.0), (bs + h).min(ri), 1e-10);
                    if v < bv {
                        bs = s;
                        bv = v;
                    }
                }
                if bv < val {
                    let mut t = r.clone();
                    t[i] = bs;
                    if let Some(x) = inner.max_coord(&t, j, cap) {
                        t[j] = x;
                        r = t;
                        val = obj(&r);
                    }
                }
            }
        }
        if start - val <= 1e-13 * start.abs().max(1e-300) {
            break;
        }
    }
    Ok(val)
}

fn boundary_lower(mp: &MultiterminalProblem, budget: &[f64]) -> Result<f64> {
    let l = mp.l();
    let data = tilde_transform(mp)?;
    let rp = remote_problem(mp, &data)?;
    let sy_inv = mp.sigma_y().inverse()?;
    let offset = mp.sigma_y().add(&data.b_mat).logdet()? - mp.sigma_y().logdet()?;
    let trace_b = data.b_tilde.trace();
    let log_adet2 = 2.0 * data.a_tilde_det().abs().ln();
    let log_gdet2 = 2.0 * rp.gamma_det().abs().ln();
    let split = mp.split().to_vec();

    let dstar = |r: &[f64]| -> f64 {
        let Ok(rates) = AuxRates::new(r.to_vec()) else { return f64::INFINITY };
        let v = mt_channel_precision(&split, r);
        let total: f64 = r.iter().sum();
        let mut log_req = f64::NEG_INFINITY;
        for s in 1..1u32 << l {
            let v_sc: Vec<f64> = v
                .iter()
                .enumerate()
                .map(|(i, &x)| if s >> i & 1 == 1 { 0.0 } else { x })
                .collect();
            let Ok(ld) = sy_inv.add_diagonal(&v_sc).logdet() else { return f64::INFINITY };
            let rs: f64 = (0..l).filter(|&i| s >> i & 1 == 1).map(|i| budget[i]).sum();
            log_req = log_req.max(offset + 2.0 * total - ld - 2.0 * rs);
        }
        let Ok(spec) = crate::waterfill::alpha_spectrum(&rp, &rates) else { return f64::INFINITY };
        let floors: Vec<f64> = spec.values.iter().map(|a| 1.0 / a).collect();
        let target = log_req + log_adet2 + log_gdet2;
        let lo0: f64 = floors.iter().sum();
        let logw = |dd: f64| water_level(&floors, dd).map_or(f64::NEG_INFINITY, |w| w.value.ln());
        if logw(lo0) >= target {
            return lo0 - trace_b;
        }
        let mut hi = 2.0 * lo0;
        while logw(hi) < target {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        let mut lo = lo0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if logw(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi - trace_b
    };

    let cap = 2.0 * budget.iter().copied().fold(0.0f64, f64::max) + 6.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut starts: Vec<Vec<f64>> = vec![budget.to_vec(), vec![0.0; l]];
    for _ in 0..6 {
        starts.push((0..l).map(|_| cap * rng.random::<f64>()).collect());
    }
    let best = starts
        .par_iter()
        .map(|r0| {
            let mut r = r0.clone();
            let mut val = dstar(&r);
            for _ in 0..100 {
                let before = val;
                for j in 0..l {
                    let mut f = |x: f64| {
                        let mut t = r.clone();
                        t[j] = x;
                        dstar(&t)
                    };
                    let n = 24;
                    let (mut bx, mut bv) = (r[j], val);
                    for k in 0..=n {
                        let x = cap * k as f64 / n as f64;
                        let v = f(x);
                        if v < bv {
                            bx = x;
                            bv = v;
                        }
                    }
                    let h = cap / n as f64;
                    let (x, v) = golden_min(&mut f, (bx - h).max(0.0), (bx + h).min(cap), 1e-10);
                    if v < bv {
                        bx = x;
                        bv = v;
                    }
                    r[j] = bx;
                    val = bv;
                }
                if before - val <= 1e-13 * before.abs().max(1e-300) {
                    break;
                }
            }
            val
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best)
}
