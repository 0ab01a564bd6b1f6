//! Rate-bound functions over encoder subsets and the fixed-`r` regions they
//! define.
//!
//! A region is stored as the map `S -> f_S` of lower bounds on
//! `Σ_{l∈S} R_l`. Subsets are bitmasks: bit `l` set means encoder `l`
//! (zero-based) belongs to the subset.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{test_channel_precision, AuxRates, RemoteProblem};
use crate::symcore::{loewner_leq, Matrix, SymMatrix};

pub const MAX_ENUMERATED_ENCODERS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subset(pub u32);

impl Subset {
    pub fn from_indices(idx: &[usize]) -> Self {
        Self(idx.iter().fold(0, |m, &i| m | (1 << i)))
    }

    pub fn contains(self, l: usize) -> bool {
        self.0 >> l & 1 == 1
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn indices(self, l: usize) -> Vec<usize> {
        (0..l).filter(|&i| self.contains(i)).collect()
    }

    pub fn label(self, l: usize) -> String {
        format!("0b{:0width$b}", self.0, width = l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundMode {
    Inner,
    Outer { theta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Inner,
    Outer,
}

impl From<BoundMode> for RegionKind {
    fn from(m: BoundMode) -> Self {
        match m {
            BoundMode::Inner => RegionKind::Inner,
            BoundMode::Outer { .. } => RegionKind::Outer,
        }
    }
}

/// Precomputed pieces shared by every subset at a fixed `r`.
struct BoundEvaluator<'a> {
    p: &'a RemoteProblem,
    r: &'a [f64],
    q: Vec<f64>,
    logdet_full: f64,
}

impl<'a> BoundEvaluator<'a> {
    fn new(p: &'a RemoteProblem, r: &'a AuxRates) -> Result<Self> {
        p.check_rates(r)?;
        let q = test_channel_precision(p.noise_vars(), r.as_slice());
        let logdet_full = p.information_with(&q).logdet()?;
        Ok(Self {
            p,
            r: r.as_slice(),
            q,
            logdet_full,
        })
    }

    fn eval(&self, s: Subset, mode: BoundMode) -> Result<f64> {
        let mut q_sc = self.q.clone();
        let mut rate_s = 0.0;
        for (l, ql) in q_sc.iter_mut().enumerate() {
            if s.contains(l) {
                *ql = 0.0;
                rate_s += self.r[l];
            }
        }
        let logdet_sc = self.p.information_with(&q_sc).logdet()?;
        Ok(match mode {
            BoundMode::Inner => 0.5 * (self.logdet_full + 2.0 * rate_s - logdet_sc),
            BoundMode::Outer { theta } => 0.5 * (2.0 * rate_s - theta.ln() - logdet_sc).max(0.0),
        })
    }
}

fn check_subset(s: Subset, l: usize) -> Result<()> {
    if s.is_empty() {
        return Err(Error::EmptySubset);
    }
    if l < 32 && s.0 >> l != 0 {
        return Err(Error::DimMismatch {
            expected: l,
            found: 32 - s.0.leading_zeros() as usize,
        });
    }
    Ok(())
}

fn check_mode(mode: BoundMode) -> Result<()> {
    if let BoundMode::Outer { theta } = mode {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidTheta(theta));
        }
    }
    Ok(())
}

/// Inner bound `J_S` or clamped outer bound `J̲_S(θ)` at rates `r`.
pub fn rate_bound(p: &RemoteProblem, r: &AuxRates, s: Subset, mode: BoundMode) -> Result<f64> {
    check_subset(s, p.l())?;
    check_mode(mode)?;
    BoundEvaluator::new(p, r)?.eval(s, mode)
}

/// Whether `M(r)⁻¹ ⪯ Σ_d` within `tol`.
pub fn aux_feasible(p: &RemoteProblem, sigma_d: &SymMatrix, r: &AuxRates, tol: f64) -> Result<bool> {
    if sigma_d.dim() != p.k() {
        return Err(Error::DimMismatch {
            expected: p.k(),
            found: sigma_d.dim(),
        });
    }
    let f = p.information(r)?.inverse()?;
    loewner_leq(&f, sigma_d, tol)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSpec {
    l: usize,
    kind: RegionKind,
    bounds: Vec<f64>,
}

impl RegionSpec {
    /// `bounds[mask]` for masks `0..2^l`; entry 0 is ignored and stored as 0.
    pub fn new(l: usize, kind: RegionKind, mut bounds: Vec<f64>) -> Result<Self> {
        if l == 0 || l > MAX_ENUMERATED_ENCODERS {
            return Err(Error::SubsetExplosion(l));
        }
        if bounds.len() != 1 << l {
            return Err(Error::DimMismatch {
                expected: 1 << l,
                found: bounds.len(),
            });
        }
        if let Some(v) = bounds.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("bound {v} is not finite")));
        }
        bounds[0] = 0.0;
        Ok(Self { l, kind, bounds })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn get(&self, s: Subset) -> f64 {
        self.bounds[s.0 as usize]
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RegionSpecFile::from(self)).expect("region serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: RegionSpecFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        f.try_into()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionSpecFile {
    l: usize,
    kind: RegionKind,
    bounds: BTreeMap<String, f64>,
}

impl From<&RegionSpec> for RegionSpecFile {
    fn from(rs: &RegionSpec) -> Self {
        let bounds = (1..1u32 << rs.l)
            .map(|m| (Subset(m).label(rs.l), rs.bounds[m as usize]))
            .collect();
        Self {
            l: rs.l,
            kind: rs.kind,
            bounds,
        }
    }
}

impl TryFrom<RegionSpecFile> for RegionSpec {
    type Error = Error;

    fn try_from(f: RegionSpecFile) -> Result<Self> {
        if f.l == 0 || f.l > MAX_ENUMERATED_ENCODERS {
            return Err(Error::SubsetExplosion(f.l));
        }
        let mut bounds = vec![f64::NAN; 1 << f.l];
        bounds[0] = 0.0;
        for (key, v) in f.bounds {
            let digits = key
                .strip_prefix("0b")
                .ok_or_else(|| Error::InvalidParameter(format!("bad subset key {key}")))?;
            let m = u32::from_str_radix(digits, 2)
                .map_err(|_| Error::InvalidParameter(format!("bad subset key {key}")))?;
            if m == 0 || m as usize >= bounds.len() {
                return Err(Error::InvalidParameter(format!("subset key {key} out of range")));
            }
            bounds[m as usize] = v;
        }
        RegionSpec::new(f.l, f.kind, bounds)
    }
}

/// Evaluates every nonempty subset at fixed `r`.
pub fn region_spec(p: &RemoteProblem, r: &AuxRates, mode: BoundMode) -> Result<RegionSpec> {
    let l = p.l();
    if l > MAX_ENUMERATED_ENCODERS {
        return Err(Error::SubsetExplosion(l));
    }
    check_mode(mode)?;
    let ev = BoundEvaluator::new(p, r)?;
    let mut bounds = vec![0.0];
    bounds.extend(
        (1..1u32 << l)
            .into_par_iter()
            .map(|m| ev.eval(Subset(m), mode))
            .collect::<Result<Vec<f64>>>()?,
    );
    RegionSpec::new(l, mode.into(), bounds)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Negative { set: Subset, value: f64 },
    NotMonotone { subset: Subset, superset: Subset, drop: f64 },
    NotSupermodular { a: Subset, b: Subset, excess: f64 },
}

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks nonnegativity, monotonicity and supermodularity of `f`.
///
/// Up to 8 encoders every incomparable pair is tested; beyond that the
/// equivalent local exchange inequalities are used.
pub fn copolymatroid_audit(rs: &RegionSpec, tol: f64) -> AuditReport {
    let l = rs.l;
    let n = 1u32 << l;
    let f = |m: u32| rs.bounds[m as usize];
    let mut violations = Vec::new();
    for m in 1..n {
        if f(m) < -tol {
            violations.push(Violation::Negative {
                set: Subset(m),
                value: f(m),
            });
        }
        for i in 0..l {
            if m >> i & 1 == 1 {
                let sub = m & !(1 << i);
                if f(sub) > f(m) + tol {
                    violations.push(Violation::NotMonotone {
                        subset: Subset(sub),
                        superset: Subset(m),
                        drop: f(sub) - f(m),
                    });
                }
            }
        }
    }
    if l <= 8 {
        for a in 1..n {
            for b in (a + 1)..n {
                if a & b == a || a & b == b {
                    continue;
                }
                let excess = f(a) + f(b) - f(a & b) - f(a | b);
                if excess > tol {
                    violations.push(Violation::NotSupermodular {
                        a: Subset(a),
                        b: Subset(b),
                        excess,
                    });
                }
            }
        }
    } else {
        for s in 0..n {
            for i in 0..l {
                for j in (i + 1)..l {
                    if s >> i & 1 == 1 || s >> j & 1 == 1 {
                        continue;
                    }
                    let (a, b) = (s | 1 << i, s | 1 << j);
                    let excess = f(a) + f(b) - f(s) - f(a | b);
                    if excess > tol {
                        violations.push(Violation::NotSupermodular {
                            a: Subset(a),
                            b: Subset(b),
                            excess,
                        });
                    }
                }
            }
        }
    }
    AuditReport { violations }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedMin {
    pub value: f64,
    pub vertex: Vec<f64>,
}

fn check_weights(rs: &RegionSpec, w: &[f64]) -> Result<()> {
    if w.len() != rs.l {
        return Err(Error::DimMismatch {
            expected: rs.l,
            found: w.len(),
        });
    }
    if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidParameter("weights must be positive".into()));
    }
    Ok(())
}

/// Minimizes `Σ w_l R_l` over the region by the greedy vertex rule.
///
/// Coordinates are visited by decreasing weight, ties toward the larger
/// index. When the audit fails the greedy vertex is not guaranteed optimal;
/// up to 4 encoders the exhaustive vertex search is used instead.
pub fn min_weighted_sum(rs: &RegionSpec, w: &[f64]) -> Result<WeightedMin> {
    check_weights(rs, w)?;
    let scale = rs.bounds.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    if !copolymatroid_audit(rs, 1e-9 * scale).passed() {
        if rs.l <= 4 {
            return min_weighted_sum_exhaustive(rs, w);
        }
        return Err(Error::NotSupermodular);
    }
    let mut order: Vec<usize> = (0..rs.l).collect();
    order.sort_by(|&i, &j| w[j].total_cmp(&w[i]).then(j.cmp(&i)));
    let mut vertex = vec![0.0; rs.l];
    let mut prefix = 0u32;
    for &i in &order {
        let next = prefix | 1 << i;
        vertex[i] = rs.get(Subset(next)) - rs.get(Subset(prefix));
        prefix = next;
    }
    let value = vertex.iter().zip(w).map(|(r, w)| r * w).sum();
    Ok(WeightedMin { value, vertex })
}

/// Minimizes `Σ w_l R_l` by enumerating every basic solution of the
/// constraint system `{Σ_S R ≥ f_S} ∪ {R ≥ 0}`. Limited to 4 encoders.
pub fn min_weighted_sum_exhaustive(rs: &RegionSpec, w: &[f64]) -> Result<WeightedMin> {
    check_weights(rs, w)?;
    let l = rs.l;
    if l > 4 {
        return Err(Error::SubsetExplosion(l));
    }
    let mut rows: Vec<(Vec<f64>, f64)> = (1..1u32 << l)
        .map(|m| ((0..l).map(|i| (m >> i & 1) as f64).collect(), rs.get(Subset(m))))
        .collect();
    for i in 0..l {
        let mut e = vec![0.0; l];
        e[i] = 1.0;
        rows.push((e, 0.0));
    }
    let scale = rs.bounds.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let mut best: Option<WeightedMin> = None;
    let mut combo: Vec<usize> = (0..l).collect();
    loop {
        let a = Matrix::from_fn(l, l, |i, j| rows[combo[i]].0[j]);
        let b = nalgebra::DVector::from_iterator(l, combo.iter().map(|&c| rows[c].1));
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            let ok = rows
                .iter()
                .all(|(row, rhs)| row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() >= rhs - 1e-9 * scale);
            if ok {
                let value: f64 = x.iter().zip(w).map(|(r, w)| r * w).sum();
                if best.as_ref().is_none_or(|b| value < b.value - 1e-12 * scale) {
                    best = Some(WeightedMin { value, vertex: x });
                }
            }
        }
        if !next_combination(&mut combo, rows.len()) {
            break;
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("region has no vertex".into()))
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Whether `Σ_{l∈S} rates_l ≥ f_S - tol` for every nonempty `S`.
pub fn member(rs: &RegionSpec, rates: &[f64], tol: f64) -> bool {
    if rates.len() != rs.l {
        return false;
    }
    (1..1u32 << rs.l).all(|m| {
        let sum: f64 = (0..rs.l).filter(|&i| m >> i & 1 == 1).map(|i| rates[i]).sum();
        sum >= rs.get(Subset(m)) - tol
    })
}
