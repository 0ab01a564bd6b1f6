mod common;

use common::*;
use gaussrd::duality::{mt_channel_precision, tilde_transform, to_remote};
use gaussrd::matching::{md_scan, DEFAULT_SCAN_RMAX};
use gaussrd::model::{DistortionCriterion, MultiterminalProblem};
use gaussrd::multiterminal::*;
use gaussrd::symcore::{loewner_leq, Matrix, SymMatrix};
use rand::Rng;

fn opts() -> SumRateOptions {
    SumRateOptions { starts: 4, ..Default::default() }
}

#[test]
fn upper_matches_closed_form_inside_d_set() {
    let mut g = rng(71);
    for _ in 0..10 {
        let (s1, s2, rho) = (g.random_range(0.5..2.0), g.random_range(0.5..2.0), g.random_range(0.0..0.9));
        let (d1, d2) = random_d_set(&mut g, s1, s2, rho);
        let cf = twoterm_sum_rate(s1, s2, rho, d1, d2).unwrap();
        assert!(cf.in_d);
        let up = sum_rate_upper(&two_terminal(s1, s2, rho, 0.5), &[d1, d2], &opts()).unwrap();
        assert!((up.value - cf.value).abs() < 1e-4, "{} vs {}", up.value, cf.value);
    }
}

/// The reported precision reproduces the value through `½ log|I + Σ_Y Q|`
/// and meets the distortion caps.
#[test]
fn upper_certificate_reproduces_value() {
    let mut g = rng(72);
    for _ in 0..6 {
        let l = g.random_range(2..=3);
        let mp = random_multiterminal(&mut g, l);
        let d: Vec<f64> = mp.sigma_y().diagonal().iter().map(|v| v * g.random_range(0.1..0.6)).collect();
        let up = sum_rate_upper(&mp, &d, &opts()).unwrap();
        let iq = mp.sigma_y().matrix() * Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&up.q))
            + Matrix::identity(l, l);
        assert!((0.5 * iq.determinant().ln() - up.value).abs() < 1e-9);
        assert!(up.achieved.iter().zip(&d).all(|(a, b)| *a <= b + 1e-9));
        let q = mt_channel_precision(mp.split(), up.r.as_slice());
        assert!(q.iter().zip(&up.q).all(|(a, b)| close(*a, *b, 1e-9)));
    }
}

#[test]
fn upper_is_monotone_in_each_cap() {
    let mut g = rng(73);
    let mp = random_multiterminal(&mut g, 2);
    let base: Vec<f64> = mp.sigma_y().diagonal().iter().map(|v| 0.2 * v).collect();
    let v0 = sum_rate_upper(&mp, &base, &opts()).unwrap().value;
    for i in 0..2 {
        let mut d = base.clone();
        d[i] *= 1.5;
        assert!(sum_rate_upper(&mp, &d, &opts()).unwrap().value <= v0 + 1e-9);
    }
}

#[test]
fn lower_is_below_upper_and_certified() {
    let mut g = rng(74);
    for _ in 0..8 {
        let l = g.random_range(2..=3);
        let mp = random_multiterminal(&mut g, l);
        let d: Vec<f64> = mp.sigma_y().diagonal().iter().map(|v| v * g.random_range(0.1..0.6)).collect();
        let b = sum_rate_bounds(&mp, &d, &opts()).unwrap();
        assert!(b.lower <= b.upper + 1e-9, "{} > {}", b.lower, b.upper);
        assert!((b.gap - (b.upper - b.lower)).abs() < 1e-15);
        // Re-evaluate the lower objective from its arguments.
        let data = tilde_transform(&mp).unwrap();
        let sd = &b.argmin_sigma_lower;
        let floor = mp
            .sigma_y()
            .inverse()
            .unwrap()
            .add_diagonal(&mt_channel_precision(mp.split(), b.argmin_r_lower.as_slice()))
            .inverse()
            .unwrap();
        assert!(loewner_leq(&floor, sd, 1e-7).unwrap());
        assert!(sd.diagonal().iter().zip(&d).all(|(a, c)| *a <= c + 1e-9));
        let value = 0.5 * (mp.sigma_y().add(&data.b_mat).logdet().unwrap() - sd.add(&data.b_mat).logdet().unwrap())
            + b.argmin_r_lower.as_slice().iter().sum::<f64>();
        assert!((value.max(0.0) - b.lower).abs() < 1e-7, "{value} vs {}", b.lower);
    }
}

#[test]
fn nested_and_convex_lower_agree() {
    let mut g = rng(75);
    for _ in 0..3 {
        let mp = random_multiterminal(&mut g, 2);
        let d: Vec<f64> = mp.sigma_y().diagonal().iter().map(|v| v * g.random_range(0.15..0.5)).collect();
        let a = sum_rate_lower_nested(&mp, &d, &SumRateOptions { starts: 2, ..Default::default() }).unwrap();
        let b = sum_rate_lower_convex(&mp, &d).unwrap();
        assert!((a.value - b.value).abs() < 1e-5, "{} vs {}", a.value, b.value);
    }
}

#[test]
fn independent_sources_collapse() {
    let sy = SymMatrix::from_diagonal(&[1.5, 0.8]);
    let mp = MultiterminalProblem::new(sy, vec![0.4, 0.3], Matrix::identity(2, 2)).unwrap();
    let d = [0.2, 0.5];
    let want = 0.5 * (1.5f64 / 0.2).ln() + 0.5 * (0.8f64 / 0.5).ln();
    let b = sum_rate_bounds(&mp, &d, &opts()).unwrap();
    assert!((b.upper - want).abs() < 1e-9 && (b.lower - want).abs() < 1e-7);
}

#[test]
fn infeasible_caps_are_rejected() {
    let mp = random_multiterminal(&mut rng(76), 2);
    assert!(sum_rate_upper(&mp, &[0.0, 1.0], &opts()).is_err());
    assert!(sum_rate_lower(&mp, &[0.1], &opts()).is_err());
}

#[test]
fn closed_form_is_continuous_at_zero_correlation() {
    let a = twoterm_sum_rate(1.2, 0.7, 1e-4, 0.3, 0.2).unwrap().value;
    let b = twoterm_sum_rate(1.2, 0.7, 0.0, 0.3, 0.2).unwrap().value;
    assert!((a - b).abs() < 1e-3);
}

#[test]
fn thm12_threshold_gives_md_on_transformed_problem() {
    let mut g = rng(77);
    let mut tested = 0;
    for _ in 0..30 {
        let mp = random_multiterminal(&mut g, 2);
        let t = threshold_thm12(&mp).unwrap();
        if t <= 0.0 {
            continue;
        }
        let d = 0.9 * t;
        let tr = to_remote(&mp, &DistortionCriterion::Sum(d)).unwrap();
        let DistortionCriterion::Sum(dr) = tr.criterion else { unreachable!() };
        let scan = md_scan(&tr.problem, dr, 6, DEFAULT_SCAN_RMAX).unwrap();
        assert!(scan.holds, "violation {}", scan.worst_violation);
        tested += 1;
    }
    assert!(tested > 0);
}

#[test]
fn cor4_limits() {
    let sy = SymMatrix::from_row_major(3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5]).unwrap();
    let z = zeta(&sy);
    let far = threshold_cor4(&sy, &[1e9, 1.0, 1.0]).unwrap();
    assert!(close(far, z, 1e-9));
    assert!(threshold_cor4(&sy, &[1.0, 1.0, 1.0]).unwrap() > z);
}

#[test]
fn boundary_rows_are_ordered() {
    let mut g = rng(78);
    let mp = random_multiterminal(&mut g, 2);
    let grid = vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![3.0, 1.5]];
    let rows = boundary_batch(&mp, &[0.8, 1.1], &grid).unwrap();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert!(row.d_lower <= row.d_upper * (1.0 + 1e-9));
        assert!(row.d_lower > 0.0);
    }
    let big = boundary_batch(&mp, &[12.0, 12.0], &grid[..1]).unwrap();
    assert!(big[0].d_upper < 1e-6 && big[0].certified);
    assert!(matches!(boundary_batch(&mp, &[1.0, 1.0], &[vec![0.5, 1.0]]), Err(gaussrd::Error::InvalidWeights)));
}

#[test]
fn region_curve_tradeoff() {
    let c = twoterm_region_curve(1.3, 0.9, 0.6, 0.4, 2, 50).unwrap();
    assert_eq!(c.len(), 50);
    assert!(c.windows(2).all(|w| w[1].1 >= w[0].1 && w[1].0 <= w[0].0));
    assert!(c.last().unwrap().0.abs() < 1e-15);
}

/// A fixed split leaves the lower program loose at high distortion; the
/// best split closes the gap to the exact sum rate.
#[test]
fn best_split_closes_fixed_split_gap() {
    let (s1, s2, rho) = (0.802f64, 1.573f64, 0.57);
    let mp = two_terminal(s1, s2, rho, 0.5);
    let d = [0.827 * s1 * s1, 0.877 * s2 * s2];
    let exact = twoterm_sum_rate(s1, s2, rho, d[0], d[1]).unwrap();
    assert!(exact.in_d);
    let fixed = sum_rate_lower(&mp, &d, &opts()).unwrap().value;
    assert!(fixed < exact.value - 1e-2);
    let best = best_split_lower(mp.sigma_y(), mp.gamma(), &d, 4).unwrap();
    assert!((best.lower.value - exact.value).abs() < 1e-6, "{} vs {}", best.lower.value, exact.value);
}
