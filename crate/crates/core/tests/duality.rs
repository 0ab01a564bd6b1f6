mod common;

use common::*;
use gaussrd::duality::*;
use gaussrd::model::{error_covariance, AuxRates, DistortionCriterion};
use gaussrd::regions::{member, rate_bound, region_spec, BoundMode, Subset};
use rand::Rng;

#[test]
fn inner_bounds_agree_across_transform() {
    let mut g = rng(61);
    for _ in 0..50 {
        let l = g.random_range(1..=3);
        let mp = random_multiterminal(&mut g, l);
        let data = tilde_transform(&mp).unwrap();
        let rp = remote_problem(&mp, &data).unwrap();
        let r = random_rates(&mut g, l, 2.0);
        for m in 1..1u32 << l {
            let a = mt_rate_bound(&mp, &r, Subset(m), BoundMode::Inner).unwrap();
            let b = rate_bound(&rp, &r, Subset(m), BoundMode::Inner).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn outer_bounds_agree_with_scaled_theta() {
    let mut g = rng(62);
    for _ in 0..50 {
        let l = g.random_range(1..=3);
        let mp = random_multiterminal(&mut g, l);
        let data = tilde_transform(&mp).unwrap();
        let rp = remote_problem(&mp, &data).unwrap();
        let r = random_rates(&mut g, l, 2.0);
        let sd = mt_error_covariance(&mp, &r).unwrap().add(&random_spd(&mut g, l, 0.0).scale(0.05));
        let theta = sd.add(&data.b_mat).det();
        let theta_remote = theta * data.a_tilde_det().powi(2);
        for m in 1..1u32 << l {
            let a = mt_rate_bound(&mp, &r, Subset(m), BoundMode::Outer { theta }).unwrap();
            let b = rate_bound(&rp, &r, Subset(m), BoundMode::Outer { theta: theta_remote }).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

/// `Ã (Σ_{Y|U} + B) Ãᵀ` is the remote error covariance `Σ_{X|U}`.
#[test]
fn error_covariances_correspond() {
    let mut g = rng(63);
    for _ in 0..50 {
        let l = g.random_range(1..=4);
        let mp = random_multiterminal(&mut g, l);
        let t = to_remote(&mp, &DistortionCriterion::Sum(1.0)).unwrap();
        let r = random_rates(&mut g, l, 2.0);
        let mapped = mt_error_covariance(&mp, &r).unwrap().add(&t.data.b_mat).congruence(&t.data.a_tilde);
        let remote = error_covariance(&t.problem, &r).unwrap();
        assert!((mapped.matrix() - remote.matrix()).amax() < 1e-10 * remote.max_abs().max(1.0));
    }
}

#[test]
fn criteria_shift_by_b() {
    let mut g = rng(64);
    let mp = random_multiterminal(&mut g, 3);
    let d = vec![0.3, 0.4, 0.5];
    let t = to_remote(&mp, &DistortionCriterion::Vector(d.clone())).unwrap();
    match t.criterion {
        DistortionCriterion::Vector(v) => {
            for i in 0..3 {
                assert!((v[i] - d[i] - t.data.b_mat.get(i, i)).abs() < 1e-14);
            }
        }
        _ => panic!("criterion kind changed"),
    }
}

#[test]
fn membership_agrees_across_transform() {
    let mut g = rng(65);
    for _ in 0..20 {
        let l = g.random_range(1..=3);
        let mp = random_multiterminal(&mut g, l);
        let data = tilde_transform(&mp).unwrap();
        let rp = remote_problem(&mp, &data).unwrap();
        let r = random_rates(&mut g, l, 1.5);
        let a = mt_region_spec(&mp, &r, BoundMode::Inner).unwrap();
        let b = region_spec(&rp, &r, BoundMode::Inner).unwrap();
        for _ in 0..50 {
            let rates: Vec<f64> = (0..l).map(|_| g.random_range(0.0..3.0)).collect();
            assert_eq!(member(&a, &rates, 0.0), member(&b, &rates, 0.0));
        }
    }
}

#[test]
fn singular_split_is_reported() {
    let mp = random_multiterminal(&mut rng(66), 2);
    assert!(mp.with_split(vec![10.0, 10.0]).is_err());
    let r = AuxRates::zeros(2);
    assert_eq!(mt_rate_bound(&mp, &r, Subset(1), BoundMode::Inner).unwrap(), 0.0);
}
