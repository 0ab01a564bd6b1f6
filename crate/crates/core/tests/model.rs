mod common;

use common::*;
use gaussrd::model::*;
use gaussrd::symcore::{loewner_leq_default, Matrix, SymMatrix};
use proptest::prelude::*;
use rand::Rng;

/// `Σ_X - W A Σ_X` with the Wiener gain over encoders with `r > 0`.
fn wiener_error(p: &RemoteProblem, r: &[f64]) -> SymMatrix {
    let idx: Vec<usize> = (0..p.l()).filter(|&i| r[i] > 0.0).collect();
    let sx = p.sigma_x().matrix();
    if idx.is_empty() {
        return p.sigma_x().clone();
    }
    let a = Matrix::from_fn(idx.len(), p.k(), |i, j| p.a()[(idx[i], j)]);
    let mut cuu = &a * sx * a.transpose();
    for (i, &l) in idx.iter().enumerate() {
        let s2 = p.noise_vars()[l];
        cuu[(i, i)] += s2 + s2 / (2.0 * r[l]).exp_m1();
    }
    let gain = sx * a.transpose() * cuu.try_inverse().unwrap();
    SymMatrix::symmetrized(sx - gain * &a * sx)
}

#[test]
fn error_covariance_matches_wiener_filter() {
    let mut g = rng(21);
    for _ in 0..100 {
        let k = g.random_range(1..=3);
        let l = g.random_range(1..=4);
        let p = random_remote(&mut g, k, l);
        let r = random_rates(&mut g, l, 2.0);
        let got = error_covariance(&p, &r).unwrap();
        let want = wiener_error(&p, r.as_slice());
        assert!((got.matrix() - want.matrix()).amax() < 1e-10 * want.max_abs().max(1.0));
    }
}

#[test]
fn zero_rate_error_is_prior() {
    let mut g = rng(22);
    let p = random_remote(&mut g, 2, 3);
    let e = error_covariance(&p, &AuxRates::zeros(3)).unwrap();
    assert!((e.matrix() - p.sigma_x().matrix()).amax() < 1e-12);
}

#[test]
fn rejects_bad_rates() {
    assert!(AuxRates::new(vec![0.1, -0.2]).is_err());
    assert!(AuxRates::new(vec![f64::NAN]).is_err());
    let mut g = rng(23);
    let p = random_remote(&mut g, 2, 3);
    assert!(error_covariance(&p, &AuxRates::zeros(2)).is_err());
}

#[test]
fn split_reconstructs_observation_covariance() {
    let mut g = rng(24);
    for _ in 0..20 {
        let l = g.random_range(1..=4);
        let mp = random_multiterminal(&mut g, l);
        let back = mp.sigma_x().add(&mp.sigma_n());
        assert!((back.matrix() - mp.sigma_y().matrix()).amax() < 1e-12);
    }
}

#[test]
fn oversized_split_is_rejected() {
    let sy = SymMatrix::from_row_major(2, &[1.0, 0.9, 0.9, 1.0]).unwrap();
    assert!(MultiterminalProblem::new(sy, vec![0.5, 0.5], Matrix::identity(2, 2)).is_err());
}

#[test]
fn problem_file_round_trip() {
    let mut g = rng(25);
    let p = random_remote(&mut g, 2, 3);
    let text = serde_json::to_string(&json::RemoteProblemFile::from_problem(&p)).unwrap();
    match json::parse_problem(&text).unwrap() {
        json::Problem::Remote(q) => {
            assert_eq!(q.a(), p.a());
            assert_eq!(q.noise_vars(), p.noise_vars());
        }
        _ => panic!("parsed as the wrong kind"),
    }
    let err = json::parse_problem("{\n  \"k\": 1,\n  \"l\": 1,\n  \"sigma_x\": [1.0]\n  \"a\": [1]\n}").unwrap_err();
    assert_eq!(err.line, Some(5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn more_rate_means_less_error(seed in 0u64..10_000, l in 1usize..=4, bump in 0.0f64..1.0) {
        let mut g = rng(seed);
        let p = random_remote(&mut g, 2, l);
        let r = random_rates(&mut g, l, 2.0);
        let up = AuxRates::new(r.as_slice().iter().map(|x| x + bump).collect()).unwrap();
        let e0 = error_covariance(&p, &r).unwrap();
        let e1 = error_covariance(&p, &up).unwrap();
        prop_assert!(loewner_leq_default(&e1, &e0).unwrap());
        prop_assert!(loewner_leq_default(&e0, p.sigma_x()).unwrap());
    }

    #[test]
    fn precision_is_bounded_by_noise(noise in 0.1f64..5.0, r in 0.0f64..20.0) {
        let q = test_channel_precision(&[noise], &[r])[0];
        prop_assert!(q >= 0.0 && q <= 1.0 / noise);
    }
}
