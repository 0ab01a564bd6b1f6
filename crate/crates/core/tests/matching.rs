mod common;

use common::*;
use gaussrd::matching::*;
use gaussrd::model::RemoteProblem;
use gaussrd::symcore::{Matrix, SymMatrix};
use proptest::prelude::*;
use rand::Rng;

/// `Υ_l` from `â_l` and `C*` directly: with `u = â_lᵀ/‖â_l‖`,
/// `χ = uᵀC*u` and the off-axis mass is `‖C*u‖² - χ²`.
fn upsilon_oracle(p: &RemoteProblem, l: usize) -> f64 {
    let ginv = p.gamma_inv();
    let m = p.sigma_x_inv().matrix() + p.a().transpose() * Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
        p.l(),
        p.noise_vars().iter().map(|s| 1.0 / s),
    )) * p.a();
    let c = ginv.transpose() * m * ginv;
    let amax = SymMatrix::symmetrized(c.clone()).max_eigenvalue();
    let a_hat = (p.a() * ginv).row(l).transpose();
    let u = &a_hat / a_hat.norm();
    let cu = &c * &u;
    let chi = u.dot(&cu);
    let off = cu.norm_squared() - chi * chi;
    (1.0 + off / (amax * amax)) / (chi - off / amax)
}

#[test]
fn upsilon_matches_direct_formula() {
    let mut g = rng(51);
    for _ in 0..60 {
        let k = g.random_range(1..=3);
        let l = g.random_range(1..=4);
        let p = random_remote(&mut g, k, l);
        for i in 0..l {
            let est = upsilon(&p, i, 0, 0).unwrap();
            let want = upsilon_oracle(&p, i);
            assert!(close(est.value, want, 1e-9), "{} vs {want}", est.value);
        }
    }
}

#[test]
fn random_rotations_do_not_change_upsilon() {
    let mut g = rng(52);
    for _ in 0..10 {
        let p = random_remote(&mut g, 3, 3);
        let base = upsilon(&p, 0, 0, 0).unwrap();
        let refined = upsilon(&p, 0, 200, 7).unwrap();
        assert!(refined.value >= base.value);
        assert!(close(refined.value, base.canonical, 1e-9));
    }
}

#[test]
fn upsilon_respects_spectral_floor() {
    let mut g = rng(53);
    for _ in 0..40 {
        let (k, l) = (g.random_range(1..=3), g.random_range(1..=3));
        let p = random_remote(&mut g, k, l);
        let amax = spectrum_limits(&p).alpha_max_star;
        for i in 0..p.l() {
            assert!(upsilon(&p, i, 0, 0).unwrap().value >= 1.0 / amax - 1e-12);
        }
        let t6 = threshold_thm6(&p, 0, 0).unwrap();
        assert!(t6.full.unwrap() >= t6.simplified - 1e-12);
    }
}

#[test]
fn scan_holds_below_thresholds() {
    let mut g = rng(54);
    for _ in 0..8 {
        let k = g.random_range(1..=2);
        let l = g.random_range(1..=3);
        let p = random_remote(&mut g, k, l);
        let t = threshold_thm6(&p, 0, 0).unwrap().simplified.max(threshold_thm7(&p).unwrap().value);
        let floor = gaussrd::model::conditional_covariance(&p).unwrap().congruence(p.gamma()).trace();
        let d = 0.9 * t;
        if d <= floor {
            continue;
        }
        let scan = md_scan(&p, d, 5, DEFAULT_SCAN_RMAX).unwrap();
        assert!(scan.holds, "violation {}", scan.worst_violation);
    }
}

#[test]
fn scan_flags_large_distortion_on_anisotropic_instance() {
    let sx = SymMatrix::from_diagonal(&[4.0, 0.05]);
    let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let p = RemoteProblem::new(sx, a, vec![0.05, 2.0], Matrix::identity(2, 2)).unwrap();
    let scan = md_scan(&p, 3.5, 12, 6.0).unwrap();
    let t7 = threshold_thm7(&p).unwrap().value;
    assert!(3.5 > t7);
    assert!(scan.points_in_region > 0);
    assert!(scan.worst_violation >= 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn thm7_exceeds_k_over_alpha(seed in 0u64..10_000) {
        let mut g = rng(seed);
        let p = random_remote(&mut g, 2, 3);
        let t = threshold_thm7(&p).unwrap();
        let amax = spectrum_limits(&p).alpha_max_star;
        prop_assert!(t.value >= 2.0 / amax);
        prop_assert!(t.tau_star > 0.0);
    }
}
