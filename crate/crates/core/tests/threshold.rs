mod common;

use std::sync::Arc;

use common::coarse;
use hypvar::radial::{RadialFunction, RadialGrid};
use hypvar::threshold::{
    estimate_sobolev_constant, lambda_star_at, maximize_h, theta_majorant, theta_sample, SobolevOptions, C_Q_CAVEAT,
};
use proptest::prelude::*;

fn sobolev(dim: usize, cells: usize, nu: f64, seed: u64) -> f64 {
    let grid = Arc::new(RadialGrid::uniform(dim, cells, 10.0, 6).unwrap());
    let est = estimate_sobolev_constant(&grid, nu, &SobolevOptions { seed, ..SobolevOptions::default() }).unwrap();
    assert!(est.converged);
    est.value
}

#[test]
fn sobolev_estimate_grows_under_nested_refinement() {
    // uniform 512-cell functions are 1024-cell functions, so the maximum cannot drop
    let coarse = sobolev(4, 512, 3.0, 0);
    let fine = sobolev(4, 1024, 3.0, 0);
    assert!(coarse <= fine + 1e-10, "{coarse} > {fine}");
}

#[test]
fn sobolev_estimate_is_seed_independent() {
    let values: Vec<f64> = (0..3).map(|s| sobolev(3, 2048, 4.0, s)).collect();
    for v in &values {
        assert!((v - values[0]).abs() <= 1e-4 * values[0], "{values:?}");
    }
}

#[test]
fn sobolev_estimate_rejects_endpoints() {
    let grid = Arc::new(RadialGrid::uniform(4, 64, 10.0, 6).unwrap());
    for nu in [2.0, 4.0, 5.0, 1.5] {
        assert!(estimate_sobolev_constant(&grid, nu, &SobolevOptions::default()).is_err(), "nu = {nu}");
    }
}

#[test]
fn report_carries_caveat_and_consistent_maximum() {
    let (_, th) = coarse();
    assert_eq!(th.c_q_caveat, C_Q_CAVEAT);
    assert!(th.c_q_converged);
    let hm = maximize_h(th.q, th.norm_p, th.norm_inf, th.c_q_estimate).unwrap();
    assert_eq!(hm.omega_star, th.omega_star);
    assert!((hm.golden_omega_star / hm.omega_star - 1.0).abs() <= 1e-8);
    assert!((th.lambda_star - th.q * th.h_max / (th.alpha_f * th.c_q_estimate)).abs() <= 1e-12 * th.lambda_star);
    // lambda*(omega) peaks at omega*
    for f in [0.5, 0.9, 1.1, 2.0] {
        assert!(th.lambda_star_at(f * th.omega_star).unwrap() < th.lambda_star);
    }
}

#[test]
fn zero_is_a_sublevel_witness() {
    let (p, th) = coarse();
    let zero = RadialFunction::zero(p.grid().clone());
    let r = th.omega_star * th.omega_star;
    let at_zero = p.psi(&zero).unwrap() / r;
    let sample = theta_sample(p, r, 8, 3).unwrap();
    assert_eq!(at_zero, 0.0);
    assert!(at_zero <= sample.value);
}

#[test]
fn best_psi_grows_with_the_sublevel() {
    let (p, _) = coarse();
    let psis: Vec<f64> =
        [0.25, 1.0, 4.0, 16.0, 64.0].iter().map(|&r| theta_sample(p, r, 8, 9).unwrap().best_psi).collect();
    for w in psis.windows(2) {
        assert!(w[1] > w[0], "{psis:?}");
        // Psi(tu) = t^{3/2} Psi(u) and the radius doubles, so the supremum scales by 4^{3/4}
        assert!((w[1] / w[0] / 4f64.powf(0.75) - 1.0).abs() < 1e-3, "{psis:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sampled_theta_stays_below_majorant_and_inverse_lambda(log_w in -1.0f64..1.5, frac in 0.001f64..0.999999) {
        let (p, th) = coarse();
        let w = 10f64.powf(log_w);
        let (af, c, np, ni, q) = (th.alpha_f, th.c_q_estimate, th.norm_p, th.norm_inf, th.q);
        let lambda = frac * lambda_star_at(w, q, af, c, np, ni).unwrap();
        let sample = theta_sample(p, w * w, 6, 17).unwrap().value;
        let maj = theta_majorant(w * w, af, c, np, ni, q);
        prop_assert!(sample <= maj, "{} > {}", sample, maj);
        prop_assert!(maj < 1.0 / lambda);
    }

    #[test]
    fn majorant_identity(log_w in -3.0f64..3.0) {
        let (_, th) = coarse();
        let w = 10f64.powf(log_w);
        prop_assert!((th.lambda_star_at(w).unwrap() * th.theta_majorant(w * w) - 1.0).abs() <= 1e-12);
    }
}
