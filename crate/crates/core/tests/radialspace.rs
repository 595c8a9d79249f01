use std::f64::consts::PI;
use std::sync::Arc;

use hypvar::hypgeom::montecarlo_integral_dmu;
use hypvar::numerics::adaptive_simpson;
use hypvar::radial::GridMeta;
use hypvar::radial::{assemble_operators, dirichlet_energy, inner_product, lebesgue_norm, RadialFunction, RadialGrid};
use hypvar::testfn::build_plateau;
use proptest::prelude::*;

fn grid(dim: usize, cells: usize, r_max: f64) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::uniform(dim, cells, r_max, 6).unwrap())
}

/// `e^{-rho} (R - rho) / R` and its derivative.
fn tapered(r_max: f64) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    (move |s: f64| (-s).exp() * (r_max - s) / r_max, move |s: f64| -(-s).exp() * (r_max - s + 1.0) / r_max)
}

#[test]
fn quadrature_order_does_not_change_piecewise_linear_energy() {
    for dim in [3, 4, 5] {
        let g = grid(dim, 300, 8.0);
        let u = RadialFunction::sample(g.clone(), |s| (-1.5 * s).exp() * (3.0 * s).cos()).unwrap();
        let hi = Arc::new(g.with_quad_order(8).unwrap());
        let v = RadialFunction::new(hi, u.values().to_vec()).unwrap();
        let (a, b) = (dirichlet_energy(&u), dirichlet_energy(&v));
        assert!((a - b).abs() <= 1e-12 * a, "N = {dim}: {a} vs {b}");
    }
}

#[test]
fn refinement_converges_at_second_order() {
    let r_max = 8.0;
    let (u, du) = tapered(r_max);
    let omega = 4.0 * PI;
    let oracle = omega * adaptive_simpson(&|s: f64| du(s).powi(2) * s.sinh().powi(2), 0.0, r_max, 1e-13);
    let errs: Vec<f64> = [128, 256, 512, 1024]
        .iter()
        .map(|&m| (dirichlet_energy(&RadialFunction::sample(grid(3, m, r_max), &u).unwrap()) - oracle).abs())
        .collect();
    for pair in errs.windows(2) {
        assert!(pair[0] / pair[1] > 3.8, "errors {errs:?}");
    }
}

/// The tapered profile depends on `R_max` and its energy density tends to a
/// constant (`u'^2 sinh^2 -> 1/4`), so its energy grows with `R_max`. Kept
/// as written and ignored; see the decaying variant below.
#[test]
#[ignore = "tapered e^-rho profile has no sinh-weighted tail decay in N = 3"]
fn truncation_tapered_profile() {
    let e = |r_max: f64| dirichlet_energy(&RadialFunction::sample(grid(3, 2048, r_max), tapered(r_max).0).unwrap());
    let (a, b) = (e(8.0), e(12.0));
    assert!((a - b).abs() < 1e-5 * a, "{a} vs {b}");
}

#[test]
fn truncation_with_decaying_profile() {
    // e^{-3 rho}: u'^2 sinh^2 ~ e^{-4 rho}, so the tail beyond 8 is ~1e-14
    let e = |r_max: f64, cells: usize| {
        dirichlet_energy(&RadialFunction::sample(grid(3, cells, r_max), |s| (-3.0 * s).exp()).unwrap())
    };
    let (a, b) = (e(8.0, 2048), e(12.0, 3072));
    assert!((a - b).abs() < 1e-5 * a, "{a} vs {b}");
}

#[test]
fn plateau_l2_norm_matches_montecarlo() {
    let meta = GridMeta { dim: 3, cells: 1024, r_max: 6.0, quad_order: 6 };
    let w = build_plateau(2.0, 1.0, &meta).unwrap();
    let f = w.function().clone();
    let l2 = lebesgue_norm(&f, 2.0).unwrap();
    let cutoff = (1.5f64).tanh() + 1e-3;
    let mc = montecarlo_integral_dmu(|p| f.eval(p.geodesic_radius()).powi(2), 3, 400_000, cutoff, 4).unwrap();
    assert!(mc.agrees_with(l2 * l2, 3.0, 0.0), "{mc:?} vs {}", l2 * l2);
}

#[test]
fn matrices_symmetric_and_psd() {
    let g = grid(4, 60, 6.0);
    let w = |s: f64| (-s).exp();
    let (s, m) = assemble_operators(&g, Some(&w)).unwrap();
    for mat in [s.to_dense(), m.to_dense()] {
        let scale = mat.amax();
        assert!((mat.clone() - mat.transpose()).amax() <= 1e-13 * scale);
        let eig = nalgebra::SymmetricEigen::new(mat);
        assert!(eig.eigenvalues.min() >= -1e-10 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energy_is_quadratic_and_polarizes(
        a in prop::collection::vec(-2.0f64..2.0, 4),
        b in prop::collection::vec(-2.0f64..2.0, 4),
        t in -5.0f64..5.0,
    ) {
        let g = grid(4, 96, 6.0);
        let mk = |c: &[f64]| RadialFunction::sample(g.clone(), |s| {
            (-s).exp() * (c[0] + c[1] * s + c[2] * (2.0 * s).sin() + c[3] * (-s).exp())
        }).unwrap();
        let (u, v) = (mk(&a), mk(&b));
        let e = dirichlet_energy(&u);
        prop_assert!((dirichlet_energy(&u.scaled(t)) - t * t * e).abs() <= 1e-12 * e.max(1e-300) * t * t + 1e-300);
        let plus = dirichlet_energy(&u.axpy(1.0, &v).unwrap());
        let minus = dirichlet_energy(&u.axpy(-1.0, &v).unwrap());
        let ip = inner_product(&u, &v).unwrap();
        prop_assert!((ip - 0.25 * (plus - minus)).abs() <= 1e-10 * (plus + minus) + 1e-300);
        prop_assert!((ip - inner_product(&v, &u).unwrap()).abs() <= 1e-12 * (plus + minus) + 1e-300);
    }

    #[test]
    fn lebesgue_norm_is_homogeneous_and_monotone(nu in 2.0f64..4.0, t in -3.0f64..3.0, k in 0.1f64..3.0) {
        let g = grid(4, 96, 6.0);
        let u = RadialFunction::sample(g.clone(), |s| (-k * s).exp()).unwrap();
        let big = RadialFunction::sample(g, |s| 1.5 * (-k * s).exp()).unwrap();
        let n = lebesgue_norm(&u, nu).unwrap();
        prop_assert!((lebesgue_norm(&u.scaled(t), nu).unwrap() - t.abs() * n).abs() <= 1e-12 * n.max(1e-300));
        prop_assert!(lebesgue_norm(&big, nu).unwrap() >= n);
    }

    #[test]
    fn csv_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 2..40)) {
        let n = vals.len();
        let g = Arc::new(RadialGrid::uniform(3, n, 3.0, 4).unwrap());
        let mut v = vals.clone();
        v.push(0.0);
        let u = RadialFunction::new(g, v).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = RadialFunction::read_csv(&buf[..], 3, 4).unwrap();
        prop_assert_eq!(back.values(), u.values());
        prop_assert_eq!(back.grid().nodes(), u.grid().nodes());
    }
}
