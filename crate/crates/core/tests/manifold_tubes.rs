use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

use proptest::prelude::*;
use waist_core::manifold::*;
use waist_core::tube::{cp_tube_fraction, spherical_tube_fraction};
use waist_core::waist::Status;

fn build(spec: ManifoldSpec) -> EmbeddedManifold {
    EmbeddedManifold::new(spec, 1).unwrap()
}

fn within(e: &TubeEstimate, exact: f64) -> bool {
    (e.estimate - exact).abs() <= SIGNIFICANCE * e.stderr
}

#[test]
fn great_circle_in_the_three_sphere_has_sin_squared_tube() {
    let m = build(ManifoldSpec::GreatSphere { n: 3, k: 1 });
    let e = tube_fraction_mc(&m, FRAC_PI_4, 400_000, 2).unwrap();
    assert!(within(&e, 0.5), "{e:?}");
    for e in tube_curve(&m, &[0.1, 0.5, 1.0, 1.5], 400_000, 3).unwrap() {
        assert!(within(&e, e.t.sin().powi(2)), "{e:?}");
        assert!((e.lower - e.t.sin().powi(2)).abs() < 1e-10);
    }
}

#[test]
fn clifford_torus_tube_is_sin_2t_and_beats_the_great_sphere() {
    let m = build(ManifoldSpec::CliffordTorus);
    for e in tube_curve(&m, &[0.1, 0.3, 0.6, FRAC_PI_4], 400_000, 4).unwrap() {
        assert!(within(&e, (2.0 * e.t).sin()), "{e:?}");
        assert!((e.lower - spherical_tube_fraction(3, 2, e.t).unwrap()).abs() < 1e-12);
        assert!(e.estimate + SIGNIFICANCE * e.stderr >= e.lower, "{e:?}");
    }
}

#[test]
fn projective_line_meets_both_bounds_with_equality() {
    let line = build(ManifoldSpec::line());
    assert_eq!(line.method, DistanceMethod::Analytic);
    let grid = [0.1, 0.3, 0.6, 1.0, 1.4];
    for c in degree_bound_check(&line, 1, &grid, 1_000_000, 5).unwrap() {
        let exact = 1.0 - c.estimate.t.cos().powi(4);
        assert!(within(&c.estimate, exact), "{c:?}");
        assert!((c.estimate.lower - exact).abs() < 1e-10);
        assert_eq!(c.status, Status::Satisfied);
    }
}

#[test]
fn conic_lies_between_one_and_two_lines() {
    let conic = build(ManifoldSpec::conic());
    assert_eq!(conic.degree, Some(2));
    let checks = degree_bound_check(&conic, 2, &[0.2, 0.4, 0.6], 100_000, 6).unwrap();
    for c in &checks {
        let line = cp_tube_fraction(2, 1, c.estimate.t).unwrap();
        assert!(c.lower_ok && c.upper_ok, "{c:?}");
        assert_eq!(c.status, Status::Satisfied);
        assert!(c.estimate.estimate > line, "{c:?}");
        assert_eq!(c.estimate.upper, Some((2.0 * line).min(1.0)));
    }
}

#[test]
fn fermat_quartic_stays_below_four_lines() {
    let quartic = build(ManifoldSpec::fermat(4));
    assert!(smoothness_probe(&quartic, 100, 2).unwrap() > 1e-3);
    let c = &degree_bound_check(&quartic, 4, &[0.3], 50_000, 7).unwrap()[0];
    let cap = (4.0 * (1.0 - 0.3f64.cos().powi(4))).min(1.0);
    assert!(c.estimate.estimate <= cap + SIGNIFICANCE * c.estimate.stderr + c.estimate.failure_fraction, "{c:?}");
    assert_eq!(c.status, Status::Satisfied);
}

#[test]
fn singular_curves_are_refused() {
    // z_0 z_1 z_2 is three lines meeting in points
    let triangle = Polynomial { terms: vec![Term { re: 1.0, im: 0.0, exponents: vec![1, 1, 1] }] };
    let m = build(ManifoldSpec::Projective { n: 2, polynomial: Some(triangle) });
    let min_grad = smoothness_probe(&m, 4000, 3).unwrap();
    assert!(min_grad < 0.05, "{min_grad}");
    // a nodal cubic z_1² z_2 = z_0²(z_0 + z_2) has one singular point, away from most samples
    let node = Polynomial {
        terms: vec![
            Term { re: 1.0, im: 0.0, exponents: vec![0, 2, 1] },
            Term { re: -1.0, im: 0.0, exponents: vec![3, 0, 0] },
            Term { re: -1.0, im: 0.0, exponents: vec![2, 0, 1] },
        ],
    };
    let m = build(ManifoldSpec::Projective { n: 2, polynomial: Some(node) });
    assert!(smoothness_probe(&m, 4000, 3).unwrap() < smoothness_probe(&build(ManifoldSpec::conic()), 4000, 3).unwrap());
}

#[test]
fn hopf_lift_preserves_tube_fractions() {
    for spec in [ManifoldSpec::line(), ManifoldSpec::conic()] {
        let base = build(spec);
        let rows = hopf_consistency(&base, &[0.2, 0.5, 0.9], 60_000, 8).unwrap();
        for r in &rows {
            assert!(r.agree, "{r:?}");
            assert_eq!(r.base.lower, r.lift.lower);
        }
    }
}

#[test]
fn crofton_count_recovers_the_degree() {
    for d in [1, 2, 3] {
        let m = build(ManifoldSpec::fermat(d));
        let r = crofton_degree_probe(&m, 2000, 9).unwrap();
        assert!((r.ratio - 1.0).abs() <= 0.05, "{r:?}");
        assert!((r.model_volume - d as f64 * PI).abs() < 1e-12);
    }
}

#[test]
fn equator_voronoi_cells_are_even_and_centered() {
    let m = build(ManifoldSpec::GreatSphere { n: 2, k: 1 });
    let r = voronoi_disintegration_probe(&m, 8, 400_000, 10).unwrap();
    for (p, s) in r.cell_mass.iter().zip(&r.cell_stderr) {
        assert!((p - 0.125).abs() <= 3.0 * s, "{r:?}");
    }
    assert!(r.all_central, "{r:?}");
    assert!(r.volume_critical);
    // reflection symmetry of every histogram
    for h in &r.histograms {
        let (a, b) = (h[0] as f64, h[2] as f64);
        assert!((a - b).abs() <= 3.0 * (a + b).sqrt(), "{h:?}");
    }
}

#[test]
fn small_circle_histogram_leans_toward_the_equator() {
    let m = build(ManifoldSpec::LatitudeCircle { colatitude: FRAC_PI_3 });
    assert!(!m.volume_critical);
    let r = voronoi_disintegration_probe(&m, 8, 400_000, 11).unwrap();
    assert!(r.mode_central.iter().all(|c| !c), "{r:?}");
    assert!(r.histograms.iter().all(|h| h[2] > h[1]));
}

#[test]
fn clifford_voronoi_modes_are_central() {
    let m = build(ManifoldSpec::CliffordTorus);
    let r = voronoi_disintegration_probe(&m, 6, 400_000, 12).unwrap();
    assert!(r.all_central, "{r:?}");
}

#[test]
fn lifted_quartic_is_circle_invariant() {
    let lift = hopf_lift(&build(ManifoldSpec::fermat(4))).unwrap();
    assert_eq!(lift.dim, 3);
    let p = circle_invariance_probe(&lift, 100, 13).unwrap();
    assert!(p.max_distance_change < 1e-8, "{p:?}");
    assert!(p.max_membership_residual < 1e-10, "{p:?}");
}

#[test]
fn tube_estimates_are_monotone_in_t() {
    let conic = build(ManifoldSpec::conic());
    let grid: Vec<f64> = (1..=12).map(|i| FRAC_PI_2 * i as f64 / 12.0).collect();
    let c = tube_curve(&conic, &grid, 20_000, 14).unwrap();
    assert!(c.windows(2).all(|w| w[0].estimate <= w[1].estimate));
    assert_eq!(c.last().unwrap().estimate, 1.0);
}

fn unit(v: &[f64]) -> Vec<f64> {
    let s = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conic_distance_respects_the_circle_action(v in prop::array::uniform6(-1.0f64..1.0), theta in 0.0f64..6.28) {
        prop_assume!(v.iter().map(|a| a * a).sum::<f64>() > 1e-2);
        let lift = hopf_lift(&build(ManifoldSpec::conic())).unwrap();
        let x = unit(&v);
        let a = lift.geodesic_distance_to(&x).unwrap();
        let b = lift.geodesic_distance_to(&rotate_phase(&x, theta)).unwrap();
        prop_assert!((a - b).abs() < 1e-8, "{} {}", a, b);
        prop_assert!((0.0..=FRAC_PI_2 + 1e-12).contains(&a));
    }

    #[test]
    fn points_on_a_variety_have_zero_distance(seed in 0u64..1000) {
        let m = build(ManifoldSpec::fermat(3));
        for p in m.sample_on(4, seed).unwrap() {
            prop_assert!(m.geodesic_distance_to(&p).unwrap() < 1e-8);
        }
    }

    #[test]
    fn searched_distance_never_beats_the_closed_form_on_charts(v in prop::array::uniform4(-1.0f64..1.0)) {
        prop_assume!(v.iter().map(|a| a * a).sum::<f64>() > 1e-2);
        let m = build(ManifoldSpec::CliffordTorus);
        let x = unit(&v);
        let exact = m.geodesic_distance_to(&x).unwrap();
        prop_assert!(m.chart_search_distance(&x).unwrap() >= exact - 1e-9);
    }
}
