use proptest::prelude::*;
use waist_core::convex::ConvexBody;
use waist_core::measures::MeasureSpec;
use waist_core::waist::*;

fn map(spec: MapSpec) -> TestMap {
    TestMap::new(spec).unwrap()
}

#[test]
fn atom_plus_sphere_is_a_counterexample() {
    let spec = MeasureSpec::atom_sphere(2, 0.5, 1.0);
    let f = map(MapSpec::Radius { n: 2 });
    let v = counterexample_certify(&spec, &f, &[0.5, 0.75, 0.95], &[vec![0.0], vec![1.0]], 1_000_000, 1).unwrap();
    assert_eq!(v.status, Status::Violated);
    let at_zero = v.witnesses.iter().find(|w| w.y == [0.0]).unwrap();
    assert_eq!(at_zero.t, 0.5);
    assert!((at_zero.closed_form_margin.unwrap() + 1.0 / 6.0).abs() < 1e-9, "{at_zero:?}");
    let at_one = v.witnesses.iter().find(|w| w.y == [1.0]).unwrap();
    assert!(at_one.margin < -SIGNIFICANCE * at_one.stderr, "{at_one:?}");
}

#[test]
fn ball_sector_map_beats_the_radial_bound() {
    let f = map(MapSpec::HalfPlaneSector { n: 3, k: 2, width: 0.01 });
    let v = counterexample_certify(&MeasureSpec::uniform_ball(3, 1.0), &f, &[0.25, 0.5, 0.75], &[vec![0.0, 0.0]], 1_000_000, 2).unwrap();
    assert_eq!(v.status, Status::Violated);
    let w = &v.witnesses[0];
    assert!(w.sigmas.unwrap() >= SIGNIFICANCE, "{w:?}");
}

#[test]
fn cone_corrected_map_beats_the_sphere_bound() {
    let f = map(MapSpec::ConeCorrected { n: 3, theta: 1.15 });
    let grid = [0.05, 0.1, 0.2, 0.3, 0.5];
    let v = counterexample_certify(&MeasureSpec::uniform_sphere(3, 1.0), &f, &grid, &[vec![1.0]], 1_000_000, 3).unwrap();
    assert_eq!(v.status, Status::Violated);
    assert!(v.margin_sigmas.unwrap() >= SIGNIFICANCE);
}

#[test]
fn coordinate_projection_is_not_a_counterexample() {
    let f = map(MapSpec::Coordinates { n: 3, indices: vec![2], sphere_radius: None });
    let v = counterexample_certify(&MeasureSpec::gaussian(vec![0.5, 1.0, 2.0]), &f, &[0.25, 0.5, 1.0], &[vec![0.0]], 200_000, 4).unwrap();
    assert_eq!(v.status, Status::Satisfied);
    assert!(v.witnesses.is_empty());
}

#[test]
fn equator_map_reproduces_sin_t() {
    let f = map(MapSpec::Coordinates { n: 3, indices: vec![2], sphere_radius: Some(1.0) });
    let c = waist_curve(&MeasureSpec::uniform_sphere(3, 1.0), &f, &[0.0], &[0.2, 0.5, 1.0, 1.4], 400_000, 5).unwrap();
    for (i, t) in c.t.iter().enumerate() {
        assert!((c.lhs[i] - t.sin()).abs() <= SIGNIFICANCE * c.lhs_stderr[i], "{c:?}");
        assert!((c.rhs[i] - t.sin()).abs() < 1e-10);
    }
}

#[test]
fn odd_cubic_on_the_sphere_keeps_the_bound() {
    let f = map(MapSpec::OddCubic { n: 3, eps: 0.1, sphere_radius: Some(1.0) });
    assert!(oddness_defect(&f, 1000, 1) < 1e-12);
    let c = waist_curve(&MeasureSpec::uniform_sphere(3, 1.0), &f, &[0.0], &[0.2, 0.5, 1.0], 100_000, 6).unwrap();
    for (m, se) in c.margin.iter().zip(&c.lhs_stderr) {
        assert!(*m >= -SIGNIFICANCE * se, "{c:?}");
    }
    assert!(c.failure_fraction <= 1e-3);
}

#[test]
fn cube_slab_achieves_equality() {
    let cube = ConvexBody::aligned_box(&[-1.0; 3], &[1.0; 3], 2.0).unwrap();
    let f = map(MapSpec::Coordinates { n: 3, indices: vec![0], sphere_radius: None });
    let c = norm_neighborhood_check(&cube, &BodyMeasure::Uniform, &f, &[0.2, 0.5, 0.8], 400_000, 7).unwrap();
    for (i, t) in c.t.iter().enumerate() {
        assert!((c.lhs[i] - t).abs() <= SIGNIFICANCE * c.lhs_stderr[i], "{c:?}");
        assert!((c.rhs[i] - t).abs() < 1e-12);
    }
}

#[test]
fn one_level_demo_equalizes_and_keeps_the_bound() {
    let f = map(MapSpec::SineShear { amp: 0.3 });
    let opts = DemoOptions { count: 200_000, ..DemoOptions::default() };
    let r = end_to_end_demo(&[1.0, 2.0], &f, 1, 6.0, &[0.25, 0.5, 1.0, 2.0], &opts).unwrap();
    assert!(r.converged && r.spread <= 1e-3, "{r:?}");
    assert_eq!(r.leaf_values.len(), 2);
    for m in &r.leaf_masses {
        assert!((m - 0.5).abs() < 1e-6, "{r:?}");
    }
    assert!(r.curve.margin.iter().all(|m| *m >= -0.01), "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linear_fibers_keep_the_gaussian_bound(raw in prop::collection::vec(0.3f64..3.0, 3), pick in 0usize..3) {
        let f = map(MapSpec::Coordinates { n: 3, indices: vec![pick], sphere_radius: None });
        let c = waist_curve(&MeasureSpec::gaussian(raw), &f, &[0.0], &[0.3, 0.8], 20_000, 8).unwrap();
        for (m, se) in c.margin.iter().zip(&c.lhs_stderr) {
            prop_assert!(*m >= -4.0 * se - 1e-12);
        }
    }

    #[test]
    fn tube_curves_grow_with_t(a in 0.05f64..0.6, b in 0.05f64..0.6) {
        let f = map(MapSpec::SineShear { amp: 0.3 });
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let c = waist_curve(&MeasureSpec::standard_gaussian(2), &f, &[0.1], &[lo, hi], 5_000, 9).unwrap();
        prop_assert!(c.lhs[0] <= c.lhs[1]);
        prop_assert!(c.rhs[0] <= c.rhs[1]);
    }
}
