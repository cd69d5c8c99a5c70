use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use rand::Rng;
use waist_core::rng;
use waist_core::tube::*;

#[test]
fn planar_gaussian_sphere_and_projective_line() {
    for t in t_grid(0.0, 3.0, 64) {
        let g = gaussian_subspace_tube(&[1.0, 1.0], t).unwrap();
        assert!((g - (1.0 - (-t * t).exp())).abs() <= 1e-8, "{t}");
    }
    for t in t_grid(0.0, FRAC_PI_2, 64) {
        let s = spherical_tube_fraction(2, 1, t).unwrap();
        assert!((s - t.sin()).abs() <= 1e-10, "{t}");
        let c = cp_tube_fraction(2, 1, t).unwrap();
        assert!((c - (1.0 - t.cos().powi(4))).abs() <= 1e-10, "{t}");
    }
}

#[test]
fn query_dispatches_on_the_ambient() {
    let q = TubeQuery { ambient: Ambient::Sphere(2), core_dim: 1, t: 0.4, gaussian_scales: None };
    assert!((q.evaluate().unwrap() - 0.4f64.sin()).abs() < 1e-12);
    let q: TubeQuery = serde_json::from_str(r#"{"ambient":{"euclidean":3},"core_dim":1,"t":0.5,"gaussian_scales":[1.0,1.0]}"#).unwrap();
    assert!((q.evaluate().unwrap() - (1.0 - (-0.25f64).exp())).abs() < 1e-12);
    let bad = TubeQuery { ambient: Ambient::Euclidean(3), core_dim: 1, t: 0.5, gaussian_scales: Some(vec![1.0]) };
    assert!(bad.evaluate().is_err());
}

#[test]
fn smallest_scales_give_the_thinnest_tube() {
    let mut r = rng::aux_stream(2024, 0x7b);
    let grid = t_grid(0.1, 3.0, 16);
    for _ in 0..100 {
        let n = r.random_range(2..=6);
        let k = r.random_range(1..=3.min(n));
        let mut scales: Vec<f64> = (0..n).map(|_| 0.05 + 3.0 * r.random::<f64>()).collect();
        scales.sort_by(f64::total_cmp);
        for &t in &grid {
            let gap = subset_tube_gap(&scales, k, t).unwrap();
            assert!(gap >= 0.0, "{scales:?} k={k} t={t} gap={gap}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tube_fractions_stay_in_the_unit_interval(t in 0.0f64..4.0, n in 2usize..7, k in 0usize..6) {
        prop_assume!(k < n);
        let s = spherical_tube_fraction(n, k, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        if t >= FRAC_PI_2 {
            prop_assert_eq!(s, 1.0);
        }
        let c = cp_tube_fraction(n, k, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn a_larger_core_has_a_thicker_tube(t in 0.01f64..1.5, n in 3usize..7, k in 0usize..4) {
        prop_assume!(k + 1 < n);
        let a = spherical_tube_fraction(n, k, t).unwrap();
        let b = spherical_tube_fraction(n, k + 1, t).unwrap();
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn subset_gap_is_nonnegative(raw in prop::collection::vec(0.1f64..4.0, 2..6), k in 1usize..4, t in 0.05f64..3.0) {
        prop_assume!(k <= raw.len());
        prop_assert!(subset_tube_gap(&raw, k, t).unwrap() >= 0.0);
    }
}
