use nalgebra::DMatrix;
use rand::Rng;
use waist_core::convex::ConvexBody;
use waist_core::numeric::special::{normal_cdf, normal_quantile};
use waist_core::rng;
use waist_core::transport::*;

fn slab() -> ConvexBody {
    ConvexBody::new(2, 12.0, vec![(vec![1.0, 0.0], 1.0), (vec![-1.0, 0.0], 1.0)]).unwrap()
}

/// First coordinate of the exact map from the standard Gaussian onto the
/// slab `|x1| ≤ hi` (lower edge `-1`).
fn slab_exact(x: f64, hi: f64) -> f64 {
    let (a, b) = (normal_cdf(-1.0), normal_cdf(hi));
    normal_quantile(a + normal_cdf(x) * (b - a))
}

#[test]
fn half_line_center() {
    let body = ConvexBody::new(1, 12.0, vec![(vec![1.0], 0.0)]).unwrap();
    let map = solve_monotone_transport(&[0.5], &body, &TransportOptions::default()).unwrap();
    assert!((map.center()[0] + 0.67449).abs() <= 1e-3);
    let moved = solve_monotone_transport(&[0.5], &body, &TransportOptions { shift: Some(vec![0.4]), ..Default::default() }).unwrap();
    assert!((moved.center()[0] - map.center()[0] - 0.4).abs() < 1e-12);
    let audit = lipschitz_audit(&map, 100_000, 1).unwrap();
    assert!(audit.max_ratio <= 1.0 + 1e-9 && audit.min_monotone >= -1e-9, "{audit:?}");
}

#[test]
fn slab_grid_solve_at_full_resolution() {
    let opts = TransportOptions { resolution: 128, force_grid: true, ..Default::default() };
    let map = solve_monotone_transport(&[0.5, 0.5], &slab(), &opts).unwrap();
    assert_eq!(map.diagnostics.solver, SolverKind::Grid);
    assert!(map.diagnostics.discrepancy <= 0.02, "{:?}", map.diagnostics);
    let audit = lipschitz_audit(&map, 100_000, 2).unwrap();
    assert!(audit.max_ratio <= 1.02, "{audit:?}");
    assert!(audit.min_monotone >= -1e-9, "{audit:?}");
    let resid = ma_residual(&map, &test_points(2, 2.0, 41)).unwrap();
    assert!(resid.mean_abs <= 0.05, "{resid:?}");
    for x in test_points(2, 2.0, 9) {
        let y = map.evaluate(&x);
        assert!((y[0] - slab_exact(x[0], 1.0)).abs() < 0.01, "{x:?} {y:?}");
        assert!((y[1] - x[1]).abs() < 0.01, "{x:?} {y:?}");
    }
}

#[test]
fn symmetric_body_has_centered_map() {
    let s = 3f64.sqrt() / 2.0;
    let hex = ConvexBody::new(
        2,
        12.0,
        vec![(vec![1.0, 0.0], 1.0), (vec![-1.0, 0.0], 1.0), (vec![0.5, s], 1.2), (vec![-0.5, -s], 1.2), (vec![-0.5, s], 0.9), (vec![0.5, -s], 0.9)],
    )
    .unwrap();
    let opts = TransportOptions { resolution: 64, ..Default::default() };
    let c = solve_monotone_transport(&[0.5, 1.5], &hex, &opts).unwrap().center();
    assert!(c[0].abs() < 1e-9 && c[1].abs() < 1e-9, "{c:?}");
}

#[test]
fn shifting_the_target_shifts_the_map() {
    let tri = ConvexBody::new(2, 12.0, vec![(vec![1.0, 0.3], 0.4), (vec![-0.5, 1.0], 0.7), (vec![-0.2, -1.0], 1.1)]).unwrap();
    let v = [0.3, -0.2];
    let opts = TransportOptions { resolution: 64, ..Default::default() };
    let base = solve_monotone_transport(&[0.5, 1.0], &tri, &opts).unwrap();
    let shifted = solve_monotone_transport(&[0.5, 1.0], &tri, &TransportOptions { shift: Some(v.to_vec()), ..opts }).unwrap();
    for x in test_points(2, 1.5, 7) {
        let (a, c) = (base.evaluate(&x), shifted.evaluate(&x));
        for d in 0..2 {
            assert!((c[d] - a[d] - v[d]).abs() < 1e-12, "{x:?} {a:?} {c:?}");
        }
        let gap = shifted.potential(&x) - base.potential(&x) - (v[0] * x[0] + v[1] * x[1]);
        assert!(gap.abs() < 1e-12);
    }
}

#[test]
fn slab_center_stability_shrinks_with_the_perturbation() {
    let opts = TransportOptions { resolution: 64, force_grid: true, ..Default::default() };
    let mut last = f64::INFINITY;
    for eps in [0.1, 0.05, 0.025] {
        let d = center_stability(&[0.5, 0.5], &slab(), eps, &[1.0, 0.0], &opts).unwrap();
        let exact = (slab_exact(0.0, 1.0 + eps) - slab_exact(0.0, 1.0)).abs();
        assert!(d < last, "{eps} {d} {last}");
        assert!((d - exact).abs() < 0.25 * exact, "{eps} {d} {exact}");
        last = d;
    }
}

#[test]
fn logdet_expansion_on_random_instances() {
    let mut r = rng::aux_stream(11, 0x3d);
    for _ in 0..100 {
        let mut m = || DMatrix::from_fn(3, 3, |_, _| r.random::<f64>() * 2.0 - 1.0);
        let g = m();
        let d0 = &g * g.transpose() + DMatrix::identity(3, 3);
        let (d1, d2) = (m(), m());
        let c = logdet_expansion_check(&d0, &d1, &d2).unwrap();
        assert!((c.fd_coeff - c.formula_coeff).abs() <= 1e-6, "{c:?}");
        assert!(c.invariant_gap <= 1e-12);
    }
}
