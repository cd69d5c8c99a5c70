
use waist_core::convex::MassOracle;
use waist_core::measures::{Measure, MeasureSpec};
use waist_core::pancake::{build_partition, random_direction, random_round_polytope, subspace_sequence, verify_pancake, width_check};

fn disk() -> MassOracle {
    MassOracle::new(Measure::new(MeasureSpec::uniform_ball(2, 1.0)).unwrap(), 0).unwrap()
}

fn random_dirs(depth: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..(1usize << depth) - 1).map(|j| random_direction(2, seed, j as u64)).collect()
}

#[test]
fn depth_three_disk_masses() {
    let o = disk();
    let p = build_partition(&o, 1.0, 3, &random_dirs(3, 4), 1e-10).unwrap();
    assert_eq!(p.masses.len(), 8);
    assert!(p.mass_deviation() < 1e-6, "{}", p.mass_deviation());
}

#[test]
fn deficiency_shrinks_with_depth() {
    let o = disk();
    let frames = subspace_sequence(2, 1, 8, 0).unwrap();
    let p4 = build_partition(&o, 1.0, 4, &random_dirs(4, 21), 1e-10).unwrap();
    let r4 = verify_pancake(&o, &p4, 1, &frames, 1e-7).unwrap();
    let p8 = build_partition(&o, 1.0, 8, &random_dirs(8, 21), 1e-10).unwrap();
    let r8 = verify_pancake(&o, &p8, 1, &frames, 1e-7).unwrap();
    assert!(r8.max_delta < r4.max_delta);
}

#[test]
fn width_audit_on_round_polytopes() {
    let o = MassOracle::new(Measure::new(MeasureSpec::uniform_ball(2, 1.0)).unwrap(), 0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let body = random_round_polytope(2, 3 + (i as usize % 6), 77, i).unwrap();
        let u = random_direction(2, 78, i);
        for w in width_check(&o, &body, &u, 1.0, 1e-8).unwrap() {
            worst = worst.max(w.child_width / w.parent_width);
            assert!(w.bracket_ok);
            assert!(w.decrease_ok, "instance {i}: {w:?}");
        }
    }
    assert!(worst > 0.0);
}
